"""Reinforcement learning of STL-satisfying policies over tau-history MDPs."""

__version__ = "0.1.0"
