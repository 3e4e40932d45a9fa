"""Discrete-time signal temporal logic: syntax, parsing and semantics."""
from .formula import (
    And,
    Finally,
    Formula,
    FormulaError,
    Globally,
    Not,
    Or,
    Predicate,
    Until,
    depth,
    dimension,
    horizon,
    split_top_level,
    to_string,
    variable_names,
    walk,
    window_length,
)
from .parser import (
    FormulaDimensionError,
    FormulaSyntaxError,
    parse,
    parse_bindings,
    parse_document,
)
from .semantics import (
    predicate_bounds,
    robustness,
    robustness_bounds,
    robustness_trace,
    satisfaction_trace,
    satisfies,
)
from .signal import Signal, WindowError

__all__ = [
    "And", "Finally", "Formula", "FormulaError", "Globally", "Not", "Or", "Predicate", "Until",
    "depth", "dimension", "horizon", "split_top_level", "to_string", "variable_names", "walk",
    "window_length", "FormulaDimensionError", "FormulaSyntaxError", "parse", "parse_bindings",
    "parse_document", "predicate_bounds", "robustness", "robustness_bounds", "robustness_trace",
    "satisfaction_trace", "satisfies", "Signal", "WindowError",
]
