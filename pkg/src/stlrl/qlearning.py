"""Batch Q-learning over tau-MDPs for probability and robustness objectives.

Q is a dense array ``Q[state, action, time_to_go]``. An episode is replayed
backwards once it has finished; the target for step ``n`` combines the local
reward of the window ending at ``n`` with the best successor value through the
outer operator (``max`` for ``F[0,T)``, ``min`` for ``G[0,T)``).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .gridworld import ACTIONS, Episode, NoiseModel, WorkspaceLayout, rollout
from .stl import (
    Formula,
    robustness,
    robustness_trace,
    satisfaction_trace,
    satisfies,
    split_top_level,
    window_length,
)
from .tau_mdp import ExplicitModel, TauMDP

log = logging.getLogger(__name__)

MAX_PROBABILITY = "max_probability"
MAX_ROBUSTNESS = "max_robustness"
OBJECTIVE_KINDS = (MAX_PROBABILITY, MAX_ROBUSTNESS)
N_ACTIONS = len(ACTIONS)


def _outer_op(outer: str):
    if outer == "F":
        return max
    if outer == "G":
        return min
    raise ValueError(f"outer operator must be 'F' or 'G', got {outer!r}")


def neutral_reward(outer: str) -> float:
    """Identity of the outer operator; used for windows that are not full yet."""
    return -math.inf if outer == "F" else math.inf


@dataclass(frozen=True)
class Objective:
    """What an episode is scored on: the inner formula per window, combined
    over time by the outer operator of the top-level formula."""

    kind: str
    phi: Formula

    def __post_init__(self):
        if self.kind not in OBJECTIVE_KINDS:
            raise ValueError(f"unknown objective {self.kind!r}")
        split_top_level(self.phi)

    @property
    def outer(self) -> str:
        return split_top_level(self.phi)[0]

    @property
    def horizon_T(self) -> int:
        return split_top_level(self.phi)[1]

    @property
    def psi(self) -> Formula:
        return split_top_level(self.phi)[2]

    @property
    def tau(self) -> int:
        return window_length(self.psi)

    def step_rewards(self, episode: Episode) -> np.ndarray:
        """Reward of the window ``s^{n-tau+1:n}`` for every sample index ``n``.

        Indices before the first full window get the outer operator's
        neutral element.
        """
        tau = self.tau
        sig = episode.signal
        out = np.full(len(sig), neutral_reward(self.outer))
        if self.kind == MAX_ROBUSTNESS:
            vals = robustness_trace(sig, self.psi)
        else:
            vals = satisfaction_trace(sig, self.psi).astype(float)
        out[tau - 1 : tau - 1 + len(vals)] = vals
        return out

    def episode_robustness(self, episode: Episode) -> float:
        return robustness(episode.signal, self.phi, episode.signal.t0)

    def episode_satisfied(self, episode: Episode) -> bool:
        return satisfies(episode.signal, self.phi, episode.signal.t0)


@dataclass(frozen=True)
class TableObjective:
    """Objective over an explicit model whose local rewards are per state."""

    rewards: np.ndarray
    outer: str = "F"

    def step_rewards(self, episode: Episode) -> np.ndarray:
        return np.asarray(self.rewards, dtype=float)[np.asarray(episode.states)]


@dataclass
class LearningSchedule:
    """Hyperparameters of :func:`train`.

    ``alpha_mode='constant'`` uses ``alpha`` throughout; ``'visits'`` uses
    ``1 / (1 + n)`` where ``n`` counts earlier updates of the same triple.
    Exploration probability in episode ``e`` is ``epsilon_base ** e``.
    """

    alpha: float = 0.95
    gamma: float = 1.0
    epsilon_base: float = 0.995
    episodes: int = 300
    seed: int = 0
    alpha_mode: str = "constant"
    blend: str = "standard"
    sweep: str = "full"

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("alpha must lie in (0, 1]")
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError("gamma must lie in (0, 1]")
        if not (0.0 < self.epsilon_base <= 1.0):
            raise ValueError("epsilon base must lie in (0, 1]")
        if self.episodes < 0:
            raise ValueError("episode count must be non-negative")
        if self.alpha_mode not in ("constant", "visits"):
            raise ValueError(f"unknown alpha mode {self.alpha_mode!r}")
        if self.blend not in ("standard", "swapped"):
            raise ValueError(f"unknown blend variant {self.blend!r}")
        if self.sweep not in ("full", "trimmed"):
            raise ValueError(f"unknown sweep variant {self.sweep!r}")

    def epsilon(self, episode: int) -> float:
        return self.epsilon_base ** episode


def initial_q(n_states: int, T: int, kind: str, rng: np.random.Generator,
              r_min: float = -1.0, r_max: float = 1.0) -> np.ndarray:
    if kind == MAX_PROBABILITY:
        lo, hi = 0.0, 0.1
    else:
        lo, hi = 0.1 * r_min, 0.1 * r_max
    return rng.uniform(lo, hi, size=(n_states, N_ACTIONS, T + 1))


def q_target(reward: float, next_best: float | None, gamma: float, outer: str) -> float:
    if next_best is None:
        return reward
    return _outer_op(outer)(reward, gamma * next_best)


def blend(q_old: float, target: float, alpha: float, variant: str = "standard") -> float:
    if variant == "standard":
        new = (1.0 - alpha) * q_old + alpha * target
    else:
        # the swapped orientation keeps weight alpha on the old value
        new = (1.0 - alpha) * target + alpha * q_old
    # a convex combination; clamp away rounding that would leave the interval
    return min(max(new, min(q_old, target)), max(q_old, target))


def update_q(Q: np.ndarray, states: Sequence[int], actions: Sequence[int], rewards: Sequence[float],
             outer: str, alpha: float, gamma: float, *, blend_variant: str = "standard",
             sweep: str = "full", tau: int = 1, visits: np.ndarray | None = None) -> np.ndarray:
    """Apply one backward batch update in place and return ``Q``.

    ``states`` and ``rewards`` have ``T + 1`` entries, ``actions`` ``T``.
    With ``sweep='full'`` steps ``n = T .. 0`` are updated; time-to-go 0 has
    no action to choose, so its row is updated for every action. With
    ``sweep='trimmed'`` only ``n = T-tau-1 .. tau`` are updated and the first
    of them has no successor term. The successor value is read from ``Q`` as
    already updated by this sweep. When ``visits`` is given, ``alpha`` is
    replaced by ``1 / (1 + visits)`` per triple and the counts are advanced.
    """
    T = len(actions)
    if len(states) != T + 1 or len(rewards) != T + 1:
        raise ValueError("need T+1 states and rewards for T actions")
    if sweep == "full":
        steps = range(T, -1, -1)
        terminal = T
    else:
        steps = range(T - tau - 1, tau - 1, -1)
        terminal = T - tau - 1
        if terminal < tau:
            raise ValueError(f"episode of length {T} has no updatable window for tau={tau}")
    for n in steps:
        s = states[n]
        k = T - n
        if n == terminal:
            next_best = None
        else:
            next_best = float(Q[states[n + 1], :, k - 1].max())
        target = q_target(float(rewards[n]), next_best, gamma, outer)
        if not math.isfinite(target):
            raise ValueError(f"non-finite target at step {n}; episode shorter than the window?")
        acts = range(N_ACTIONS) if n == T else (actions[n],)
        for a in acts:
            a_eff = alpha
            if visits is not None:
                a_eff = 1.0 / (1.0 + visits[s, a, k])
                visits[s, a, k] += 1
            Q[s, a, k] = blend(Q[s, a, k], target, a_eff, blend_variant)
    return Q


def greedy_policy(Q: np.ndarray) -> np.ndarray:
    """``policy[state, time_to_go]``; ties go to the first action in
    ``up, down, left, right`` order."""
    return np.argmax(Q, axis=1)


def greedy_action(Q: np.ndarray, sid: int, k: int) -> int:
    return int(np.argmax(Q[sid, :, k]))


# ---------------------------------------------------------------------------
# environments


@dataclass
class GridEnvironment:
    layout: WorkspaceLayout
    noise: NoiseModel
    mdp: TauMDP
    T: int

    def rollout(self, policy, rng: np.random.Generator) -> Episode:
        return rollout(self.layout, self.noise, policy, self.T, rng, self.mdp)


@dataclass
class ModelEnvironment:
    """Samples episodes from an explicit model; used to check convergence."""

    model: ExplicitModel
    T: int

    def rollout(self, policy, rng: np.random.Generator) -> Episode:
        P = self.model.require()
        n = self.model.n_states
        s = int(rng.choice(n, p=self.model.initial))
        states, actions = [s], []
        for t in range(self.T):
            a = policy(s, self.T - t)
            s = int(rng.choice(n, p=P[s, a]))
            states.append(s)
            actions.append(a)
        return Episode(None, [], states, actions)


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainingResult:
    Q: np.ndarray
    policy: np.ndarray
    log: List[dict] = field(default_factory=list)


def train(env, objective, schedule: LearningSchedule, n_states: int, *, kind: str | None = None,
          r_min: float = -1.0, r_max: float = 1.0, rng: np.random.Generator | None = None) -> TrainingResult:
    """Batch Q-learning: simulate with epsilon-greedy exploration, replay the
    episode backwards, repeat ``schedule.episodes`` times."""
    kind = kind or getattr(objective, "kind", MAX_ROBUSTNESS)
    rng = rng if rng is not None else np.random.default_rng(schedule.seed)
    T = env.T
    tau = getattr(objective, "tau", 1)
    if T < tau:
        raise ValueError(f"episode length T={T} is shorter than the window length {tau}")
    if schedule.gamma == 1.0 or schedule.alpha_mode == "constant":
        log.warning("gamma=1 or constant alpha: formal convergence conditions do not hold")
    Q = initial_q(n_states, T, kind, rng, r_min, r_max)
    visits = np.zeros(Q.shape, dtype=np.int64) if schedule.alpha_mode == "visits" else None
    records = []
    for ep in range(schedule.episodes):
        eps = schedule.epsilon(ep)

        def behaviour(sid, k, _eps=eps):
            if rng.random() < _eps:
                return int(rng.integers(N_ACTIONS))
            return greedy_action(Q, sid, k)

        episode = env.rollout(behaviour, rng)
        rewards = objective.step_rewards(episode)
        update_q(Q, episode.states, episode.actions, rewards, objective.outer, schedule.alpha,
                 schedule.gamma, blend_variant=schedule.blend, sweep=schedule.sweep, tau=tau,
                 visits=visits)
        finite = rewards[np.isfinite(rewards)]
        row = {"episode": ep, "epsilon": eps,
               "return": float(_outer_op(objective.outer)(finite)) if len(finite) else math.nan}
        if isinstance(objective, Objective):
            row["robustness"] = objective.episode_robustness(episode)
            row["satisfied"] = objective.episode_satisfied(episode)
        records.append(row)
    return TrainingResult(Q, greedy_policy(Q), records)


# ---------------------------------------------------------------------------
# model-based oracles


def bellman_operator(model: ExplicitModel, q: np.ndarray, gamma: float, outer: str = "F") -> np.ndarray:
    """``(Hq)(s, a, k) = sum_s' P(s, a, s') op(r(s), gamma * max_b q(s', b, k-1))``
    for ``k >= 1``; ``(Hq)(s, a, 0) = r(s)``."""
    P = model.require()
    r = model.rewards
    op = np.maximum if outer == "F" else np.minimum
    out = np.empty_like(q, dtype=float)
    out[:, :, 0] = r[:, None]
    best = q.max(axis=1)  # (S, T+1)
    for k in range(1, q.shape[2]):
        inner = op(r[:, None], gamma * best[None, :, k - 1])  # (S, S')
        out[:, :, k] = np.einsum("sat,st->sa", P, inner)
    return out


def value_iteration_oracle(model: ExplicitModel, gamma: float, T: int, outer: str = "F") -> np.ndarray:
    """Exact finite-horizon Q* by backward induction over time-to-go."""
    P = model.require()
    r = model.rewards
    op = np.maximum if outer == "F" else np.minimum
    S, A, _ = P.shape
    Q = np.empty((S, A, T + 1))
    Q[:, :, 0] = r[:, None]
    for k in range(1, T + 1):
        best = Q[:, :, k - 1].max(axis=1)
        for s in range(S):
            vals = op(r[s], gamma * best)
            Q[s, :, k] = P[s] @ vals
    return Q


def contraction_check(model: ExplicitModel, gamma: float, q1: np.ndarray, q2: np.ndarray,
                      outer: str = "F") -> tuple:
    """``(||Hq1 - Hq2||_inf, gamma * ||q1 - q2||_inf)``."""
    h1 = bellman_operator(model, q1, gamma, outer)
    h2 = bellman_operator(model, q2, gamma, outer)
    return float(np.max(np.abs(h1 - h2))), float(gamma * np.max(np.abs(q1 - q2)))


def reachable_triples(model: ExplicitModel, T: int) -> np.ndarray:
    """Mask over ``(state, action, time_to_go)`` of triples visited with
    positive probability under a fully random behaviour policy."""
    P = model.require()
    S, A, _ = P.shape
    mask = np.zeros((S, A, T + 1), dtype=bool)
    at_t = model.initial > 0
    for t in range(T + 1):
        mask[at_t, :, T - t] = True
        at_t = (P[at_t].sum(axis=(0, 1)) > 0)
    return mask
