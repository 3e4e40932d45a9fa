"""tau-history MDP over the quotient graph.

A tau-state is the tuple of the last ``tau`` cells visited, left-padded with
``EPS`` (``None``) before the system has run for ``tau`` samples. Only states
reachable from the initial cell are enumerated.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Hashable, List, Mapping, Sequence, Tuple

import numpy as np

from .gridworld import Cell, QuotientGraph, WorkspaceLayout
from .stl import Formula, robustness_bounds, window_length

EPS = None
SAT, UNSAT, MIXED = "SAT", "UNSAT", "MIXED"
UNREACHABLE = math.inf

History = Tuple[Cell | None, ...]


class StateLimitError(RuntimeError):
    """Raised when the reachable tau-state space exceeds the configured cap."""


class SkippedRegionError(RuntimeError):
    """The system jumped between cells that are not adjacent in the quotient."""


def trace(regions: Sequence[Hashable], t: int, tau: int) -> History:
    """The last ``tau`` regions up to index ``t``, EPS-padded on the left."""
    if t < 0 or t >= len(regions):
        raise IndexError(f"t={t} outside region sequence of length {len(regions)}")
    window = tuple(regions[max(0, t - tau + 1) : t + 1])
    return (EPS,) * (tau - len(window)) + window


def is_valid_history(h: History, graph: QuotientGraph | None = None) -> bool:
    seen_cell = False
    for c in h:
        if c is EPS and seen_cell:
            return False
        seen_cell = seen_cell or c is not EPS
    if not seen_cell:
        return False
    if graph is not None:
        cells = [c for c in h if c is not EPS]
        return all(graph.has_edge(a, b) for a, b in zip(cells, cells[1:]))
    return True


def admissible(src: History, dst: History, graph: QuotientGraph) -> bool:
    """Structural condition on a positive-probability transition."""
    if src[1:] != dst[:-1] or src[-1] is EPS or dst[-1] is EPS:
        return False
    return graph.has_edge(src[-1], dst[-1])


def format_history(h: History) -> str:
    return "|".join("e" if c is EPS else f"{c[0]}:{c[1]}" for c in h)


@dataclass
class TauMDP:
    tau: int
    graph: QuotientGraph
    initial_cells: Tuple[Cell, ...]
    histories: List[History]
    index: Dict[History, int]
    successors: List[Dict[Cell, int]]

    @property
    def n_states(self) -> int:
        return len(self.histories)

    def start(self, cell: Cell) -> int:
        h = (EPS,) * (self.tau - 1) + (cell,)
        try:
            return self.index[h]
        except KeyError:
            raise KeyError(f"cell {cell} is not an initial cell {self.initial_cells}") from None

    def advance(self, sid: int, cell: Cell) -> int:
        try:
            return self.successors[sid][cell]
        except KeyError:
            last = self.histories[sid][-1]
            raise SkippedRegionError(f"transition {last} -> {cell} skips a region") from None

    def successor_lists(self) -> List[List[int]]:
        return [sorted(s.values()) for s in self.successors]

    def is_eps_prefixed(self, sid: int) -> bool:
        return self.histories[sid][0] is EPS


def enumerate_reachable(graph: QuotientGraph, tau: int, initial: Cell | Sequence[Cell] | None = None,
                        max_states: int = 10**6) -> TauMDP:
    """Breadth-first enumeration of tau-states reachable from the initial
    cell(s); ``initial=None`` starts from every cell.

    Ids follow BFS discovery order (initial states first, in the given
    order) with successor cells visited in lexicographic order, so the
    numbering is deterministic.
    """
    if tau < 1:
        raise ValueError("tau must be at least 1")
    if initial is None:
        starts = tuple(sorted(graph.nodes))
    elif len(initial) == 2 and all(isinstance(v, (int, np.integer)) for v in initial):
        starts = (tuple(initial),)
    else:
        starts = tuple(tuple(c) for c in initial)
    for c in starts:
        if c not in graph.neighbors:
            raise ValueError(f"initial cell {c} not in the quotient")
    histories: List[History] = []
    index: Dict[History, int] = {}
    for c in starts:
        h = (EPS,) * (tau - 1) + (c,)
        if h not in index:
            index[h] = len(histories)
            histories.append(h)
    if len(histories) > max_states:
        raise StateLimitError(f"more than {max_states} reachable tau-states; reduce tau or the partition")
    successors: List[Dict[Cell, int]] = []
    queue = deque(range(len(histories)))
    while queue:
        sid = queue.popleft()
        h = histories[sid]
        succ = {}
        for n in graph.neighbors[h[-1]]:
            nh = h[1:] + (n,)
            nid = index.get(nh)
            if nid is None:
                if len(histories) >= max_states:
                    raise StateLimitError(
                        f"more than {max_states} reachable tau-states; reduce tau or the partition"
                    )
                nid = len(histories)
                histories.append(nh)
                index[nh] = nid
                queue.append(nid)
            succ[n] = nid
        while len(successors) <= sid:
            successors.append({})
        successors[sid] = succ
    return TauMDP(tau, graph, starts, histories, index, successors)


# ---------------------------------------------------------------------------
# classification against the inner formula


def history_bounds(h: History, psi: Formula, layout: WorkspaceLayout) -> Tuple[float, float]:
    boxes = [layout.cell_box(c) for c in h]
    return robustness_bounds(psi, boxes, 0)


def classify(h: History, psi: Formula, layout: WorkspaceLayout) -> str:
    """SAT if every trajectory through the cells of ``h`` satisfies ``psi``,
    UNSAT if none does, MIXED otherwise.

    Bounds come from closed cell boxes, so a bound of exactly zero is only
    attained on cell boundaries and does not make a state MIXED.
    """
    if len(h) != window_length(psi):
        raise ValueError(f"history length {len(h)} differs from the window length {window_length(psi)}")
    if h[0] is EPS:
        return UNSAT
    lo, hi = history_bounds(h, psi, layout)
    if lo >= 0.0 and hi > 0.0:
        return SAT
    if hi <= 0.0 and lo < 0.0:
        return UNSAT
    return MIXED


@dataclass
class SatisfyingSet:
    classes: List[str]
    members: frozenset = field(init=False)

    def __post_init__(self):
        self.members = frozenset(i for i, c in enumerate(self.classes) if c == SAT)

    def __contains__(self, sid: int) -> bool:
        return sid in self.members

    def mask(self) -> np.ndarray:
        return np.array([c == SAT for c in self.classes], dtype=bool)

    def count(self, cls: str) -> int:
        return sum(1 for c in self.classes if c == cls)


def classify_all(mdp: TauMDP, psi: Formula, layout: WorkspaceLayout) -> SatisfyingSet:
    return SatisfyingSet([classify(h, psi, layout) for h in mdp.histories])


# ---------------------------------------------------------------------------
# signed graph distance


def _multi_source_bfs(adj: Sequence[Sequence[int]], sources: Sequence[int]) -> np.ndarray:
    dist = np.full(len(adj), UNREACHABLE)
    queue = deque()
    for s in sources:
        dist[s] = 0
        queue.append(s)
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if dist[v] == UNREACHABLE:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def signed_distances(successors: Sequence[Sequence[int]], in_set: Sequence[bool]) -> np.ndarray:
    """Signed hop distance of every state to the set ``X`` (``in_set`` mask).

    Outside ``X``: shortest directed path length to some member of ``X``.
    Inside ``X``: minus the shortest directed path length from some
    non-member. Unreachable targets give ``+inf`` (``-inf`` inside ``X``).
    """
    in_set = np.asarray(in_set, dtype=bool)
    n = len(successors)
    predecessors: List[List[int]] = [[] for _ in range(n)]
    for u, vs in enumerate(successors):
        for v in vs:
            predecessors[v].append(u)
    members = np.flatnonzero(in_set)
    others = np.flatnonzero(~in_set)
    # l(i, X) via reverse search from X; l(X^c, i) via forward search from X^c
    to_set = _multi_source_bfs(predecessors, members)
    from_rest = _multi_source_bfs(successors, others)
    return np.where(in_set, -from_rest, to_set)


def signed_distance(sid: int, successors: Sequence[Sequence[int]], in_set: Sequence[bool]) -> float:
    return float(signed_distances(successors, in_set)[sid])


# ---------------------------------------------------------------------------
# explicit transition models (oracle / test mode)


class UnknownTransitionError(RuntimeError):
    pass


@dataclass
class ExplicitModel:
    """Finite MDP with known ``P[s, a, s']`` and per-state rewards.

    ``P`` may be ``None`` (learning mode: transitions unknown). ``rewards``
    are the local rewards ``r(s)``; ``initial`` is a distribution over states.
    """

    P: np.ndarray | None
    rewards: np.ndarray
    initial: np.ndarray

    def __post_init__(self):
        self.rewards = np.asarray(self.rewards, dtype=float)
        self.initial = np.asarray(self.initial, dtype=float)
        if self.P is not None:
            self.P = np.asarray(self.P, dtype=float)
            if np.isnan(self.P).any():
                raise UnknownTransitionError("transition model has unknown entries")
            sums = self.P.sum(axis=2)
            if np.any(np.abs(sums - 1.0) > 1e-9) or np.any(self.P < 0):
                raise ValueError("each P[s, a, :] must be a probability vector")
        if abs(self.initial.sum() - 1.0) > 1e-9:
            raise ValueError("initial distribution must sum to 1")

    @property
    def n_states(self) -> int:
        return len(self.rewards)

    @property
    def n_actions(self) -> int:
        return self.require().shape[1]

    def require(self) -> np.ndarray:
        if self.P is None:
            raise UnknownTransitionError("transition probabilities are UNKNOWN (learning mode)")
        return self.P

    def successor_lists(self) -> List[List[int]]:
        P = self.require()
        return [sorted(set(np.flatnonzero(P[s].sum(axis=0) > 0).tolist())) for s in range(self.n_states)]

    def check_admissible(self, mdp: TauMDP):
        """Every positive-probability transition must be admissible in ``mdp``."""
        P = self.require()
        for s, a, t in zip(*np.nonzero(P)):
            if not admissible(mdp.histories[s], mdp.histories[t], mdp.graph):
                raise ValueError(
                    f"transition {format_history(mdp.histories[s])} -> "
                    f"{format_history(mdp.histories[t])} under action {a} is not admissible"
                )


def random_explicit_model(mdp: TauMDP, rng: np.random.Generator, n_actions: int = 4,
                          rewards: np.ndarray | None = None, concentration: float = 1.0) -> ExplicitModel:
    """Random admissible model on ``mdp``: each (state, action) draws a
    Dirichlet distribution over the state's admissible successors."""
    n = mdp.n_states
    P = np.zeros((n, n_actions, n))
    for s, succ in enumerate(mdp.successors):
        targets = sorted(succ.values())
        for a in range(n_actions):
            P[s, a, targets] = rng.dirichlet(np.full(len(targets), concentration))
    if rewards is None:
        rewards = rng.uniform(-1.0, 1.0, n)
    initial = np.zeros(n)
    initial[0] = 1.0
    return ExplicitModel(P, rewards, initial)
