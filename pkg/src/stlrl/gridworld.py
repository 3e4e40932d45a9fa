"""Noisy Dubins-style robot on a partitioned rectangular workspace.

The learner only sees this module through :func:`rollout`; the kinematics,
noise model and partition are the "unknown" system.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from .stl import Formula, Or, And, Predicate, Signal

ACTIONS = ("up", "down", "left", "right")
_DIRS = {"up": (0, 1), "down": (0, -1), "left": (-1, 0), "right": (1, 0)}

Cell = Tuple[int, int]


@dataclass(frozen=True)
class WorkspaceLayout:
    """Rectangular domain split into square cells of side ``pitch``.

    Cells are addressed by integer indices ``(i, j)``; cell ``(i, j)`` spans
    ``[x_min + i*pitch, x_min + (i+1)*pitch) x [y_min + j*pitch, ...)``.
    """

    x_min: float = 0.0
    x_max: float = 6.0
    y_min: float = 0.0
    y_max: float = 6.0
    pitch: float = 1.0
    regions: Dict[Cell, str] = field(default_factory=dict)
    initial: Tuple[float, float] = (0.5, 0.5)

    def __post_init__(self):
        if self.pitch <= 0:
            raise ValueError("cell pitch must be positive")
        for lo, hi, axis in ((self.x_min, self.x_max, "x"), (self.y_min, self.y_max, "y")):
            cells = (hi - lo) / self.pitch
            if hi <= lo or abs(cells - round(cells)) > 1e-9:
                raise ValueError(f"{axis} extent must be a positive whole number of cells")
        for cell in self.regions:
            if not self.contains_cell(cell):
                raise ValueError(f"labeled cell {cell} outside the domain")
        if not self.contains(self.initial):
            raise ValueError(f"initial position {self.initial} outside the domain")
        object.__setattr__(self, "regions", dict(sorted(self.regions.items())))

    @property
    def nx(self) -> int:
        return int(round((self.x_max - self.x_min) / self.pitch))

    @property
    def ny(self) -> int:
        return int(round((self.y_max - self.y_min) / self.pitch))

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    def contains(self, pos) -> bool:
        x, y = pos
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def contains_cell(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.nx and 0 <= cell[1] < self.ny

    def cells(self) -> List[Cell]:
        return [(i, j) for i in range(self.nx) for j in range(self.ny)]

    def cell_id(self, cell: Cell) -> int:
        return cell[0] * self.ny + cell[1]

    def cell_of_id(self, cid: int) -> Cell:
        return divmod(cid, self.ny)

    def cell_box(self, cell: Cell) -> Tuple[np.ndarray, np.ndarray]:
        i, j = cell
        lo = np.array([self.x_min + i * self.pitch, self.y_min + j * self.pitch])
        return lo, lo + self.pitch

    def cell_center(self, cell: Cell) -> np.ndarray:
        lo, hi = self.cell_box(cell)
        return (lo + hi) / 2

    def labels(self) -> List[str]:
        return sorted(set(self.regions.values()))

    def label_formula(self, label: str) -> Formula:
        """Disjunction of open-box predicates over all cells carrying ``label``."""
        boxes = []
        for cell, lab in self.regions.items():
            if lab != label:
                continue
            lo, hi = self.cell_box(cell)
            box = And(
                And(And(Predicate((1.0, 0.0), lo[0], ">"), Predicate((1.0, 0.0), hi[0], "<")),
                    Predicate((0.0, 1.0), lo[1], ">")),
                Predicate((0.0, 1.0), hi[1], "<"),
            )
            boxes.append(box)
        if not boxes:
            raise ValueError(f"no region carries label {label!r}")
        out = boxes[0]
        for b in boxes[1:]:
            out = Or(out, b)
        return out


@dataclass(frozen=True)
class NoiseModel:
    """Heading noise around the desired heading; ``step`` is v * delta."""

    dtheta: float = math.pi / 9
    step: float = 1.0
    kind: str = "uniform"
    sampler: Callable[[np.random.Generator, float], float] | None = None

    def __post_init__(self):
        if not (0.0 <= self.dtheta < math.pi / 4):
            raise ValueError("dtheta must lie in [0, pi/4)")
        if self.step <= 0:
            raise ValueError("step length v*delta must be positive")
        if self.kind not in ("uniform", "custom"):
            raise ValueError(f"unknown noise distribution {self.kind!r}")
        if self.kind == "custom" and self.sampler is None:
            raise ValueError("custom noise needs a sampler(rng, dtheta) -> offset")

    def heading_offset(self, rng: np.random.Generator) -> float:
        if self.kind == "custom":
            return float(np.clip(self.sampler(rng, self.dtheta), -self.dtheta, self.dtheta))
        if self.dtheta == 0.0:
            return 0.0
        return float(rng.uniform(-self.dtheta, self.dtheta))


@dataclass(frozen=True)
class RobotState:
    x: float
    y: float
    t: int = 0

    @property
    def position(self) -> Tuple[float, float]:
        return (self.x, self.y)


def region_of(layout: WorkspaceLayout, pos) -> Cell:
    """Cell containing ``pos``; cells are half-open, the top/right domain
    edges belong to the last cell."""
    x, y = pos
    if not layout.contains(pos):
        raise ValueError(f"position {pos} outside the domain")
    i = min(int(math.floor((x - layout.x_min) / layout.pitch)), layout.nx - 1)
    j = min(int(math.floor((y - layout.y_min) / layout.pitch)), layout.ny - 1)
    return (i, j)


MAX_REDRAWS = 64


def _advance(layout: WorkspaceLayout, state: RobotState, heading: float, length: float):
    x = state.x + length * math.cos(heading)
    y = state.y + length * math.sin(heading)
    return min(max(x, layout.x_min), layout.x_max), min(max(y, layout.y_min), layout.y_max)


def _adjacent(a: Cell, b: Cell) -> bool:
    return abs(a[0] - b[0]) + abs(a[1] - b[1]) <= 1


def step(layout: WorkspaceLayout, noise: NoiseModel, state: RobotState, action: str,
         rng: np.random.Generator) -> RobotState:
    """One motion primitive: aim at the centre of the neighbouring cell in
    direction ``action``, perturb the heading, move ``noise.step``, clamp.

    Headings whose end point would land in a cell that is neither the current
    cell nor a 4-neighbour are redrawn; the nominal heading never does, and it
    is used if ``MAX_REDRAWS`` draws all fail.
    """
    di, dj = _DIRS[action]
    start = region_of(layout, state.position)
    tx, ty = layout.cell_center((start[0] + di, start[1] + dj))
    nominal = math.atan2(ty - state.y, tx - state.x)
    for _ in range(MAX_REDRAWS):
        x, y = _advance(layout, state, nominal + noise.heading_offset(rng), noise.step)
        if _adjacent(start, region_of(layout, (x, y))):
            break
    else:
        x, y = _advance(layout, state, nominal, noise.step)
    return RobotState(x, y, state.t + 1)


@dataclass(frozen=True)
class QuotientGraph:
    """Cells as nodes, 4-neighbour adjacency plus self-loops."""

    nodes: Tuple[Cell, ...]
    edges: frozenset
    neighbors: Dict[Cell, Tuple[Cell, ...]]

    def has_edge(self, a: Cell, b: Cell) -> bool:
        return (a, b) in self.edges

    @property
    def n_adjacency_edges(self) -> int:
        """Undirected edges between distinct cells."""
        return sum(1 for a, b in self.edges if a < b)

    @property
    def n_self_loops(self) -> int:
        return sum(1 for a, b in self.edges if a == b)


def quotient(layout: WorkspaceLayout) -> QuotientGraph:
    nodes = tuple(layout.cells())
    edges = set()
    nbrs = {}
    for c in nodes:
        out = [c]
        for di, dj in _DIRS.values():
            n = (c[0] + di, c[1] + dj)
            if layout.contains_cell(n):
                out.append(n)
        out.sort()
        nbrs[c] = tuple(out)
        edges.update((c, n) for n in out)
    return QuotientGraph(nodes, frozenset(edges), nbrs)


@dataclass
class Episode:
    """One simulated trajectory: ``T + 1`` samples, the tau-state id at each
    sample, and the ``T`` action indices applied."""

    signal: Signal | None
    cells: List[Cell]
    states: List[int]
    actions: List[int]

    @property
    def T(self) -> int:
        return len(self.actions)


Policy = Callable[[int, int], int]


def rollout(layout: WorkspaceLayout, noise: NoiseModel, policy: Policy, T: int,
            rng: np.random.Generator, tracker) -> Episode:
    """Simulate ``T`` steps from the layout's initial position.

    ``policy(state_id, time_to_go)`` returns an action index into
    :data:`ACTIONS`. ``tracker`` maintains the tau-state incrementally and must
    provide ``start(cell) -> id`` and ``advance(id, cell) -> id``.
    """
    state = RobotState(*layout.initial, 0)
    cell = region_of(layout, state.position)
    sid = tracker.start(cell)
    positions = [state.position]
    cells = [cell]
    states = [sid]
    actions = []
    for t in range(T):
        a = policy(sid, T - t)
        state = step(layout, noise, state, ACTIONS[a], rng)
        cell = region_of(layout, state.position)
        sid = tracker.advance(sid, cell)
        positions.append(state.position)
        cells.append(cell)
        states.append(sid)
        actions.append(a)
    return Episode(Signal(np.array(positions)), cells, states, actions)


def constant_policy(action: str) -> Policy:
    a = ACTIONS.index(action)
    return lambda sid, k: a


def label_aliases(layout: WorkspaceLayout) -> Dict[str, Formula]:
    return {lab: layout.label_formula(lab) for lab in layout.labels()}


def default_layout() -> WorkspaceLayout:
    """6x6 unit grid; blue at (2,2) and (4,4), green at (2,4) and (4,2)."""
    return WorkspaceLayout(
        regions={(2, 2): "blue", (4, 4): "blue", (2, 4): "green", (4, 2): "green"},
        initial=(0.5, 0.5),
    )


def positions_in_cells(layout: WorkspaceLayout, cells: Sequence[Cell], rng: np.random.Generator) -> np.ndarray:
    """Uniform random point in the interior of each cell."""
    out = np.empty((len(cells), 2))
    for k, c in enumerate(cells):
        lo, hi = layout.cell_box(c)
        out[k] = rng.uniform(lo, hi)
    return out
