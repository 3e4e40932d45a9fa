import math
from collections import Counter

import numpy as np
import pytest
from scipy.stats import chi2_contingency

from stlrl.gridworld import (
    ACTIONS,
    NoiseModel,
    RobotState,
    WorkspaceLayout,
    constant_policy,
    default_layout,
    quotient,
    region_of,
    rollout,
    step,
)
from stlrl.tau_mdp import enumerate_reachable

EXACT = NoiseModel(dtheta=0.0)


def test_zero_noise_steps():
    lay = default_layout()
    rng = np.random.default_rng(0)
    s = step(lay, EXACT, RobotState(0.5, 0.5), "right", rng)
    assert (s.x, s.y, s.t) == (1.5, 0.5, 1)
    s = step(lay, EXACT, RobotState(0.5, 0.5), "left", rng)
    assert s.x == 0.0 and s.y == pytest.approx(0.5, abs=1e-15)
    s = step(lay, EXACT, RobotState(0.5, 0.5), "up", rng)
    assert s.x == pytest.approx(0.5) and s.y == pytest.approx(1.5)


def test_aims_at_neighbour_centre():
    # off-centre start: the heading points at the centre of cell (1, 0)
    s = step(default_layout(), EXACT, RobotState(0.2, 0.8), "right", np.random.default_rng(0))
    d = math.hypot(1.5 - 0.2, 0.5 - 0.8)
    assert s.x == pytest.approx(0.2 + 1.3 / d) and s.y == pytest.approx(0.8 - 0.3 / d)


def test_region_of():
    lay = default_layout()
    assert region_of(lay, (2.4, 2.9)) == (2, 2)
    assert region_of(lay, (3.0, 2.5)) == (3, 2)
    assert region_of(lay, (6.0, 6.0)) == (5, 5)
    with pytest.raises(ValueError):
        region_of(lay, (6.1, 0.0))


def test_layout_validation():
    with pytest.raises(ValueError):
        WorkspaceLayout(x_max=5.5)
    with pytest.raises(ValueError):
        WorkspaceLayout(regions={(6, 0): "blue"})
    with pytest.raises(ValueError):
        WorkspaceLayout(initial=(7.0, 0.0))
    with pytest.raises(ValueError):
        NoiseModel(dtheta=math.pi / 4)
    with pytest.raises(ValueError):
        NoiseModel(step=0.0)


@pytest.mark.parametrize("nx,ny,adj,loops", [(2, 2, 4, 4), (1, 1, 0, 1), (6, 6, 60, 36)])
def test_quotient_counts(nx, ny, adj, loops):
    g = quotient(WorkspaceLayout(x_max=nx, y_max=ny))
    assert len(g.nodes) == nx * ny
    assert g.n_adjacency_edges == adj == 2 * nx * ny - nx - ny
    assert g.n_self_loops == loops
    assert all((b, a) in g.edges for a, b in g.edges)


def _reference_step(lay, dtheta, pos, action, rng):
    """Independent transcription of the kinematics: aim at the neighbour's
    centre, uniform heading offset, redraw headings that skip a cell."""
    di, dj = {"up": (0, 1), "down": (0, -1), "left": (-1, 0), "right": (1, 0)}[action]
    i, j = int(pos[0]), int(pos[1])
    theta = math.atan2(j + dj + 0.5 - pos[1], i + di + 0.5 - pos[0])
    while True:
        th = theta + rng.uniform(-dtheta, dtheta)
        x = min(max(pos[0] + math.cos(th), 0.0), 6.0)
        y = min(max(pos[1] + math.sin(th), 0.0), 6.0)
        ci, cj = min(int(x), 5), min(int(y), 5)
        if abs(ci - i) + abs(cj - j) <= 1:
            return ci, cj


@pytest.mark.parametrize("pos,action,dtheta", [
    ((2.5, 2.05), "up", math.pi / 5),
    ((2.05, 2.3), "right", math.pi / 9),
    ((1.2, 4.9), "down", math.pi / 6),
])
def test_next_cell_frequencies_match_reference(pos, action, dtheta):
    lay = default_layout()
    noise = NoiseModel(dtheta=dtheta)
    n = 4000
    rng_a, rng_b = np.random.default_rng(10), np.random.default_rng(11)
    ours = Counter(region_of(lay, step(lay, noise, RobotState(*pos), action, rng_a).position) for _ in range(n))
    ref = Counter(_reference_step(lay, dtheta, pos, action, rng_b) for _ in range(n))
    cells = sorted(set(ours) | set(ref))
    assert len(cells) >= 2
    table = np.array([[ours[c] for c in cells], [ref[c] for c in cells]])
    assert chi2_contingency(table)[1] > 1e-3


def test_no_skip_over_random_steps():
    lay = default_layout()
    noise = NoiseModel()
    rng = np.random.default_rng(5)
    pos = rng.uniform(0, 6, size=(100_000, 2))
    acts = rng.integers(4, size=100_000)
    for (x, y), a in zip(pos, acts):
        start = region_of(lay, (x, y))
        s = step(lay, noise, RobotState(x, y), ACTIONS[a], rng)
        assert lay.contains(s.position)
        end = region_of(lay, s.position)
        assert abs(start[0] - end[0]) + abs(start[1] - end[1]) <= 1


def _tracker(lay, tau=2):
    return enumerate_reachable(quotient(lay), tau, region_of(lay, lay.initial))


def test_rollout_basics():
    lay = default_layout()
    tr = _tracker(lay)
    ep = rollout(lay, EXACT, constant_policy("right"), 0, np.random.default_rng(0), tr)
    assert len(ep.signal) == 1 and tuple(ep.signal.at(0)) == lay.initial
    ep = rollout(lay, EXACT, constant_policy("right"), 7, np.random.default_rng(0), tr)
    assert list(ep.signal.samples[:, 1]) == [0.5] * 8
    assert list(ep.signal.samples[:, 0]) == [0.5, 1.5, 2.5, 3.5, 4.5, 5.5, 6.0, 6.0]
    assert ep.T == 7 and len(ep.states) == 8


def test_rollout_determinism():
    lay = default_layout()
    tr = _tracker(lay)
    policy = lambda sid, k: (sid + k) % 4
    a = rollout(lay, NoiseModel(), policy, 30, np.random.default_rng(42), tr)
    b = rollout(lay, NoiseModel(), policy, 30, np.random.default_rng(42), tr)
    assert a.signal == b.signal and a.states == b.states


def test_custom_noise_hook():
    noise = NoiseModel(kind="custom", sampler=lambda rng, d: d)  # always the extreme offset
    s = step(default_layout(), noise, RobotState(2.5, 2.5), "right", np.random.default_rng(0))
    assert s.x == pytest.approx(2.5 + math.cos(math.pi / 9))
    assert s.y == pytest.approx(2.5 + math.sin(math.pi / 9))
