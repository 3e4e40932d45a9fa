import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from gen import formulas, random_formula, random_signal
from stlrl.gridworld import default_layout
from stlrl.stl import (
    And,
    Finally,
    Globally,
    Not,
    Or,
    Predicate,
    Signal,
    Until,
    WindowError,
    parse,
    robustness,
    robustness_bounds,
    robustness_trace,
    satisfaction_trace,
    satisfies,
    window_length,
)

X_LT_3 = Predicate((1.0,), 3.0, "<")


def sig1(values):
    return Signal(np.asarray(values, dtype=float)[:, None])


def test_spec_examples():
    assert satisfies(sig1([2.5]), X_LT_3, 0)
    assert robustness(sig1([2.5]), X_LT_3, 0) == 0.5
    assert not satisfies(sig1([2.0, 2.5, 3.5]), Globally(X_LT_3, 0, 3), 0)
    assert satisfies(sig1([5, 5, 2, 5]), Finally(X_LT_3, 0, 4), 0)
    assert robustness(sig1([2.0, 2.5, 2.9]), Globally(X_LT_3, 0, 3), 0) == pytest.approx(0.1, abs=1e-15)


def test_until_uses_closed_left_range():
    p = Predicate((1.0,), 5.5, "<")   # x < 5.5
    q = Predicate((1.0,), 5.0, ">")   # x > 5
    phi = Until(p, q, 1, 2)
    # q holds at t'=1 but p fails there: rejected because t'' ranges over [t, t']
    s = sig1([1.0, 6.0])
    assert not satisfies(s, phi) and robustness(s, phi) == -0.5
    s_ok = sig1([1.0, 5.2])
    assert satisfies(s_ok, phi) and robustness(s_ok, phi) == pytest.approx(0.2)


def test_window_and_dimension_errors():
    with pytest.raises(WindowError):
        robustness(sig1([1.0, 2.0]), Globally(X_LT_3, 0, 3))
    with pytest.raises(WindowError):
        satisfies(sig1([1.0, 2.0, 3.0]), Globally(X_LT_3, 0, 3), 1)
    with pytest.raises(ValueError):
        robustness(Signal(np.zeros((3, 2))), X_LT_3)


def test_signal_window_and_offset_start():
    s = Signal(np.arange(10.0), t0=5)
    assert s.t_end == 14
    w = s.window(7, 9)
    assert w.t0 == 7 and list(w.samples[:, 0]) == [2.0, 3.0, 4.0]
    assert robustness(s, X_LT_3, 7) == 1.0
    with pytest.raises(WindowError):
        s.window(4, 6)


def test_signal_csv_round_trip():
    s = Signal(np.random.default_rng(0).normal(size=(6, 2)), t0=3)
    text = s.to_csv()
    assert text.startswith("t,x,y\n")
    assert Signal.from_csv(text) == s
    with pytest.raises(ValueError):
        Signal.from_csv("t,x\n0,1\n2,3\n")


def test_example_one_ordering():
    """Two passes through blue cell (2,2): one through its middle, one
    grazing its right edge. Both satisfy; the central pass is more robust."""
    lay = default_layout()
    blue = lay.label_formula("blue")
    psi = And(Finally(blue, 0, 1), Globally(Not(blue), 1, 4))
    s1 = Signal([(2.5, 2.5), (3.5, 2.5), (3.5, 1.5), (4.5, 1.5)])
    s2 = Signal([(2.9, 2.5), (3.3, 2.5), (3.3, 1.5), (4.5, 1.5)])
    r1, r2 = robustness(s1, psi), robustness(s2, psi)
    assert r1 > r2 > 0
    assert satisfies(s1, psi) and satisfies(s2, psi)


signals = arrays(np.float64, st.tuples(st.integers(1, 30), st.just(2)),
                 elements=st.floats(-4, 4, allow_nan=False, allow_infinity=False))


@settings(max_examples=400, deadline=None)
@given(formulas, signals)
def test_soundness(phi, x):
    s = Signal(x)
    if len(s) < window_length(phi):
        return
    r = robustness(s, phi)
    if r > 0:
        assert satisfies(s, phi)
    elif r < 0:
        assert not satisfies(s, phi)


@settings(max_examples=200, deadline=None)
@given(formulas, st.integers(0, 2**32 - 1))
def test_negation_and_de_morgan(phi, seed):
    rng = np.random.default_rng(seed)
    other = random_formula(rng, 3)
    s = Signal(random_signal(rng, max(window_length(phi), window_length(other)) + 2))
    assert robustness(s, Not(phi)) == -robustness(s, phi)
    assert robustness(s, Not(And(phi, other))) == robustness(s, Or(Not(phi), Not(other)))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 3))
def test_threshold_monotonicity(seed, bump):
    """Raising d in every (x < d) predicate never lowers robustness when
    the predicate appears under no negation."""
    rng = np.random.default_rng(seed)

    def positive(depth):
        if depth == 0 or rng.random() < 0.3:
            return Predicate((1.0, float(rng.integers(-1, 2))), float(rng.uniform(-2, 2)), "<")
        k = rng.integers(5)
        a = int(rng.integers(0, 2))
        b = int(rng.integers(a + 1, 4))
        if k == 0:
            return And(positive(depth - 1), positive(depth - 1))
        if k == 1:
            return Or(positive(depth - 1), positive(depth - 1))
        if k == 2:
            return Finally(positive(depth - 1), a, b)
        if k == 3:
            return Globally(positive(depth - 1), a, b)
        return Until(positive(depth - 1), positive(depth - 1), a, b)

    def raise_d(phi):
        if isinstance(phi, Predicate):
            return Predicate(phi.coeffs, phi.threshold + bump, phi.rel, phi.offset)
        if isinstance(phi, (And, Or)):
            return type(phi)(raise_d(phi.left), raise_d(phi.right))
        if isinstance(phi, (Finally, Globally)):
            return type(phi)(raise_d(phi.arg), phi.a, phi.b)
        return Until(raise_d(phi.left), raise_d(phi.right), phi.a, phi.b)

    phi = positive(3)
    s = Signal(random_signal(rng, window_length(phi) + 1))
    assert robustness(s, raise_d(phi)) >= robustness(s, phi)


def test_horizon_sufficiency_and_traces():
    rng = np.random.default_rng(1)
    for _ in range(300):
        phi = random_formula(rng, 4)
        w = window_length(phi)
        x = random_signal(rng, w + int(rng.integers(0, 6)))
        s = Signal(x)
        r_long = robustness(s, phi)
        assert robustness(Signal(x[:w]), phi) == r_long
        trace = robustness_trace(s, phi)
        strace = satisfaction_trace(s, phi)
        assert len(trace) == len(s) - w + 1
        for t in range(len(trace)):
            assert trace[t] == robustness(s, phi, t)
            assert strace[t] == satisfies(s, phi, t)


def test_trace_shorter_than_window_is_empty():
    phi = Globally(X_LT_3, 0, 5)
    assert len(robustness_trace(sig1([1.0, 2.0]), phi)) == 0


def test_robustness_bounds_are_sound():
    rng = np.random.default_rng(2)
    for _ in range(200):
        phi = random_formula(rng, 3)
        w = window_length(phi)
        lo = rng.uniform(-2, 1, size=(w, 2))
        hi = lo + rng.uniform(0, 1.5, size=(w, 2))
        b_lo, b_hi = robustness_bounds(phi, list(zip(lo, hi)))
        assert b_lo <= b_hi
        for _ in range(20):
            r = robustness(Signal(rng.uniform(lo, hi)), phi)
            assert b_lo - 1e-12 <= r <= b_hi + 1e-12


def test_region_predicate_text_matches_layout_formula():
    lay = default_layout()
    text = parse("(x>2 & x<3 & y>2 & y<3) | (x>4 & x<5 & y>4 & y<5)", 2)
    s = Signal(np.random.default_rng(3).uniform(0, 6, size=(50, 2)))
    blue = lay.label_formula("blue")
    assert np.array_equal(robustness_trace(s, blue), robustness_trace(s, text))
    assert not math.isnan(robustness(s, blue))
