"""Random formula / signal generators shared by the property tests."""
import numpy as np
from hypothesis import strategies as st

from stlrl.stl import And, Finally, Globally, Not, Or, Predicate, Until


def random_predicate(rng, dim=2):
    coeffs = tuple(float(c) for c in rng.integers(-2, 3, size=dim))
    if not any(coeffs):
        coeffs = (1.0,) + coeffs[1:]
    return Predicate(coeffs, float(np.round(rng.uniform(-2, 2), 3)), "<" if rng.random() < 0.5 else ">",
                     float(np.round(rng.uniform(-1, 1), 3)))


def random_formula(rng, depth=4, dim=2):
    """Random formula of depth at most ``depth`` with intervals inside [0, 5)."""
    if depth <= 1 or rng.random() < 0.2:
        return random_predicate(rng, dim)
    kind = rng.integers(6)
    sub = lambda: random_formula(rng, depth - 1, dim)
    a = int(rng.integers(0, 3))
    b = int(rng.integers(a + 1, 5))
    if kind == 0:
        return Not(sub())
    if kind == 1:
        return And(sub(), sub())
    if kind == 2:
        return Or(sub(), sub())
    if kind == 3:
        return Finally(sub(), a, b)
    if kind == 4:
        return Globally(sub(), a, b)
    return Until(sub(), sub(), a, b)


def random_signal(rng, n, dim=2):
    return rng.uniform(-3, 3, size=(n, dim))


# hypothesis strategies ------------------------------------------------------

_num = st.floats(-5, 5, allow_nan=False, allow_infinity=False).map(lambda v: round(v, 3))
_coeffs = st.tuples(st.integers(-3, 3), st.integers(-3, 3)).filter(any).map(
    lambda c: tuple(float(v) for v in c))


def _interval():
    return st.integers(0, 4).flatmap(lambda a: st.tuples(st.just(a), st.integers(a + 1, a + 5)))


predicates = st.builds(Predicate, _coeffs, _num, st.sampled_from(["<", ">"]), _num)


def _extend(children):
    return st.one_of(
        st.builds(Not, children),
        st.builds(And, children, children),
        st.builds(Or, children, children),
        st.builds(lambda f, ab: Finally(f, *ab), children, _interval()),
        st.builds(lambda f, ab: Globally(f, *ab), children, _interval()),
        st.builds(lambda l, r, ab: Until(l, r, *ab), children, children, _interval()),
    )


formulas = st.recursive(predicates, _extend, max_leaves=6)
