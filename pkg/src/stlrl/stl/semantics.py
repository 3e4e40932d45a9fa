"""Boolean and quantitative semantics of the discrete-time fragment.

``satisfies`` and ``robustness`` are direct recursive evaluators and serve as
the reference. ``robustness_trace`` / ``satisfaction_trace`` evaluate every
admissible start index at once with numpy and are what the learner uses.
``robustness_bounds`` propagates intervals through the same recursion.

Until uses ``t'' in [t, t']`` for the left operand in both semantics.
"""
from __future__ import annotations

from typing import Sequence, Tuple

import numpy as np

from .formula import (
    And,
    Finally,
    Formula,
    Globally,
    Not,
    Or,
    Predicate,
    Until,
    dimension,
    window_length,
)
from .signal import Signal, WindowError


def affine_value(pred: Predicate, x: np.ndarray) -> np.ndarray:
    """``coeffs . x + offset`` over the last axis, in a fixed summation order."""
    x = np.asarray(x, dtype=float)
    acc = np.zeros(x.shape[:-1]) + pred.offset
    for i, c in enumerate(pred.coeffs):
        if c != 0.0:
            acc = acc + c * x[..., i]
    return acc


def predicate_robustness(pred: Predicate, x: np.ndarray) -> np.ndarray:
    f = affine_value(pred, x)
    return pred.threshold - f if pred.rel == "<" else f - pred.threshold


def _check(s: Signal, phi: Formula, t: int) -> int:
    d = dimension(phi)
    if d is not None and d != s.dim:
        raise ValueError(f"formula dimension {d} does not match signal dimension {s.dim}")
    w = window_length(phi)
    if t < s.t0 or t + w - 1 > s.t_end:
        raise WindowError(
            f"evaluating at t={t} needs samples [{t},{t + w - 1}], signal covers [{s.t0},{s.t_end}]"
        )
    return t - s.t0


def satisfies(s: Signal, phi: Formula, t: int | None = None) -> bool:
    t = s.t0 if t is None else t
    k = _check(s, phi, t)
    return _sat(s.samples, phi, k)


def _sat(x: np.ndarray, phi: Formula, t: int) -> bool:
    if isinstance(phi, Predicate):
        f = float(affine_value(phi, x[t]))
        return f < phi.threshold if phi.rel == "<" else f > phi.threshold
    if isinstance(phi, Not):
        return not _sat(x, phi.arg, t)
    if isinstance(phi, And):
        return _sat(x, phi.left, t) and _sat(x, phi.right, t)
    if isinstance(phi, Or):
        return _sat(x, phi.left, t) or _sat(x, phi.right, t)
    if isinstance(phi, Finally):
        return any(_sat(x, phi.arg, u) for u in range(t + phi.a, t + phi.b))
    if isinstance(phi, Globally):
        return all(_sat(x, phi.arg, u) for u in range(t + phi.a, t + phi.b))
    if isinstance(phi, Until):
        for u in range(t + phi.a, t + phi.b):
            if _sat(x, phi.right, u) and all(_sat(x, phi.left, v) for v in range(t, u + 1)):
                return True
        return False
    raise TypeError(f"not a formula: {phi!r}")


def robustness(s: Signal, phi: Formula, t: int | None = None) -> float:
    t = s.t0 if t is None else t
    k = _check(s, phi, t)
    return _rob(s.samples, phi, k)


def _rob(x: np.ndarray, phi: Formula, t: int) -> float:
    if isinstance(phi, Predicate):
        return float(predicate_robustness(phi, x[t]))
    if isinstance(phi, Not):
        return -_rob(x, phi.arg, t)
    if isinstance(phi, And):
        return min(_rob(x, phi.left, t), _rob(x, phi.right, t))
    if isinstance(phi, Or):
        return max(_rob(x, phi.left, t), _rob(x, phi.right, t))
    if isinstance(phi, Finally):
        return max(_rob(x, phi.arg, u) for u in range(t + phi.a, t + phi.b))
    if isinstance(phi, Globally):
        return min(_rob(x, phi.arg, u) for u in range(t + phi.a, t + phi.b))
    if isinstance(phi, Until):
        best = -np.inf
        left_min = np.inf
        for v in range(t, t + phi.b):
            left_min = min(left_min, _rob(x, phi.left, v))
            if v >= t + phi.a:
                best = max(best, min(_rob(x, phi.right, v), left_min))
        return float(best)
    raise TypeError(f"not a formula: {phi!r}")


# ---------------------------------------------------------------------------
# vectorized traces

def _trace(x: np.ndarray, phi: Formula, boolean: bool) -> np.ndarray:
    """Values at start indices ``0 .. n - need(phi)``, where ``need`` is the
    exact sample requirement (never larger than ``window_length``)."""
    if isinstance(phi, Predicate):
        if boolean:
            f = affine_value(phi, x)
            return f < phi.threshold if phi.rel == "<" else f > phi.threshold
        return predicate_robustness(phi, x)
    if isinstance(phi, Not):
        r = _trace(x, phi.arg, boolean)
        return ~r if boolean else -r
    if isinstance(phi, (And, Or)):
        l = _trace(x, phi.left, boolean)
        r = _trace(x, phi.right, boolean)
        n = min(len(l), len(r))
        op = np.minimum if isinstance(phi, And) else np.maximum
        return op(l[:n], r[:n])
    if isinstance(phi, (Finally, Globally)):
        r = _trace(x, phi.arg, boolean)
        n = len(r) - phi.b + 1
        if n <= 0:
            return r[:0]
        win = np.lib.stride_tricks.sliding_window_view(r, phi.b - phi.a)[phi.a : phi.a + n]
        return win.max(axis=1) if isinstance(phi, Finally) else win.min(axis=1)
    if isinstance(phi, Until):
        l = _trace(x, phi.left, boolean)
        r = _trace(x, phi.right, boolean)
        n = min(len(l), len(r)) - phi.b + 1
        if n <= 0:
            return r[:0]
        best = np.full(n, False) if boolean else np.full(n, -np.inf)
        left_min = np.full(n, True) if boolean else np.full(n, np.inf)
        for j in range(phi.b):
            left_min = np.minimum(left_min, l[j : j + n])
            if j >= phi.a:
                best = np.maximum(best, np.minimum(r[j : j + n], left_min))
        return best
    raise TypeError(f"not a formula: {phi!r}")


def robustness_trace(s: Signal | np.ndarray, phi: Formula) -> np.ndarray:
    """Robustness at every start index whose window fits in the signal.

    Entry ``k`` is the robustness at time ``t0 + k``; the result has
    ``len(s) - window_length(phi) + 1`` entries (possibly zero).
    """
    x = s.samples if isinstance(s, Signal) else np.asarray(s, dtype=float)
    n = x.shape[0] - window_length(phi) + 1
    return np.asarray(_trace(x, phi, False), dtype=float)[: max(n, 0)]


def satisfaction_trace(s: Signal | np.ndarray, phi: Formula) -> np.ndarray:
    x = s.samples if isinstance(s, Signal) else np.asarray(s, dtype=float)
    n = x.shape[0] - window_length(phi) + 1
    return np.asarray(_trace(x, phi, True), dtype=bool)[: max(n, 0)]


# ---------------------------------------------------------------------------
# interval bounds over boxes

Box = Tuple[np.ndarray, np.ndarray]


def predicate_bounds(pred: Predicate, lo: np.ndarray, hi: np.ndarray) -> Tuple[float, float]:
    """Exact range of the predicate robustness over the closed box ``[lo, hi]``."""
    fmin = fmax = pred.offset
    for c, a, b in zip(pred.coeffs, lo, hi):
        fmin += min(c * a, c * b)
        fmax += max(c * a, c * b)
    if pred.rel == "<":
        return pred.threshold - fmax, pred.threshold - fmin
    return fmin - pred.threshold, fmax - pred.threshold


def robustness_bounds(phi: Formula, boxes: Sequence[Box], t: int = 0) -> Tuple[float, float]:
    """Bounds ``(lo, hi)`` on ``robustness(s, phi, t)`` over all signals whose
    k-th sample lies in ``boxes[k]``. Sound, not necessarily tight."""
    w = window_length(phi)
    if t < 0 or t + w > len(boxes):
        raise WindowError(f"need boxes [{t},{t + w - 1}], have {len(boxes)}")
    return _bounds(phi, boxes, t, {})


def _bounds(phi, boxes, t, memo):
    key = (id(phi), t)
    if key in memo:
        return memo[key]
    if isinstance(phi, Predicate):
        out = predicate_bounds(phi, *boxes[t])
    elif isinstance(phi, Not):
        lo, hi = _bounds(phi.arg, boxes, t, memo)
        out = (-hi, -lo)
    elif isinstance(phi, (And, Or)):
        a = _bounds(phi.left, boxes, t, memo)
        b = _bounds(phi.right, boxes, t, memo)
        op = min if isinstance(phi, And) else max
        out = (op(a[0], b[0]), op(a[1], b[1]))
    elif isinstance(phi, (Finally, Globally)):
        vals = [_bounds(phi.arg, boxes, u, memo) for u in range(t + phi.a, t + phi.b)]
        op = max if isinstance(phi, Finally) else min
        out = (op(v[0] for v in vals), op(v[1] for v in vals))
    elif isinstance(phi, Until):
        best = (-np.inf, -np.inf)
        left = (np.inf, np.inf)
        for v in range(t, t + phi.b):
            lb = _bounds(phi.left, boxes, v, memo)
            left = (min(left[0], lb[0]), min(left[1], lb[1]))
            if v >= t + phi.a:
                rb = _bounds(phi.right, boxes, v, memo)
                cand = (min(rb[0], left[0]), min(rb[1], left[1]))
                best = (max(best[0], cand[0]), max(best[1], cand[1]))
        out = best
    else:
        raise TypeError(f"not a formula: {phi!r}")
    memo[key] = (float(out[0]), float(out[1]))
    return memo[key]
