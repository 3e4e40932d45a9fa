"""Abstract syntax for the discrete-time STL fragment.

Formulae are immutable dataclasses, so structural equality and hashing come
for free. Temporal intervals are half-open integer sample ranges ``[a, b)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence, Tuple, Union


class FormulaError(ValueError):
    """Raised for structurally invalid formulae."""


@dataclass(frozen=True)
class Predicate:
    """Affine predicate ``coeffs . s + offset  <rel>  threshold``.

    ``rel`` is ``"<"`` or ``">"``; ``f > d`` is shorthand for ``!(f < d)``
    and only changes the sign of the robustness.
    """

    coeffs: Tuple[float, ...]
    threshold: float
    rel: str = "<"
    offset: float = 0.0

    def __post_init__(self):
        if self.rel not in ("<", ">"):
            raise FormulaError(f"unknown relation {self.rel!r}")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        object.__setattr__(self, "threshold", float(self.threshold))
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def dim(self) -> int:
        return len(self.coeffs)


@dataclass(frozen=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


def _check_interval(a: int, b: int):
    if not (isinstance(a, int) and isinstance(b, int)):
        raise FormulaError(f"interval bounds must be integers, got [{a!r},{b!r})")
    if a < 0 or b <= a:
        raise FormulaError(f"interval [{a},{b}) must satisfy 0 <= a < b")


@dataclass(frozen=True)
class Finally:
    arg: "Formula"
    a: int
    b: int

    def __post_init__(self):
        _check_interval(self.a, self.b)


@dataclass(frozen=True)
class Globally:
    arg: "Formula"
    a: int
    b: int

    def __post_init__(self):
        _check_interval(self.a, self.b)


@dataclass(frozen=True)
class Until:
    left: "Formula"
    right: "Formula"
    a: int
    b: int

    def __post_init__(self):
        _check_interval(self.a, self.b)


Formula = Union[Predicate, Not, And, Or, Finally, Globally, Until]


def children(phi: Formula) -> Tuple[Formula, ...]:
    if isinstance(phi, Predicate):
        return ()
    if isinstance(phi, (Not, Finally, Globally)):
        return (phi.arg,)
    return (phi.left, phi.right)


def walk(phi: Formula) -> Iterator[Formula]:
    stack = [phi]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def depth(phi: Formula) -> int:
    return 1 + max((depth(c) for c in children(phi)), default=0)


def horizon(phi: Formula) -> int:
    """Horizon length: predicates 0, boolean nodes max of children,
    ``F/G[a,b) p`` -> hrz(p) + b, ``p U[a,b) q`` -> max(hrz(p)+b-1, hrz(q)+b)."""
    if isinstance(phi, Predicate):
        return 0
    if isinstance(phi, Not):
        return horizon(phi.arg)
    if isinstance(phi, (And, Or)):
        return max(horizon(phi.left), horizon(phi.right))
    if isinstance(phi, (Finally, Globally)):
        return horizon(phi.arg) + phi.b
    if isinstance(phi, Until):
        return max(horizon(phi.left) + phi.b - 1, horizon(phi.right) + phi.b)
    raise TypeError(f"not a formula: {phi!r}")


def window_length(phi: Formula) -> int:
    """Number of samples needed to evaluate ``phi`` at one time index."""
    return max(horizon(phi), 1)


def dimension(phi: Formula) -> int | None:
    dims = {node.dim for node in walk(phi) if isinstance(node, Predicate)}
    if len(dims) > 1:
        raise FormulaError(f"predicates disagree on signal dimension: {sorted(dims)}")
    return dims.pop() if dims else None


def split_top_level(phi: Formula) -> Tuple[str, int, Formula]:
    """Split ``F[0,T) psi`` / ``G[0,T) psi`` into ``(outer, T, psi)``."""
    if isinstance(phi, (Finally, Globally)) and phi.a == 0:
        return ("F" if isinstance(phi, Finally) else "G"), phi.b, phi.arg
    raise FormulaError("top-level formula must have the form F[0,T)(psi) or G[0,T)(psi)")


# ---------------------------------------------------------------------------
# canonical printer

DEFAULT_NAMES = ("x", "y", "z", "w")


def variable_names(dim: int) -> Tuple[str, ...]:
    if dim <= len(DEFAULT_NAMES):
        return DEFAULT_NAMES[:dim]
    return tuple(f"x{i}" for i in range(dim))


def _num(v: float) -> str:
    return repr(float(v))


def _affine_str(coeffs: Sequence[float], offset: float, names: Sequence[str]) -> str:
    parts = []
    for c, name in zip(coeffs, names):
        if c == 0.0:
            continue
        if c == 1.0:
            term = name
        elif c == -1.0:
            term = f"-{name}"
        else:
            term = f"{_num(c)}*{name}"
        parts.append(term)
    if offset != 0.0 or not parts:
        parts.append(_num(offset))
    return " + ".join(parts)


def to_string(phi: Formula, names: Sequence[str] | None = None) -> str:
    """Fully parenthesized text that :func:`stlrl.stl.parse` maps back to ``phi``."""
    if isinstance(phi, Predicate):
        nm = names if names is not None else variable_names(phi.dim)
        return f"({_affine_str(phi.coeffs, phi.offset, nm)} {phi.rel} {_num(phi.threshold)})"
    if isinstance(phi, Not):
        return f"!{to_string(phi.arg, names)}"
    if isinstance(phi, And):
        return f"({to_string(phi.left, names)} & {to_string(phi.right, names)})"
    if isinstance(phi, Or):
        return f"({to_string(phi.left, names)} | {to_string(phi.right, names)})"
    if isinstance(phi, Finally):
        return f"F[{phi.a},{phi.b})({to_string(phi.arg, names)})"
    if isinstance(phi, Globally):
        return f"G[{phi.a},{phi.b})({to_string(phi.arg, names)})"
    if isinstance(phi, Until):
        return f"({to_string(phi.left, names)} U[{phi.a},{phi.b}) {to_string(phi.right, names)})"
    raise TypeError(f"not a formula: {phi!r}")
