"""Recursive-descent parser for the STL surface syntax.

Grammar (lowest to highest precedence)::

    formula   := or_expr
    or_expr   := and_expr ('|' and_expr)*
    and_expr  := until_expr ('&' until_expr)*
    until_expr:= unary ('U' interval unary)?
    unary     := '!' unary
               | ('F' | 'G') interval unary
               | '(' formula ')'
               | alias
               | affine ('<' | '>') affine
    interval  := '[' INT ',' INT ')'
    affine    := term (('+' | '-') term)*
    term      := '-'? (NUMBER ('*' VAR)? | VAR)

Binary operators associate to the left.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple

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
    split_top_level,
    variable_names,
    walk,
)


class FormulaSyntaxError(FormulaError):
    def __init__(self, message: str, pos: int, text: str = ""):
        self.pos = pos
        self.text = text
        super().__init__(f"{message} at position {pos}")


class FormulaDimensionError(FormulaError):
    pass


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[()\[\],!&|<>+\-*])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"F", "G", "U"}


@dataclass
class _Tok:
    kind: str
    value: str
    pos: int


def tokenize(text: str) -> List[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            value = m.group()
            if kind == "ident" and value in _KEYWORDS:
                kind = "kw"
            toks.append(_Tok(kind, value, pos))
        pos = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


def _var_index(name: str, names: Sequence[str], dim: int) -> int | None:
    if name in names:
        return names.index(name)
    m = re.fullmatch(r"x(\d+)", name)
    if m:
        idx = int(m.group(1))
        if idx >= dim:
            raise FormulaDimensionError(f"variable {name} exceeds signal dimension {dim}")
        return idx
    if name in ("x", "y", "z", "w") and name not in names:
        raise FormulaDimensionError(f"variable {name} is not available for signal dimension {dim}")
    return None


class _Parser:
    def __init__(self, text: str, dim: int, names: Sequence[str], aliases: Mapping[str, Formula]):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0
        self.dim = dim
        self.names = tuple(names)
        self.aliases = aliases

    # -- token helpers
    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, message: str, tok: _Tok | None = None):
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.value)
        raise FormulaSyntaxError(f"{message}, found {found}", tok.pos, self.text)

    def accept(self, value: str) -> bool:
        if self.tok.kind in ("op", "kw") and self.tok.value == value:
            self.i += 1
            return True
        return False

    def expect(self, value: str):
        if not self.accept(value):
            self.error(f"expected {value!r}")

    # -- grammar
    def parse(self) -> Formula:
        phi = self.formula()
        if self.tok.kind != "eof":
            self.error("unexpected trailing input")
        return phi

    def formula(self) -> Formula:
        node = self.and_expr()
        while self.accept("|"):
            node = Or(node, self.and_expr())
        return node

    def and_expr(self) -> Formula:
        node = self.until_expr()
        while self.accept("&"):
            node = And(node, self.until_expr())
        return node

    def until_expr(self) -> Formula:
        node = self.unary()
        if self.accept("U"):
            a, b = self.interval()
            node = Until(node, self.unary(), a, b)
        return node

    def unary(self) -> Formula:
        tok = self.tok
        if self.accept("!"):
            return Not(self.unary())
        if tok.kind == "kw" and tok.value in ("F", "G"):
            self.i += 1
            a, b = self.interval()
            arg = self.unary()
            return Finally(arg, a, b) if tok.value == "F" else Globally(arg, a, b)
        if self.accept("("):
            node = self.formula()
            self.expect(")")
            return node
        if tok.kind == "ident" and tok.value in self.aliases:
            self.i += 1
            return self.aliases[tok.value]
        if tok.kind in ("ident", "num") or (tok.kind == "op" and tok.value == "-"):
            return self.predicate()
        self.error("expected a formula")

    def interval(self) -> Tuple[int, int]:
        self.expect("[")
        a = self.integer()
        self.expect(",")
        b_tok = self.tok
        b = self.integer()
        self.expect(")")
        if b <= a:
            raise FormulaSyntaxError(f"empty interval [{a},{b})", b_tok.pos, self.text)
        return a, b

    def integer(self) -> int:
        tok = self.tok
        if tok.kind != "num" or not tok.value.isdigit():
            self.error("expected a non-negative integer")
        self.i += 1
        return int(tok.value)

    def predicate(self) -> Predicate:
        lhs, lhs_const = self.affine()
        tok = self.tok
        if not (self.accept("<") or self.accept(">")):
            self.error("expected '<' or '>'")
        rhs, rhs_const = self.affine()
        coeffs = [l - r for l, r in zip(lhs, rhs)]
        return Predicate(tuple(coeffs), rhs_const, tok.value, lhs_const)

    def affine(self) -> Tuple[List[float], float]:
        coeffs = [0.0] * self.dim
        const = 0.0
        sign = 1.0
        first = True
        while True:
            if not first:
                if self.accept("+"):
                    sign = 1.0
                elif self.accept("-"):
                    sign = -1.0
                else:
                    break
            first = False
            while self.accept("-"):
                sign = -sign
            tok = self.tok
            if tok.kind == "num":
                self.i += 1
                value = float(tok.value)
                if self.accept("*"):
                    idx = self.variable()
                    coeffs[idx] += sign * value
                else:
                    const += sign * value
            elif tok.kind == "ident":
                idx = self.variable()
                coeffs[idx] += sign * 1.0
            else:
                self.error("expected a number or variable")
            sign = 1.0
        return coeffs, const

    def variable(self) -> int:
        tok = self.tok
        if tok.kind != "ident":
            self.error("expected a variable")
        try:
            idx = _var_index(tok.value, self.names, self.dim)
        except FormulaDimensionError as exc:
            raise FormulaDimensionError(f"{exc} at position {tok.pos}") from None
        if idx is None:
            self.error("unknown identifier")
        self.i += 1
        return idx


def parse(
    text: str,
    dim: int = 2,
    *,
    aliases: Mapping[str, Formula] | None = None,
    names: Sequence[str] | None = None,
    top_level: bool = False,
) -> Formula:
    """Parse ``text`` into a :data:`Formula` over ``dim``-dimensional signals.

    ``aliases`` maps names to already-parsed sub-formulae; references are
    expanded in place. With ``top_level=True`` the result must have the shape
    ``F[0,T)(psi)`` or ``G[0,T)(psi)``.
    """
    names = tuple(names) if names is not None else variable_names(dim)
    if len(names) != dim:
        raise FormulaDimensionError(f"{len(names)} variable names given for dimension {dim}")
    aliases = dict(aliases or {})
    clash = set(aliases) & (set(names) | _KEYWORDS)
    if clash:
        raise FormulaError(f"alias names clash with variables/keywords: {sorted(clash)}")
    phi = _Parser(text, dim, names, aliases).parse()
    for node_dim in {p.dim for p in _predicates(phi)}:
        if node_dim != dim:
            raise FormulaDimensionError(f"alias predicate of dimension {node_dim} used with dimension {dim}")
    if top_level:
        split_top_level(phi)
    return phi


def _predicates(phi: Formula):
    return (n for n in walk(phi) if isinstance(n, Predicate))


_ALIAS_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z_0-9]*)\s*:=\s*(.+?)\s*$")


def parse_bindings(
    bindings: Sequence[Tuple[str, str]] | Mapping[str, str],
    dim: int = 2,
    names: Sequence[str] | None = None,
) -> Dict[str, Formula]:
    """Parse ``name := formula`` bindings in order; later ones may use earlier ones."""
    items = bindings.items() if isinstance(bindings, Mapping) else bindings
    out: Dict[str, Formula] = {}
    for name, text in items:
        if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", name) or name in _KEYWORDS:
            raise FormulaError(f"invalid alias name {name!r}")
        out[name] = parse(text, dim, aliases=out, names=names)
    return out


def parse_document(text: str, dim: int = 2, aliases: Mapping[str, Formula] | None = None, **kw) -> Formula:
    """Parse a formula file: ``name := ...`` lines followed by one formula.

    Blank lines and ``#`` comments are ignored.
    """
    bound = dict(aliases or {})
    body = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        m = _ALIAS_RE.match(line)
        if m:
            bound[m.group(1)] = parse(m.group(2), dim, aliases=bound, names=kw.get("names"))
        else:
            body.append(line)
    if not body:
        raise FormulaSyntaxError("no formula found", 0, text)
    return parse(" ".join(body), dim, aliases=bound, **kw)
