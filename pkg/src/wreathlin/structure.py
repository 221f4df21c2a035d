"""Symmetry structure expressions and their little grammar.

A structure describes how a finite index set is built from symmetric factors:

* ``S(n)``       -- a set of ``n`` interchangeable points (full symmetric group)
* ``C(n)``       -- a ring of ``n`` points (cyclic group)
* ``trivial(n)`` -- ``n`` distinguishable points (trivial group)
* ``prod(A, B)`` -- a grid with outer factor ``A`` and inner factor ``B``
* ``wr(B, A)``   -- ``|A|`` fibers, each a copy of ``B``, permuted by ``A``
                    (hierarchical: inner argument first)

Expressions nest arbitrarily and are whitespace insensitive.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

from .perm import (
    InvalidDegreeError,
    PermGroup,
    cyclic_group,
    direct_product_group,
    symmetric_group,
    trivial_group,
    wreath_product_group,
)


class StructureParseError(ValueError):
    """The structure expression could not be parsed."""


@dataclass(frozen=True)
class Set:
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise InvalidDegreeError(f"S(n) needs n >= 1, got {self.n}")


@dataclass(frozen=True)
class Cycle:
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise InvalidDegreeError(f"C(n) needs n >= 1, got {self.n}")


@dataclass(frozen=True)
class Trivial:
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise InvalidDegreeError(f"trivial(n) needs n >= 1, got {self.n}")


@dataclass(frozen=True)
class Prod:
    outer: "Structure"
    inner: "Structure"


@dataclass(frozen=True)
class Wreath:
    inner: "Structure"
    outer: "Structure"


Structure = Union[Set, Cycle, Trivial, Prod, Wreath]


def degree(expr: Structure) -> int:
    """Number of points the structure's group acts on."""
    if isinstance(expr, (Set, Cycle, Trivial)):
        return expr.n
    if isinstance(expr, Prod):
        return degree(expr.outer) * degree(expr.inner)
    if isinstance(expr, Wreath):
        return degree(expr.outer) * degree(expr.inner)
    raise TypeError(f"not a structure: {expr!r}")


def format_structure(expr: Structure) -> str:
    """Canonical text form, parseable by :func:`parse_structure`.

    >>> format_structure(Wreath(Set(4), Set(3)))
    'wr(S(4),S(3))'
    """
    if isinstance(expr, Set):
        return f"S({expr.n})"
    if isinstance(expr, Cycle):
        return f"C({expr.n})"
    if isinstance(expr, Trivial):
        return f"trivial({expr.n})"
    if isinstance(expr, Prod):
        return f"prod({format_structure(expr.outer)},{format_structure(expr.inner)})"
    if isinstance(expr, Wreath):
        return f"wr({format_structure(expr.inner)},{format_structure(expr.outer)})"
    raise TypeError(f"not a structure: {expr!r}")


_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_]+)|([(),]))")


def _tokenize(text: str) -> list[str]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].isspace():
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise StructureParseError(f"unexpected character at position {pos}: {text[pos:]!r}")
        tokens.append(m.group(1) or m.group(2) or m.group(3))
        pos = m.end()
    return tokens


def parse_structure(text: str) -> Structure:
    """Parse the structure grammar.

    >>> parse_structure(" wr( S(4), S(3) ) ")
    Wreath(inner=Set(n=4), outer=Set(n=3))
    """
    tokens = _tokenize(text)
    if not tokens:
        raise StructureParseError("empty structure expression")
    expr, pos = _parse_expr(tokens, 0)
    if pos != len(tokens):
        raise StructureParseError(f"trailing input after expression: {tokens[pos:]}")
    return expr


def _expect(tokens: list[str], pos: int, token: str) -> int:
    if pos >= len(tokens) or tokens[pos] != token:
        found = tokens[pos] if pos < len(tokens) else "end of input"
        raise StructureParseError(f"expected {token!r}, found {found!r}")
    return pos + 1


def _parse_int(tokens: list[str], pos: int) -> tuple[int, int]:
    if pos >= len(tokens) or not tokens[pos].isdigit():
        found = tokens[pos] if pos < len(tokens) else "end of input"
        raise StructureParseError(f"expected an integer, found {found!r}")
    return int(tokens[pos]), pos + 1


def _parse_expr(tokens: list[str], pos: int) -> tuple[Structure, int]:
    if pos >= len(tokens):
        raise StructureParseError("unexpected end of input")
    head = tokens[pos]
    pos += 1
    if head in ("S", "C", "trivial"):
        pos = _expect(tokens, pos, "(")
        n, pos = _parse_int(tokens, pos)
        pos = _expect(tokens, pos, ")")
        cls = {"S": Set, "C": Cycle, "trivial": Trivial}[head]
        return cls(n), pos
    if head in ("prod", "wr"):
        pos = _expect(tokens, pos, "(")
        first, pos = _parse_expr(tokens, pos)
        pos = _expect(tokens, pos, ",")
        second, pos = _parse_expr(tokens, pos)
        pos = _expect(tokens, pos, ")")
        if head == "prod":
            return Prod(outer=first, inner=second), pos
        return Wreath(inner=first, outer=second), pos
    raise StructureParseError(f"unknown structure head {head!r}")


@lru_cache(maxsize=None)
def group_of(expr: Structure) -> PermGroup:
    """The permutation group realizing the structure's symmetry."""
    if isinstance(expr, Set):
        return symmetric_group(expr.n)
    if isinstance(expr, Cycle):
        return cyclic_group(expr.n)
    if isinstance(expr, Trivial):
        return trivial_group(expr.n)
    if isinstance(expr, Prod):
        return direct_product_group(group_of(expr.outer), group_of(expr.inner))
    if isinstance(expr, Wreath):
        return wreath_product_group(group_of(expr.inner), group_of(expr.outer))
    raise TypeError(f"not a structure: {expr!r}")


def param_count(expr: Structure) -> int:
    """Closed-form free-parameter count of an equivariant map.

    Products multiply; hierarchies add and share one parameter:
    ``wr(B, A)`` costs ``count(B) + count(A) - 1``.  The counts agree with the
    number of weight-sharing orbits whenever every factor is transitive.
    """
    if isinstance(expr, Set):
        return 1 if expr.n == 1 else 2
    if isinstance(expr, Cycle):
        return expr.n
    if isinstance(expr, Trivial):
        return expr.n * expr.n
    if isinstance(expr, Prod):
        return param_count(expr.outer) * param_count(expr.inner)
    if isinstance(expr, Wreath):
        return param_count(expr.inner) + param_count(expr.outer) - 1
    raise TypeError(f"not a structure: {expr!r}")


def is_transitive(expr: Structure) -> bool:
    """Whether the structure's group moves every point to every other."""
    if isinstance(expr, (Set, Cycle)):
        return True
    if isinstance(expr, Trivial):
        return expr.n == 1
    if isinstance(expr, (Prod, Wreath)):
        return is_transitive(expr.outer) and is_transitive(expr.inner)
    raise TypeError(f"not a structure: {expr!r}")


def reassociate_wreaths(expr: Structure) -> Structure:
    """Rewrite every ``wr(wr(A,B),C)`` into ``wr(A,wr(B,C))``, recursively.

    The rewritten expression describes the same index set; equality of the
    resulting sharing patterns is the associativity check used by ``verify``.
    """
    if isinstance(expr, (Set, Cycle, Trivial)):
        return expr
    if isinstance(expr, Prod):
        return Prod(reassociate_wreaths(expr.outer), reassociate_wreaths(expr.inner))
    inner = reassociate_wreaths(expr.inner)
    outer = reassociate_wreaths(expr.outer)
    if isinstance(inner, Wreath):
        # (A wr B) wr C  ->  A wr (B wr C)
        return reassociate_wreaths(Wreath(inner.inner, Wreath(inner.outer, outer)))
    return Wreath(inner, outer)
