"""Weight-sharing patterns and commutant bases of permutation actions.

A linear map ``W`` commutes with every permutation matrix of a group exactly
when ``W[g(i), g(j)] == W[i, j]`` for all generators ``g``, i.e. when ``W`` is
constant on the orbits of the pair action.  This module computes those orbit
patterns three independent ways:

* :func:`orbit_pattern` -- union-find closure over index pairs, generators only;
* :func:`burnside_count` -- dimension count ``(1/|G|) * sum_g trace(P_g)**2``
  over the enumerated group;
* :func:`commutant_basis` -- exact rational nullspace of the stacked
  commutation constraints, one block per generator.

Closed forms for product and hierarchical actions (:func:`kron_pattern`,
:func:`wreath_pattern`) compose patterns without touching the group itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import rational
from .perm import PermGroup, Permutation, enumerate_group, fixed_point_count
from .structure import Cycle, Prod, Set, Structure, Trivial, Wreath, degree, group_of

DEFAULT_ORACLE_MAX_DEGREE = 64


class DegreeTooLargeError(ValueError):
    """The exact-arithmetic oracle was asked for a degree beyond its bound."""


@dataclass(frozen=True, eq=False)
class SharingPattern:
    """An ``n x n`` matrix of orbit ids with canonical labels.

    Labels are contiguous ``0 .. num_orbits-1`` and increase in order of first
    appearance when the matrix is scanned row-major.
    """

    orbit_id: np.ndarray
    num_orbits: int

    def __post_init__(self) -> None:
        ids = np.ascontiguousarray(self.orbit_id, dtype=np.int64)
        if ids.ndim != 2 or ids.shape[0] != ids.shape[1]:
            raise ValueError(f"orbit_id must be square, got shape {ids.shape}")
        uniq, first = np.unique(ids.ravel(), return_index=True)
        if len(uniq) != self.num_orbits or not np.array_equal(uniq, np.arange(len(uniq))):
            raise ValueError("orbit ids must be contiguous 0..num_orbits-1")
        if np.any(np.diff(first) <= 0):
            raise ValueError("orbit ids must be canonical (first occurrence increasing)")
        ids.setflags(write=False)
        object.__setattr__(self, "orbit_id", ids)

    @property
    def n(self) -> int:
        return self.orbit_id.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SharingPattern):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.orbit_id, other.orbit_id)


@dataclass(frozen=True)
class CommutantBasis:
    """An exact rational basis of the commutant algebra of a group action."""

    n: int
    bases: tuple[np.ndarray, ...]  # object arrays of Fraction, each n x n

    @property
    def size(self) -> int:
        return len(self.bases)


def canonical_pattern(raw: np.ndarray) -> SharingPattern:
    """Relabel an arbitrary id matrix into canonical first-occurrence order."""
    raw = np.asarray(raw)
    flat = raw.ravel()
    uniq, first = np.unique(flat, return_index=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[order] = np.arange(len(uniq))
    ids = rank[np.searchsorted(uniq, flat)].reshape(raw.shape)
    return SharingPattern(orbit_id=ids, num_orbits=len(uniq))


class _UnionFind:
    """Union-find with path halving over ``0 .. size-1``."""

    def __init__(self, size: int) -> None:
        self.parent = list(range(size))

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def orbit_pattern(group: PermGroup) -> SharingPattern:
    """Orbits of the pair action, from the generators alone."""
    n = group.degree
    uf = _UnionFind(n * n)
    for g in group.generators:
        img = g.images
        for i in range(n):
            base = i * n
            gbase = img[i] * n
            for j in range(n):
                uf.union(base + j, gbase + img[j])
    labels = np.fromiter((uf.find(x) for x in range(n * n)), dtype=np.int64, count=n * n)
    return canonical_pattern(labels.reshape(n, n))


def burnside_count(group: PermGroup, limit: int | None = None) -> int:
    """Number of pair orbits: ``(1/|G|) * sum_g fix(g)**2`` over all elements."""
    elements = enumerate_group(group, limit)
    total = sum(fixed_point_count(g) ** 2 for g in elements)
    if total % len(elements) != 0:
        raise ArithmeticError("fixed-point sum not divisible by group order")
    return total // len(elements)


def kron_pattern(outer: SharingPattern, inner: SharingPattern) -> SharingPattern:
    """Pattern of a direct-product action: ids pair up factor ids.

    ``num_orbits == outer.num_orbits * inner.num_orbits``.
    """
    raw = (
        outer.orbit_id[:, None, :, None] * np.int64(inner.num_orbits)
        + inner.orbit_id[None, :, None, :]
    )
    n = outer.n * inner.n
    return canonical_pattern(raw.reshape(n, n))


def wreath_pattern(outer: SharingPattern, inner: SharingPattern) -> SharingPattern:
    """Pattern of a hierarchical action on ``P`` fibers of size ``Q``.

    Off-diagonal blocks ``(p, p')`` carry the outer orbit id of ``(p, p')``
    broadcast over the whole block; diagonal blocks carry the inner pattern,
    shared across fibers.  The outer diagonal directions are absorbed into the
    span of the inner ones, so for transitive factors
    ``num_orbits == outer.num_orbits + inner.num_orbits - 1``.
    """
    P, Q = outer.n, inner.n
    raw = np.kron(outer.orbit_id + np.int64(inner.num_orbits), np.ones((Q, Q), dtype=np.int64))
    for p in range(P):
        raw[p * Q:(p + 1) * Q, p * Q:(p + 1) * Q] = inner.orbit_id
    return canonical_pattern(raw)


def commutant_basis(group: PermGroup, max_degree: int = DEFAULT_ORACLE_MAX_DEGREE) -> CommutantBasis:
    """Exact rational basis of all matrices commuting with the group action.

    Solves the stacked system ``P_g W - W P_g = 0`` (one block per generator)
    by Gauss-Jordan elimination over the rationals.  Guarded by ``max_degree``
    because the solve works on ``degree**2`` unknowns.
    """
    n = group.degree
    if n > max_degree:
        raise DegreeTooLargeError(
            f"degree {n} exceeds the oracle bound {max_degree}; "
            "raise max_degree explicitly to override"
        )
    one = Fraction(1)
    rows: list[dict[int, Fraction]] = []
    seen: set[tuple[int, int]] = set()
    for g in group.generators:
        img = g.images
        for i in range(n):
            for j in range(n):
                a = i * n + j
                b = img[i] * n + img[j]
                if a == b:
                    continue
                key = (a, b) if a < b else (b, a)
                if key in seen:
                    continue
                seen.add(key)
                rows.append({a: one, b: -one})
    vectors = rational.nullspace(rows, n * n)
    bases = []
    for vec in vectors:
        mat = np.empty((n, n), dtype=object)
        for i in range(n):
            for j in range(n):
                mat[i, j] = vec[i * n + j]
        mat.setflags(write=False)
        bases.append(mat)
    return CommutantBasis(n=n, bases=tuple(bases))


def materialize(pattern: SharingPattern, weights: np.ndarray) -> np.ndarray:
    """Dense matrix with entry ``weights[orbit_id[i, j]]``."""
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (pattern.num_orbits,):
        raise ValueError(f"need {pattern.num_orbits} weights, got shape {w.shape}")
    return w[pattern.orbit_id]


def commutes_exactly(matrix: np.ndarray, g: Permutation) -> bool:
    """Whether ``matrix`` commutes with the permutation, checked by reindexing.

    ``P_g W == W P_g`` is equivalent to ``W[g(i), g(j)] == W[i, j]``, which
    involves no arithmetic at all.
    """
    img = np.asarray(g.images)
    return np.array_equal(matrix, matrix[np.ix_(img, img)])


@lru_cache(maxsize=32)
def pattern_of_structure(expr: Structure) -> SharingPattern:
    """Sharing pattern of a structure: groups for leaves, closed forms above."""
    if isinstance(expr, (Set, Cycle, Trivial)):
        return orbit_pattern(group_of(expr))
    if isinstance(expr, Prod):
        return kron_pattern(pattern_of_structure(expr.outer), pattern_of_structure(expr.inner))
    if isinstance(expr, Wreath):
        return wreath_pattern(pattern_of_structure(expr.outer), pattern_of_structure(expr.inner))
    raise TypeError(f"not a structure: {expr!r}")


def structure_orbit_count(expr: Structure) -> int:
    """``pattern_of_structure(expr).num_orbits`` without building the matrix."""
    return _orbit_counts(expr)[0]


@lru_cache(maxsize=None)
def _orbit_counts(expr: Structure) -> tuple[int, int]:
    """(total orbit count, count of orbits containing off-diagonal entries)."""
    if isinstance(expr, Set):
        return (1, 0) if expr.n == 1 else (2, 1)
    if isinstance(expr, Cycle):
        return expr.n, expr.n - 1
    if isinstance(expr, Trivial):
        return expr.n * expr.n, expr.n * expr.n - expr.n
    if isinstance(expr, Prod):
        ca, oa = _orbit_counts(expr.outer)
        cb, ob = _orbit_counts(expr.inner)
        # a pair orbit sits entirely on the diagonal iff both factors do
        return ca * cb, ca * cb - (ca - oa) * (cb - ob)
    if isinstance(expr, Wreath):
        ca, oa = _orbit_counts(expr.outer)
        cb, ob = _orbit_counts(expr.inner)
        return cb + oa, ob + oa
    raise TypeError(f"not a structure: {expr!r}")


def pattern_refines(fine: SharingPattern, coarse: SharingPattern) -> bool:
    """Whether every orbit of ``fine`` carries a single ``coarse`` id."""
    if fine.n != coarse.n:
        raise ValueError("patterns act on different index sets")
    pairs = fine.orbit_id.ravel() * np.int64(coarse.num_orbits) + coarse.orbit_id.ravel()
    return len(np.unique(pairs)) == fine.num_orbits


def constant_on_orbits(matrix: np.ndarray, pattern: SharingPattern) -> bool:
    """Exact check that ``matrix`` lies in the span of the pattern's orbits.

    Works entrywise, so it is exact for Fraction-valued matrices; the residual
    of projecting onto the pattern span is zero iff this holds.
    """
    if matrix.shape != (pattern.n, pattern.n):
        raise ValueError("matrix and pattern shapes differ")
    values: dict[int, object] = {}
    ids = pattern.orbit_id
    for i in range(pattern.n):
        for j in range(pattern.n):
            o = int(ids[i, j])
            v = matrix[i, j]
            if o in values:
                if values[o] != v:
                    return False
            else:
                values[o] = v
    return True


def pattern_csv(pattern: SharingPattern) -> str:
    """Orbit ids as CSV, one matrix row per line."""
    lines = [",".join(str(v) for v in row) for row in pattern.orbit_id]
    return "\n".join(lines) + "\n"


def pattern_pgm(pattern: SharingPattern) -> str:
    """Plain (P2) PGM image of the pattern, one pixel per matrix entry.

    Orbit ids map to evenly spaced gray levels so distinct orbits render as
    distinct grays.
    """
    n = pattern.n
    spread = max(1, pattern.num_orbits - 1)
    gray = (pattern.orbit_id * 255) // spread
    lines = ["P2", f"{n} {n}", "255"]
    lines.extend(" ".join(str(v) for v in row) for row in gray)
    return "\n".join(lines) + "\n"


def pattern_summary(expr_text: str, pattern: SharingPattern) -> str:
    return f"structure={expr_text} N={pattern.n} orbits={pattern.num_orbits}"
