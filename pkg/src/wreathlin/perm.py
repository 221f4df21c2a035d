"""Permutations, finitely generated permutation groups, and product actions.

Conventions used throughout the package:

* A permutation of degree ``n`` acts on the points ``0 .. n-1`` and is stored
  in word form: ``images[i]`` is where point ``i`` is sent.
* ``compose(p, q)`` applies ``q`` first, then ``p``, so
  ``compose(p, q)(i) == p(q(i))``.
* Product constructions act on ``{0 .. P*Q-1}`` with the outer index major:
  the pair ``(p, q)`` of an outer point ``p`` and an inner point ``q`` is the
  point ``p * Q + q``.
* ``perm_to_matrix(p)`` sends basis vector ``e_j`` to ``e_{p(j)}``.  This
  orientation makes the map a homomorphism:
  ``perm_to_matrix(compose(p, q)) == perm_to_matrix(p) @ perm_to_matrix(q)``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

DEFAULT_MAX_ORDER = 200_000
MAX_ORDER_ENV_VAR = "WREATHLIN_MAX_ORDER"


class InvalidDegreeError(ValueError):
    """A degree was zero or negative."""


class DegreeMismatchError(ValueError):
    """Permutations or generators of different degrees were mixed."""


class EnumerationLimitError(RuntimeError):
    """The generated group has more elements than the enumeration limit."""


def max_order_limit() -> int:
    """Default enumeration limit, overridable via ``WREATHLIN_MAX_ORDER``."""
    raw = os.environ.get(MAX_ORDER_ENV_VAR)
    if raw:
        return int(raw)
    return DEFAULT_MAX_ORDER


@dataclass(frozen=True)
class Permutation:
    """A permutation of ``{0 .. n-1}`` in word form.

    >>> p = Permutation((1, 2, 0))
    >>> p(0), p(1), p(2)
    (1, 2, 0)
    """

    images: tuple[int, ...]

    def __post_init__(self) -> None:
        images = tuple(int(i) for i in self.images)
        object.__setattr__(self, "images", images)
        if not images:
            raise InvalidDegreeError("permutation degree must be at least 1")
        if sorted(images) != list(range(len(images))):
            raise ValueError(f"not a bijection on 0..{len(images) - 1}: {images}")

    @property
    def degree(self) -> int:
        return len(self.images)

    def __call__(self, i: int) -> int:
        return self.images[i]

    def __mul__(self, other: "Permutation") -> "Permutation":
        return compose(self, other)


@dataclass(frozen=True)
class PermGroup:
    """A permutation group given by degree and a nonempty generator tuple."""

    degree: int
    generators: tuple[Permutation, ...]
    label: str = ""

    def __post_init__(self) -> None:
        if self.degree < 1:
            raise InvalidDegreeError("group degree must be at least 1")
        object.__setattr__(self, "generators", tuple(self.generators))
        if not self.generators:
            raise ValueError("a group needs at least one generator")
        for g in self.generators:
            if g.degree != self.degree:
                raise DegreeMismatchError(
                    f"generator degree {g.degree} != group degree {self.degree}"
                )


def identity(n: int) -> Permutation:
    """The identity permutation on ``n`` points.

    >>> identity(3).images
    (0, 1, 2)
    """
    if n < 1:
        raise InvalidDegreeError(f"degree must be at least 1, got {n}")
    return Permutation(tuple(range(n)))


def compose(p: Permutation, q: Permutation) -> Permutation:
    """Apply ``q`` first, then ``p``.

    >>> compose(Permutation((1, 2, 0)), Permutation((1, 2, 0))).images
    (2, 0, 1)
    """
    if p.degree != q.degree:
        raise DegreeMismatchError(f"cannot compose degrees {p.degree} and {q.degree}")
    return Permutation(tuple(p.images[q.images[i]] for i in range(p.degree)))


def inverse(p: Permutation) -> Permutation:
    """The inverse permutation.

    >>> inverse(Permutation((1, 2, 0))).images
    (2, 0, 1)
    """
    inv = [0] * p.degree
    for i, img in enumerate(p.images):
        inv[img] = i
    return Permutation(tuple(inv))


def fixed_point_count(p: Permutation) -> int:
    return sum(1 for i, img in enumerate(p.images) if i == img)


def permute_rows(p: Permutation, x: np.ndarray) -> np.ndarray:
    """Row action of ``perm_to_matrix(p)``: row ``j`` of ``x`` moves to row ``p(j)``."""
    x = np.asarray(x)
    if x.shape[0] != p.degree:
        raise DegreeMismatchError(f"array has {x.shape[0]} rows, permutation degree {p.degree}")
    out = np.empty_like(x)
    out[np.asarray(p.images)] = x
    return out


def cyclic_group(n: int) -> PermGroup:
    """The cyclic group generated by ``i -> (i + 1) mod n``.

    >>> cyclic_group(4).generators[0].images
    (1, 2, 3, 0)
    """
    if n < 1:
        raise InvalidDegreeError(f"degree must be at least 1, got {n}")
    if n == 1:
        return PermGroup(1, (identity(1),), label="C1")
    rot = Permutation(tuple((i + 1) % n for i in range(n)))
    return PermGroup(n, (rot,), label=f"C{n}")


def symmetric_group(n: int) -> PermGroup:
    """The full symmetric group, generated by a transposition and an n-cycle."""
    if n < 1:
        raise InvalidDegreeError(f"degree must be at least 1, got {n}")
    if n == 1:
        return PermGroup(1, (identity(1),), label="S1")
    swap = Permutation((1, 0) + tuple(range(2, n)))
    rot = Permutation(tuple((i + 1) % n for i in range(n)))
    gens = (swap,) if swap == rot else (swap, rot)
    return PermGroup(n, gens, label=f"S{n}")


def trivial_group(n: int) -> PermGroup:
    """The trivial group acting on ``n`` points."""
    if n < 1:
        raise InvalidDegreeError(f"degree must be at least 1, got {n}")
    return PermGroup(n, (identity(n),), label=f"trivial{n}")


def direct_product_group(outer: PermGroup, inner: PermGroup) -> PermGroup:
    """Direct product acting on pairs: ``(h, k) . (p, q) = (h.p, k.q)``.

    The result acts on ``outer.degree * inner.degree`` points with the outer
    index major.
    """
    P, Q = outer.degree, inner.degree
    gens: list[Permutation] = []
    for h in outer.generators:
        images = [0] * (P * Q)
        for p in range(P):
            dest = h(p) * Q
            src = p * Q
            for q in range(Q):
                images[src + q] = dest + q
        gens.append(Permutation(tuple(images)))
    for k in inner.generators:
        images = [0] * (P * Q)
        for p in range(P):
            base = p * Q
            for q in range(Q):
                images[base + q] = base + k(q)
        gens.append(Permutation(tuple(images)))
    label = f"({outer.label} x {inner.label})"
    return PermGroup(P * Q, tuple(dict.fromkeys(gens)), label=label)


def wreath_product_group(inner: PermGroup, outer: PermGroup) -> PermGroup:
    """Imprimitive wreath action of ``inner`` along fibers permuted by ``outer``.

    Acts on ``P * Q`` points arranged as ``P`` fibers of size ``Q``.  The
    generators are the lifted outer generators ``(p, q) -> (h.p, q)`` plus the
    inner generators acting in fiber 0 only.  When the outer group is
    transitive these generate the full wreath product, of order
    ``|inner| ** P * |outer|``.
    """
    P, Q = outer.degree, inner.degree
    gens: list[Permutation] = []
    for h in outer.generators:
        images = [0] * (P * Q)
        for p in range(P):
            dest = h(p) * Q
            src = p * Q
            for q in range(Q):
                images[src + q] = dest + q
        gens.append(Permutation(tuple(images)))
    for k in inner.generators:
        images = list(range(P * Q))
        for q in range(Q):
            images[q] = k(q)
        gens.append(Permutation(tuple(images)))
    label = f"({inner.label} wr {outer.label})"
    return PermGroup(P * Q, tuple(dict.fromkeys(gens)), label=label)


def enumerate_group(group: PermGroup, limit: int | None = None) -> list[Permutation]:
    """All elements of the generated group, by breadth-first closure.

    Raises :class:`EnumerationLimitError` as soon as the closure exceeds
    ``limit`` (default :func:`max_order_limit`).
    """
    if limit is None:
        limit = max_order_limit()
    if limit < 1:
        raise ValueError(f"limit must be at least 1, got {limit}")
    start = identity(group.degree)
    seen = {start.images}
    elements = [start]
    frontier = [start]
    while frontier:
        next_frontier = []
        for e in frontier:
            for g in group.generators:
                f = compose(g, e)
                if f.images not in seen:
                    if len(seen) >= limit:
                        raise EnumerationLimitError(
                            f"group {group.label or group.generators} exceeds "
                            f"enumeration limit {limit}"
                        )
                    seen.add(f.images)
                    elements.append(f)
                    next_frontier.append(f)
        frontier = next_frontier
    return elements


def perm_to_matrix(p: Permutation) -> np.ndarray:
    """The 0/1 matrix sending basis vector ``e_j`` to ``e_{p(j)}``.

    Exactly one 1 per row and per column: ``M[p(j), j] == 1``.
    """
    n = p.degree
    m = np.zeros((n, n), dtype=np.int64)
    m[np.asarray(p.images), np.arange(n)] = 1
    return m


def wreath_element(h: Permutation, ks: list[Permutation] | tuple[Permutation, ...]) -> Permutation:
    """The permutation ``(p, q) -> (h.p, ks[h.p].q)`` on ``P * Q`` points.

    ``ks[p]`` is the inner permutation applied to points landing in fiber ``p``.
    """
    P = h.degree
    if len(ks) != P:
        raise DegreeMismatchError(f"need {P} fiber permutations, got {len(ks)}")
    Q = ks[0].degree
    for k in ks:
        if k.degree != Q:
            raise DegreeMismatchError("fiber permutations must share a degree")
    images = [0] * (P * Q)
    for p in range(P):
        dest = h(p)
        k = ks[dest]
        for q in range(Q):
            images[p * Q + q] = dest * Q + k(q)
    return Permutation(tuple(images))


def wreath_block_matrix(h: Permutation, ks: list[Permutation] | tuple[Permutation, ...]) -> np.ndarray:
    """Dense matrix of a wreath element assembled block by block.

    Block row ``h(p)``, block column ``p`` holds ``perm_to_matrix(ks[h(p)])``;
    every other block is zero.  Built independently of :func:`wreath_element`
    so the two constructions can be checked against each other.
    """
    P = h.degree
    Q = ks[0].degree
    m = np.zeros((P * Q, P * Q), dtype=np.int64)
    for p in range(P):
        dest = h(p)
        m[dest * Q:(dest + 1) * Q, p * Q:(p + 1) * Q] = perm_to_matrix(ks[dest])
    return m


def wreath_decompose(g: Permutation, P: int, Q: int) -> tuple[Permutation, list[Permutation]]:
    """Recover ``(h, ks)`` with ``g == wreath_element(h, ks)``.

    Requires ``g`` to preserve the fiber partition of ``P`` fibers of size
    ``Q``; raises ``ValueError`` otherwise.
    """
    if g.degree != P * Q:
        raise DegreeMismatchError(f"degree {g.degree} != {P} * {Q}")
    fiber_to = [g(p * Q) // Q for p in range(P)]
    for p in range(P):
        for q in range(Q):
            if g(p * Q + q) // Q != fiber_to[p]:
                raise ValueError("permutation does not preserve the fiber partition")
    h = Permutation(tuple(fiber_to))
    hinv = inverse(h)
    ks = []
    for dest in range(P):
        src = hinv(dest)
        ks.append(Permutation(tuple(g(src * Q + q) - dest * Q for q in range(Q))))
    return h, ks
