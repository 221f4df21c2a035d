"""Linear layers whose weight sharing follows a symmetry structure.

A layer for a structure on ``N`` points maps ``(N, c_in)`` arrays to
``(N, c_out)`` arrays.  Each sharing orbit of the structure's pattern carries
its own ``c_in x c_out`` channel-mixing matrix, so the weight tensor has shape
``(num_orbits, c_in, c_out)`` in canonical orbit order.

:func:`apply` walks the structure recursively and never materializes the
``N x N`` map: set factors pool and broadcast, ring factors convolve
circularly, hierarchical factors pool each fiber, map the pooled summary with
the outer structure, broadcast back, and add the per-fiber inner map.
:func:`apply_dense` materializes the shared matrix per channel pair and is the
oracle the fast path is checked against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .basis import SharingPattern, materialize, pattern_of_structure, structure_orbit_count
from .perm import PermGroup, permute_rows
from .structure import (
    Cycle,
    Prod,
    Set,
    Structure,
    Trivial,
    Wreath,
    degree,
    format_structure,
    group_of,
    parse_structure,
)


@dataclass(frozen=True)
class EquivariantLayer:
    structure: Structure
    c_in: int
    c_out: int
    weights: np.ndarray  # (num_orbits, c_in, c_out)
    bias: np.ndarray | None = None  # (c_out,)

    def __post_init__(self) -> None:
        if self.c_in < 1 or self.c_out < 1:
            raise ValueError("channel counts must be at least 1")
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        expected = (structure_orbit_count(self.structure), self.c_in, self.c_out)
        if w.shape != expected:
            raise ValueError(f"weights shape {w.shape} != {expected}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if self.bias is not None:
            b = np.ascontiguousarray(self.bias, dtype=np.float64)
            if b.shape != (self.c_out,):
                raise ValueError(f"bias shape {b.shape} != ({self.c_out},)")
            b.setflags(write=False)
            object.__setattr__(self, "bias", b)

    @property
    def degree(self) -> int:
        return degree(self.structure)


def random_layer(
    structure: Structure,
    c_in: int,
    c_out: int,
    rng: np.random.Generator,
    bias: bool = False,
) -> EquivariantLayer:
    """Uniform init on ``[-s, s]`` with ``s = 1 / sqrt(c_in)`` per orbit."""
    n_orbits = structure_orbit_count(structure)
    s = 1.0 / np.sqrt(c_in)
    w = rng.uniform(-s, s, size=(n_orbits, c_in, c_out))
    b = rng.uniform(-s, s, size=c_out) if bias else None
    return EquivariantLayer(structure, c_in, c_out, w, b)


def _first_occurrences(pattern: SharingPattern) -> tuple[np.ndarray, np.ndarray]:
    """Row and column of each orbit id's first row-major appearance."""
    flat = pattern.orbit_id.ravel()
    _, first = np.unique(flat, return_index=True)
    rows, cols = np.divmod(first, pattern.n)
    return rows, cols


def _first_offdiag_occurrences(pattern: SharingPattern) -> dict[int, tuple[int, int]]:
    """First row-major off-diagonal appearance of each id that has one."""
    ids = pattern.orbit_id
    found: dict[int, tuple[int, int]] = {}
    n = pattern.n
    for r in range(n):
        row = ids[r]
        for c in range(n):
            if r != c:
                o = int(row[c])
                if o not in found:
                    found[o] = (r, c)
    return found


@lru_cache(maxsize=None)
def _prod_orbit_table(expr: Prod) -> np.ndarray:
    """Canonical orbit id of each (outer id, inner id) pair of a product.

    The first appearance of the pair ``(a, b)`` in the big row-major scan
    factors into the per-factor first appearances, which fixes the canonical
    order without building the ``N x N`` pattern.
    """
    pa = pattern_of_structure(expr.outer)
    pb = pattern_of_structure(expr.inner)
    ra, ca = _first_occurrences(pa)
    rb, cb = _first_occurrences(pb)
    keyed = []
    for a in range(pa.num_orbits):
        for b in range(pb.num_orbits):
            keyed.append(((int(ra[a]), int(rb[b]), int(ca[a]), int(cb[b])), a, b))
    keyed.sort()
    table = np.empty((pa.num_orbits, pb.num_orbits), dtype=np.int64)
    for idx, (_, a, b) in enumerate(keyed):
        table[a, b] = idx
    return table


@lru_cache(maxsize=None)
def _wreath_orbit_maps(expr: Wreath) -> tuple[np.ndarray, tuple[tuple[int, int], ...]]:
    """Canonical ids of the fiber-local and cross-fiber orbits of a hierarchy.

    Returns ``(inner_map, off_pairs)`` where ``inner_map[b]`` is the canonical
    id of inner orbit ``b`` (shared over the diagonal blocks) and
    ``off_pairs`` lists ``(outer id a, canonical id)`` for every outer orbit
    with off-diagonal entries.
    """
    po = pattern_of_structure(expr.outer)
    pi = pattern_of_structure(expr.inner)
    Q = pi.n
    ri, ci = _first_occurrences(pi)
    off = _first_offdiag_occurrences(po)
    keyed: list[tuple[tuple[int, int], str, int]] = []
    for b in range(pi.num_orbits):
        keyed.append(((int(ri[b]), int(ci[b])), "in", b))
    for a, (r, c) in off.items():
        keyed.append(((r * Q, c * Q), "off", a))
    keyed.sort()
    inner_map = np.empty(pi.num_orbits, dtype=np.int64)
    off_pairs = []
    for idx, (_, kind, which) in enumerate(keyed):
        if kind == "in":
            inner_map[which] = idx
        else:
            off_pairs.append((which, idx))
    return inner_map, tuple(off_pairs)


def _apply_structure(expr: Structure, coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Apply ``sum_o coeffs[o] * B_o`` along the second-to-last axis of ``x``.

    ``B_o`` is the 0/1 indicator of orbit ``o`` in canonical order; ``x`` has
    shape ``(..., N, c_in)`` and the result ``(..., N, c_out)``.
    """
    if isinstance(expr, Set):
        if expr.n == 1:
            return x @ coeffs[0]
        s = x.sum(axis=-2, keepdims=True)
        return x @ coeffs[0] + (s - x) @ coeffs[1]
    if isinstance(expr, Cycle):
        out = x @ coeffs[0]
        for d in range(1, expr.n):
            out += np.roll(x, -d, axis=-2) @ coeffs[d]
        return out
    if isinstance(expr, Trivial):
        n = expr.n
        c = coeffs.reshape(n, n, coeffs.shape[-2], coeffs.shape[-1])
        return np.einsum("...jc,ijcd->...id", x, c)
    if isinstance(expr, Prod):
        P = degree(expr.outer)
        Q = degree(expr.inner)
        c_in = coeffs.shape[-2]
        table = _prod_orbit_table(expr)
        xr = x.reshape(*x.shape[:-2], P, Q, c_in)
        out = None
        n_inner = table.shape[1]
        eye = np.eye(c_in)
        for b in range(n_inner):
            onehot = np.zeros((n_inner, c_in, c_in))
            onehot[b] = eye
            u = _apply_structure(expr.inner, onehot, xr)
            v = _apply_structure(expr.outer, coeffs[table[:, b]], u.swapaxes(-2, -3))
            v = v.swapaxes(-2, -3)
            out = v if out is None else out + v
        return out.reshape(*x.shape[:-2], P * Q, coeffs.shape[-1])
    if isinstance(expr, Wreath):
        P = degree(expr.outer)
        Q = degree(expr.inner)
        c_in, c_out = coeffs.shape[-2], coeffs.shape[-1]
        inner_map, off_pairs = _wreath_orbit_maps(expr)
        xr = x.reshape(*x.shape[:-2], P, Q, c_in)
        fiber = _apply_structure(expr.inner, coeffs[inner_map], xr)
        pooled = xr.sum(axis=-2)
        outer_coeffs = np.zeros((structure_orbit_count(expr.outer), c_in, c_out))
        for a, idx in off_pairs:
            outer_coeffs[a] = coeffs[idx]
        across = _apply_structure(expr.outer, outer_coeffs, pooled)
        out = fiber + across[..., :, None, :]
        return out.reshape(*x.shape[:-2], P * Q, c_out)
    raise TypeError(f"not a structure: {expr!r}")


def _check_input(layer: EquivariantLayer, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (layer.degree, layer.c_in):
        raise ValueError(f"input shape {x.shape} != ({layer.degree}, {layer.c_in})")
    return x


def apply(layer: EquivariantLayer, x: np.ndarray) -> np.ndarray:
    """Matrix-free application of the layer to an ``(N, c_in)`` array."""
    x = _check_input(layer, x)
    y = _apply_structure(layer.structure, layer.weights, x)
    if layer.bias is not None:
        y = y + layer.bias
    return y


def apply_dense(layer: EquivariantLayer, x: np.ndarray) -> np.ndarray:
    """Reference application through the materialized shared matrix."""
    x = _check_input(layer, x)
    pattern = pattern_of_structure(layer.structure)
    y = np.zeros((layer.degree, layer.c_out))
    for ci in range(layer.c_in):
        for co in range(layer.c_out):
            y[:, co] += materialize(pattern, layer.weights[:, ci, co]) @ x[:, ci]
    if layer.bias is not None:
        y = y + layer.bias
    return y


@dataclass(frozen=True)
class EquivarianceReport:
    """Max relative residual of ``f(g . x) - g . f(x)`` per generator."""

    generator_residuals: tuple[float, ...]
    tol: float

    @property
    def max_residual(self) -> float:
        return max(self.generator_residuals)

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tol

    def lines(self) -> list[str]:
        out = []
        for i, r in enumerate(self.generator_residuals):
            mark = "ok" if r <= self.tol else "FAIL"
            out.append(f"generator {i}: max residual {r:.3e} {mark}")
        out.append(f"overall: {'pass' if self.passed else 'FAIL'} (tol {self.tol:g})")
        return out


def equivariance_check_map(
    fn,
    group: PermGroup,
    c_in: int,
    trials: int = 5,
    rng: np.random.Generator | None = None,
    tol: float = 1e-10,
) -> EquivarianceReport:
    """Check ``fn(g . x) == g . fn(x)`` on random inputs; reports, never raises."""
    if rng is None:
        rng = np.random.default_rng(0)
    residuals = []
    for g in group.generators:
        worst = 0.0
        for _ in range(trials):
            x = rng.standard_normal((group.degree, c_in))
            lhs = fn(permute_rows(g, x))
            rhs = permute_rows(g, fn(x))
            scale = max(np.abs(lhs).max(), np.abs(rhs).max(), 1e-12)
            worst = max(worst, float(np.abs(lhs - rhs).max() / scale))
        residuals.append(worst)
    return EquivarianceReport(tuple(residuals), tol)


def equivariance_check(
    layer: EquivariantLayer,
    trials: int = 5,
    rng: np.random.Generator | None = None,
    tol: float = 1e-10,
) -> EquivarianceReport:
    group = group_of(layer.structure)
    return equivariance_check_map(lambda x: apply(layer, x), group, layer.c_in, trials, rng, tol)


def layer_to_dict(layer: EquivariantLayer) -> dict:
    """Self-describing JSON-compatible form; floats survive bit-exactly."""
    return {
        "structure": format_structure(layer.structure),
        "c_in": layer.c_in,
        "c_out": layer.c_out,
        "weights": layer.weights.tolist(),
        "bias": None if layer.bias is None else layer.bias.tolist(),
    }


def layer_from_dict(data: dict) -> EquivariantLayer:
    bias = data.get("bias")
    return EquivariantLayer(
        structure=parse_structure(data["structure"]),
        c_in=int(data["c_in"]),
        c_out=int(data["c_out"]),
        weights=np.asarray(data["weights"], dtype=np.float64),
        bias=None if bias is None else np.asarray(bias, dtype=np.float64),
    )


def save_layer(layer: EquivariantLayer, path: str | Path) -> None:
    Path(path).write_text(json.dumps(layer_to_dict(layer), indent=1) + "\n")


def load_layer(path: str | Path) -> EquivariantLayer:
    return layer_from_dict(json.loads(Path(path).read_text()))
