"""Exact rational Gauss-Jordan elimination and nullspace extraction.

Rows are sparse mappings ``column -> Fraction``.  The reduction keeps every
pivot row normalized (leading coefficient 1) and fully reduced against the
other pivots, so nullspace vectors read off directly from the free columns.
Arithmetic is exact; no floating point is involved.
"""

from __future__ import annotations

from fractions import Fraction

SparseRow = dict[int, Fraction]


def _reduce_against(row: SparseRow, pivots: dict[int, SparseRow]) -> SparseRow:
    """Eliminate every pivot column from ``row``; returns a new sparse row."""
    r = {c: Fraction(v) for c, v in row.items() if v != 0}
    while True:
        hit = None
        for c in r:
            if c in pivots:
                hit = c
                break
        if hit is None:
            return r
        coef = r.pop(hit)
        for d, v in pivots[hit].items():
            if d == hit:
                continue
            nv = r.get(d, Fraction(0)) - coef * v
            if nv == 0:
                r.pop(d, None)
            else:
                r[d] = nv


def rref(rows: list[SparseRow]) -> dict[int, SparseRow]:
    """Reduced row echelon form of the row span.

    Returns a mapping ``pivot column -> normalized row`` where each row
    contains its own pivot column with coefficient 1 and no other pivot
    columns.
    """
    pivots: dict[int, SparseRow] = {}
    for row in rows:
        r = _reduce_against(row, pivots)
        if not r:
            continue
        p = min(r)
        inv = Fraction(1) / r[p]
        r = {c: v * inv for c, v in r.items()}
        for prow in pivots.values():
            if p in prow:
                coef = prow.pop(p)
                for d, v in r.items():
                    if d == p:
                        continue
                    nv = prow.get(d, Fraction(0)) - coef * v
                    if nv == 0:
                        prow.pop(d, None)
                    else:
                        prow[d] = nv
        pivots[p] = r
    return pivots


def rank(rows: list[SparseRow]) -> int:
    return len(rref(rows))


def nullspace(rows: list[SparseRow], n_cols: int) -> list[list[Fraction]]:
    """A basis of ``{x : A x = 0}`` for the matrix with the given rows.

    One basis vector per free column, in ascending column order; the vector
    for free column ``f`` has a 1 in position ``f``.
    """
    pivots = rref(rows)
    basis = []
    for f in range(n_cols):
        if f in pivots:
            continue
        vec = [Fraction(0)] * n_cols
        vec[f] = Fraction(1)
        for p, prow in pivots.items():
            coef = prow.get(f)
            if coef is not None:
                vec[p] = -coef
        basis.append(vec)
    return basis
