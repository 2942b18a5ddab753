"""Exact integer linear algebra on small dense matrices."""
from __future__ import annotations

from typing import Sequence


def rank(rows: Sequence[Sequence[int]]) -> int:
    """Rank over the rationals of an integer matrix (fraction-free Bareiss)."""
    m = [list(map(int, r)) for r in rows]
    if not m or not m[0]:
        return 0
    n_rows, n_cols = len(m), len(m[0])
    r = 0
    prev = 1
    for col in range(n_cols):
        piv = next((i for i in range(r, n_rows) if m[i][col] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        p = m[r][col]
        pr = m[r]
        for i in range(r + 1, n_rows):
            row = m[i]
            f = row[col]
            if f == 0:
                for j in range(col + 1, n_cols):
                    row[j] = row[j] * p // prev
            else:
                for j in range(col + 1, n_cols):
                    row[j] = (row[j] * p - f * pr[j]) // prev
            row[col] = 0
        prev = p
        r += 1
        if r == n_rows:
            break
    return r


def affine_rank(points: Sequence[Sequence[int]]) -> int:
    """Dimension of the affine span; -1 for an empty set."""
    if len(points) == 0:
        return -1
    base = points[0]
    diffs = [[a - b for a, b in zip(p, base)] for p in points[1:]]
    return rank(diffs) if diffs else 0
