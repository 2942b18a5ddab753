"""Hot loops with a numba implementation and a pure-numpy fallback.

Set ``QIGTREE_DISABLE_NUMBA=1`` to force the numpy path.
"""
from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("QIGTREE_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if _DISABLED:
        raise ImportError("numba disabled by environment")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def imsets_from_masks_numpy(masks, coord_edges, coord_bits):
    """Row m, column s is 1 iff every edge listed for s has the required bit in masks[m].

    ``coord_edges`` and ``coord_bits`` are (S, W) arrays padded with -1.
    """
    masks = np.asarray(masks, dtype=np.int64)
    valid = coord_edges >= 0
    shifts = np.where(valid, coord_edges, 0)
    bits = (masks[:, None, None] >> shifts[None, :, :]) & 1
    ok = (bits == coord_bits[None, :, :]) | ~valid[None, :, :]
    return ok.all(axis=2).astype(np.uint8)


if HAVE_NUMBA:

    @njit(cache=True)
    def _imsets_from_masks_nb(masks, coord_edges, coord_bits):
        n = masks.shape[0]
        s_count, width = coord_edges.shape
        out = np.zeros((n, s_count), dtype=np.uint8)
        for m in range(n):
            mask = masks[m]
            for s in range(s_count):
                hit = 1
                for w in range(width):
                    e = coord_edges[s, w]
                    if e < 0:
                        break
                    if ((mask >> e) & 1) != coord_bits[s, w]:
                        hit = 0
                        break
                out[m, s] = hit
        return out

    def imsets_from_masks(masks, coord_edges, coord_bits):
        return _imsets_from_masks_nb(
            np.ascontiguousarray(masks, dtype=np.int64),
            np.ascontiguousarray(coord_edges, dtype=np.int64),
            np.ascontiguousarray(coord_bits, dtype=np.int64),
        )

else:
    imsets_from_masks = imsets_from_masks_numpy


BACKEND = "numba" if HAVE_NUMBA else "numpy"
