"""Pure-Python (numpy) implementations of the hot kernels.

Drop-in fallback for the compiled extension module; see kernels.py for
backend selection. Both backends must implement the same contracts:

solve_lap(cost):
    Minimum-cost injective row->column map for an (m, n) matrix with
    m <= n. Ties resolve toward the lowest column index scanned first,
    so results are deterministic across platforms and backends.

pairwise_track_cost(mask_a, pos_a, mask_b, pos_b, c):
    Time-averaged capped-distance matrix between two windowed track
    batches. Per pair: average over scans where at least one track
    exists of (capped distance if both exist, else the cut-off c);
    pairs with no common window support at all get 0.
"""

from __future__ import annotations

import numpy as np


def solve_lap(cost: np.ndarray) -> np.ndarray:
    """Shortest-augmenting-path assignment on an (m, n) cost matrix, m <= n.

    Returns an int64 array row_to_col of length m.
    """
    C = np.ascontiguousarray(cost, dtype=np.float64)
    m, n = C.shape
    if m == 0 or n == 0 or m > n:
        raise ValueError(f"solve_lap requires 0 < m <= n, got {m}x{n}")

    u = np.zeros(m + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)  # p[j]: row matched to column j (1-based, 0 = free)
    way = np.zeros(n + 1, dtype=np.int64)

    for i in range(1, m + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            cur = C[i0 - 1, :] - u[i0] - v[1:]
            free = ~used[1:]
            better = free & (cur < minv[1:])
            if better.any():
                minv1 = minv[1:]
                minv1[better] = cur[better]
                way1 = way[1:]
                way1[better] = j0
                minv[1:] = minv1
                way[1:] = way1
            masked = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(masked)) + 1  # argmin takes the first minimum
            delta = masked[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break

    row_to_col = np.full(m, -1, dtype=np.int64)
    for j in range(1, n + 1):
        if p[j] != 0:
            row_to_col[p[j] - 1] = j - 1
    return row_to_col


def pairwise_track_cost(
    mask_a: np.ndarray,
    pos_a: np.ndarray,
    mask_b: np.ndarray,
    pos_b: np.ndarray,
    c: float,
) -> np.ndarray:
    """Time-averaged capped distances between all track pairs of two batches.

    mask_*: (M, W) uint8 presence masks over a common window of W scans.
    pos_*: (M, W, 2) positions; entries where the mask is 0 are ignored.
    """
    A = mask_a.astype(bool)[:, None, :]
    B = mask_b.astype(bool)[None, :, :]
    both = A & B
    either = A | B
    diff = pos_a[:, None, :, :] - pos_b[None, :, :, :]
    dist = np.sqrt(np.einsum("abwd,abwd->abw", diff, diff))
    capped = np.minimum(dist, c)
    contrib = np.where(both, capped, 0.0)
    contrib += np.where(either & ~both, c, 0.0)
    denom = either.sum(axis=-1)
    out = np.zeros(denom.shape, dtype=np.float64)
    nz = denom > 0
    out[nz] = contrib.sum(axis=-1)[nz] / denom[nz]
    return out
