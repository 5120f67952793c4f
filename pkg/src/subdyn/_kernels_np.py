"""Numpy implementations of the hot enumeration kernels.

Same contracts, results, and tie-breaks as the compiled module
(subdyn._kernels); used automatically when the extension is not built.
All tables are indexed by mask bits, so index order == mask order and
"first argmin" == "smallest mask".
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "numpy"


def popcount_table(n: int) -> np.ndarray:
    """uint8 popcounts for all masks over n bits (n <= 24)."""
    if not 1 <= n <= 24:
        raise ValueError(f"popcount table limited to 1 <= n <= 24, got {n}")
    pc = np.zeros(1 << n, dtype=np.uint8)
    for i in range(n):
        blk = 1 << i
        pc[blk : 2 * blk] = pc[:blk] + 1
    return pc


def subset_sums(u: np.ndarray) -> np.ndarray:
    """sums[m] = sum of u[i] over the set bits of m, for all 2^n masks."""
    u = np.ascontiguousarray(u, dtype=np.float64)
    n = u.shape[0]
    if not 1 <= n <= 24:
        raise ValueError(f"subset sums limited to 1 <= n <= 24, got n={n}")
    out = np.zeros(1 << n, dtype=np.float64)
    for i in range(n):
        blk = 1 << i
        out[blk : 2 * blk] = out[:blk] + u[i]
    return out


def dr_min_mask(sums: np.ndarray, total: float, r: float) -> tuple[int, float]:
    """Minimize (sums[m]^2 - total^2) * [sums[m] >= r] over all masks.

    Returns (mask, value); ties resolve to the smallest mask.
    """
    vals = np.where(sums >= r, sums * sums - total * total, 0.0)
    m = int(np.argmin(vals))
    return m, float(vals[m])


def _insert_zero_bit(c: np.ndarray, i: int) -> np.ndarray:
    # Map the compressed (n-1)-bit index c to the full-space mask with a 0
    # at bit position i.
    low = c & ((1 << i) - 1)
    return ((c >> i) << (i + 1)) | low


def _sos_min(arr: np.ndarray, nbits: int) -> np.ndarray:
    """g[m] = min of arr over all submasks of m (subset min-transform)."""
    g = arr.copy()
    view = g.reshape((2,) * nbits)
    for axis in range(nbits):
        hi = np.take(view, 1, axis=axis)
        lo = np.take(view, 0, axis=axis)
        np.minimum(hi, lo, out=hi)
        # write back through a slice view
        sl = [slice(None)] * nbits
        sl[axis] = 1
        view[tuple(sl)] = hi
    return g


def submodular_min_margin(table: np.ndarray, n: int) -> tuple[float, int, int]:
    """Minimum diminishing-returns slack over all (A proper-subset B, i not in B).

    slack = [f(A+i) - f(A)] - [f(B+i) - f(B)].  Returns (margin, i, B_bits)
    for the first triple attaining the minimum in (i asc, B asc) scan order;
    (inf, -1, -1) when n == 1 (no triples exist).  The witness A is
    recovered by the caller.
    """
    table = np.ascontiguousarray(table, dtype=np.float64)
    if table.shape[0] != 1 << n:
        raise ValueError("table size does not match n")
    best = np.inf
    best_i = -1
    best_b = -1
    if n == 1:
        return best, best_i, best_b
    half = 1 << (n - 1)
    c = np.arange(half, dtype=np.int64)
    for i in range(n):
        full = _insert_zero_bit(c, i)
        marg = table[full | (1 << i)] - table[full]
        g = _sos_min(marg, n - 1)
        # min over proper submasks: min_{j in B} g[B - j]
        gp = np.full(half, np.inf)
        gview = g.reshape((2,) * (n - 1))
        pview = gp.reshape((2,) * (n - 1))
        for axis in range(n - 1):
            lo = np.take(gview, 0, axis=axis)
            hi = np.take(pview, 1, axis=axis)
            np.minimum(hi, lo, out=hi)
            sl = [slice(None)] * (n - 1)
            sl[axis] = 1
            pview[tuple(sl)] = hi
        d = gp - marg
        k = int(np.argmin(d))
        if d[k] < best:
            best = float(d[k])
            best_i = i
            best_b = int(full[k])
    return best, best_i, best_b


def lipschitz_modulus(table: np.ndarray, n: int) -> float:
    """max over mask pairs of |f(S1) - f(S2)| / card(S1 xor S2)."""
    table = np.ascontiguousarray(table, dtype=np.float64)
    size = 1 << n
    if table.shape[0] != size:
        raise ValueError("table size does not match n")
    idx = np.arange(size, dtype=np.int64)
    best = 0.0
    for d in range(1, size):
        diff = float(np.abs(table - table[idx ^ d]).max())
        best = max(best, diff / d.bit_count())
    return best
