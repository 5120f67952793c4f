# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled enumeration kernels (see subdyn._kernels_np for the contracts).

Loops are written to take identical float operations in identical order to
the numpy fallback so both backends return bit-identical results.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "compiled"


def popcount_table(int n):
    if n < 1 or n > 24:
        raise ValueError(f"popcount table limited to 1 <= n <= 24, got {n}")
    out = np.zeros(1 << n, dtype=np.uint8)
    cdef unsigned char[::1] pc = out
    cdef Py_ssize_t i, m, blk
    for i in range(n):
        blk = 1 << i
        for m in range(blk):
            pc[blk + m] = pc[m] + 1
    return out


def subset_sums(u):
    u = np.ascontiguousarray(u, dtype=np.float64)
    cdef const double[::1] w = u
    cdef Py_ssize_t n = w.shape[0]
    if n < 1 or n > 24:
        raise ValueError(f"subset sums limited to 1 <= n <= 24, got n={n}")
    out = np.zeros(1 << n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i, m, blk
    cdef double wi
    for i in range(n):
        blk = 1 << i
        wi = w[i]
        for m in range(blk):
            o[blk + m] = o[m] + wi
    return out


def dr_min_mask(sums, double total, double r):
    s = np.ascontiguousarray(sums, dtype=np.float64)
    cdef const double[::1] sv = s
    cdef Py_ssize_t size = sv.shape[0], m
    cdef double tt = total * total
    cdef double best = np.inf, v
    cdef Py_ssize_t best_m = 0
    for m in range(size):
        if sv[m] >= r:
            v = sv[m] * sv[m] - tt
        else:
            v = 0.0
        if v < best:
            best = v
            best_m = m
    return best_m, best


def submodular_min_margin(table, int n):
    t = np.ascontiguousarray(table, dtype=np.float64)
    cdef const double[::1] tv = t
    if tv.shape[0] != (1 << n):
        raise ValueError("table size does not match n")
    cdef double best = np.inf
    cdef Py_ssize_t best_i = -1, best_b = -1
    if n == 1:
        return best, best_i, best_b
    cdef Py_ssize_t half = 1 << (n - 1)
    marg_a = np.empty(half, dtype=np.float64)
    g_a = np.empty(half, dtype=np.float64)
    gp_a = np.empty(half, dtype=np.float64)
    full_a = np.empty(half, dtype=np.int64)
    cdef double[::1] marg = marg_a
    cdef double[::1] g = g_a
    cdef double[::1] gp = gp_a
    cdef long long[::1] full = full_a
    cdef Py_ssize_t i, j, c, bit, f
    cdef double d
    cdef double inf = np.inf
    for i in range(n):
        for c in range(half):
            f = ((c >> i) << (i + 1)) | (c & ((1 << i) - 1))
            full[c] = f
            marg[c] = tv[f | (1 << i)] - tv[f]
            g[c] = marg[c]
        for j in range(n - 1):
            bit = 1 << j
            for c in range(half):
                if c & bit:
                    if g[c ^ bit] < g[c]:
                        g[c] = g[c ^ bit]
        for c in range(half):
            gp[c] = inf
        for j in range(n - 1):
            bit = 1 << j
            for c in range(half):
                if c & bit:
                    if g[c ^ bit] < gp[c]:
                        gp[c] = g[c ^ bit]
        for c in range(half):
            if gp[c] < inf:
                d = gp[c] - marg[c]
                if d < best:
                    best = d
                    best_i = i
                    best_b = full[c]
    return best, best_i, best_b


def lipschitz_modulus(table, int n):
    t = np.ascontiguousarray(table, dtype=np.float64)
    cdef const double[::1] tv = t
    cdef Py_ssize_t size = 1 << n
    if tv.shape[0] != size:
        raise ValueError("table size does not match n")
    pc_a = popcount_table(n)
    cdef unsigned char[::1] pc = pc_a
    cdef double best = 0.0, hi, diff
    cdef Py_ssize_t d, m
    for d in range(1, size):
        hi = 0.0
        for m in range(size):
            diff = tv[m] - tv[m ^ d]
            if diff < 0:
                diff = -diff
            if diff > hi:
                hi = diff
        diff = hi / pc[d]
        if diff > best:
            best = diff
    return best
