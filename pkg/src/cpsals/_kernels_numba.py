"""Numba-jitted COO kernels (default backend).

Serial on purpose: accumulation order is fixed, so results are reproducible
run to run and match the numpy fallback's summation order.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def mttkrp_coo(indices, values, stacked, offsets, mode, n_mode):
    nnz, p = indices.shape
    r = stacked.shape[1]
    out = np.zeros((n_mode, r), dtype=np.float64)
    others = np.empty(p - 1, dtype=np.int64)
    w = 0
    for q in range(p):
        if q != mode:
            others[w] = q
            w += 1
    if p == 2:
        a = others[0]
        for e in range(nnz):
            v = values[e]
            row = indices[e, mode]
            ra = offsets[a] + indices[e, a]
            for j in range(r):
                out[row, j] += v * stacked[ra, j]
        return out
    if p == 3:
        a, b = others[0], others[1]
        for e in range(nnz):
            v = values[e]
            row = indices[e, mode]
            ra = offsets[a] + indices[e, a]
            rb = offsets[b] + indices[e, b]
            for j in range(r):
                out[row, j] += v * stacked[ra, j] * stacked[rb, j]
        return out
    tmp = np.empty(r, dtype=np.float64)
    for e in range(nnz):
        v = values[e]
        for j in range(r):
            tmp[j] = v
        for oq in range(p - 1):
            q = others[oq]
            base = offsets[q] + indices[e, q]
            for j in range(r):
                tmp[j] *= stacked[base, j]
        row = indices[e, mode]
        for j in range(r):
            out[row, j] += tmp[j]
    return out


@njit(cache=True)
def linear_to_multi(lin, dims):
    """Expand linear indices (first mode fastest) into multi-indices."""
    nnz = lin.shape[0]
    p = dims.shape[0]
    idx = np.empty((nnz, p), dtype=np.int64)
    for e in range(nnz):
        rest = lin[e]
        for q in range(p - 1):
            n = dims[q]
            idx[e, q] = rest % n
            rest //= n
        idx[e, p - 1] = rest
    return idx


@njit(cache=True)
def kruskal_inner_coo(indices, values, stacked, offsets):
    nnz, p = indices.shape
    r = stacked.shape[1]
    acc = 0.0
    tmp = np.empty(r, dtype=np.float64)
    for e in range(nnz):
        base = offsets[0] + indices[e, 0]
        for j in range(r):
            tmp[j] = stacked[base, j]
        for q in range(1, p):
            base = offsets[q] + indices[e, q]
            for j in range(r):
                tmp[j] *= stacked[base, j]
        s = 0.0
        for j in range(r):
            s += tmp[j]
        acc += values[e] * s
    return acc
