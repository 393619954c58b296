"""Pure-numpy COO kernels (fallback backend).

Same signatures and accumulation order as the numba versions: per output
element, contributions are added in stored-entry order.
"""

from __future__ import annotations

import numpy as np


def mttkrp_coo(indices, values, stacked, offsets, mode, n_mode):
    """Mode-``mode`` MTTKRP over COO entries.

    ``stacked`` is the row-wise concatenation of the factor matrices and
    ``offsets[q]`` the first row of factor ``q`` within it. Returns the
    (n_mode, r) product of the mode unfolding with the Khatri-Rao product of
    the remaining factors, touching stored entries only.
    """
    p = indices.shape[1]
    prod = values[:, None]
    for q in range(p):
        if q != mode:
            prod = prod * stacked[offsets[q] + indices[:, q], :]
    rows = indices[:, mode]
    r = stacked.shape[1]
    out = np.empty((n_mode, r), dtype=np.float64)
    for j in range(r):
        out[:, j] = np.bincount(rows, weights=prod[:, j], minlength=n_mode)
    return out


def kruskal_inner_coo(indices, values, stacked, offsets):
    """Inner product of a COO tensor with the model reconstruction."""
    p = indices.shape[1]
    prod = stacked[offsets[0] + indices[:, 0], :].copy()
    for q in range(1, p):
        prod *= stacked[offsets[q] + indices[:, q], :]
    return float(values @ prod.sum(axis=1))


def linear_to_multi(lin, dims):
    """Expand linear indices (first mode fastest) into multi-indices."""
    idx = np.empty((lin.shape[0], dims.shape[0]), dtype=np.int64)
    rest = lin
    for q in range(dims.shape[0] - 1):
        idx[:, q] = rest % dims[q]
        rest = rest // dims[q]
    idx[:, -1] = rest
    return idx
