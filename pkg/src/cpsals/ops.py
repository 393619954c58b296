"""Multilinear kernels: Frobenius norm, unfolding, Khatri-Rao, Hadamard, MTTKRP.

Unfolding follows the standard convention: entry ``(i_1, ..., i_p)`` of the
mode-``i`` unfolding lands in row ``i_i`` and column
``sum_{k != i} i_k * prod_{m < k, m != i} n_m`` (modes ascending). The
Khatri-Rao chain for mode ``i`` runs over the remaining factors in descending
mode order, which makes ``unfold(T, i) @ khatri_rao_chain`` consistent with
the linear-index layout in :mod:`cpsals.tensors`.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse

from . import backend
from .tensors import DenseTensor, SparseTensor


def frobenius_norm(t) -> float:
    """Square root of the sum of squared entries.

    Accepts :class:`DenseTensor`, :class:`SparseTensor`, numpy arrays, and
    scipy sparse matrices.
    """
    if isinstance(t, DenseTensor):
        return float(np.sqrt(t.norm_sq()))
    if isinstance(t, SparseTensor):
        return float(np.sqrt(t.norm_sq()))
    if scipy.sparse.issparse(t):
        data = t.data
        return float(np.sqrt(data @ data))
    arr = np.asarray(t, dtype=np.float64)
    return float(np.linalg.norm(arr.ravel()))


def _check_mode(shape, mode: int) -> None:
    if not 0 <= mode < len(shape):
        raise ValueError(f"mode {mode} invalid for order-{len(shape)} tensor")


def unfold(t, mode: int):
    """Mode-``mode`` unfolding into an ``n_mode x (N / n_mode)`` matrix.

    Dense input yields an ndarray (a view for mode 0 when the data is laid
    out first-mode-fastest); sparse input yields a ``scipy.sparse.coo_array``
    so downstream products never densify.
    """
    _check_mode(t.shape, mode)
    dims = t.shape
    n_mode = dims[mode]
    n_cols = t.size // n_mode
    if isinstance(t, DenseTensor):
        return np.moveaxis(t.data, mode, 0).reshape(n_mode, n_cols, order="F")
    if isinstance(t, SparseTensor):
        idx = t.indices
        rows = idx[:, mode]
        cols = np.zeros(t.nnz, dtype=np.int64)
        stride = 1
        for q, n in enumerate(dims):
            if q == mode:
                continue
            cols += idx[:, q] * stride
            stride *= n
        return scipy.sparse.coo_array((t.values, (rows, cols)), shape=(n_mode, n_cols))
    raise TypeError(f"cannot unfold {type(t).__name__}")


def khatri_rao(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product of two matrices with equal column counts."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("khatri_rao operands must be 2-D")
    if a.shape[1] != b.shape[1]:
        raise ValueError(
            f"khatri_rao column counts differ: {a.shape[1]} vs {b.shape[1]}"
        )
    r = a.shape[1]
    return (a[:, None, :] * b[None, :, :]).reshape(a.shape[0] * b.shape[0], r)


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Entrywise product of two same-shape matrices."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"hadamard shapes differ: {a.shape} vs {b.shape}")
    return a * b


def khatri_rao_chain(factors, skip: int) -> np.ndarray:
    """Khatri-Rao product of all factors except ``skip``, descending mode order.

    Column ``j`` of the result is the Kronecker product of the mode-``skip``-
    excluded columns ``j``, highest mode first, so its row index runs with the
    lowest mode fastest.
    """
    order = [q for q in range(len(factors) - 1, -1, -1) if q != skip]
    theta = factors[order[0]]
    for q in order[1:]:
        theta = khatri_rao(theta, factors[q])
    return theta


def _check_factors(shape, factors) -> int:
    if len(factors) != len(shape):
        raise ValueError(f"expected {len(shape)} factors, got {len(factors)}")
    r = factors[0].shape[1]
    for q, (f, n) in enumerate(zip(factors, shape)):
        if f.ndim != 2:
            raise ValueError(f"factor {q} is not a matrix")
        if f.shape[1] != r:
            raise ValueError(f"factor {q} has rank {f.shape[1]}, expected {r}")
        if f.shape[0] != n:
            raise ValueError(f"factor {q} has {f.shape[0]} rows, mode size is {n}")
    return r


def stack_factors(factors) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate factors row-wise for the COO kernels; returns (stacked, offsets)."""
    offsets = np.zeros(len(factors), dtype=np.int64)
    for q in range(1, len(factors)):
        offsets[q] = offsets[q - 1] + factors[q - 1].shape[0]
    return np.ascontiguousarray(np.concatenate(factors, axis=0)), offsets


def mttkrp(t, factors, mode: int) -> np.ndarray:
    """Matricized tensor times Khatri-Rao product: ``unfold(t, mode) @ theta``.

    Dense tensors use BLAS on an explicitly built Khatri-Rao chain; sparse
    tensors run an O(p * r * nnz) loop over stored entries only.
    """
    _check_mode(t.shape, mode)
    _check_factors(t.shape, factors)
    if isinstance(t, DenseTensor):
        theta = khatri_rao_chain(factors, mode)
        return unfold(t, mode) @ theta
    if isinstance(t, SparseTensor):
        stacked, offsets = stack_factors(factors)
        return backend.mttkrp_coo(
            t.indices, t.values, stacked, offsets, mode, t.shape[mode]
        )
    raise TypeError(f"cannot compute mttkrp of {type(t).__name__}")
