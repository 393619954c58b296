"""Independent reference implementations used as test oracles.

Everything here is deliberately naive (scalar loops, explicit Kronecker
products, textbook elimination) and shares no code with the package paths it
checks.
"""

from __future__ import annotations

import numpy as np


def frob_loop(values) -> float:
    """Frobenius norm by scalar accumulation."""
    acc = 0.0
    for v in np.asarray(values, dtype=np.float64).ravel():
        acc += float(v) * float(v)
    return acc**0.5


def unfold_loop(arr: np.ndarray, mode: int) -> np.ndarray:
    """Mode unfolding by enumerating the column-index formula
    col = sum_{k != mode} i_k * prod_{m < k, m != mode} n_m."""
    dims = arr.shape
    n_mode = dims[mode]
    n_cols = arr.size // n_mode
    out = np.zeros((n_mode, n_cols))
    for idx in np.ndindex(*dims):
        col = 0
        stride = 1
        for k, i_k in enumerate(idx):
            if k == mode:
                continue
            col += i_k * stride
            stride *= dims[k]
        out[idx[mode], col] = arr[idx]
    return out


def kron_theta(factors, skip: int) -> np.ndarray:
    """Explicit Khatri-Rao chain over modes != skip, descending mode order,
    built column by column with np.kron."""
    order = [q for q in range(len(factors) - 1, -1, -1) if q != skip]
    r = factors[0].shape[1]
    cols = []
    for j in range(r):
        col = factors[order[0]][:, j]
        for q in order[1:]:
            col = np.kron(col, factors[q][:, j])
        cols.append(col)
    return np.stack(cols, axis=1)


def reconstruct_loop(factors) -> np.ndarray:
    """CP reconstruction by looping over every entry and every component."""
    dims = tuple(f.shape[0] for f in factors)
    r = factors[0].shape[1]
    out = np.zeros(dims)
    for idx in np.ndindex(*dims):
        acc = 0.0
        for j in range(r):
            term = 1.0
            for q, i_q in enumerate(idx):
                term *= factors[q][i_q, j]
            acc += term
        out[idx] = acc
    return out


def gauss_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Dense linear solve by Gaussian elimination with partial pivoting."""
    a = np.array(a, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    n = a.shape[0]
    single = b.ndim == 1
    if single:
        b = b[:, None]
    for col in range(n):
        piv = col + int(np.argmax(np.abs(a[col:, col])))
        if piv != col:
            a[[col, piv]] = a[[piv, col]]
            b[[col, piv]] = b[[piv, col]]
        for row in range(col + 1, n):
            factor = a[row, col] / a[col, col]
            a[row, col:] -= factor * a[col, col:]
            b[row] -= factor * b[col]
    x = np.zeros_like(b)
    for row in range(n - 1, -1, -1):
        x[row] = (b[row] - a[row, row + 1 :] @ x[row + 1 :]) / a[row, row]
    return x[:, 0] if single else x


def central_diff(f, x0: float, h: float) -> float:
    """Central finite difference of a scalar function."""
    return (f(x0 + h) - f(x0 - h)) / (2.0 * h)
