"""Dense and sparse tensor containers with a COO text format.

Conventions used throughout the package:

* Shapes are tuples ``(n_1, ..., n_p)`` with ``p >= 2`` and every ``n_i >= 1``.
* Multi-indices are 0-based; modes are 0-based.
* The flat (linearized) index of entry ``(i_1, ..., i_p)`` is
  ``i_1 + i_2*n_1 + i_3*n_1*n_2 + ...`` (first mode fastest), i.e. Fortran
  order of the multi-index. Mode-0 unfolding of a dense tensor is therefore a
  reshape of the flat values.

All containers are value types: treat ``data`` / ``indices`` / ``values`` as
immutable after construction so instances can be shared freely.
"""

from __future__ import annotations

import math

import numpy as np

_MAX_INDEX = np.iinfo(np.int64).max


def validate_shape(shape) -> tuple[int, ...]:
    """Check a tensor shape and return it as a tuple of ints.

    Requires at least two modes, positive extents, and a total size that
    fits the 64-bit index type.
    """
    dims = tuple(int(n) for n in shape)
    if len(dims) < 2:
        raise ValueError(f"tensor order must be >= 2, got shape {dims}")
    if any(n < 1 for n in dims):
        raise ValueError(f"all mode sizes must be >= 1, got shape {dims}")
    total = math.prod(dims)  # exact, arbitrary precision
    if total > _MAX_INDEX:
        raise ValueError(f"total size {total} overflows the index type")
    return dims


class DenseTensor:
    """Dense p-way tensor over float64.

    Parameters
    ----------
    data : array_like
        p-dimensional array of finite values, p >= 2.
    """

    __slots__ = ("shape", "data")

    def __init__(self, data):
        arr = np.asarray(data, dtype=np.float64)
        self.shape = validate_shape(arr.shape)
        if not np.all(np.isfinite(arr)):
            raise ValueError("dense tensor entries must be finite")
        self.data = arr

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def nnz(self) -> int:
        """Number of entries that are not exactly zero."""
        return int(np.count_nonzero(self.data))

    def ravel(self) -> np.ndarray:
        """Flat values in the package's linear-index order (mode 0 fastest)."""
        return self.data.reshape(-1, order="F")

    def norm_sq(self) -> float:
        flat = self.data.ravel()
        return float(flat @ flat)

    def to_sparse(self) -> "SparseTensor":
        flat = self.ravel()
        lin = np.flatnonzero(flat)
        return SparseTensor.from_linear(self.shape, lin, flat[lin])

    def __repr__(self):
        return f"DenseTensor(shape={self.shape})"


class SparseTensor:
    """Sparse p-way tensor in coordinate format.

    Entries are stored sorted by linear index. Construction merges duplicate
    multi-indices by summation and drops entries that are exactly zero after
    merging (no tolerance-based dropping).

    Parameters
    ----------
    shape : sequence of int
    indices : (nnz, p) array_like of int
        0-based multi-indices, one row per stored entry.
    values : (nnz,) array_like of float
    """

    __slots__ = ("shape", "values", "_lin", "_indices")

    def __init__(self, shape, indices, values):
        dims = validate_shape(shape)
        idx = np.asarray(indices, dtype=np.int64)
        vals = np.asarray(values, dtype=np.float64)
        if idx.ndim != 2 or idx.shape[1] != len(dims):
            if idx.size == 0:
                idx = idx.reshape(0, len(dims))
            else:
                raise ValueError(
                    f"indices must be (nnz, {len(dims)}), got {idx.shape}"
                )
        if vals.ndim != 1 or vals.shape[0] != idx.shape[0]:
            raise ValueError("values must be 1-D with one value per index row")
        if not np.all(np.isfinite(vals)):
            raise ValueError("sparse tensor values must be finite")
        for q, n in enumerate(dims):
            if idx.shape[0] and (idx[:, q].min() < 0 or idx[:, q].max() >= n):
                raise ValueError(f"mode-{q} indices out of bounds for size {n}")

        self.shape = dims
        if idx.shape[0] == 0:
            self._lin = np.empty(0, dtype=np.int64)
            self.values = np.empty(0, dtype=np.float64)
            self._indices = idx
            return

        lin = np.ravel_multi_index(tuple(idx.T), dims, order="F")
        uniq, inverse = np.unique(lin, return_inverse=True)
        merged = np.bincount(inverse, weights=vals, minlength=uniq.shape[0])
        keep = merged != 0.0
        self._lin = uniq[keep]
        self.values = merged[keep]
        self._indices = None

    @classmethod
    def from_linear(cls, shape, lin, values, *, _checked=False) -> "SparseTensor":
        """Build from linear indices (mode-0-fastest order).

        With ``_checked=True`` the inputs are trusted to be sorted, unique,
        in-bounds, finite, and free of exact zeros (internal fast path).
        """
        dims = validate_shape(shape)
        lin = np.asarray(lin, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if _checked:
            out = cls.__new__(cls)
            out.shape = dims
            out._lin = lin
            out.values = values
            out._indices = None
            return out
        idx = np.stack(np.unravel_index(lin, dims, order="F"), axis=1)
        return cls(dims, idx, values)

    @property
    def indices(self) -> np.ndarray:
        """(nnz, p) multi-indices, materialized on first access."""
        if self._indices is None:
            from . import backend  # deferred: keep container import light

            self._indices = backend.linear_to_multi(
                self._lin, np.asarray(self.shape, dtype=np.int64)
            )
        return self._indices

    @property
    def linear_indices(self) -> np.ndarray:
        return self._lin

    @property
    def nnz(self) -> int:
        return self.values.shape[0]

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    def norm_sq(self) -> float:
        return float(self.values @ self.values)

    def to_dense(self) -> DenseTensor:
        flat = np.zeros(self.size, dtype=np.float64)
        flat[self._lin] = self.values
        return DenseTensor(flat.reshape(self.shape, order="F"))

    def __repr__(self):
        return f"SparseTensor(shape={self.shape}, nnz={self.nnz})"


def read_coo(path) -> SparseTensor:
    """Read a tensor from the COO text format.

    Line 1 is ``p n_1 ... n_p nnz``; each following data line is
    ``i_1 ... i_p value`` with 0-based indices. Lines starting with ``#`` are
    ignored. Duplicate indices are legal and merged by summation.
    """
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty COO file")
    head = lines[0].split()
    p = int(head[0])
    if len(head) != p + 2:
        raise ValueError(f"{path}: header must be 'p n_1 ... n_p nnz'")
    dims = tuple(int(n) for n in head[1 : p + 1])
    nnz = int(head[p + 1])
    if len(lines) - 1 != nnz:
        raise ValueError(f"{path}: header promises {nnz} entries, found {len(lines) - 1}")
    idx = np.empty((nnz, p), dtype=np.int64)
    vals = np.empty(nnz, dtype=np.float64)
    for e, ln in enumerate(lines[1:]):
        parts = ln.split()
        if len(parts) != p + 1:
            raise ValueError(f"{path}: bad entry line {ln!r}")
        idx[e] = [int(t) for t in parts[:p]]
        vals[e] = float(parts[p])
    return SparseTensor(dims, idx, vals)


def write_coo(tensor: SparseTensor, path) -> None:
    """Write a sparse tensor in the COO text format (see ``read_coo``)."""
    dims = tensor.shape
    idx = tensor.indices
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{len(dims)} " + " ".join(str(n) for n in dims) + f" {tensor.nnz}\n")
        for e in range(tensor.nnz):
            fh.write(
                " ".join(str(int(i)) for i in idx[e])
                + f" {float(tensor.values[e])!r}\n"
            )
