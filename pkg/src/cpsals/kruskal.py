"""Kruskal (CP) model: reconstruction, Gram products, objective, derivatives.

The design variable is a list of factor matrices ``A_i`` of size
``n_i x r``; the model tensor is the sum of the r outer products of their
columns. The regularized sample objective is

    f(x; X) = 0.5*||X - [[x]]||^2 + 0.5*lambda*sum_i ||A_i||^2,

whose mode-i gradient in matrix form is ``-mttkrp(X, A, i) + A_i (G_i +
lambda I)`` with ``G_i`` the Hadamard product of the other factors' Gram
matrices, and whose mode-i Hessian is ``(G_i + lambda I) (x) I`` (Kronecker
with the identity; only the r x r kernel is ever formed).
"""

from __future__ import annotations

import os

import numpy as np

from . import backend
from .ops import hadamard, khatri_rao_chain, mttkrp, stack_factors
from .tensors import DenseTensor, SparseTensor, validate_shape


class KruskalModel:
    """Factor matrices of a rank-r CP model.

    Parameters
    ----------
    factors : list of (n_i, r) arrays
        One factor matrix per mode, all with the same column count.
    """

    __slots__ = ("shape", "rank", "factors")

    def __init__(self, factors):
        factors = [np.asarray(f, dtype=np.float64) for f in factors]
        if len(factors) < 2:
            raise ValueError("a Kruskal model needs at least two factor matrices")
        r = factors[0].shape[1] if factors[0].ndim == 2 else 0
        if r < 1:
            raise ValueError("rank must be >= 1")
        for q, f in enumerate(factors):
            if f.ndim != 2 or f.shape[1] != r:
                raise ValueError(f"factor {q} must be a matrix with {r} columns")
            if not np.all(np.isfinite(f)):
                raise ValueError(f"factor {q} has non-finite entries")
        self.shape = validate_shape([f.shape[0] for f in factors])
        self.rank = r
        self.factors = factors

    @property
    def order(self) -> int:
        return len(self.shape)

    def copy(self) -> "KruskalModel":
        return KruskalModel([f.copy() for f in self.factors])

    def norm_sq(self) -> float:
        """Squared norm of the design variable: sum of squared factor entries."""
        return float(sum(float(f.ravel() @ f.ravel()) for f in self.factors))

    def factor_norms(self) -> np.ndarray:
        """Frobenius norm of each factor matrix."""
        return np.array([np.linalg.norm(f) for f in self.factors])

    def __repr__(self):
        return f"KruskalModel(shape={self.shape}, rank={self.rank})"


def random_model(shape, rank: int, seed) -> KruskalModel:
    """Model with entries i.i.d. uniform on [0, 1).

    Factors are drawn factor-by-factor in mode order from a counter-based
    generator, so a given seed always yields the same model.
    """
    dims = validate_shape(shape)
    if rank < 1:
        raise ValueError("rank must be >= 1")
    rng = np.random.Generator(np.random.Philox(seed))
    return KruskalModel([rng.random((n, rank)) for n in dims])


def reconstruct(model: KruskalModel) -> DenseTensor:
    """Evaluate the model tensor: sum of rank-one outer products."""
    theta = khatri_rao_chain(model.factors, 0)
    m0 = model.factors[0] @ theta.T
    return DenseTensor(m0.reshape(model.shape, order="F"))


def _gram_chain(factors, skip: int) -> np.ndarray:
    """Hadamard product of the factors' Gram matrices, skipping one mode."""
    gram = None
    for q, f in enumerate(factors):
        if q == skip:
            continue
        g = f.T @ f
        gram = g if gram is None else hadamard(gram, g)
    return gram


def gram_product(model: KruskalModel, mode: int) -> np.ndarray:
    """Hadamard product of the Gram matrices of all factors except ``mode``.

    Equals ``theta_i^T theta_i`` without ever forming the Khatri-Rao chain;
    symmetric positive semidefinite.
    """
    if not 0 <= mode < model.order:
        raise ValueError(f"mode {mode} invalid for order-{model.order} model")
    return _gram_chain(model.factors, mode)


def _all_modes_gram_sum(factors) -> float:
    """Squared norm of the reconstruction via the Gram identity."""
    gram = None
    for f in factors:
        g = f.T @ f
        gram = g if gram is None else gram * g
    return float(gram.sum())


def model_inner(model: KruskalModel, t) -> float:
    """Inner product of a tensor with the model reconstruction.

    Sparse tensors are handled in O(p * r * nnz) over stored entries.
    """
    if isinstance(t, SparseTensor):
        stacked, offsets = stack_factors(model.factors)
        return backend.kruskal_inner_coo(t.indices, t.values, stacked, offsets)
    if isinstance(t, DenseTensor):
        m = mttkrp(t, model.factors, 0)
        return float(np.sum(m * model.factors[0]))
    raise TypeError(f"cannot take inner product with {type(t).__name__}")


def objective(model: KruskalModel, t, lam: float) -> float:
    """Regularized sample objective f(x; X).

    Dense targets use the direct residual (numerically stable); sparse
    targets use the expansion ||X||^2 - 2<X, [[x]]> + ||[[x]]||^2 so the
    target is never densified.
    """
    if t.shape != model.shape:
        raise ValueError(f"tensor shape {t.shape} != model shape {model.shape}")
    if lam < 0.0:
        raise ValueError("regularization weight must be >= 0")
    reg = 0.5 * lam * model.norm_sq()
    if isinstance(t, DenseTensor):
        resid = t.data - reconstruct(model).data
        flat = resid.ravel()
        return 0.5 * float(flat @ flat) + reg
    if isinstance(t, SparseTensor):
        fit = (
            t.norm_sq()
            - 2.0 * model_inner(model, t)
            + _all_modes_gram_sum(model.factors)
        )
        return 0.5 * fit + reg
    raise TypeError(f"cannot evaluate objective against {type(t).__name__}")


def grad_block(model: KruskalModel, t, lam: float, mode: int) -> np.ndarray:
    """Mode-``mode`` gradient of the objective, in ``n_mode x r`` matrix form.

    Column-wise vectorization of the result gives the gradient with respect
    to the vectorized factor.
    """
    if t.shape != model.shape:
        raise ValueError(f"tensor shape {t.shape} != model shape {model.shape}")
    gram = gram_product(model, mode)
    m = mttkrp(t, model.factors, mode)
    kernel = gram + lam * np.eye(model.rank)
    return -m + model.factors[mode] @ kernel


def hessian_block(model: KruskalModel, lam: float, mode: int) -> np.ndarray:
    """r x r kernel of the mode-``mode`` Hessian: ``G + lambda*I``.

    The full Hessian is this kernel Kronecker the ``n_mode`` identity and is
    never materialized; it does not depend on the target tensor.
    """
    gram = gram_product(model, mode)
    return gram + lam * np.eye(model.rank)


def save_factors(model: KruskalModel, dirpath) -> None:
    """Write the model as one text file per mode plus a manifest.

    ``manifest.txt`` holds the line ``p r n_1 ... n_p``; ``factor_<i>.txt``
    holds the header ``n_i r`` followed by n_i rows of r values.
    """
    os.makedirs(dirpath, exist_ok=True)
    dims = model.shape
    with open(os.path.join(dirpath, "manifest.txt"), "w", encoding="ascii") as fh:
        fh.write(
            f"{model.order} {model.rank} " + " ".join(str(n) for n in dims) + "\n"
        )
    for q, f in enumerate(model.factors):
        with open(
            os.path.join(dirpath, f"factor_{q}.txt"), "w", encoding="ascii"
        ) as fh:
            fh.write(f"{f.shape[0]} {f.shape[1]}\n")
            for row in f:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_factors(dirpath) -> KruskalModel:
    """Read a model written by :func:`save_factors`."""
    with open(os.path.join(dirpath, "manifest.txt"), "r", encoding="ascii") as fh:
        parts = fh.read().split()
    p, r = int(parts[0]), int(parts[1])
    dims = [int(n) for n in parts[2 : 2 + p]]
    factors = []
    for q in range(p):
        with open(
            os.path.join(dirpath, f"factor_{q}.txt"), "r", encoding="ascii"
        ) as fh:
            head = fh.readline().split()
            n_q, r_q = int(head[0]), int(head[1])
            if (n_q, r_q) != (dims[q], r):
                raise ValueError(f"factor_{q}.txt header disagrees with manifest")
            f = np.loadtxt(fh, dtype=np.float64, ndmin=2)
        if f.shape != (n_q, r_q):
            raise ValueError(f"factor_{q}.txt has shape {f.shape}, expected {(n_q, r_q)}")
        factors.append(f)
    return KruskalModel(factors)
