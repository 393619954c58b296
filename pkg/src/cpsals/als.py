"""Regularized alternating least squares over a fixed target tensor.

One sweep cycles through the modes in order, replacing each factor with the
exact minimizer of the (strictly convex, lambda > 0) component problem while
later modes already see the updated factors. The objective therefore never
increases across a block update or a sweep.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .kruskal import (
    KruskalModel,
    _all_modes_gram_sum,
    _gram_chain,
    grad_block,
    random_model,
)
from .ops import mttkrp
from .sources import MomentModel, exact_residual
from .trace import TraceRow


@dataclass(frozen=True)
class AlsConfig:
    """Solver settings: regularization weight, sweep budget, stopping rule.

    The run stops once the max over modes of the block-gradient Frobenius
    norm drops to ``tol_grad``, or after ``max_sweeps`` sweeps.
    """

    lam: float
    max_sweeps: int
    tol_grad: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.lam <= 0.0:
            raise ValueError("regularization weight must be > 0")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.tol_grad < 0.0:
            raise ValueError("tol_grad must be >= 0")


def block_solve(mttkrp_result: np.ndarray, gram: np.ndarray, lam: float) -> np.ndarray:
    """Solve ``A_hat (G + lambda I) = mttkrp_result`` for ``A_hat``.

    One Cholesky factorization of the r x r kernel serves all rows of the
    right-hand side.
    """
    rhs = np.asarray(mttkrp_result, dtype=np.float64)
    gram = np.asarray(gram, dtype=np.float64)
    if lam <= 0.0:
        raise ValueError("regularization weight must be > 0")
    if not (np.all(np.isfinite(rhs)) and np.all(np.isfinite(gram))):
        raise ValueError("block_solve inputs must be finite")
    kernel = gram + lam * np.eye(gram.shape[0])
    factor = cho_factor(kernel, lower=True, check_finite=False)
    return cho_solve(factor, rhs.T, check_finite=False).T


def _update_factor(factors, t, lam, mode, alpha):
    """One relaxed Gauss-Seidel step; returns (new factor, mttkrp result)."""
    gram = _gram_chain(factors, mode)
    m = mttkrp(t, factors, mode)
    a_hat = block_solve(m, gram, lam)
    if alpha != 1.0:
        a_hat = (1.0 - alpha) * factors[mode] + alpha * a_hat
    return a_hat, m


def block_update(
    model: KruskalModel, t, lam: float, mode: int, alpha: float = 1.0
) -> KruskalModel:
    """Update one mode of the model (exact minimizer, relaxed by ``alpha``)."""
    if t.shape != model.shape:
        raise ValueError(f"tensor shape {t.shape} != model shape {model.shape}")
    factors = list(model.factors)
    factors[mode], _ = _update_factor(factors, t, lam, mode, alpha)
    return KruskalModel(factors)


def _relaxed_sweep(model, t, lam, alpha):
    """Full sweep over all modes; returns (model, <t, reconstruction>).

    The inner product falls out of the last mode's MTTKRP for free: once
    modes 0..p-2 hold their final factors, ``<t, [[x]]> = sum(M_(p-1) *
    A_(p-1))`` with ``M_(p-1)`` the last MTTKRP result.
    """
    factors = list(model.factors)
    m_last = None
    for mode in range(len(factors)):
        factors[mode], m_last = _update_factor(factors, t, lam, mode, alpha)
    inner = float(np.sum(m_last * factors[-1]))
    return KruskalModel(factors), inner


def trace_objective(model, inner, target_sq, lam):
    """Expansion-form objective shared by the ALS and SALS trace paths."""
    return (
        0.5 * target_sq
        - inner
        + 0.5 * _all_modes_gram_sum(model.factors)
        + 0.5 * lam * model.norm_sq()
    )


def als_sweep(model: KruskalModel, t, lam: float) -> KruskalModel:
    """One full Gauss-Seidel sweep of exact block minimizers."""
    if t.shape != model.shape:
        raise ValueError(f"tensor shape {t.shape} != model shape {model.shape}")
    new_model, _ = _relaxed_sweep(model, t, lam, 1.0)
    return new_model


def als_run(
    t,
    cfg: AlsConfig,
    rank: int,
    init: KruskalModel | None = None,
    *,
    moments: MomentModel | None = None,
    replicate: int = 0,
) -> tuple[KruskalModel, list[TraceRow]]:
    """Run ALS until the gradient tolerance or the sweep budget is reached.

    Returns the final model and one trace row per sweep (objective, max
    block-gradient norm, and the exact residual when ``moments`` is given).
    """
    if init is not None:
        if init.shape != t.shape:
            raise ValueError("init model shape disagrees with tensor")
        model = init.copy()
    else:
        model = random_model(t.shape, rank, cfg.seed)
    if model.rank != rank:
        raise ValueError(f"init model rank {model.rank} != requested rank {rank}")

    target_sq = t.norm_sq()
    nnz = t.nnz
    rows: list[TraceRow] = []
    start = time.perf_counter_ns()
    for k in range(1, cfg.max_sweeps + 1):
        model, inner = _relaxed_sweep(model, t, cfg.lam, 1.0)
        f = trace_objective(model, inner, target_sq, cfg.lam)
        gnorm = max(
            float(np.linalg.norm(grad_block(model, t, cfg.lam, mode)))
            for mode in range(model.order)
        )
        residual = exact_residual(model, moments) if moments is not None else None
        rows.append(
            TraceRow(
                replicate=replicate,
                k=k,
                mode=None,
                alpha=1.0,
                sampled_objective=f,
                exact_residual=residual,
                grad_norm=gnorm,
                batch_nnz=nnz,
                cumulative_samples=0,
                cumulative_cost_units=float(k) * float(nnz),
                wall_ns=time.perf_counter_ns() - start,
            )
        )
        if gnorm <= cfg.tol_grad:
            break
    return model, rows
