"""Stochastic alternating least squares with batch sampling and relaxation.

Each block iteration k draws a batch, averages it once, and cycles through
the modes: the exact component minimizer ``A_hat`` of the batch objective is
blended into the iterate as ``A <- (1 - alpha) A + alpha A_hat`` with
``alpha = c`` (constant rule) or ``alpha = c / k`` (decreasing rule). The
relaxation form is algebraically the damped Newton step on the component
problem, since ``A_hat = A - H^{-1} g`` for the batch gradient g.

For stepsizes with ``c <= 1`` every factor norm stays below
``max(initial factor norm, largest batch radius seen so far)``; the
:class:`BoundMonitor` verifies this at runtime and raises
:class:`MonitorViolation` on failure (which would indicate a bug, not bad
data).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .als import _relaxed_sweep, trace_objective
from .kruskal import KruskalModel, random_model
from .sources import exact_residual
from .tensors import DenseTensor, SparseTensor
from .trace import TraceRow

_BOUND_SLACK = 1e-9
_DRAW_CHUNK = 16  # samples held at once while streaming a batch average


class MonitorViolation(RuntimeError):
    """An iterate escaped the guaranteed norm bound."""


@dataclass(frozen=True)
class StepSchedule:
    """Stepsize rule: ``constant`` (alpha = c) or ``decreasing`` (alpha = c/k).

    ``c`` must lie in (0, 2]; the constant rule additionally requires
    ``c <= 1`` (larger constant steps are not a convex combination and void
    the iterate bound).
    """

    rule: str
    c: float = 1.0

    def __post_init__(self):
        if self.rule not in ("constant", "decreasing"):
            raise ValueError(f"unknown stepsize rule {self.rule!r}")
        if not 0.0 < self.c <= 2.0:
            raise ValueError("stepsize constant must lie in (0, 2]")
        if self.rule == "constant" and self.c > 1.0:
            raise ValueError("constant stepsize requires c <= 1")

    @classmethod
    def constant(cls, c: float = 1.0) -> "StepSchedule":
        return cls("constant", c)

    @classmethod
    def decreasing(cls, c: float = 1.0) -> "StepSchedule":
        return cls("decreasing", c)

    @classmethod
    def parse(cls, text: str) -> "StepSchedule":
        """Parse ``const:c`` / ``decr:c`` strings (as used by the CLI)."""
        try:
            rule, c = text.split(":")
            c = float(c)
        except ValueError:
            raise ValueError(f"stepsize spec must be 'const:c' or 'decr:c', got {text!r}")
        if rule == "const":
            return cls.constant(c)
        if rule == "decr":
            return cls.decreasing(c)
        raise ValueError(f"unknown stepsize rule {rule!r}")

    def alpha(self, k: int) -> float:
        if k < 1:
            raise ValueError("block index is 1-based")
        return self.c if self.rule == "constant" else self.c / k

    @property
    def monitorable(self) -> bool:
        """Whether the iterate bound is guaranteed (c <= 1)."""
        return self.c <= 1.0


@dataclass(frozen=True)
class SalsConfig:
    """Stochastic solver settings.

    ``check_bounds`` enables the runtime iterate-bound monitor; it is only
    active for schedules with c <= 1 (runs with 1 < c <= 2 are permitted but
    unmonitored, since the bound is not guaranteed there).
    """

    lam: float
    rank: int
    schedule: StepSchedule
    batch_size: int
    max_blocks: int
    seed: int = 0
    check_bounds: bool = False

    def __post_init__(self):
        if self.lam <= 0.0:
            raise ValueError("regularization weight must be > 0")
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.max_blocks < 1:
            raise ValueError("block budget must be >= 1")


@dataclass
class BoundMonitor:
    """Tracks initial factor norms and the running max batch radius, and
    checks each factor norm against ``max(initial, max radius) + 1e-9``."""

    initial_norms: np.ndarray
    max_radius: float = 0.0
    blocks_checked: int = field(default=0)

    @classmethod
    def for_model(cls, model: KruskalModel) -> "BoundMonitor":
        return cls(initial_norms=model.factor_norms())

    def observe_radius(self, radius: float) -> None:
        if radius > self.max_radius:
            self.max_radius = radius

    def check(self, model: KruskalModel, k: int) -> None:
        bounds = np.maximum(self.initial_norms, self.max_radius) + _BOUND_SLACK
        norms = model.factor_norms()
        bad = np.flatnonzero(norms > bounds)
        if bad.size:
            mode = int(bad[0])
            raise MonitorViolation(
                f"block {k}: factor {mode} norm {norms[mode]:.6e} exceeds "
                f"bound {bounds[mode]:.6e}"
            )
        self.blocks_checked += 1


def batch_average(batch) -> DenseTensor | SparseTensor:
    """Entrywise mean of a batch of same-shape, same-kind tensors.

    A singleton batch is returned as-is. Sparse output keeps the union of
    the supports, minus entries that cancel to exactly zero.
    """
    if not batch:
        raise ValueError("batch must be nonempty")
    shape = batch[0].shape
    for t in batch[1:]:
        if t.shape != shape:
            raise ValueError("batch tensors must share one shape")
    m = len(batch)
    if m == 1:
        return batch[0]
    if all(isinstance(t, SparseTensor) for t in batch):
        acc = np.zeros(batch[0].size, dtype=np.float64)
        for t in batch:
            acc[t.linear_indices] += t.values
        lin = np.flatnonzero(acc)
        return SparseTensor.from_linear(shape, lin, acc[lin] / m, _checked=True)
    if all(isinstance(t, DenseTensor) for t in batch):
        acc = np.zeros(shape, dtype=np.float64)
        for t in batch:
            acc += t.data
        return DenseTensor(acc / m)
    raise ValueError("batch mixes sparse and dense tensors")


def radius(batch, lam: float) -> float:
    """Norm bound on any component minimizer of the batch objective:
    sqrt(mean ||X^l||^2 / lambda)."""
    if not batch:
        raise ValueError("batch must be nonempty")
    if lam <= 0.0:
        raise ValueError("regularization weight must be > 0")
    s2 = sum(t.norm_sq() for t in batch) / len(batch)
    return math.sqrt(s2 / lam)


def sals_block(model: KruskalModel, batch, cfg: SalsConfig, k: int) -> KruskalModel:
    """One block iteration: average the batch, then relax every mode once."""
    if k < 1:
        raise ValueError("block index is 1-based")
    xt = batch_average(batch)
    if xt.shape != model.shape:
        raise ValueError(f"batch shape {xt.shape} != model shape {model.shape}")
    new_model, _ = _relaxed_sweep(model, xt, cfg.lam, cfg.schedule.alpha(k))
    return new_model


def _draw_block(source, m: int):
    """Draw m samples and average them without holding the whole batch.

    Returns ``(average, mean squared norm, total sample nnz)``; accumulation
    order matches :func:`batch_average` exactly.
    """
    if m == 1:
        t = source.sample(1)[0]
        return t, t.norm_sq(), t.nnz
    first = source.sample(1)[0]
    sq = first.norm_sq()
    total_nnz = first.nnz
    sparse = isinstance(first, SparseTensor)
    if sparse:
        acc = np.zeros(first.size, dtype=np.float64)
        acc[first.linear_indices] += first.values
    else:
        acc = np.zeros(first.shape, dtype=np.float64)
        acc += first.data
    drawn = 1
    while drawn < m:
        for t in source.sample(min(_DRAW_CHUNK, m - drawn)):
            if sparse:
                acc[t.linear_indices] += t.values
            else:
                acc += t.data
            sq += t.norm_sq()
            total_nnz += t.nnz
            drawn += 1
    if sparse:
        lin = np.flatnonzero(acc)
        xt = SparseTensor.from_linear(first.shape, lin, acc[lin] / m, _checked=True)
    else:
        xt = DenseTensor(acc / m)
    return xt, sq / m, total_nnz


def sals_run(
    source,
    cfg: SalsConfig,
    init: KruskalModel | None = None,
    *,
    replicate: int = 0,
    block_cost: float | None = None,
    with_residual: bool = True,
) -> tuple[KruskalModel, list[TraceRow]]:
    """Run the stochastic solver for ``cfg.max_blocks`` block iterations.

    Each block draws a fresh batch from the source's stream. The trace holds
    one row per block: stepsize, batch-average nnz, the batch objective at
    the updated iterate, the exact residual (from the source's moments,
    unless ``with_residual=False``), sample and cost accounting, and wall
    time. ``block_cost`` overrides the recorded per-block cost units (the
    harness injects the sparsity cost model here); the default is the
    observed work nnz(average) + (m - 1) * mean sample nnz.
    """
    if init is not None:
        if init.shape != source.shape:
            raise ValueError("init model shape disagrees with source")
        if init.rank != cfg.rank:
            raise ValueError(f"init model rank {init.rank} != configured {cfg.rank}")
        model = init.copy()
    else:
        model = random_model(source.shape, cfg.rank, cfg.seed)

    moments = source.moments() if with_residual else None
    monitor = None
    if cfg.check_bounds and cfg.schedule.monitorable:
        monitor = BoundMonitor.for_model(model)

    m = cfg.batch_size
    rows: list[TraceRow] = []
    cum_samples = 0
    cum_cost = 0.0
    start = time.perf_counter_ns()
    for k in range(1, cfg.max_blocks + 1):
        xt, mean_sq, total_nnz = _draw_block(source, m)
        alpha = cfg.schedule.alpha(k)
        model, inner = _relaxed_sweep(model, xt, cfg.lam, alpha)
        if monitor is not None:
            monitor.observe_radius(math.sqrt(mean_sq / cfg.lam))
            monitor.check(model, k)
        f = trace_objective(model, inner, mean_sq, cfg.lam)
        cum_samples += m
        if block_cost is not None:
            cum_cost = float(k) * block_cost
        else:
            cum_cost += xt.nnz + (total_nnz / m) * (m - 1)
        rows.append(
            TraceRow(
                replicate=replicate,
                k=k,
                mode=None,
                alpha=alpha,
                sampled_objective=f,
                exact_residual=(
                    exact_residual(model, moments) if moments is not None else None
                ),
                grad_norm=None,
                batch_nnz=xt.nnz,
                cumulative_samples=cum_samples,
                cumulative_cost_units=cum_cost,
                wall_ns=time.perf_counter_ns() - start,
            )
        )
    return model, rows
