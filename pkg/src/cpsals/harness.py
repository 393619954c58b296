"""Experiment driver: cost model, config parsing, and the three studies.

* ``convergence`` — deterministic ALS on the expected tensor next to
  stochastic runs on noisy draws under constant and decreasing stepsizes.
* ``sparsity`` — how batch averaging fills in a sparse tensor's support and
  shrinks the sampling error.
* ``efficiency`` — terminal accuracy per arm under a fixed total-sample
  budget, with per-block cost units from the sparsity cost model.

Replicates and arms are independent, so they run in a process pool when
``workers > 1``; results are merged by (arm, replicate) so output files are
byte-identical regardless of worker count (suppress wall-clock columns via
``suppress_wall`` to compare runs).
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .als import AlsConfig, als_run
from .kruskal import random_model
from .sals import SalsConfig, StepSchedule, _draw_block, sals_run
from .sources import (
    PerturbedCpSource,
    SparseRandomSource,
    replicate_seed,
)
from .tensors import validate_shape
from .trace import write_trace

EXPERIMENTS = ("convergence", "sparsity", "efficiency")

SPARSITY_FIELDS = ("replicate", "m", "nnz", "expected_nnz", "sampling_error")


@dataclass(frozen=True)
class CostModel:
    """Per-block cost units for averages of sparse samples.

    ``n_entries`` is the tensor's total entry count N; ``gamma`` the
    probability that a sample entry is zero.
    """

    n_entries: int
    gamma: float

    def __post_init__(self):
        if self.n_entries < 1:
            raise ValueError("n_entries must be >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")


def cost_per_block(cm: CostModel, m: int) -> float:
    """Cost of one block iteration at batch size m:
    N(1 - gamma^m) for the solve sweep plus (m - 1) N (1 - gamma) for
    forming the average."""
    if m < 1:
        raise ValueError("batch size must be >= 1")
    n = float(cm.n_entries)
    return n * (1.0 - cm.gamma**m) + (m - 1) * n * (1.0 - cm.gamma)


def expected_nnz(cm: CostModel, m: int) -> float:
    """Expected support size of an m-sample average: N(1 - gamma^m)."""
    if m < 1:
        raise ValueError("batch size must be >= 1")
    return float(cm.n_entries) * (1.0 - cm.gamma**m)


@dataclass(frozen=True)
class SolverSpec:
    """Solver block of an experiment config."""

    lam: float
    rank: int
    schedule: StepSchedule
    batch_sizes: tuple[int, ...]
    max_blocks: int
    tol: float = 1e-8
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "SolverSpec":
        schedule = d.get("schedule", "decr:1.0")
        if isinstance(schedule, str):
            schedule = StepSchedule.parse(schedule)
        batch_sizes = tuple(int(m) for m in d.get("batch_sizes", [1]))
        if not batch_sizes or any(m < 1 for m in batch_sizes):
            raise ValueError("batch_sizes must be a nonempty list of ints >= 1")
        return cls(
            lam=float(d["lambda"]),
            rank=int(d["rank"]),
            schedule=schedule,
            batch_sizes=batch_sizes,
            max_blocks=int(d.get("max_blocks", 100)),
            tol=float(d.get("tol", 1e-8)),
            seed=int(d.get("seed", 0)),
        )


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed experiment description (see README for the JSON schema)."""

    experiment: str
    source: dict
    solver: SolverSpec
    budget: int | None = None
    replicates: int = 1
    workers: int = 1
    suppress_wall: bool = False
    out: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(
                f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}"
            )
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.budget is not None and self.budget < max(self.solver.batch_sizes):
            raise ValueError("budget must cover the largest batch size")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(
            experiment=str(d["experiment"]),
            source=dict(d["source"]),
            solver=SolverSpec.from_dict(d["solver"]),
            budget=int(d["budget"]) if "budget" in d and d["budget"] is not None else None,
            replicates=int(d.get("replicates", 1)),
            workers=int(d.get("workers", 1)),
            suppress_wall=bool(d.get("suppress_wall", False)),
            out=d.get("out"),
        )

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def build_source(spec: dict, *, spawn_key: tuple[int, ...] = ()):
    """Instantiate the source described by a config block.

    ``spawn_key`` derives an independent stream from the block's seed, e.g.
    one per (arm, replicate).
    """
    kind = str(spec["kind"]).lower()
    seed = spec.get("seed", 0)
    if spawn_key:
        seed = np.random.SeedSequence(seed, spawn_key=spawn_key)
    shape = validate_shape(spec["shape"])
    if kind == "perturbed_cp":
        truth = random_model(shape, int(spec["rank"]), spec.get("truth_seed", 0))
        return PerturbedCpSource(truth, float(spec.get("delta", 0.0)), seed)
    if kind == "sparse_random":
        return SparseRandomSource(shape, float(spec["gamma"]), seed)
    raise ValueError(f"unknown source kind {spec['kind']!r}")


def _run_jobs(fn, payloads, workers: int):
    if workers <= 1 or len(payloads) <= 1:
        return [fn(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, payloads))


def _sals_replicate(payload):
    """One stochastic run for an (arm, replicate) cell; used by both the
    convergence and efficiency experiments."""
    (cfg, arm_index, rep, schedule, batch_size, max_blocks, block_cost) = payload
    source = build_source(cfg.source, spawn_key=(arm_index, rep))
    init = random_model(
        source.shape, cfg.solver.rank, replicate_seed(cfg.solver.seed, rep)
    )
    scfg = SalsConfig(
        lam=cfg.solver.lam,
        rank=cfg.solver.rank,
        schedule=schedule,
        batch_size=batch_size,
        max_blocks=max_blocks,
        seed=cfg.solver.seed,
    )
    _, rows = sals_run(
        source, scfg, init=init, replicate=rep, block_cost=block_cost
    )
    return rows


def run_convergence(cfg: ExperimentConfig, out_dir) -> dict[str, str]:
    """Deterministic ALS on the expected tensor plus stochastic arms under
    constant and decreasing stepsizes; one trace CSV per arm."""
    if str(cfg.source["kind"]).lower() != "perturbed_cp":
        raise ValueError("convergence experiment needs a perturbed_cp source")
    os.makedirs(out_dir, exist_ok=True)
    include_wall = not cfg.suppress_wall
    solver = cfg.solver
    m = solver.batch_sizes[0]
    paths: dict[str, str] = {}

    # Noise-free arm: the expected tensor is decomposed directly.
    source0 = build_source({**cfg.source, "delta": 0.0})
    moments = source0.moments()
    acfg = AlsConfig(
        lam=solver.lam,
        max_sweeps=solver.max_blocks,
        tol_grad=solver.tol,
        seed=solver.seed,
    )
    _, als_rows = als_run(moments.mean, acfg, solver.rank, moments=moments)
    paths["als"] = os.path.join(out_dir, "convergence_als.csv")
    write_trace(paths["als"], als_rows, include_wall=include_wall)

    arms = [
        ("constant", StepSchedule.constant(min(solver.schedule.c, 1.0))),
        ("decreasing", StepSchedule.decreasing(solver.schedule.c)),
    ]
    for arm_index, (name, schedule) in enumerate(arms):
        payloads = [
            (cfg, arm_index, rep, schedule, m, solver.max_blocks, None)
            for rep in range(cfg.replicates)
        ]
        results = _run_jobs(_sals_replicate, payloads, cfg.workers)
        rows = [row for rows in results for row in rows]
        paths[name] = os.path.join(out_dir, f"convergence_sals_{name}.csv")
        write_trace(paths[name], rows, include_wall=include_wall)
    return paths


def _sparsity_cell(payload):
    cfg, mi, rep, m = payload
    source = build_source(cfg.source, spawn_key=(mi, rep))
    xt, _, _ = _draw_block(source, m)
    mean_flat = source.moments().mean.ravel().copy()
    mean_flat[xt.linear_indices] -= xt.values
    return (rep, m, xt.nnz, float(np.linalg.norm(mean_flat)))


def run_sparsity(cfg: ExperimentConfig, out_dir) -> dict[str, str]:
    """Empirical support size and sampling error of batch averages, per
    batch size and replicate."""
    if str(cfg.source["kind"]).lower() != "sparse_random":
        raise ValueError("sparsity experiment needs a sparse_random source")
    os.makedirs(out_dir, exist_ok=True)
    cm = CostModel(
        n_entries=int(np.prod(validate_shape(cfg.source["shape"]))),
        gamma=float(cfg.source["gamma"]),
    )
    payloads = [
        (cfg, mi, rep, m)
        for mi, m in enumerate(cfg.solver.batch_sizes)
        for rep in range(cfg.replicates)
    ]
    results = _run_jobs(_sparsity_cell, payloads, cfg.workers)
    path = os.path.join(out_dir, "sparsity.csv")
    with open(path, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SPARSITY_FIELDS)
        for (rep, m, nnz, err) in results:
            writer.writerow([rep, m, nnz, repr(expected_nnz(cm, m)), repr(err)])
    return {"sparsity": path}


def run_efficiency(cfg: ExperimentConfig, out_dir) -> dict[str, str]:
    """Fixed-budget comparison across batch sizes; one trace CSV per arm.

    Every arm consumes exactly ``budget`` samples, in ``budget / m`` blocks;
    per-block cost units come from :func:`cost_per_block`.
    """
    if str(cfg.source["kind"]).lower() != "sparse_random":
        raise ValueError("efficiency experiment needs a sparse_random source")
    if cfg.budget is None:
        raise ValueError("efficiency experiment needs a budget")
    os.makedirs(out_dir, exist_ok=True)
    include_wall = not cfg.suppress_wall
    cm = CostModel(
        n_entries=int(np.prod(validate_shape(cfg.source["shape"]))),
        gamma=float(cfg.source["gamma"]),
    )
    paths: dict[str, str] = {}
    for mi, m in enumerate(cfg.solver.batch_sizes):
        if cfg.budget % m:
            raise ValueError(f"budget {cfg.budget} not divisible by batch size {m}")
        blocks = cfg.budget // m
        payloads = [
            (cfg, mi, rep, cfg.solver.schedule, m, blocks, cost_per_block(cm, m))
            for rep in range(cfg.replicates)
        ]
        results = _run_jobs(_sals_replicate, payloads, cfg.workers)
        rows = [row for rows in results for row in rows]
        arm = f"m{m}"
        paths[arm] = os.path.join(out_dir, f"efficiency_{arm}.csv")
        write_trace(paths[arm], rows, include_wall=include_wall)
    return paths


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> dict[str, str]:
    """Dispatch on ``cfg.experiment``; returns the written file paths."""
    out = out_dir if out_dir is not None else cfg.out
    if out is None:
        raise ValueError("no output directory given (config 'out' or --out)")
    if cfg.experiment == "convergence":
        return run_convergence(cfg, out)
    if cfg.experiment == "sparsity":
        return run_sparsity(cfg, out)
    return run_efficiency(cfg, out)
