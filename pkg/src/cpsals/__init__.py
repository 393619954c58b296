"""CP decomposition of sampled random tensors.

Regularized alternating least squares over a fixed tensor, a stochastic
variant that consumes i.i.d. tensor samples batch by batch, seeded sources
with analytically known moments, and an experiment harness with CSV traces.
"""

from .als import AlsConfig, als_run, als_sweep, block_solve, block_update
from .backend import BACKEND
from .harness import (
    CostModel,
    ExperimentConfig,
    SolverSpec,
    build_source,
    cost_per_block,
    expected_nnz,
    run_convergence,
    run_efficiency,
    run_experiment,
    run_sparsity,
)
from .kruskal import (
    KruskalModel,
    grad_block,
    gram_product,
    hessian_block,
    load_factors,
    model_inner,
    objective,
    random_model,
    reconstruct,
    save_factors,
)
from .ops import frobenius_norm, hadamard, khatri_rao, khatri_rao_chain, mttkrp, unfold
from .sals import (
    BoundMonitor,
    MonitorViolation,
    SalsConfig,
    StepSchedule,
    batch_average,
    radius,
    sals_block,
    sals_run,
)
from .sources import (
    MomentModel,
    PerturbedCpSource,
    SparseRandomSource,
    exact_residual,
    perturbed_cp_source,
    replicate_seed,
    sample_batch,
    sparse_random_source,
)
from .tensors import DenseTensor, SparseTensor, read_coo, validate_shape, write_coo
from .trace import TRACE_FIELDS, TraceRow, read_trace, write_trace

__version__ = "0.1.0"

__all__ = [
    "AlsConfig",
    "BACKEND",
    "BoundMonitor",
    "CostModel",
    "DenseTensor",
    "ExperimentConfig",
    "KruskalModel",
    "MomentModel",
    "MonitorViolation",
    "PerturbedCpSource",
    "SalsConfig",
    "SolverSpec",
    "SparseRandomSource",
    "SparseTensor",
    "StepSchedule",
    "TRACE_FIELDS",
    "TraceRow",
    "als_run",
    "als_sweep",
    "batch_average",
    "block_solve",
    "block_update",
    "build_source",
    "cost_per_block",
    "exact_residual",
    "expected_nnz",
    "frobenius_norm",
    "grad_block",
    "gram_product",
    "hadamard",
    "hessian_block",
    "khatri_rao",
    "khatri_rao_chain",
    "load_factors",
    "model_inner",
    "mttkrp",
    "objective",
    "perturbed_cp_source",
    "radius",
    "random_model",
    "read_coo",
    "read_trace",
    "reconstruct",
    "replicate_seed",
    "run_convergence",
    "run_efficiency",
    "run_experiment",
    "run_sparsity",
    "sals_block",
    "sals_run",
    "sample_batch",
    "save_factors",
    "sparse_random_source",
    "unfold",
    "validate_shape",
    "write_coo",
    "write_trace",
]
