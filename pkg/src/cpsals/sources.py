"""Seeded i.i.d. random-tensor sources with analytically known moments.

Both built-in sources expose exact first and second moments, so the
relative error against the expected tensor — sqrt(E||X - [[x]]||^2) /
sqrt(E||X||^2) — is computable in closed form at any iterate. Draws are
almost surely bounded in norm (``norm_bound``), and a source's stream is
deterministic given its seed and draw count: drawing 3 then 2 samples gives
the same tensors as drawing 5.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .kruskal import KruskalModel, _all_modes_gram_sum, reconstruct
from .tensors import DenseTensor, SparseTensor, validate_shape


@dataclass(frozen=True)
class MomentModel:
    """Exact moments of a random tensor.

    ``total_variance`` is the sum of per-entry variances;
    ``second_moment_norm`` is E||X||^2 = total_variance + ||E[X]||^2.
    ``mean_model``, when present, is a CP representation of the mean tensor
    (both built-in sources have one); residual evaluation then runs on Gram
    products instead of a dense reconstruction.
    """

    mean: DenseTensor
    total_variance: float
    second_moment_norm: float
    mean_model: KruskalModel | None = None

    def __post_init__(self):
        if self.total_variance < 0.0:
            raise ValueError("total_variance must be >= 0")
        if self.second_moment_norm < self.mean.norm_sq() - 1e-12:
            raise ValueError("second moment norm below ||mean||^2")


def replicate_seed(seed, replicate: int) -> np.random.SeedSequence:
    """Independent per-replicate seed stream derived from a base seed."""
    return np.random.SeedSequence(seed, spawn_key=(int(replicate),))


class PerturbedCpSource:
    """Dense draws: a fixed low-rank mean plus entrywise Uniform(-delta, delta) noise."""

    kind = "perturbed_cp"

    def __init__(self, truth: KruskalModel, delta: float, seed):
        if delta < 0.0:
            raise ValueError("delta must be >= 0")
        self.truth = truth
        self.delta = float(delta)
        self.shape = truth.shape
        self.seed = seed
        self._mean = reconstruct(truth)
        self._rng = np.random.Generator(np.random.Philox(seed))
        n = self._mean.size
        var = self.delta * self.delta / 3.0
        self._moments = MomentModel(
            mean=self._mean,
            total_variance=n * var,
            second_moment_norm=n * var + self._mean.norm_sq(),
            mean_model=truth,
        )

    def moments(self) -> MomentModel:
        return self._moments

    def norm_bound(self) -> float:
        """Almost-sure bound on ||draw||."""
        return math.sqrt(self._mean.norm_sq()) + self.delta * math.sqrt(
            self._mean.size
        )

    def sample(self, m: int) -> list[DenseTensor]:
        if m < 1:
            raise ValueError("batch size must be >= 1")
        out = []
        for _ in range(m):
            u = self._rng.random(self.shape)
            out.append(DenseTensor(self._mean.data + self.delta * (2.0 * u - 1.0)))
        return out


class SparseRandomSource:
    """Sparse draws: each entry independently nonzero with probability
    1 - gamma, nonzero values i.i.d. Uniform(0, 1).

    A draw uses a single uniform per entry: the entry is nonzero iff
    u < 1 - gamma, with value u / (1 - gamma) — the conditional law of the
    value is exactly Uniform(0, 1).
    """

    kind = "sparse_random"

    def __init__(self, shape, gamma: float, seed):
        if not 0.0 <= gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        self.shape = validate_shape(shape)
        self.gamma = float(gamma)
        self.seed = seed
        self._size = math.prod(self.shape)
        self._rng = np.random.Generator(np.random.Philox(seed))
        self._buf = None  # reusable uniform block, allocated on first draw
        keep = 1.0 - self.gamma
        entry_mean = keep / 2.0
        entry_var = keep / 3.0 - keep * keep / 4.0
        mean = DenseTensor(np.full(self.shape, entry_mean))
        # the constant mean is rank one: (c * 1) o 1 o ... o 1
        ones = [np.ones((n, 1)) for n in self.shape]
        ones[0] = ones[0] * entry_mean
        self._moments = MomentModel(
            mean=mean,
            total_variance=self._size * entry_var,
            second_moment_norm=self._size * entry_var
            + self._size * entry_mean * entry_mean,
            mean_model=KruskalModel(ones),
        )

    def moments(self) -> MomentModel:
        return self._moments

    def norm_bound(self) -> float:
        """Almost-sure bound on ||draw||: every value lies in [0, 1)."""
        return math.sqrt(self._size)

    def sample(self, m: int) -> list[SparseTensor]:
        if m < 1:
            raise ValueError("batch size must be >= 1")
        keep = 1.0 - self.gamma
        if self._buf is None:
            self._buf = np.empty((16, self._size), dtype=np.float64)
        out = []
        remaining = m
        while remaining:
            # one generator call per chunk into a reused buffer; values fill
            # row-major, so chunked draws consume the stream exactly like
            # repeated single draws
            chunk = min(remaining, 16)
            block = self._buf[:chunk]
            self._rng.random(out=block)
            for row in block:
                if keep == 0.0:
                    lin = np.empty(0, dtype=np.int64)
                    vals = np.empty(0, dtype=np.float64)
                else:
                    # entry kept iff 0 < u < keep; exact zeros are dropped by
                    # the storage contract (probability 2^-53 per entry)
                    lin = np.flatnonzero((row > 0.0) & (row < keep))
                    vals = row[lin] / keep
                out.append(
                    SparseTensor.from_linear(self.shape, lin, vals, _checked=True)
                )
            remaining -= chunk
        return out


TensorSource = PerturbedCpSource | SparseRandomSource


def perturbed_cp_source(truth: KruskalModel, delta: float, seed) -> PerturbedCpSource:
    return PerturbedCpSource(truth, delta, seed)


def sparse_random_source(shape, gamma: float, seed) -> SparseRandomSource:
    return SparseRandomSource(shape, gamma, seed)


def sample_batch(source, m: int) -> list:
    """Draw ``m`` fresh i.i.d. tensors, advancing the source's stream."""
    if m < 1:
        raise ValueError("batch size must be >= 1")
    return source.sample(m)


def exact_residual(model: KruskalModel, moments: MomentModel) -> float:
    """Relative error of the model against the source's expected tensor:
    sqrt(total_variance + ||mean - [[x]]||^2) / sqrt(E||X||^2)."""
    if moments.second_moment_norm <= 0.0:
        raise ValueError("second moment norm must be > 0")
    if model.shape != moments.mean.shape:
        raise ValueError(
            f"model shape {model.shape} != mean shape {moments.mean.shape}"
        )
    if moments.mean_model is not None:
        # ||mean - [[x]]||^2 via Gram products; the cross term multiplies the
        # modewise R x r cross-Gram matrices entrywise and sums
        cross = None
        for fm, f in zip(moments.mean_model.factors, model.factors):
            g = fm.T @ f
            cross = g if cross is None else cross * g
        diff_sq = (
            moments.mean.norm_sq()
            - 2.0 * float(cross.sum())
            + _all_modes_gram_sum(model.factors)
        )
        diff_sq = max(diff_sq, 0.0)  # cancellation can leave a tiny negative
    else:
        diff = moments.mean.data - reconstruct(model).data
        flat = diff.ravel()
        diff_sq = float(flat @ flat)
    num = moments.total_variance + diff_sq
    return math.sqrt(num) / math.sqrt(moments.second_moment_norm)
