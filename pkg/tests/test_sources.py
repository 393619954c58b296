import math

import numpy as np
import pytest

from cpsals.kruskal import KruskalModel, random_model, reconstruct
from cpsals.sals import batch_average
from cpsals.sources import (
    MomentModel,
    PerturbedCpSource,
    SparseRandomSource,
    exact_residual,
    perturbed_cp_source,
    replicate_seed,
    sample_batch,
    sparse_random_source,
)
from cpsals.tensors import DenseTensor


def small_truth(seed=0):
    return random_model((4, 5, 6), 2, seed)


class TestMomentModel:
    def test_invariants_enforced(self):
        mean = DenseTensor(np.ones((2, 2)))
        with pytest.raises(ValueError):
            MomentModel(mean, -1.0, 10.0)
        with pytest.raises(ValueError):
            MomentModel(mean, 0.0, 1.0)  # below ||mean||^2 = 4

    def test_second_moment_decomposition(self):
        src = perturbed_cp_source(small_truth(), 0.5, 1)
        mm = src.moments()
        assert mm.second_moment_norm == pytest.approx(
            mm.total_variance + mm.mean.norm_sq(), rel=1e-13
        )


class TestPerturbedCpSource:
    def test_negative_delta_rejected(self):
        with pytest.raises(ValueError):
            perturbed_cp_source(small_truth(), -0.1, 0)

    def test_zero_delta_reproduces_mean_exactly(self):
        src = perturbed_cp_source(small_truth(), 0.0, 2)
        mean = src.moments().mean.data
        for t in src.sample(3):
            np.testing.assert_array_equal(t.data, mean)

    def test_support_bound(self):
        delta = 0.3
        src = perturbed_cp_source(small_truth(), delta, 3)
        mean = src.moments().mean.data
        for t in src.sample(5):
            assert np.abs(t.data - mean).max() <= delta

    def test_norm_bound_holds_per_draw(self):
        src = perturbed_cp_source(small_truth(), 1.0, 4)
        bound = src.norm_bound()
        for t in src.sample(10):
            assert math.sqrt(t.norm_sq()) <= bound + 1e-12

    def test_entrywise_variance_monte_carlo(self):
        # empirical mean of ||X - E[X]||^2 / N over many draws vs delta^2/3
        truth = random_model((30, 40, 50), 5, 7)
        src = perturbed_cp_source(truth, 1.0, 5)
        mean = src.moments().mean.data
        n = mean.size
        draws = 200
        acc = 0.0
        for t in src.sample(draws):
            diff = (t.data - mean).ravel()
            acc += float(diff @ diff) / n
        assert acc / draws == pytest.approx(1.0 / 3.0, rel=0.01)


class TestSparseRandomSource:
    def test_gamma_range_enforced(self):
        with pytest.raises(ValueError):
            sparse_random_source((3, 3), -0.1, 0)
        with pytest.raises(ValueError):
            sparse_random_source((3, 3), 1.5, 0)

    def test_gamma_one_gives_zero_tensor(self):
        src = sparse_random_source((4, 5), 1.0, 1)
        for t in src.sample(3):
            assert t.nnz == 0

    def test_gamma_zero_gives_full_support(self):
        src = sparse_random_source((4, 5), 0.0, 2)
        for t in src.sample(3):
            assert t.nnz == 20

    def test_values_in_unit_interval(self):
        src = sparse_random_source((6, 7), 0.3, 3)
        for t in src.sample(5):
            assert np.all(t.values > 0.0) and np.all(t.values < 1.0)

    def test_nnz_and_mean_monte_carlo(self):
        src = sparse_random_source((30, 40, 50), 0.1, 4)
        n = 30 * 40 * 50
        draws = 100
        nnz_total = 0
        value_sum = 0.0
        for t in src.sample(draws):
            nnz_total += t.nnz
            value_sum += float(t.values.sum())
        sigma = math.sqrt(n * 0.1 * 0.9)
        assert abs(nnz_total / draws - 0.9 * n) <= 3.0 * sigma / math.sqrt(draws)
        # per-entry mean (1 - gamma)/2 = 0.45
        assert value_sum / (draws * n) == pytest.approx(0.45, rel=0.01)

    def test_norm_bound_holds_per_draw(self):
        src = sparse_random_source((5, 6), 0.2, 5)
        for t in src.sample(20):
            assert math.sqrt(t.norm_sq()) <= src.norm_bound()


class TestStreamSemantics:
    def test_same_seed_same_draws(self):
        a = sparse_random_source((4, 5), 0.3, 42)
        b = sparse_random_source((4, 5), 0.3, 42)
        for ta, tb in zip(a.sample(4), b.sample(4)):
            np.testing.assert_array_equal(ta.linear_indices, tb.linear_indices)
            np.testing.assert_array_equal(ta.values, tb.values)

    def test_batch_split_consistency(self):
        a = perturbed_cp_source(small_truth(), 0.5, 9)
        b = perturbed_cp_source(small_truth(), 0.5, 9)
        joined = a.sample(5)
        split = b.sample(3) + b.sample(2)
        for ta, tb in zip(joined, split):
            np.testing.assert_array_equal(ta.data, tb.data)

    def test_replicate_streams_differ(self):
        s0 = sparse_random_source((4, 5), 0.3, replicate_seed(7, 0))
        s1 = sparse_random_source((4, 5), 0.3, replicate_seed(7, 1))
        t0, t1 = s0.sample(1)[0], s1.sample(1)[0]
        assert not (
            t0.nnz == t1.nnz and np.array_equal(t0.linear_indices, t1.linear_indices)
        ) or not np.array_equal(t0.values, t1.values)

    def test_sample_batch_validates_m(self):
        src = sparse_random_source((4, 5), 0.3, 1)
        with pytest.raises(ValueError):
            sample_batch(src, 0)

    def test_unbiasedness_entrywise(self):
        # empirical mean over draws within 3 sigma of the exact mean, entrywise
        src = perturbed_cp_source(small_truth(3), 1.0, 11)
        mean = src.moments().mean.data
        draws = 10_000
        acc = np.zeros_like(mean)
        remaining = draws
        while remaining:
            chunk = min(500, remaining)
            for t in src.sample(chunk):
                acc += t.data
            remaining -= chunk
        emp = acc / draws
        sigma_entry = 1.0 / math.sqrt(3.0 * draws)
        assert np.abs(emp - mean).max() <= 5.0 * sigma_entry  # 5 sigma, one-shot suite

    def test_sampling_error_scales_like_inverse_sqrt_m(self):
        src = sparse_random_source((30, 40, 50), 0.1, 13)
        mean = src.moments().mean.ravel()
        ms = [1, 10, 100, 1000]
        reps = 5
        errors = []
        for m in ms:
            acc = 0.0
            for _ in range(reps):
                avg = batch_average(src.sample(m))
                diff = mean.copy()
                diff[avg.linear_indices] -= avg.values
                acc += float(np.linalg.norm(diff))
            errors.append(acc / reps)
        slope = np.polyfit(np.log(ms), np.log(errors), 1)[0]
        assert -0.6 <= slope <= -0.4


class TestExactResidual:
    def test_truth_with_zero_noise_gives_zero(self):
        truth = small_truth(5)
        src = perturbed_cp_source(truth, 0.0, 1)
        assert exact_residual(truth, src.moments()) == pytest.approx(0.0, abs=1e-9)

    def test_zero_model_gives_one(self):
        truth = small_truth(6)
        src = perturbed_cp_source(truth, 0.7, 1)
        zero = KruskalModel([np.zeros((n, 2)) for n in truth.shape])
        assert exact_residual(zero, src.moments()) == pytest.approx(1.0, rel=1e-12)

    def test_truth_with_noise_analytic_and_monte_carlo(self):
        truth = random_model((30, 40, 50), 5, 17)
        src = perturbed_cp_source(truth, 1.0, 19)
        mm = src.moments()
        n = mm.mean.size
        analytic = math.sqrt(n / 3.0) / math.sqrt(n / 3.0 + mm.mean.norm_sq())
        assert exact_residual(truth, mm) == pytest.approx(analytic, rel=1e-12)
        # Monte-Carlo estimate of both expectations
        draws = 200
        mean = mm.mean.data
        recon = reconstruct(truth).data
        num = 0.0
        den = 0.0
        for t in src.sample(draws):
            num += float(((t.data - recon).ravel() ** 2).sum())
            den += float((t.data.ravel() ** 2).sum())
        mc = math.sqrt(num / draws) / math.sqrt(den / draws)
        assert exact_residual(truth, mm) == pytest.approx(mc, rel=0.01)

    def test_zero_second_moment_rejected(self):
        zero_truth = KruskalModel([np.zeros((2, 1)), np.zeros((3, 1))])
        src = perturbed_cp_source(zero_truth, 0.0, 1)
        with pytest.raises(ValueError):
            exact_residual(zero_truth, src.moments())
