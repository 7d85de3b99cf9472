"""CUSUM profile, covariance eigenstructure, Monte Carlo limit, detection."""

import numpy as np
import pytest
from scipy.optimize import brentq

from bayes_cpd import (
    DistributionalSequence,
    b_add,
    b_smul,
    beta_density,
    clr,
    clr_cusum,
    covariance_eigen,
    cusum_profile,
    detect,
    detect_l2_raw,
    locate,
    p_value,
    residuals,
    simulate_limit_samples,
    zero_avoid,
)
from bayes_cpd.density import ClrFunction
from bayes_cpd.engine import _detect_core, mean_increment
from bayes_cpd.engine import test_statistic as max_cusum_statistic
from bayes_cpd.errors import DegenerateInputError, NumericError, StructuralError
from bayes_cpd.simlab import gen_model1, gen_sim1

from helpers import constant_sequence, random_sequence, two_segment_sequence


def bayes_cusum_oracle(seq, k):
    """Eq-style CUSUM built purely from perturbation/powering chains."""
    densities = seq.densities
    n = seq.n
    partial = densities[0]
    for f in densities[1:k]:
        partial = b_add(partial, f)
    total = densities[0]
    for f in densities[1:]:
        total = b_add(total, f)
    return b_smul(1.0 / np.sqrt(n), b_add(partial, b_smul(-k / n, total)))


class TestClrCusum:
    def test_constant_sequence_vanishes(self, grid):
        seq = constant_sequence(grid, 8)
        for k in (1, 3, 8):
            assert np.abs(clr_cusum(seq, k).values).max() < 1e-12

    def test_k_equals_n_is_zero(self, grid):
        rng = np.random.default_rng(20)
        seq = random_sequence(grid, rng, 6)
        assert np.abs(clr_cusum(seq, 6).values).max() == 0.0

    def test_matches_bayes_domain_chain(self, grid):
        rng = np.random.default_rng(21)
        seq = random_sequence(grid, rng, 10)
        oracle = clr(bayes_cusum_oracle(seq, 4))
        assert np.abs(clr_cusum(seq, 4).values - oracle.values).max() < 1e-9

    def test_split_out_of_range(self, grid):
        seq = constant_sequence(grid, 5)
        with pytest.raises(StructuralError):
            clr_cusum(seq, 0)
        with pytest.raises(StructuralError):
            clr_cusum(seq, 6)


def brute_force_profile(seq):
    """Norms recomputed per split without shared prefix sums."""
    mat = seq.clr_matrix()
    n = mat.shape[0]
    w = seq.grid.weights
    out = np.empty(n)
    for k in range(1, n + 1):
        c = (mat[:k].sum(axis=0) - (k / n) * mat.sum(axis=0)) / np.sqrt(n)
        out[k - 1] = c @ (w * c)
    return out


class TestCusumProfile:
    def test_constant_sequence_degenerate(self, grid):
        prof = cusum_profile(constant_sequence(grid, 10))
        assert prof.degenerate
        assert prof.argmax_k == 1
        assert np.all(prof.norms_sq < 1e-12)

    def test_reversal_identity(self, grid):
        rng = np.random.default_rng(22)
        seq = random_sequence(grid, rng, 9)
        fwd = cusum_profile(seq).norms_sq
        rev = cusum_profile(seq.reversed()).norms_sq
        n = seq.n
        for k in range(1, n):
            assert abs(rev[k - 1] - fwd[n - k - 1]) < 1e-12
        assert fwd[n - 1] == 0.0 and rev[n - 1] == 0.0

    def test_matches_brute_force_scan(self, grid):
        rng = np.random.default_rng(23)
        seq = random_sequence(grid, rng, 12)
        np.testing.assert_allclose(cusum_profile(seq).norms_sq,
                                   brute_force_profile(seq), atol=1e-12)

    def test_strong_break_peaks_at_true_split(self, grid):
        for seed in (11, 12, 13):
            seq = gen_sim1(100, 50, seed, grid)
            prof = cusum_profile(seq)
            assert abs(prof.argmax_k - 50) <= 2
            np.testing.assert_allclose(prof.norms_sq, brute_force_profile(seq),
                                       atol=1e-10)


class TestLocate:
    def test_constant_sequence(self, grid):
        assert locate(constant_sequence(grid, 6)) == 1

    def test_length_four_exhaustive(self, grid):
        seq = two_segment_sequence(grid, 2, 2)
        brute = brute_force_profile(seq)
        assert int(np.argmax(brute)) + 1 == 2
        assert locate(seq) == 2

    def test_strong_change_localizes_exactly(self, grid):
        hits = sum(locate(gen_model1(100, 50, 1000 + r, grid)) == 50 for r in range(20))
        assert hits >= 19  # >= 95% of replicates

    def test_tie_break_takes_smallest(self, grid):
        # palindromic sequence: profile symmetric, so ties resolve left
        f = zero_avoid(beta_density(grid, 12, 12))
        g = zero_avoid(beta_density(grid, 6, 14))
        seq = DistributionalSequence((f, g, g, f))
        prof = cusum_profile(seq)
        peak = prof.norms_sq.max()
        winners = np.nonzero(prof.norms_sq == peak)[0] + 1
        assert prof.argmax_k == winners[0]

    def test_duplicating_elements_preserves_relative_argmax(self, grid):
        seq = two_segment_sequence(grid, 3, 5)
        doubled = DistributionalSequence(
            tuple(f for f in seq.densities for _ in range(2)))
        assert locate(seq) == 3
        assert locate(doubled) == 6  # same relative position k/n


class TestTestStatistic:
    def test_constant_sequence_zero(self, grid):
        assert max_cusum_statistic(constant_sequence(grid, 8)) == pytest.approx(0.0, abs=1e-12)

    def test_is_profile_max(self, grid):
        rng = np.random.default_rng(24)
        seq = random_sequence(grid, rng, 10)
        assert max_cusum_statistic(seq) == cusum_profile(seq).norms_sq.max()

    def test_grows_with_shift_magnitude(self, grid):
        stats = []
        for shift in (0.5, 1.0, 2.0, 4.0):
            seq = two_segment_sequence(grid, 10, 10, pre=(12, 12), post=(12 + shift, 12))
            stats.append(max_cusum_statistic(seq))
        assert all(a < b for a, b in zip(stats, stats[1:]))


class TestResiduals:
    def test_constant_global_all_zero(self, grid):
        for r in residuals(constant_sequence(grid, 6)):
            assert np.abs(r.values).max() < 1e-12

    def test_global_residuals_sum_to_zero(self, grid):
        rng = np.random.default_rng(25)
        seq = random_sequence(grid, rng, 9)
        total = np.sum([r.values for r in residuals(seq)], axis=0)
        assert np.abs(total).max() < 1e-10

    def test_segmented_exact_on_two_segment_constant(self, grid):
        seq = two_segment_sequence(grid, 5, 5)
        for r in residuals(seq, centering="segmented", k_hat=5):
            assert np.abs(r.values).max() < 1e-12

    def test_segmented_requires_interior_split(self, grid):
        seq = two_segment_sequence(grid, 3, 3)
        with pytest.raises(DegenerateInputError):
            residuals(seq, centering="segmented", k_hat=6)


class TestCovarianceEigen:
    def _random_residuals(self, grid, rng, n):
        seq = random_sequence(grid, rng, n)
        return residuals(seq)

    def test_zero_residuals_degenerate(self, grid):
        zeros = [ClrFunction(grid, np.zeros(grid.node_count)) for _ in range(5)]
        eig = covariance_eigen(zeros)
        assert eig.degenerate and eig.L == 0
        assert np.all(eig.eigenvalues == 0.0)

    def test_rank_bounded_by_sample_size(self, grid):
        rng = np.random.default_rng(26)
        eig = covariance_eigen(self._random_residuals(grid, rng, 10))
        assert np.count_nonzero(eig.eigenvalues > 1e-12 * eig.eigenvalues[0]) <= 10

    def test_trace_identity(self, grid):
        rng = np.random.default_rng(27)
        res = self._random_residuals(grid, rng, 8)
        eig = covariance_eigen(res)
        mat = np.vstack([r.values for r in res])
        diag = np.einsum("ij,ij->j", mat, mat) / mat.shape[0]
        assert eig.eigenvalues.sum() == pytest.approx(float(grid.weights @ diag), rel=1e-6)

    def test_eigenfunctions_weighted_orthonormal(self, grid):
        rng = np.random.default_rng(28)
        eig = covariance_eigen(self._random_residuals(grid, rng, 6))
        phi = eig.eigenfunctions[:, :6]
        gram = phi.T @ (grid.weights[:, None] * phi)
        np.testing.assert_allclose(gram, np.eye(6), atol=1e-6)

    def test_descending_and_clipped_nonnegative(self, grid):
        rng = np.random.default_rng(29)
        eig = covariance_eigen(self._random_residuals(grid, rng, 7))
        assert np.all(np.diff(eig.eigenvalues) <= 1e-10)
        assert np.all(eig.eigenvalues >= 0.0)

    def test_truncation_is_minimal(self, grid):
        rng = np.random.default_rng(30)
        eig = covariance_eigen(self._random_residuals(grid, rng, 12), theta=0.95)
        share = np.cumsum(eig.eigenvalues) / eig.eigenvalues.sum()
        assert share[eig.L - 1] >= 0.95
        if eig.L > 1:
            assert share[eig.L - 2] < 0.95

    def test_needs_two_residuals(self, grid):
        with pytest.raises(StructuralError):
            covariance_eigen([ClrFunction(grid, np.zeros(grid.node_count))])


def kolmogorov_quantile(p):
    """Invert P(sup|B| <= x) = 1 - 2 sum (-1)^(k-1) exp(-2 k^2 x^2)."""
    def cdf(x):
        k = np.arange(1, 200)
        return 1.0 - 2.0 * float(np.sum((-1.0) ** (k - 1) * np.exp(-2.0 * k**2 * x**2)))
    return brentq(lambda x: cdf(x) - p, 0.3, 4.0)


class TestLimitSimulation:
    def test_zero_eigenvalue_gives_zero_samples(self):
        samples = simulate_limit_samples([0.0], 64, bridge_nodes=64, seed=1)
        assert np.all(samples == 0.0)

    def test_linear_scaling_in_eigenvalue(self):
        base = simulate_limit_samples([1.0], 500, bridge_nodes=101, seed=9)
        scaled = simulate_limit_samples([2.5], 500, bridge_nodes=101, seed=9)
        np.testing.assert_array_equal(scaled, 2.5 * base)

    def test_thread_count_does_not_change_samples(self):
        one = simulate_limit_samples([0.7, 0.2], 1000, bridge_nodes=101, seed=4, threads=1)
        many = simulate_limit_samples([0.7, 0.2], 1000, bridge_nodes=101, seed=4, threads=4)
        np.testing.assert_array_equal(one, many)

    def test_single_bridge_sup_matches_kolmogorov_law(self):
        # coarse version; the acceptance suite runs the strict 1% check
        samples = simulate_limit_samples([1.0], 20000, bridge_nodes=2001, seed=77, threads=2)
        emp = float(np.percentile(np.sqrt(samples), 95))
        assert emp == pytest.approx(kolmogorov_quantile(0.95), rel=0.025)

    def test_empty_eigenvalues_rejected(self):
        with pytest.raises(DegenerateInputError):
            simulate_limit_samples([], 10)

    def test_negative_eigenvalue_rejected(self):
        with pytest.raises(NumericError):
            simulate_limit_samples([-1.0], 10)


class TestPValue:
    def test_zero_statistic(self):
        assert p_value(0.0, [0.1, 0.2, 0.3]) == 1.0

    def test_statistic_above_all_samples(self):
        assert p_value(10.0, [0.1, 0.2, 0.3]) == 0.0

    def test_median_statistic(self):
        rng = np.random.default_rng(31)
        samples = rng.exponential(size=1001)
        p = p_value(float(np.median(samples)), samples)
        assert abs(p - 0.5) <= 1.0 / samples.size

    def test_values_on_grid_of_fractions(self):
        samples = [0.5, 1.5, 2.5, 3.5]
        for stat in (0.0, 1.0, 2.0, 3.0, 4.0):
            p = p_value(stat, samples)
            assert p in {0.0, 0.25, 0.5, 0.75, 1.0}

    def test_monotone_in_statistic(self):
        rng = np.random.default_rng(32)
        samples = rng.exponential(size=200)
        stats = np.linspace(0, 5, 40)
        ps = [p_value(s, samples) for s in stats]
        assert all(a >= b for a, b in zip(ps, ps[1:]))

    def test_empty_samples_rejected(self):
        with pytest.raises(StructuralError):
            p_value(1.0, [])


class TestDetect:
    def test_constant_sequence_never_rejects(self, grid):
        result = detect(constant_sequence(grid, 10), mc_samples=50, seed=0)
        assert not result.reject_null
        assert result.degenerate
        assert result.p_value == 1.0
        assert result.statistic == pytest.approx(0.0, abs=1e-12)

    def test_seed_determinism(self, grid):
        rng = np.random.default_rng(33)
        seq = random_sequence(grid, rng, 12)
        a = detect(seq, mc_samples=300, seed=5)
        b = detect(seq, mc_samples=300, seed=5)
        assert a.k_hat == b.k_hat
        assert a.statistic == b.statistic
        assert a.p_value == b.p_value
        assert a.eigenvalues == b.eigenvalues

    def test_strong_break_detected(self, grid):
        seq = two_segment_sequence(grid, 20, 20)
        result = detect(seq, mc_samples=400, seed=3)
        assert result.reject_null
        assert result.k_hat == 20
        assert result.increment is not None
        target = b_add(seq.densities[-1], b_smul(-1.0, seq.densities[0]))
        assert np.abs(result.increment.values - target.values).max() < 1e-9

    def test_result_invariants(self, grid):
        rng = np.random.default_rng(34)
        for _ in range(5):
            seq = random_sequence(grid, rng, 8)
            result = detect(seq, mc_samples=100, seed=2)
            assert result.reject_null == (result.p_value < result.alpha)
            assert 1 <= result.k_hat <= seq.n
            assert len(result.eigenvalues) == result.L

    def test_segmented_centering_flagged(self, grid):
        seq = two_segment_sequence(grid, 10, 10)
        result = detect(seq, mc_samples=100, seed=1, centering="segmented")
        assert result.centering == "segmented"


class TestPipelineFactoring:
    def test_bayes_detect_is_core_on_clr_matrix(self, grid):
        rng = np.random.default_rng(35)
        seq = random_sequence(grid, rng, 10)
        kwargs = dict(alpha=0.05, mc_samples=200, theta=0.95, seed=8,
                      centering="global", bridge_nodes=201, threads=1)
        full = detect(seq, 0.05, 200, 0.95, 8, bridge_nodes=201)
        core = _detect_core(seq.clr_matrix(), grid.weights, method="bayes-clr", **kwargs)
        assert (full.k_hat, full.statistic, full.p_value) == \
               (core.k_hat, core.statistic, core.p_value)
        assert full.eigenvalues == core.eigenvalues

    def test_l2_detect_is_core_on_raw_matrix(self, grid):
        rng = np.random.default_rng(36)
        seq = random_sequence(grid, rng, 10)
        kwargs = dict(alpha=0.05, mc_samples=200, theta=0.95, seed=8,
                      centering="global", bridge_nodes=201, threads=1)
        full = detect_l2_raw(seq, 0.05, 200, 0.95, 8, bridge_nodes=201)
        core = _detect_core(seq.values_matrix(), grid.weights, method="l2-raw", **kwargs)
        assert (full.k_hat, full.statistic, full.p_value) == \
               (core.k_hat, core.statistic, core.p_value)
        assert full.method == "l2-raw"

    def test_l2_constant_sequence_never_rejects(self, grid):
        result = detect_l2_raw(constant_sequence(grid, 8), mc_samples=50, seed=0)
        assert not result.reject_null and result.degenerate


class TestMeanIncrement:
    def test_two_segment_increment_is_bayes_difference(self, grid):
        seq = two_segment_sequence(grid, 6, 6, pre=(10, 10), post=(5, 12))
        inc = mean_increment(seq, 6)
        target = b_add(seq.densities[-1], b_smul(-1.0, seq.densities[0]))
        assert np.abs(inc.values - target.values).max() < 1e-9

    def test_boundary_split_rejected(self, grid):
        seq = two_segment_sequence(grid, 3, 3)
        with pytest.raises(DegenerateInputError):
            mean_increment(seq, 6)


class TestSequenceType:
    def test_minimum_length_enforced(self, grid):
        f = zero_avoid(beta_density(grid, 5, 5))
        with pytest.raises(StructuralError):
            DistributionalSequence((f, f, f))

    def test_mixed_grids_rejected(self, grid, grid1025):
        f = zero_avoid(beta_density(grid, 5, 5))
        g = zero_avoid(beta_density(grid1025, 5, 5))
        with pytest.raises(StructuralError):
            DistributionalSequence((f, f, g, f))
