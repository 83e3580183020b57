"""Simulator, canary assignment, accountant, and single-step audits."""

import math

import numpy as np
import pytest
from scipy import stats as sps

from oralab import audit, dpsgd, guessers
from oralab.dpsgd import (
    CalibrationError,
    DpSgdConfig,
    assign_canaries,
    element_scores,
    rdp_epsilon,
    rdp_noise_scale,
    rdp_subsampled_gaussian,
    simulate,
    single_step_audit,
)
from oralab.mechanisms import ConfigError, PairVector

#: Calibrated noise for (eps=2, delta=1e-5, T=100, q=0.1), frozen before the
#: build from an independent quadrature accountant.
REFERENCE_SIGMA = 2.7839
#: Same target for the single-step full-batch setting (T=1, q=1).
REFERENCE_SIGMA_SINGLE = 2.4993


class TestAssignment:
    def test_distinct_coordinates(self):
        np.testing.assert_array_equal(assign_canaries(3, 1000), [0, 1, 2])

    def test_equal_counts_when_oversubscribed(self):
        coords = assign_canaries(2000, 1000)
        _, counts = np.unique(coords, return_counts=True)
        assert (counts == 2).all()

    def test_non_divisible_rejected(self):
        with pytest.raises(ConfigError):
            assign_canaries(1500, 1000)


class TestSimulate:
    def test_noiseless_full_batch(self):
        config = DpSgdConfig(n=4, sigma=1e-12, d=4, steps=1, sample_rate=1.0, clip=2.5)
        sums = simulate(config, np.ones(4), assign_canaries(4, 4), np.random.default_rng(0))
        np.testing.assert_allclose(sums, np.full((1, 4), 2.5), atol=1e-9)

    def test_all_excluded_is_pure_noise(self):
        config = DpSgdConfig(n=6, sigma=1.5, d=6, steps=200, sample_rate=0.5)
        sums = simulate(config, -np.ones(6), assign_canaries(6, 6), np.random.default_rng(1))
        assert abs(sums.mean()) < 4 * 1.5 / math.sqrt(sums.size)
        assert sums.std() == pytest.approx(1.5, rel=0.1)

    def test_poisson_inclusion_rate(self):
        reps = 10_000
        q = 0.1
        config = DpSgdConfig(n=1, sigma=0.05, d=1, steps=1, sample_rate=q)
        rng = np.random.default_rng(2)
        assignment = assign_canaries(1, 1)
        total = sum(simulate(config, np.ones(1), assignment, rng)[0, 0] for _ in range(reps))
        sd = math.sqrt((q * (1 - q) + 0.05 ** 2) / reps)
        assert total / reps == pytest.approx(q, abs=4 * sd)

    def test_determinism(self):
        config = DpSgdConfig(n=8, sigma=1.0, d=4, steps=3, sample_rate=0.5)
        assignment = assign_canaries(8, 4)
        bits = np.array([1, -1, 1, 1, -1, -1, 1, -1])
        a = simulate(config, bits, assignment, np.random.default_rng(33))
        b = simulate(config, bits, assignment, np.random.default_rng(33))
        np.testing.assert_array_equal(a, b)

    def test_single_step_matches_noisy_count_in_sets(self):
        """With steps=1 and full batch, each coordinate's sum is a noisy
        count of its elements' inclusion bits: two-sample KS check."""
        s, d = 4, 50
        n = s * d
        sigma = 0.7
        config = DpSgdConfig(n=n, sigma=sigma, d=d, steps=1, sample_rate=1.0)
        assignment = assign_canaries(n, d)
        rng = np.random.default_rng(44)
        draws = 200  # x d coordinates = 10_000 samples per side
        observed = []
        for _ in range(draws):
            bits = audit.sample_secret_bits(n, rng)
            observed.extend(simulate(config, bits, assignment, rng)[0])
        reference = rng.binomial(s, 0.5, size=len(observed)) + rng.normal(
            0.0, sigma, size=len(observed)
        )
        stat = sps.ks_2samp(observed, reference)
        assert stat.pvalue > 1e-4


class TestScores:
    def test_single_step_passthrough(self):
        sums = np.array([[3.0, -1.0, 2.0]])
        np.testing.assert_array_equal(element_scores(sums, [0, 1, 2]), [3.0, -1.0, 2.0])

    def test_aggregates_over_steps(self):
        sums = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(element_scores(sums, [0, 1]), [4.0, 6.0])

    def test_specific_step(self):
        sums = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(element_scores(sums, [0, 1], step=0), [1.0, 2.0])

    def test_shared_coordinate_shares_score(self):
        sums = np.array([[5.0, 7.0]])
        scores = element_scores(sums, [0, 0, 1])
        assert scores[0] == scores[1] == 5.0

    def test_zero_sums(self):
        assert (element_scores(np.zeros((3, 2)), [0, 1, 0]) == 0).all()


class TestAccountant:
    def test_pure_gaussian_order(self):
        assert rdp_subsampled_gaussian(1.0, 2.0, 8) == pytest.approx(8 / (2 * 4.0))

    def test_subsampling_amplifies(self):
        for alpha in (2, 8, 32):
            assert rdp_subsampled_gaussian(0.1, 2.0, alpha) < rdp_subsampled_gaussian(
                1.0, 2.0, alpha
            )

    def test_reference_sigma_round_trip(self):
        sigma = rdp_noise_scale(2.0, 1e-5, 100, 0.1)
        assert sigma == pytest.approx(REFERENCE_SIGMA, rel=0.02)
        assert rdp_epsilon(sigma, 1e-5, 100, 0.1) == pytest.approx(2.0, rel=0.01)

    def test_single_step_reference(self):
        sigma = rdp_noise_scale(2.0, 1e-5, 1, 1.0)
        assert sigma == pytest.approx(REFERENCE_SIGMA_SINGLE, rel=0.02)
        assert rdp_epsilon(sigma, 1e-5, 1, 1.0) == pytest.approx(2.0, rel=0.01)

    def test_unsubsampled_needs_more_noise(self):
        assert rdp_noise_scale(2.0, 1e-5, 1, 1.0) >= rdp_noise_scale(2.0, 1e-5, 1, 0.1)

    def test_more_steps_need_more_noise(self):
        a = rdp_noise_scale(2.0, 1e-5, 50, 0.1)
        b = rdp_noise_scale(2.0, 1e-5, 100, 0.1)
        assert b > a

    def test_unreachable_target(self):
        with pytest.raises(CalibrationError):
            rdp_noise_scale(1e-9, 1e-12, 10_000, 1.0)

    def test_epsilon_decreasing_in_sigma(self):
        values = [rdp_epsilon(s, 1e-5, 100, 0.1) for s in (1.0, 2.0, 4.0, 8.0)]
        assert (np.diff(values) < 0).all()


class TestSingleStepAudit:
    def _config(self, nd: int, d: int = 50) -> DpSgdConfig:
        sigma = rdp_noise_scale(2.0, 1e-5, 1, 1.0)
        return DpSgdConfig(n=nd * d, sigma=sigma, d=d, steps=1, sample_rate=1.0)

    @staticmethod
    def _bound_or_zero(config, tau, rng, adaptive) -> float:
        # At small d the threshold guesser sometimes abstains everywhere;
        # score such runs as zero information, as the sweep runner does.
        try:
            counts = single_step_audit(config, tau=tau, rng=rng, adaptive=adaptive)
        except audit.AllAbstainError:
            return 0.0
        return audit.audit_report(counts, 0.05)[1]

    def test_single_element_groups_agree_between_methods(self):
        """With one element per coordinate there is nothing to condition on:
        both methods see the same losses, so mean bounds agree within error."""
        config = self._config(1, d=200)
        reps = 200
        bounds = {}
        for adaptive in (False, True):
            rng = np.random.default_rng(55)
            vals = [self._bound_or_zero(config, 1.0, rng, adaptive) for _ in range(reps)]
            bounds[adaptive] = (np.mean(vals), np.std(vals) / math.sqrt(reps))
        gap = abs(bounds[True][0] - bounds[False][0])
        assert gap <= 4 * (bounds[True][1] + bounds[False][1])

    def test_adaptive_beats_plain_with_shared_coordinates(self):
        config = self._config(5, d=100)
        reps = 120
        means = {}
        for adaptive in (False, True):
            rng = np.random.default_rng(56)
            vals = [self._bound_or_zero(config, 1.0, rng, adaptive) for _ in range(reps)]
            means[adaptive] = np.mean(vals)
        assert means[True] >= means[False]

    def test_noiseless_limit_certainty_after_reveal(self):
        """sigma -> 0 with two elements per coordinate: the adaptive guesser
        is certain about every second group member, like a noiseless count."""
        d = 40
        config = DpSgdConfig(n=2 * d, sigma=1e-6, d=d, steps=1, sample_rate=1.0)
        counts = single_step_audit(config, tau=1.0, rng=np.random.default_rng(57), adaptive=True)
        assert counts.v == counts.r
        assert counts.r >= d  # at least the second member of every group

    def test_multi_step_config_rejected(self):
        config = DpSgdConfig(n=4, sigma=1.0, d=4, steps=2, sample_rate=1.0)
        with pytest.raises(ConfigError):
            single_step_audit(config, tau=1.0, rng=np.random.default_rng(0), adaptive=True)


class TestDpsgdValidity:
    def test_bound_exceeds_target_rarely(self):
        """Auditing the calibrated simulation: the bound clears the true
        epsilon in at most a beta + 3 sigma fraction of trials
        (small-instance configuration for runtime)."""
        eps, delta, steps, q, d = 2.0, 1e-5, 10, 0.1, 50
        sigma = rdp_noise_scale(eps, delta, steps, q)
        config = DpSgdConfig(n=d, sigma=sigma, d=d, steps=steps, sample_rate=q)
        assignment = assign_canaries(d, d)
        mech = dpsgd.simulator(config, assignment)
        z = PairVector.binary(d)
        guesser = guessers.sort_guesser(lambda s: element_scores(s, assignment), 10)
        rng = np.random.default_rng(58)
        trials = 2000
        beta = 0.05
        hits = 0
        for _ in range(trials):
            counts = audit.run_one_run(mech, z, guesser, rng)
            hits += audit.audit_report(counts, beta)[1] > eps
        assert hits / trials <= beta + 3 * math.sqrt(beta * (1 - beta) / trials)


class TestGuessBudgetTradeoff:
    def test_efficacy_nonincreasing_in_budget(self):
        """Fixed seed batch: mean accuracy falls as the guess budget grows."""
        n, d, steps, q = 5000, 1000, 20, 0.1
        sigma = 2.0
        config = DpSgdConfig(n=n, sigma=sigma, d=d, steps=steps, sample_rate=q)
        assignment = assign_canaries(n, d)
        mech = dpsgd.simulator(config, assignment)
        z = PairVector.binary(n)
        reps = 30
        means = []
        for k in (100, 1000, 5000):
            guesser = guessers.sort_guesser(lambda s: element_scores(s, assignment), k)
            rng = np.random.default_rng(59)
            means.append(
                np.mean([audit.run_one_run(mech, z, guesser, rng).accuracy for _ in range(reps)])
            )
        assert means[0] >= means[1] >= means[2]


class TestElementsPerCoordinateTradeoff:
    def test_more_elements_raise_the_mean_bound(self):
        """At the calibrated default configuration with a 100-guess budget,
        eight elements per coordinate beat one by at least 0.05."""
        d, steps, q, k = 1000, 100, 0.1, 100
        sigma = rdp_noise_scale(2.0, 1e-5, steps, q)
        reps = 60
        means = {}
        for nd in (1, 8):
            n = nd * d
            config = DpSgdConfig(n=n, sigma=sigma, d=d, steps=steps, sample_rate=q)
            assignment = assign_canaries(n, d)
            mech = dpsgd.simulator(config, assignment)
            z = PairVector.binary(n)
            guesser = guessers.sort_guesser(lambda s: element_scores(s, assignment), k)
            rng = np.random.default_rng(64)
            bounds = [
                audit.audit_report(audit.run_one_run(mech, z, guesser, rng), 0.05)[1]
                for _ in range(reps)
            ]
            means[nd] = np.mean(bounds)
        assert means[8] - means[1] >= 0.05
