"""Distributional privacy loss: brute force vs closed forms vs quadrature."""

import itertools
import math

import numpy as np
import pytest
from scipy import stats as sps

from oralab import mechanisms
from oralab.loss import (
    UnreachableOutputError,
    brute_force_loss,
    build_loss_table,
    cis_loss_source,
    conditional_loss,
    count_conditional_loss,
    count_loss_analytic,
    gaussian_mixture_loss,
    gaussian_mixture_loss_signed,
    local_laplace_loss,
    rr_loss_source,
)
from oralab.mechanisms import ConfigError, MechanismSpec, PairVector


def gaussian_mixture_oracle(o: float, s: int, sigma: float) -> float:
    """Independent quadrature oracle for the noisy-count loss."""

    def density(x: float, shift: int) -> float:
        return sum(
            sps.binom.pmf(c, s - 1, 0.5) * sps.norm.pdf(x, loc=c + shift, scale=sigma)
            for c in range(s)
        )

    return math.log(density(o, 0)) - math.log(density(o, 1))


class TestBruteForce:
    def test_xor_is_uninformative(self):
        m = mechanisms.model(MechanismSpec.make("xor"), 3)
        z = PairVector.binary(3)
        for i in range(3):
            for o in (0, 1):
                assert brute_force_loss(m, z, i, o) == 0.0

    def test_count_matches_lemma_with_sign(self):
        m = mechanisms.model(MechanismSpec.make("count"), 4)
        z = PairVector.binary(4)
        got = brute_force_loss(m, z, 0, 1)
        assert got == pytest.approx(math.log(3), abs=1e-12)

    def test_count_sign_flips_with_pair_orientation(self):
        m = mechanisms.model(MechanismSpec.make("count"), 4)
        z = PairVector(((1, 0),) + ((0, 1),) * 3)
        assert brute_force_loss(m, z, 0, 1) == pytest.approx(-math.log(3), abs=1e-12)

    def test_rr_output_second_candidate(self):
        eps = 1.3
        m = mechanisms.model(MechanismSpec.make("rr", eps=eps), 1)
        z = PairVector.signs(1)
        assert brute_force_loss(m, z, 0, (1,)) == pytest.approx(-eps, abs=1e-12)
        assert brute_force_loss(m, z, 0, (-1,)) == pytest.approx(eps, abs=1e-12)

    def test_unreachable_output(self):
        m = mechanisms.model(MechanismSpec.make("count"), 3)
        z = PairVector.binary(3)
        with pytest.raises(UnreachableOutputError):
            # Reachable alphabet symbol, but conditioning cannot produce it
            # here because probabilities vanish under both hypotheses.
            conditional_loss(m, z, 0, 3, {1: -1})

    def test_infinite_loss_at_certain_output(self):
        m = mechanisms.model(MechanismSpec.make("count"), 3)
        z = PairVector.binary(3)
        assert brute_force_loss(m, z, 0, 0) == math.inf
        assert brute_force_loss(m, z, 0, 3) == -math.inf

    def test_oversized_n_rejected(self):
        z = PairVector.binary(13)
        m = mechanisms.MechanismModel((0,), lambda o, d: 1.0)
        with pytest.raises(ConfigError):
            brute_force_loss(m, z, 0, 0)


class TestLossTable:
    def test_marginals_sum_to_one(self):
        for kind, params, n in [("count", {}, 5), ("aon", {"p": 0.4}, 3), ("xrr", {"eps": 0.5}, 4)]:
            spec = MechanismSpec.make(kind, **params)
            table = build_loss_table(mechanisms.model(spec, n), PairVector.binary(n))
            assert table.marginals.sum() == pytest.approx(1.0, abs=1e-9)

    def test_conditionals_normalize_per_index(self):
        spec = MechanismSpec.make("aon", p=0.4)
        table = build_loss_table(mechanisms.model(spec, 3), PairVector.binary(3))
        np.testing.assert_allclose(table.cond_minus.sum(axis=0), 1.0, atol=1e-9)
        np.testing.assert_allclose(table.cond_plus.sum(axis=0), 1.0, atol=1e-9)

    def test_antisymmetry_under_pair_swap(self):
        spec = MechanismSpec.make("count")
        n = 4
        m = mechanisms.model(spec, n)
        z = PairVector.binary(n)
        z_swapped = PairVector(((1, 0),) + z.pairs[1:])
        t1 = build_loss_table(m, z)
        t2 = build_loss_table(m, z_swapped)
        for o in t1.outputs:
            a = t1.loss_row(o)[0]
            b = t2.loss_row(o)[0]
            assert a == -b or (math.isinf(a) and math.isinf(b) and a == -b)

    def test_matches_pointwise_brute_force(self):
        spec = MechanismSpec.make("xrr", eps=0.8)
        n = 4
        m = mechanisms.model(spec, n)
        z = PairVector.binary(n)
        table = build_loss_table(m, z)
        for o in table.outputs:
            for i in range(n):
                assert table.loss_row(o)[i] == pytest.approx(
                    brute_force_loss(m, z, i, o), abs=1e-12
                )

    def test_unknown_output_rejected(self):
        spec = MechanismSpec.make("count")
        table = build_loss_table(mechanisms.model(spec, 3), PairVector.binary(3))
        with pytest.raises(UnreachableOutputError):
            table.loss_row(99)


class TestCountAnalytic:
    def test_balanced_output(self):
        assert count_loss_analytic(4, 2) == 0.0

    def test_extreme_output_infinite(self):
        assert count_loss_analytic(4, 0) == math.inf
        assert count_loss_analytic(4, 4) == math.inf

    def test_example_value(self):
        assert count_loss_analytic(10, 3) == pytest.approx(math.log(7 / 3), abs=1e-12)

    @pytest.mark.parametrize("n", range(1, 11))
    def test_agrees_with_brute_force(self, n):
        m = mechanisms.model(MechanismSpec.make("count"), n)
        z = PairVector.binary(n)
        for o in range(n + 1):
            expected = count_loss_analytic(n, o)
            got = abs(brute_force_loss(m, z, 0, o))
            if math.isinf(expected):
                assert math.isinf(got)
            else:
                assert got == pytest.approx(expected, abs=1e-9)


class TestGaussianMixture:
    def test_single_element_midpoint(self):
        assert gaussian_mixture_loss(0.5, 1, 0.7) == pytest.approx(0.0, abs=1e-12)

    def test_single_element_linear_in_o(self):
        sigma = 0.9
        for o in (-1.0, 0.2, 2.5):
            assert gaussian_mixture_loss_signed(o, 1, sigma) == pytest.approx(
                -(o - 0.5) / sigma ** 2, abs=1e-12
            )

    def test_symmetry_point_s3(self):
        assert gaussian_mixture_loss(1.5, 3, 1.0) == pytest.approx(0.0, abs=1e-12)

    def test_derived_value_against_quadrature(self):
        # Frozen from the independent oracle.
        assert gaussian_mixture_loss_signed(2.0, 2, 0.5) == pytest.approx(
            -2.124452325905242, abs=1e-9
        )
        assert gaussian_mixture_loss(2.0, 2, 0.5) == pytest.approx(2.124452325905242, abs=1e-6)

    @pytest.mark.parametrize("s", [1, 2, 3, 4, 6])
    @pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
    def test_grid_against_oracle(self, s, sigma):
        for o in np.linspace(-2.0, s + 2.0, 9):
            assert gaussian_mixture_loss(float(o), s, sigma) == pytest.approx(
                abs(gaussian_mixture_oracle(float(o), s, sigma)), abs=1e-6
            )

    def test_validation(self):
        with pytest.raises(ConfigError):
            gaussian_mixture_loss(0.0, 0, 1.0)
        with pytest.raises(ConfigError):
            gaussian_mixture_loss(0.0, 2, 0.0)


class TestConditional:
    def test_empty_conditioning_reduces_to_brute_force(self):
        spec = MechanismSpec.make("xrr", eps=0.6)
        m = mechanisms.model(spec, 3)
        z = PairVector.binary(3)
        for o in (0, 1):
            for i in range(3):
                assert conditional_loss(m, z, i, o, {}) == pytest.approx(
                    brute_force_loss(m, z, i, o), abs=1e-12
                )

    def test_xor_becomes_certain(self):
        m = mechanisms.model(MechanismSpec.make("xor"), 2)
        z = PairVector.binary(2)
        got = conditional_loss(m, z, 1, 1, {0: -1})
        assert math.isinf(got)

    def test_count_reduction_to_smaller_instance(self):
        m = mechanisms.model(MechanismSpec.make("count"), 3)
        z = PairVector.binary(3)
        # One bit revealed as a one: residual is a 2-element count of 1.
        got = conditional_loss(m, z, 0, 2, {2: 1})
        assert got == pytest.approx(0.0, abs=1e-12)

    def test_reveal_target_rejected(self):
        m = mechanisms.model(MechanismSpec.make("count"), 3)
        z = PairVector.binary(3)
        with pytest.raises(ConfigError):
            conditional_loss(m, z, 0, 1, {0: 1})

    def test_noisy_count_conditioning_equivalence(self):
        """Conditioning a 4-element noisy count on two revealed bits (summing
        one) equals the shrunk 2-set mixture loss at the shifted observation.

        The left side is derived independently by enumerating the remaining
        unknown element under each hypothesis for the target.
        """
        sigma = 0.8

        def full_conditional(o: float) -> float:
            def density(v: int) -> float:
                return sum(
                    0.5 * sps.norm.pdf(o, loc=1 + v + dj, scale=sigma) for dj in (0, 1)
                )

            return math.log(density(0)) - math.log(density(1))

        for o in (0.3, 1.2, 2.7, 3.6):
            assert gaussian_mixture_loss_signed(o - 1, 2, sigma) == pytest.approx(
                full_conditional(o), abs=1e-9
            )

    def test_noisy_sum_source_matches_full_conditional(self):
        """The production loss source for shared-coordinate groups realizes
        the same conditional: a 4-element group with two revealed bits."""
        from oralab.dpsgd import DpSgdConfig, noisy_sum_loss_source

        sigma = 0.8
        config = DpSgdConfig(n=4, sigma=sigma, d=1, steps=1, sample_rate=1.0)
        source = noisy_sum_loss_source(config, np.zeros(4, dtype=int))
        revealed = {2: 1, 3: -1}  # one included, one excluded
        for o in (0.3, 1.2, 2.7):
            got = source(np.array([[o]]), 0, revealed)
            assert got == pytest.approx(
                gaussian_mixture_loss_signed(o - 1, 2, sigma), abs=1e-12
            )


class TestCountConditional:
    def test_signed_values(self):
        assert count_conditional_loss(0, 3) == math.inf
        assert count_conditional_loss(3, 3) == -math.inf
        assert count_conditional_loss(1, 3) == pytest.approx(math.log(2), abs=1e-12)

    def test_matches_brute_force_conditionals(self):
        n, s = 6, 3
        m = mechanisms.model(MechanismSpec.make("cis", s=s), n)
        z = PairVector.binary(n)
        source = cis_loss_source(s, n, z)
        o = (2, 1)
        revealed = {0: 1, 4: -1}
        for i in (1, 2, 3, 5):
            exact = conditional_loss(m, z, i, o, revealed)
            fast = source(o, i, revealed)
            if math.isinf(exact):
                assert fast == exact
            else:
                assert fast == pytest.approx(exact, abs=1e-9)

    def test_unreachable_residual(self):
        with pytest.raises(UnreachableOutputError):
            count_conditional_loss(5, 3)


class TestLocalSources:
    def test_laplace_saturation(self):
        eps = 2.0
        assert local_laplace_loss(3.0, eps) == pytest.approx(-eps)
        assert local_laplace_loss(-3.0, eps) == pytest.approx(eps)
        assert local_laplace_loss(0.0, eps) == pytest.approx(0.0)

    def test_laplace_matches_density_ratio(self):
        eps = 1.4
        b = 2.0 / eps
        for o in (-2.0, -0.3, 0.9, 1.7):
            expected = sps.laplace.logpdf(o, loc=-1, scale=b) - sps.laplace.logpdf(
                o, loc=1, scale=b
            )
            assert local_laplace_loss(o, eps) == pytest.approx(expected, abs=1e-12)

    def test_rr_source_signs(self):
        z = PairVector.signs(2)
        source = rr_loss_source(1.0, z)
        assert source((-1, 1), 0, {}) == 1.0
        assert source((-1, 1), 1, {}) == -1.0

    def test_rr_source_matches_brute_force(self):
        eps = 0.9
        n = 3
        z = PairVector.signs(n)
        m = mechanisms.model(MechanismSpec.make("lrr", eps=eps), n)
        source = rr_loss_source(eps, z)
        for o in itertools.product((-1, 1), repeat=n):
            for i in range(n):
                assert source(o, i, {}) == pytest.approx(
                    brute_force_loss(m, z, i, o), abs=1e-9
                )
