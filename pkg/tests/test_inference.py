import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from judgerank.data import TripleTable
from judgerank.errors import RankDeficiencyError
from judgerank.estimator import fit_weighted
from judgerank.inference import (ConfidenceInterval, GaugeWarning, covariance,
                                 difference_vector, fisher_information, normal_quantile,
                                 rank_agreement, ranks_descending, wald_ci_component,
                                 wald_ci_linear)
from judgerank.model import Design, Params
from judgerank.simulator import TruthSpec, gen_truth, simulate_triples

HALF = math.log(3.0) / 2
TOY = Params([HALF, -HALF], [0.0])
TOY_DESIGN = Design.uniform(2, 1)


def random_params(rng, N, K):
    s = rng.normal(size=N)
    a = rng.uniform(-1, 1, size=K)
    return Params(s - s.mean(), a - a.mean())


class TestFisher:
    def test_toy_value(self):
        info = fisher_information(TOY, TOY_DESIGN)
        g = np.array([1.0, -1.0, math.log(3.0)])
        np.testing.assert_allclose(info, 0.1875 * np.outer(g, g), atol=1e-12)
        assert info[0, 0] == pytest.approx(0.1875, abs=1e-12)

    def test_constant_scores_zero_alpha_block(self):
        info = fisher_information(Params(np.zeros(4), [0.3, -0.3]), Design.uniform(4, 2))
        np.testing.assert_array_equal(info[4:, :], 0.0)
        np.testing.assert_array_equal(info[:, 4:], 0.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_gauge_null_directions(self, seed):
        rng = np.random.default_rng(seed)
        N, K = 6, 3
        p = random_params(rng, N, K)
        info = fisher_information(p, Design.uniform(N, K))
        shift = np.r_[np.ones(N), np.zeros(K)]
        scale = np.r_[p.s, -np.ones(K)]
        assert np.abs(info @ shift).max() <= 1e-12
        assert np.abs(info @ scale).max() <= 1e-12

    def test_psd_and_symmetric(self):
        p = random_params(np.random.default_rng(9), 5, 3)
        info = fisher_information(p, Design.uniform(5, 3))
        np.testing.assert_array_equal(info, info.T)
        assert np.linalg.eigvalsh(info).min() > -1e-12


class TestCovariance:
    def test_toy_difference_variance(self):
        cov = covariance(TOY, TOY_DESIGN)
        c = difference_vector(2, 1, 0, 1)
        assert cov.variance(c) == pytest.approx(1 / 0.1875, rel=1e-9)
        assert cov.variance(c) == pytest.approx(5.3333, abs=1e-4)

    @pytest.mark.parametrize("seed", range(5))
    def test_null_space_and_generalized_inverse(self, seed):
        rng = np.random.default_rng(seed)
        N, K = 5, 3
        p = random_params(rng, N, K)
        d = Design.uniform(N, K)
        cov = covariance(p, d)
        S = cov.matrix
        info = fisher_information(p, d)
        assert cov.rank == N + K - 2
        for v in cov.null_directions():
            assert np.abs(S @ v).max() <= 1e-9 * np.abs(S).max()
        np.testing.assert_allclose(info @ S @ info, info, atol=1e-9 * np.abs(info).max())
        np.testing.assert_allclose(S @ info @ S, S, atol=1e-8 * np.abs(S).max())
        np.testing.assert_allclose(S, S.T, atol=0)

    def test_unweighted_alpha_block_empty(self):
        p = random_params(np.random.default_rng(2), 4, 2)
        cov = covariance(p, Design.uniform(4, 2), weighted=False)
        np.testing.assert_array_equal(cov.matrix[4:, :], 0.0)
        assert cov.rank == 3

    def test_constant_scores_rank_deficient(self):
        with pytest.raises(RankDeficiencyError):
            covariance(Params(np.zeros(4), [0.2, -0.2]), Design.uniform(4, 2))

    def test_toy_matches_monte_carlo(self):
        # independent oracle: the K=1 MLE of d is logit(ybar), simulated directly
        rng = np.random.default_rng(0)
        T = 10**5
        ybar = rng.binomial(T, 0.75, size=4000) / T
        d = np.log(ybar / (1 - ybar))
        mc = T * d.var(ddof=1)
        assert mc == pytest.approx(covariance(TOY, TOY_DESIGN).variance([1, -1, 0]), rel=0.08)

    def test_small_monte_carlo_against_fits(self):
        truth = Params([1.0, 0.0, -1.0], [0.4, -0.4])
        T = 20000
        d = Design.uniform(3, 2)
        cov = covariance(truth, d)
        est = np.array([fit_weighted(simulate_triples(truth, T, seed=r)).params.theta
                        for r in range(200)])
        emp = T * np.cov(est.T)
        rel = np.abs(np.diag(emp) - np.diag(cov.matrix)) / np.diag(cov.matrix)
        assert rel.max() < 0.3


class TestIntervals:
    def test_quantile(self):
        assert normal_quantile(0.975) == pytest.approx(1.959964, abs=1e-6)
        with pytest.raises(ValueError):
            normal_quantile(1.0)

    def test_worked_interval(self):
        z = normal_quantile(0.975)
        ci = ConfidenceInterval(0.5, 0.5 - z * 0.1, 0.5 + z * 0.1, 0.95, 0.1)
        assert (round(ci.lower, 3), round(ci.upper, 3)) == (0.304, 0.696)

    def test_component_interval_from_covariance(self):
        cov = covariance(TOY, TOY_DESIGN)
        T = 400
        ci = wald_ci_component(TOY, cov, T, 0)
        se = math.sqrt(cov.matrix[0, 0] / T)
        assert ci.lower == pytest.approx(HALF - 1.959964 * se, abs=1e-6)
        assert ci.covers(HALF)

    def test_levels_nested(self):
        cov = covariance(TOY, TOY_DESIGN)
        cis = [wald_ci_component(TOY, cov, 100, 0, lv) for lv in (0.90, 0.95, 0.99)]
        for a, b in zip(cis, cis[1:]):
            assert b.lower < a.lower and a.upper < b.upper

    def test_zero_variance_gives_point(self):
        cov = covariance(TOY, TOY_DESIGN)
        ci = wald_ci_linear(TOY, cov, 100, difference_vector(2, 1, 0, 0))
        assert ci.lower == ci.upper == ci.estimate == 0.0

    def test_toy_half_width(self):
        cov = covariance(TOY, TOY_DESIGN)
        ci = wald_ci_linear(TOY, cov, 400, [1.0, -1.0, 0.0])
        assert ci.width / 2 == pytest.approx(0.2263, abs=1e-4)
        assert ci.estimate == pytest.approx(math.log(3.0), abs=1e-12)

    def test_gauge_direction_warns(self):
        cov = covariance(TOY, TOY_DESIGN)
        with pytest.warns(GaugeWarning):
            ci = wald_ci_linear(TOY, cov, 100, [1.0, 1.0, 0.0])
        assert ci.se == pytest.approx(0.0, abs=1e-12)

    def test_identified_direction_silent(self):
        cov = covariance(TOY, TOY_DESIGN)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            wald_ci_linear(TOY, cov, 100, [1.0, -1.0, 0.0])

    def test_bad_level(self):
        cov = covariance(TOY, TOY_DESIGN)
        with pytest.raises(ValueError):
            wald_ci_component(TOY, cov, 100, 0, level=1.5)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.5, 0.999), st.integers(1, 10**7))
    def test_width_shrinks_with_T(self, level, T):
        cov = covariance(TOY, TOY_DESIGN)
        a = wald_ci_component(TOY, cov, T, 0, level)
        b = wald_ci_component(TOY, cov, 4 * T, 0, level)
        assert b.width == pytest.approx(a.width / 2, rel=1e-9)


class TestRankAgreement:
    def test_identical(self):
        r = rank_agreement([3.0, 1.0, 2.0, 0.5], [3.0, 1.0, 2.0, 0.5])
        assert r == pytest.approx((1.0, 1.0, 1.0))

    def test_reversed(self):
        assert rank_agreement([1, 2, 3, 4], [4, 3, 2, 1]).spearman == pytest.approx(-1.0)

    def test_three_items(self):
        assert rank_agreement([1, 2, 3], [1, 3, 2]).spearman == pytest.approx(0.5)

    def test_constant(self):
        with pytest.raises(ValueError):
            rank_agreement([1, 1, 1], [1, 2, 3])

    @given(st.permutations(list(range(7))))
    def test_spearman_matches_formula(self, perm):
        x = np.arange(7, dtype=float)
        y = np.array(perm, dtype=float)
        rho = 1 - 6 * np.sum((x - y) ** 2) / (7 * (49 - 1))
        assert rank_agreement(x, y).spearman == pytest.approx(rho, abs=1e-12)

    def test_ranks_descending(self):
        np.testing.assert_array_equal(ranks_descending([0.1, 0.9, -0.3]), [2, 1, 3])
