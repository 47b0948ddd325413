import math

import numpy as np
import pytest
from scipy.special import digamma, polygamma
from scipy.stats import chisquare, norm

from svlmc.mixture import (IndicatorVector, Linearized, MixtureTable,
                           OMORI_TABLE, _component_logdens,
                           aux_log_density_marginal, linearize,
                           sample_indicators)
from svlmc.model import LatentPath, Parameterization, Params, ReturnSeries

from oracles import aux_component_logpdf, aux_marginal_enumeration


def single_component_table():
    # one component matching the exact log chi^2_1 moments
    return MixtureTable(prob=np.array([1.0]),
                        m1=np.array([-1.270363]),
                        v1=np.array([math.sqrt(4.934802)]),
                        m2=np.array([1.0]),
                        v2=np.array([0.5]))


class TestMixtureTable:
    def test_weights_sum_to_one(self):
        assert abs(OMORI_TABLE.prob.sum() - 1.0) <= 1e-12
        assert np.all(OMORI_TABLE.prob > 0)

    def test_log_chi2_moments(self):
        # oracle: E[log chi^2_1] = digamma(1/2) + log 2, Var = trigamma(1/2)
        mean_exact = digamma(0.5) + math.log(2.0)
        var_exact = polygamma(1, 0.5)
        assert mean_exact == pytest.approx(-1.270363, abs=1e-6)
        assert var_exact == pytest.approx(4.934802, abs=1e-6)
        mean = OMORI_TABLE.prob @ OMORI_TABLE.m1
        var = (OMORI_TABLE.prob @ (OMORI_TABLE.v1 ** 2 + OMORI_TABLE.m1 ** 2)
               - mean ** 2)
        assert abs(mean - mean_exact) < 0.05
        assert abs(var - var_exact) < 0.10

    def test_coupling_constants_consistency(self):
        # m2 = exp(v1^2/8) * exp(m1/2) and v2 = (m2/ (2 exp(m1/2))) * v1 * exp(m1/2):
        # the tabulated linearization of exp(xi/2) around the component mean
        scale = np.exp(0.5 * OMORI_TABLE.m1)
        a = OMORI_TABLE.m2 / scale
        b = OMORI_TABLE.v2 / (OMORI_TABLE.v1 * scale)
        np.testing.assert_allclose(a, np.exp(OMORI_TABLE.v1 ** 2 / 8.0),
                                   atol=1e-5)
        np.testing.assert_allclose(b, a / 2.0, atol=1e-5)

    def test_bad_tables_rejected(self):
        with pytest.raises(ValueError):
            MixtureTable(prob=np.array([0.6, 0.6]), m1=np.zeros(2),
                         v1=np.ones(2), m2=np.ones(2), v2=np.ones(2))
        with pytest.raises(ValueError):
            MixtureTable(prob=np.array([1.0]), m1=np.array([0.0]),
                         v1=np.array([1.0]), m2=np.array([1.0]),
                         v2=np.array([0.5]))


class TestLinearize:
    def test_unit_return(self):
        lin = linearize(ReturnSeries(np.array([1.0, 1.0])), offset=1e-300)
        assert lin.y_star[0] == pytest.approx(0.0, abs=1e-12)
        assert lin.d[0] == 1.0

    def test_small_negative_return(self):
        lin = linearize(ReturnSeries(np.array([-0.01, 0.02])), offset=1e-10)
        assert lin.y_star[0] == pytest.approx(-9.21034, abs=1e-5)
        assert lin.d[0] == -1.0

    def test_zero_return_guard(self):
        lin = linearize(ReturnSeries(np.array([0.0, 0.1])), offset=1e-10)
        assert lin.y_star[0] == pytest.approx(math.log(1e-10), abs=1e-12)
        assert lin.d[0] == 1.0

    def test_monotone_in_absolute_return(self):
        ys = np.array([0.001, -0.002, 0.05, -0.3, 1.5])
        lin = linearize(ReturnSeries(ys))
        order = np.argsort(np.abs(ys))
        assert np.all(np.diff(lin.y_star[order]) > 0)

    def test_rejects_nonpositive_offset(self):
        with pytest.raises(ValueError):
            linearize(ReturnSeries(np.array([0.1, 0.2])), offset=0.0)


def _toy_problem(seed=0, T=3):
    rng = np.random.default_rng(seed)
    p = Params(phi=0.9, rho=-0.5, sigma=0.4, mu=-9.0)
    h = p.mu + rng.normal(0.0, 0.5, size=T)
    y = np.exp(h / 2) * rng.normal(size=T)
    lin = linearize(ReturnSeries(y))
    return p, LatentPath(h, Parameterization.CENTERED), lin


class TestSampleIndicators:
    def test_single_component_forced(self):
        p, h, lin = _toy_problem()
        table = single_component_table()
        s = sample_indicators(lin, h, p, table, np.random.default_rng(1))
        assert np.all(s.s == 1)

    def test_posterior_weights_match_scipy_bayes(self):
        # the internal per-component densities against scipy bivariate pdfs
        p, h, lin = _toy_problem(seed=9, T=4)
        ht = h.to_noncentered(p).values
        logdens = _component_logdens(lin, ht, p.phi, p.rho, p.sigma, p.mu,
                                     OMORI_TABLE)
        xi = lin.y_star - p.mu - p.sigma * ht
        e = ht[1:] - p.phi * ht[:-1]
        for t in range(3):
            for j in range(10):
                expected = aux_component_logpdf(xi[t], e[t], lin.d[t], j,
                                                p.rho, OMORI_TABLE)
                assert logdens[t, j] == pytest.approx(expected, abs=1e-10)
        for j in range(10):
            expected = norm.logpdf(xi[-1], OMORI_TABLE.m1[j], OMORI_TABLE.v1[j])
            assert logdens[-1, j] == pytest.approx(expected, abs=1e-10)

    def test_two_component_bayes_ratio(self):
        # T=1 reduction: only the margin matters; hand-computed Bayes ratio
        table = MixtureTable(prob=np.array([0.5, 0.5]),
                             m1=np.array([-3.270363, 0.729637]),
                             v1=np.array([1.0, 1.0]),
                             m2=np.array([1.0, 1.0]),
                             v2=np.array([0.5, 0.5]))
        p = Params(phi=0.5, rho=0.0, sigma=1.0, mu=0.0)
        lin = Linearized(y_star=np.array([-1.0]), d=np.array([1.0]),
                         offset=1e-10)
        h = LatentPath(np.array([0.0]), Parameterization.NONCENTERED)
        logdens = _component_logdens(lin, h.values, p.phi, p.rho, p.sigma,
                                     p.mu, table)
        w = np.exp(logdens[0] + np.log(table.prob))
        post = w / w.sum()
        # hand Bayes: N(-1; m_j, 1) with equal priors
        num = math.exp(-0.5 * (-1.0 + 3.270363) ** 2)
        den = num + math.exp(-0.5 * (-1.0 - 0.729637) ** 2)
        assert post[0] == pytest.approx(num / den, abs=1e-10)

    def test_empirical_frequencies_match_posterior(self):
        # constant (y, h) rows make every interior t share one posterior,
        # giving 10^6 iid draws from a single vectorized call
        n = 1_000_000
        p = Params(phi=0.9, rho=-0.5, sigma=0.4, mu=-9.0)
        ht_val = 0.4
        ystar = np.full(n + 1, -9.8)
        d = np.full(n + 1, 1.0)
        lin = Linearized(y_star=ystar, d=d, offset=1e-10)
        ht = np.full(n + 1, ht_val)
        # interior increment is htilde_{t+1} - phi*htilde_t, constant as well
        h = LatentPath(p.mu + p.sigma * ht, Parameterization.CENTERED)
        logdens = _component_logdens(lin, (h.values - p.mu) / p.sigma,
                                     p.phi, p.rho, p.sigma, p.mu, OMORI_TABLE)
        w = np.exp(logdens[0] + np.log(OMORI_TABLE.prob))
        post = w / w.sum()
        s = sample_indicators(lin, h, p, OMORI_TABLE, np.random.default_rng(5))
        counts = np.bincount(s.s[:-1], minlength=11)[1:]
        for j in range(10):
            se = math.sqrt(n * post[j] * (1 - post[j]))
            assert abs(counts[j] - n * post[j]) < 3.0 * max(se, 1.0), \
                f"component {j + 1}"
        # chi-square goodness of fit on the same draws
        res = chisquare(counts, n * post)
        assert res.pvalue > 0.001

    def test_underflow_falls_back_to_prior_weights(self):
        p = Params(phi=0.9, rho=0.0, sigma=0.4, mu=-9.0)
        lin = Linearized(y_star=np.array([1e8, 1e8]), d=np.ones(2),
                         offset=1e-10)
        h = LatentPath(np.zeros(2), Parameterization.NONCENTERED)
        s = sample_indicators(lin, h, p, OMORI_TABLE,
                              np.random.default_rng(2))
        assert np.all((s.s >= 1) & (s.s <= 10))


class TestAuxLogDensityMarginal:
    def test_single_component_equals_gaussian_joint(self):
        p, h, lin = _toy_problem(seed=13, T=5)
        table = single_component_table()
        got = aux_log_density_marginal(h, lin, p, table)
        ht = h.to_noncentered(p).values
        xi = lin.y_star - p.mu - p.sigma * ht
        e = ht[1:] - p.phi * ht[:-1]
        expected = norm.logpdf(ht[0], 0.0, 1.0 / math.sqrt(1 - p.phi ** 2))
        for t in range(4):
            expected += aux_component_logpdf(xi[t], e[t], lin.d[t], 0, p.rho,
                                             table)
        expected += norm.logpdf(xi[-1], table.m1[0], table.v1[0])
        assert got == pytest.approx(float(expected), abs=1e-10)

    def test_t3_exhaustive_enumeration(self):
        p, h, lin = _toy_problem(seed=31, T=3)
        got = aux_log_density_marginal(h, lin, p, OMORI_TABLE)
        ht = h.to_noncentered(p).values
        expected = aux_marginal_enumeration(lin.y_star, lin.d, ht, p.phi,
                                            p.rho, p.sigma, p.mu, OMORI_TABLE)
        assert got == pytest.approx(expected, abs=1e-10)

    def test_far_perturbation_decreases_density(self):
        p, h, lin = _toy_problem(seed=41, T=6)
        base = aux_log_density_marginal(h, lin, p, OMORI_TABLE)
        values = h.values.copy()
        values[2] += 50.0 * p.sigma
        worse = aux_log_density_marginal(
            LatentPath(values, Parameterization.CENTERED), lin, p, OMORI_TABLE)
        assert worse < base

    def test_length_mismatch_raises(self):
        p, h, lin = _toy_problem()
        short = LatentPath(h.values[:-1], Parameterization.CENTERED)
        with pytest.raises(ValueError):
            aux_log_density_marginal(short, lin, p, OMORI_TABLE)


class TestIndicatorVector:
    def test_range_check(self):
        with pytest.raises(ValueError):
            IndicatorVector(np.array([0, 3]))
        with pytest.raises(ValueError):
            IndicatorVector(np.array([1, 11]))
