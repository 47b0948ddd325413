"""Joint-distribution (Geweke-style) correctness checks for the samplers.

Two simulators must produce the same joint law of (theta, latents, data):
the marginal-conditional one draws theta from the prior and data from the
model once, while the successive-conditional one alternates a posterior
sweep with a redraw of the data given the current latents.  Exact samplers
make the two output streams indistinguishable; the streams are compared per
statistic by a rank-uniformity chi-square test.

The RWMH family is checked against the exact leverage-SV model; AUX is
checked against the auxiliary mixture model it actually targets, whose data
are (ystar, d).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .diagnostics import integrated_autocorr_time
from .mixture import (IndicatorVector, Linearized, MixtureTable, OMORI_TABLE,
                      linearize)
from .model import (LatentPath, Parameterization, Params, PriorConfig,
                    ReturnSeries)
from .samplers import Algorithm, ChainState, SamplerConfig, _one_sweep, aux_sweep

__all__ = [
    "prior_draw",
    "redraw_returns",
    "GewekeRun",
    "geweke_run",
    "rank_uniformity_pvalue",
]

STAT_NAMES = ("phi", "rho", "sigma", "mu", "h_stat")


def prior_draw(prior: PriorConfig, rng: np.random.Generator) -> Params:
    """One draw of theta from the prior."""
    phi = 2.0 * rng.beta(prior.a_phi, prior.b_phi) - 1.0
    rho = 2.0 * rng.beta(prior.a_rho, prior.b_rho) - 1.0
    sigma2 = rng.gamma(prior.alpha_sigma, 1.0 / prior.beta_sigma)
    mu = prior.mu_mu + math.sqrt(prior.sigma2_mu) * rng.standard_normal()
    # guard against boundary round-off from the beta sampler
    phi = min(max(phi, -1.0 + 1e-12), 1.0 - 1e-12)
    rho = min(max(rho, -1.0 + 1e-12), 1.0 - 1e-12)
    sigma2 = max(sigma2, 1e-300)
    return Params(phi=phi, rho=rho, sigma=math.sqrt(sigma2), mu=mu)


def _simulate_given_theta(p: Params, T: int, rng: np.random.Generator):
    h = np.empty(T)
    h[0] = p.mu + p.sigma / math.sqrt(1.0 - p.phi * p.phi) * rng.standard_normal()
    eps = rng.standard_normal(T)
    eta = p.rho * eps + math.sqrt(1.0 - p.rho * p.rho) * rng.standard_normal(T)
    for t in range(T - 1):
        h[t + 1] = p.mu + p.phi * (h[t] - p.mu) + p.sigma * eta[t]
    y = np.exp(0.5 * h) * eps
    return y, h


def redraw_returns(h: np.ndarray, p: Params, rng: np.random.Generator) -> np.ndarray:
    """Exact draw from y | h, theta under the centered model.

    For t < T the observation noise is conditioned on the realized state
    increment: eps_t | eta_t ~ N(rho*eta_t, 1 - rho^2); the last point is
    unconditioned.
    """
    T = h.size
    eta = (h[1:] - p.mu - p.phi * (h[:-1] - p.mu)) / p.sigma
    eps = np.empty(T)
    sd = math.sqrt(1.0 - p.rho * p.rho)
    eps[:-1] = p.rho * eta + sd * rng.standard_normal(T - 1)
    eps[-1] = rng.standard_normal()
    return np.exp(0.5 * h) * eps


def _aux_generate(p: Params, T: int, rng: np.random.Generator,
                  table: MixtureTable):
    """Generate (ystar, d, htilde, s) from the auxiliary mixture model."""
    s = rng.choice(table.n_components, size=T, p=table.prob) + 1
    d = np.where(rng.random(T) < 0.5, -1.0, 1.0)
    w = rng.standard_normal(T)
    z = rng.standard_normal(T)
    j = s - 1
    xi = table.m1[j] + table.v1[j] * w
    ht = np.empty(T)
    ht[0] = rng.standard_normal() / math.sqrt(1.0 - p.phi * p.phi)
    rho = p.rho
    couple = d * rho * (table.m2[j] + table.v2[j] * w)
    for t in range(T - 1):
        ht[t + 1] = p.phi * ht[t] + math.sqrt(1.0 - rho * rho) * z[t] + couple[t]
    ystar = p.mu + p.sigma * ht + xi
    return ystar, d, ht, s


def _aux_redraw_data(ht: np.ndarray, s: np.ndarray, p: Params,
                     rng: np.random.Generator, table: MixtureTable):
    """Exact draw from (ystar, d) | htilde, s, theta in the auxiliary model.

    d_t is drawn from its two-point conditional given the state increment,
    then xi_t from the bivariate-normal conditional given the increment and
    the new sign; the last time point uses the unconditioned margins.
    """
    T = ht.size
    j = s - 1
    m1, v1, m2, v2 = table.m1[j], table.v1[j], table.m2[j], table.v2[j]
    rho = p.rho
    var2 = rho * rho * v2 ** 2 + (1.0 - rho * rho)
    e = ht[1:] - p.phi * ht[:-1]

    lw_pos = -0.5 * (e - rho * m2[:-1]) ** 2 / var2[:-1]
    lw_neg = -0.5 * (e + rho * m2[:-1]) ** 2 / var2[:-1]
    p_pos = 1.0 / (1.0 + np.exp(lw_neg - lw_pos))
    d = np.empty(T)
    d[:-1] = np.where(rng.random(T - 1) < p_pos, 1.0, -1.0)
    d[-1] = 1.0 if rng.random() < 0.5 else -1.0

    xi = np.empty(T)
    cov = d[:-1] * rho * v1[:-1] * v2[:-1]
    cmean = m1[:-1] + cov / var2[:-1] * (e - d[:-1] * rho * m2[:-1])
    cvar = v1[:-1] ** 2 - cov ** 2 / var2[:-1]
    xi[:-1] = cmean + np.sqrt(np.maximum(cvar, 0.0)) * rng.standard_normal(T - 1)
    xi[-1] = m1[-1] + v1[-1] * rng.standard_normal()
    ystar = p.mu + p.sigma * ht + xi
    return ystar, d


@dataclass(frozen=True)
class GewekeRun:
    """Stat streams of the two simulators, columns ordered as STAT_NAMES."""

    marginal: np.ndarray
    successive: np.ndarray
    stat_names: tuple = STAT_NAMES


def _stats(p: Params, h_centered: np.ndarray, h_index: int) -> tuple:
    return (p.phi, p.rho, p.sigma, p.mu, h_centered[h_index])


def geweke_run(algorithm: Algorithm, prior: PriorConfig, T: int,
               n_super: int, seed: int = 0, h_index: int = 4,
               cfg: SamplerConfig | None = None,
               table: MixtureTable = OMORI_TABLE) -> GewekeRun:
    """Run both simulators for n_super super-iterations and collect stats."""
    if cfg is None:
        cfg = SamplerConfig(algorithm=algorithm, n_draws=1, n_burnin=0)
    rng = np.random.default_rng(seed)
    marginal = np.empty((n_super, len(STAT_NAMES)))
    successive = np.empty((n_super, len(STAT_NAMES)))

    if algorithm is Algorithm.AUX:
        for i in range(n_super):
            p = prior_draw(prior, rng)
            _, _, ht, _ = _aux_generate(p, T, rng, table)
            marginal[i] = _stats(p, p.mu + p.sigma * ht, h_index)
        p = prior_draw(prior, rng)
        ystar, d, ht, s = _aux_generate(p, T, rng, table)
        state = ChainState(params=p,
                           h=LatentPath(p.mu + p.sigma * ht,
                                        Parameterization.CENTERED),
                           s=IndicatorVector(s))
        for i in range(n_super):
            lin = Linearized(y_star=ystar, d=d, offset=0.0)
            aux_sweep(state, lin, table, prior, cfg, rng)
            p = state.params
            ht_cur = (state.h.values - p.mu) / p.sigma
            ystar, d = _aux_redraw_data(ht_cur, state.s.s, p, rng, table)
            successive[i] = _stats(p, state.h.values, h_index)
        return GewekeRun(marginal=marginal, successive=successive)

    for i in range(n_super):
        p = prior_draw(prior, rng)
        _, h = _simulate_given_theta(p, T, rng)
        marginal[i] = _stats(p, h, h_index)
    p = prior_draw(prior, rng)
    y, h = _simulate_given_theta(p, T, rng)
    state = ChainState(params=p,
                       h=LatentPath(h, Parameterization.CENTERED),
                       s=IndicatorVector(np.full(T, 5, dtype=np.int64)))
    for i in range(n_super):
        series = ReturnSeries(y)
        lin = linearize(series, cfg.offset)
        _one_sweep(state, series, lin, table, prior, cfg, rng)
        y = redraw_returns(state.h.values, state.params, rng)
        successive[i] = _stats(state.params, state.h.values, h_index)
    return GewekeRun(marginal=marginal, successive=successive)


def rank_uniformity_pvalue(reference: np.ndarray, sample: np.ndarray,
                           bins: int = 20, thin: bool = True) -> float:
    """Chi-square p-value that sample ranks are uniform within reference.

    reference must be (approximately) iid; sample may be a chain and is
    thinned by its estimated integrated autocorrelation time before the
    binned chi-square test against the uniform law.
    """
    samp = np.asarray(sample, dtype=float)
    if thin:
        tau = integrated_autocorr_time(samp)
        step = max(1, int(math.ceil(tau)))
        samp = samp[::step]
    ref = np.sort(np.asarray(reference, dtype=float))
    ranks = np.searchsorted(ref, samp, side="right") / ref.size
    edges = np.linspace(0.0, 1.0, bins + 1)
    edges[-1] = 1.0 + 1e-9
    counts, _ = np.histogram(ranks, bins=edges)
    expected = samp.size / bins
    stat = float(np.sum((counts - expected) ** 2) / expected)
    return float(chi2.sf(stat, bins - 1))
