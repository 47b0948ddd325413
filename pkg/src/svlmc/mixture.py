"""Ten-component Gaussian mixture machinery for the linearized model.

Squaring and taking logs turns the observation equation into

    ystar_t = mu + sigma * htilde_t + xi_t,        xi_t = log(eps_t^2),

and the joint law of (xi_t, eta_t) is approximated, separately per time
point, by a ten-component bivariate Gaussian mixture with component
indicators s_t.  Given s_t = j the conditionally Gaussian system reads

    ystar_t       = mu + sigma*htilde_t + m1_j + v1_j * w_t,
    htilde_{t+1}  = phi*htilde_t + sqrt(1-rho^2)*z_t + d_t*rho*(m2_j + v2_j*w_t),

with w_t, z_t iid N(0,1) shared across the two equations and d_t = sgn(y_t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import LatentPath, Params, Parameterization, ReturnSeries

__all__ = [
    "MixtureTable",
    "OMORI_TABLE",
    "Linearized",
    "IndicatorVector",
    "linearize",
    "sample_indicators",
    "aux_log_density_marginal",
]

_LOG_2PI = math.log(2.0 * math.pi)

# Ten-component fit to the law of log(chi^2_1), columns: weight, mean,
# variance, plus the linearization coefficients (a_j, b_j) of exp(xi/2)
# around the component mean (Omori, Chib, Shephard & Nakajima 2007, Table 1).
_OMORI_ROWS = np.array([
    #  p_j      m_j        v_j^2     a_j      b_j
    [0.00609,   1.92677,   0.11265,  1.01418, 0.50710],
    [0.04775,   1.34744,   0.17788,  1.02248, 0.51124],
    [0.13057,   0.73504,   0.26768,  1.03403, 0.51701],
    [0.20674,   0.02266,   0.40611,  1.05207, 0.52604],
    [0.22715,  -0.85173,   0.62699,  1.08153, 0.54076],
    [0.18842,  -1.97278,   0.98583,  1.13114, 0.56557],
    [0.12047,  -3.46788,   1.57469,  1.21754, 0.60877],
    [0.05591,  -5.55246,   2.54498,  1.37454, 0.68728],
    [0.01575,  -8.68384,   4.16591,  1.68327, 0.84163],
    [0.00115, -14.65000,   7.33342,  2.50097, 1.25049],
])

LOG_CHI2_MEAN = -1.270363
LOG_CHI2_VAR = 4.934802


@dataclass(frozen=True)
class MixtureTable:
    """Component constants of the bivariate mixture.

    prob: weights; m1, v1: mean and standard deviation of the log(eps^2)
    margin; m2, v2: intercept and w-loading of the eta coupling term.
    """

    prob: np.ndarray
    m1: np.ndarray
    v1: np.ndarray
    m2: np.ndarray
    v2: np.ndarray

    def __post_init__(self):
        for name in ("prob", "m1", "v1", "m2", "v2"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
            if arr.shape != self.prob.shape:
                raise ValueError("mixture columns must share one length")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite entries in {name}")
        if np.any(self.prob <= 0.0):
            raise ValueError("component weights must be positive")
        if abs(self.prob.sum() - 1.0) > 1e-12:
            raise ValueError("component weights must sum to 1")
        mean = float(self.prob @ self.m1)
        var = float(self.prob @ (self.v1 ** 2 + self.m1 ** 2)) - mean ** 2
        if abs(mean - LOG_CHI2_MEAN) > 0.05:
            raise ValueError(f"mixture mean {mean:.6f} is off target")
        if abs(var - LOG_CHI2_VAR) > 0.10:
            raise ValueError(f"mixture variance {var:.6f} is off target")

    @property
    def n_components(self) -> int:
        return self.prob.size


def _build_omori_table() -> MixtureTable:
    p, m, v2col, a, b = _OMORI_ROWS.T
    v = np.sqrt(v2col)
    scale = np.exp(0.5 * m)
    return MixtureTable(prob=p, m1=m, v1=v, m2=a * scale, v2=b * v * scale)


OMORI_TABLE = _build_omori_table()


@dataclass(frozen=True)
class Linearized:
    """ystar_t = log(y_t^2 + offset) and the sign vector d_t."""

    y_star: np.ndarray
    d: np.ndarray
    offset: float

    def __post_init__(self):
        ys = np.asarray(self.y_star, dtype=float)
        d = np.asarray(self.d, dtype=float)
        object.__setattr__(self, "y_star", ys)
        object.__setattr__(self, "d", d)
        if ys.shape != d.shape or ys.ndim != 1:
            raise ValueError("y_star and d must be 1-d and equally long")
        if not np.all(np.isfinite(ys)):
            raise ValueError("y_star contains non-finite values")

    def __len__(self):
        return self.y_star.size


@dataclass(frozen=True)
class IndicatorVector:
    """Mixture component indicators, one of 1..n_components per time point."""

    s: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=np.int64)
        s.setflags(write=False)
        object.__setattr__(self, "s", s)
        if s.ndim != 1:
            raise ValueError("indicator vector must be 1-d")
        if s.size and (s.min() < 1 or s.max() > OMORI_TABLE.n_components):
            raise ValueError("indicators out of range")

    def __len__(self):
        return self.s.size


def linearize(y: ReturnSeries, offset: float = 1e-10) -> Linearized:
    """Log-squared transform of the returns with a zero-return guard.

    sgn(0) is fixed to +1; zero returns carry no sign information and the
    convention keeps runs deterministic.
    """
    if not offset > 0.0:
        raise ValueError("offset must be > 0")
    ys = np.log(y.y * y.y + offset)
    d = np.where(y.y < 0.0, -1.0, 1.0)
    return Linearized(y_star=ys, d=d, offset=offset)


def _component_logdens(lin: Linearized, ht: np.ndarray, phi: float,
                       rho: float, sigma: float, mu: float,
                       table: MixtureTable) -> np.ndarray:
    """(T, J) matrix of per-time, per-component log densities.

    Row t < T-1 holds the bivariate Gaussian log density of
    (xi_t, etatilde_t) = (ystar_t - mu - sigma*htilde_t, htilde_{t+1} -
    phi*htilde_t) under component j; the last row only the xi margin.
    """
    xi = lin.y_star - mu - sigma * ht
    e = ht[1:] - phi * ht[:-1]
    d = lin.d[:-1]

    m1, v1, m2, v2 = table.m1, table.v1, table.m2, table.v2
    var1 = v1 * v1
    var2 = rho * rho * v2 * v2 + (1.0 - rho * rho)
    # cross covariance: shared w_t loading, sign-flipped by d_t
    cov = d[:, None] * (rho * v1 * v2)
    mean2 = d[:, None] * (rho * m2)

    r1 = xi[:-1, None] - m1
    r2 = e[:, None] - mean2
    det = var1 * var2 - cov * cov
    quad = (var2 * r1 * r1 - 2.0 * cov * r1 * r2 + var1 * r2 * r2) / det
    out = np.empty((len(lin), table.n_components))
    out[:-1] = -0.5 * (2.0 * _LOG_2PI + np.log(det) + quad)
    rT = xi[-1] - m1
    out[-1] = -0.5 * (_LOG_2PI + np.log(var1) + rT * rT / var1)
    return out


def _as_noncentered_values(h: LatentPath, p: Params) -> np.ndarray:
    return h.to_noncentered(p).values


def sample_indicators(lin: Linearized, h: LatentPath, p: Params,
                      table: MixtureTable = OMORI_TABLE,
                      rng: np.random.Generator | None = None) -> IndicatorVector:
    """Draw s_t | ystar, htilde, theta independently across t.

    Posterior weights are proportional to prob_j times the component density
    of the observed (xi_t, etatilde_t) pair (xi margin only at t = T).
    Computed in log space with per-row max subtraction; if an entire row
    underflows anyway, the prior weights are used for that t.
    """
    if rng is None:
        rng = np.random.default_rng()
    ht = _as_noncentered_values(h, p)
    logw = _component_logdens(lin, ht, p.phi, p.rho, p.sigma, p.mu, table)
    logw = logw + np.log(table.prob)
    logw -= logw.max(axis=1, keepdims=True)
    w = np.exp(logw)
    tot = w.sum(axis=1)
    bad = ~np.isfinite(tot) | (tot <= 0.0)
    if np.any(bad):
        w[bad] = table.prob
        tot[bad] = 1.0
    # inverse transform sampling, one uniform per time point
    cum = np.cumsum(w, axis=1)
    u = rng.random(len(lin)) * tot
    s = (u[:, None] >= cum).sum(axis=1) + 1
    return IndicatorVector(np.minimum(s, table.n_components))


def aux_log_density_marginal(h: LatentPath, lin: Linearized, p: Params,
                             table: MixtureTable = OMORI_TABLE) -> float:
    """log p_A(h | y, theta) up to an additive constant free of h.

    Sums the indicators out per time point (component mixture of bivariate
    Gaussians; margin only at t = T) and adds the stationary initial law of
    htilde_1; O(J*T) total.  Returns -inf on total underflow.
    """
    if len(h) != len(lin):
        raise ValueError("latent path and linearized data lengths differ")
    ht = _as_noncentered_values(h, p)
    logdens = _component_logdens(lin, ht, p.phi, p.rho, p.sigma, p.mu, table)
    logdens = logdens + np.log(table.prob)
    m = logdens.max(axis=1)
    if not np.all(np.isfinite(m)):
        return -math.inf
    lp = float(np.sum(m + np.log(np.sum(np.exp(logdens - m[:, None]), axis=1))))
    p1 = 1.0 / (1.0 - p.phi * p.phi)
    lp += -0.5 * (_LOG_2PI + math.log(p1) + ht[0] ** 2 / p1)
    return lp if math.isfinite(lp) else -math.inf
