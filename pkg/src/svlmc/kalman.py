"""Kalman filtering, simulation smoothing, and the collapsed likelihood.

Given mixture indicators, the linearized model is a linear Gaussian state
space in htilde with correlated observation/state noises.  One scalar filter
serves likelihood evaluation and smoothing draws; a two-state augmented
filter (htilde plus a constant mu state) serves both the conjugate mu draw
and the likelihood with htilde and mu marginalized out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import LatentPath, Params, Parameterization, PriorConfig
from .mixture import IndicatorVector, Linearized, MixtureTable, OMORI_TABLE

__all__ = [
    "CondGaussSSM",
    "FilterResult",
    "FilterBreakdownError",
    "assemble_ssm",
    "kalman_loglik",
    "simulation_smoother",
    "draw_mu_conjugate",
    "collapsed_loglik",
]


class FilterBreakdownError(RuntimeError):
    """Numerical breakdown inside a filter pass (recoverable by the caller)."""


@dataclass(frozen=True)
class CondGaussSSM:
    """Scalar-state Gaussian state space with correlated noises.

    Observation: y_t = c_t + Z_t x_t + u_t, sd(u_t) = H_t.
    Transition:  x_{t+1} = g_t + phi x_t + w_t, sd(w_t) = W_t,
    cov(u_t, w_t) = C_t.  Transition arrays have length T-1.
    """

    c: np.ndarray
    Z: np.ndarray
    H: np.ndarray
    g: np.ndarray
    phi: float
    W: np.ndarray
    C: np.ndarray
    a1: float
    P1: float

    def __post_init__(self):
        for name in ("c", "Z", "H", "g", "W", "C"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
        T = self.c.size
        if self.Z.size != T or self.H.size != T:
            raise ValueError("observation arrays must have equal length")
        if not (self.g.size == self.W.size == self.C.size == T - 1):
            raise ValueError("transition arrays must have length T-1")
        if np.any(self.H <= 0.0):
            raise ValueError("observation noise sds must be > 0")
        if self.P1 < 0.0:
            raise ValueError("P1 must be >= 0")
        if np.any(self.C * self.C > self.H[:-1] ** 2 * self.W ** 2 * (1 + 1e-12)):
            raise ValueError("noise covariance per t must be positive semi-definite")

    def __len__(self):
        return self.c.size


@dataclass(frozen=True)
class FilterResult:
    """Per-time filter output plus the total Gaussian log-likelihood."""

    pred_mean: np.ndarray
    pred_var: np.ndarray
    filt_mean: np.ndarray
    filt_var: np.ndarray
    innov: np.ndarray
    innov_var: np.ndarray
    loglik: float


def _raise_on_status(status: int):
    if status == _kernels.STATUS_INNOV:
        raise FilterBreakdownError("non-positive innovation variance")
    if status == _kernels.STATUS_VARIANCE:
        raise FilterBreakdownError("filter variance below clamping tolerance")


def assemble_ssm(lin: Linearized, s: IndicatorVector, p: Params,
                 table: MixtureTable = OMORI_TABLE) -> CondGaussSSM:
    """Build the conditionally Gaussian system implied by the indicators.

    Observation: ystar_t = mu + sigma*htilde_t + m1_{s_t} + noise(v1_{s_t});
    transition: htilde_{t+1} = phi*htilde_t + d_t*rho*m2_{s_t} + noise with
    variance (1-rho^2) + rho^2 v2_{s_t}^2 and cross covariance
    d_t*rho*v1_{s_t}*v2_{s_t}; initial law htilde_1 ~ N(0, 1/(1-phi^2)).
    """
    if len(lin) != len(s):
        raise ValueError("linearized data and indicators lengths differ")
    j = s.s - 1
    T = len(lin)
    rho = p.rho
    c = p.mu + table.m1[j]
    Z = np.full(T, p.sigma)
    H = table.v1[j]
    jt = j[:-1]
    d = lin.d[:-1]
    g = d * rho * table.m2[jt]
    W = np.sqrt((1.0 - rho * rho) + rho * rho * table.v2[jt] ** 2)
    C = d * rho * table.v1[jt] * table.v2[jt]
    return CondGaussSSM(c=c, Z=Z, H=H, g=g, phi=p.phi, W=W, C=C,
                        a1=0.0, P1=1.0 / (1.0 - p.phi * p.phi))


def kalman_loglik(m: CondGaussSSM, y_star: np.ndarray) -> FilterResult:
    """Exact Gaussian log-likelihood of y_star under the model.

    Raises FilterBreakdownError on non-positive innovation variance or a
    variance below the clamping tolerance.
    """
    y = np.ascontiguousarray(y_star, dtype=float)
    if y.size != len(m):
        raise ValueError("data length does not match the model")
    ll, pm, pv, fm, fv, nu, F, status = _kernels.scalar_filter(
        y, m.c, m.Z, m.H ** 2, m.g, m.phi, m.W ** 2, m.C, m.a1, m.P1)
    _raise_on_status(status)
    if not math.isfinite(ll):
        raise FilterBreakdownError("non-finite log-likelihood")
    return FilterResult(pred_mean=pm, pred_var=pv, filt_mean=fm, filt_var=fv,
                        innov=nu, innov_var=F, loglik=ll)


def simulation_smoother(m: CondGaussSSM, y_star: np.ndarray,
                        rng: np.random.Generator) -> LatentPath:
    """One exact joint draw from p(state path | y_star) by FFBS."""
    y = np.ascontiguousarray(y_star, dtype=float)
    if y.size != len(m):
        raise ValueError("data length does not match the model")
    normals = rng.standard_normal(y.size)
    x, status = _kernels.ffbs_draw(
        y, m.c, m.Z, m.H ** 2, m.g, m.phi, m.W ** 2, m.C, m.a1, m.P1, normals)
    _raise_on_status(status)
    return LatentPath(x, Parameterization.NONCENTERED)


def _aux_parts(lin: Linearized, s: IndicatorVector, rho: float,
               table: MixtureTable):
    """Arrays of the indicator-conditional system with mu kept out of c."""
    j = s.s - 1
    c = table.m1[j]
    H2 = table.v1[j] ** 2
    jt = j[:-1]
    d = lin.d[:-1]
    g = d * rho * table.m2[jt]
    W2 = (1.0 - rho * rho) + rho * rho * table.v2[jt] ** 2
    C = d * rho * table.v1[jt] * table.v2[jt]
    return c, H2, g, W2, C


def _augmented_pass(lin: Linearized, s: IndicatorVector, phi: float,
                    rho: float, sigma: float, cfg: PriorConfig,
                    table: MixtureTable):
    if len(lin) != len(s):
        raise ValueError("linearized data and indicators lengths differ")
    c, H2, g, W2, C = _aux_parts(lin, s, rho, table)
    ll, mu_mean, mu_var, status = _kernels.augmented_filter(
        lin.y_star, c, H2, g, W2, C, phi, sigma,
        1.0 / (1.0 - phi * phi), cfg.mu_mu, cfg.sigma2_mu)
    _raise_on_status(status)
    if not math.isfinite(ll):
        raise FilterBreakdownError("non-finite collapsed log-likelihood")
    return ll, mu_mean, mu_var


def draw_mu_conjugate(lin: Linearized, s: IndicatorVector, phi: float,
                      rho: float, sigma: float, cfg: PriorConfig,
                      rng: np.random.Generator,
                      table: MixtureTable = OMORI_TABLE) -> float:
    """Exact draw from mu | ystar, s, phi, rho, sigma with htilde integrated out.

    mu rides along as a constant second state, so its filtered moments at
    t = T are its exact full conditional.
    """
    _, mu_mean, mu_var, = _augmented_pass(lin, s, phi, rho, sigma, cfg, table)
    return mu_mean + math.sqrt(mu_var) * rng.standard_normal()


def collapsed_loglik(lin: Linearized, s: IndicatorVector, phi: float,
                     rho: float, sigma: float, cfg: PriorConfig,
                     table: MixtureTable = OMORI_TABLE) -> float:
    """log p(ystar | s, phi, rho, sigma) with htilde and mu marginalized.

    mu is integrated under its N(mu_mu, sigma2_mu) prior via the same
    augmented filter pass used for the conjugate draw.
    """
    ll, _, _ = _augmented_pass(lin, s, phi, rho, sigma, cfg, table)
    return ll
