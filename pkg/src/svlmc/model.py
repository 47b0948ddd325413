"""Stochastic volatility with leverage: parameterizations, priors, simulation.

The centered form of the model is

    y_t     = exp(h_t / 2) * eps_t,
    h_{t+1} = mu + phi * (h_t - mu) + sigma * eta_t,

with (eps_t, eta_t) jointly standard normal with correlation rho and the
stationary initial law h_1 ~ N(mu, sigma^2 / (1 - phi^2)).  The non-centered
form substitutes htilde_t = (h_t - mu) / sigma, which moves mu and sigma into
the observation equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "Parameterization",
    "Params",
    "TransformedParams",
    "ReturnSeries",
    "LatentPath",
    "PriorConfig",
    "DgpSpec",
    "to_transformed",
    "from_transformed",
    "log_jacobian",
    "log_prior",
    "log_prior_vol_params",
    "log_joint_centered",
    "log_joint_noncentered",
    "log_posterior_h_centered",
    "simulate_svl",
]

_LOG_2PI = math.log(2.0 * math.pi)


class Parameterization(Enum):
    CENTERED = "centered"
    NONCENTERED = "noncentered"


@dataclass(frozen=True)
class Params:
    """Static parameters (phi, rho, sigma, mu) of the leverage SV model."""

    phi: float
    rho: float
    sigma: float
    mu: float

    def __post_init__(self):
        for name in ("phi", "rho", "sigma", "mu"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not abs(self.phi) < 1.0:
            raise ValueError(f"|phi| must be < 1, got {self.phi}")
        if not abs(self.rho) < 1.0:
            raise ValueError(f"|rho| must be < 1, got {self.rho}")
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")


@dataclass(frozen=True)
class TransformedParams:
    """Params mapped to R^4: Fisher-z for phi and rho, log for sigma^2."""

    z_phi: float
    z_rho: float
    log_sigma2: float
    mu: float


@dataclass(frozen=True)
class ReturnSeries:
    """De-meaned log returns y_1..y_T."""

    y: np.ndarray
    label: str = ""

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        object.__setattr__(self, "y", y)
        if y.ndim != 1 or y.size < 2:
            raise ValueError("return series must be 1-d with at least 2 points")
        if not np.all(np.isfinite(y)):
            raise ValueError("return series contains non-finite values")

    def __len__(self):
        return self.y.size


@dataclass(frozen=True)
class LatentPath:
    """Log-variance path, either h (centered) or htilde (non-centered)."""

    values: np.ndarray
    parameterization: Parameterization = Parameterization.CENTERED

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 1:
            raise ValueError("latent path must be 1-d")
        if not np.all(np.isfinite(v)):
            raise ValueError("latent path contains non-finite values")

    def __len__(self):
        return self.values.size

    def to_centered(self, p: Params) -> "LatentPath":
        if self.parameterization is Parameterization.CENTERED:
            return self
        return LatentPath(p.mu + p.sigma * self.values, Parameterization.CENTERED)

    def to_noncentered(self, p: Params) -> "LatentPath":
        if self.parameterization is Parameterization.NONCENTERED:
            return self
        return LatentPath((self.values - p.mu) / p.sigma, Parameterization.NONCENTERED)


@dataclass(frozen=True)
class PriorConfig:
    """Prior hyperparameters.

    (phi+1)/2 ~ Beta(a_phi, b_phi), (rho+1)/2 ~ Beta(a_rho, b_rho),
    sigma^2 ~ Gamma(alpha_sigma, beta_sigma) (shape/rate),
    mu ~ N(mu_mu, sigma2_mu).  Defaults are the simulation-study values.
    """

    a_phi: float = 20.0
    b_phi: float = 1.5
    a_rho: float = 3.0
    b_rho: float = 6.0
    alpha_sigma: float = 0.5
    beta_sigma: float = 0.5
    mu_mu: float = -10.0
    sigma2_mu: float = 100.0

    def __post_init__(self):
        for name in ("a_phi", "b_phi", "a_rho", "b_rho",
                     "alpha_sigma", "beta_sigma", "sigma2_mu"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be > 0")
        if not math.isfinite(self.mu_mu):
            raise ValueError("mu_mu must be finite")


@dataclass(frozen=True)
class DgpSpec:
    """Data-generating process: true parameters, length, and seed."""

    params: Params
    T: int
    seed: int = 0

    def __post_init__(self):
        if self.T < 2:
            raise ValueError("T must be >= 2")


def to_transformed(p: Params) -> TransformedParams:
    """Map (phi, rho, sigma, mu) to the unconstrained space.

    phi and rho go through x -> 0.5*log((1+x)/(1-x)) (atanh), sigma through
    log(sigma^2); mu is untouched.
    """
    return TransformedParams(
        z_phi=math.atanh(p.phi),
        z_rho=math.atanh(p.rho),
        log_sigma2=2.0 * math.log(p.sigma),
        mu=p.mu,
    )


def from_transformed(t: TransformedParams) -> Params:
    """Inverse of :func:`to_transformed`."""
    return Params(
        phi=math.tanh(t.z_phi),
        rho=math.tanh(t.z_rho),
        sigma=math.exp(0.5 * t.log_sigma2),
        mu=t.mu,
    )


def log_jacobian(t: TransformedParams) -> float:
    """log |d(phi, rho, sigma^2) / d(z_phi, z_rho, log_sigma2)|.

    Equals log(1-phi^2) + log(1-rho^2) + log(sigma^2).  Needed so that a
    random walk in the transformed space targets the priors stated on the
    natural scale.
    """
    phi = math.tanh(t.z_phi)
    rho = math.tanh(t.z_rho)
    return math.log1p(-phi * phi) + math.log1p(-rho * rho) + t.log_sigma2


def _log_beta(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def _log_prior_corr(x: float, a: float, b: float) -> float:
    # density of x on (-1,1) when (x+1)/2 ~ Beta(a,b)
    if not -1.0 < x < 1.0:
        return -math.inf
    u = 0.5 * (x + 1.0)
    return ((a - 1.0) * math.log(u) + (b - 1.0) * math.log1p(-u)
            - _log_beta(a, b) - math.log(2.0))


def _log_prior_sigma2(sigma2: float, alpha: float, beta: float) -> float:
    if not sigma2 > 0.0:
        return -math.inf
    return (alpha * math.log(beta) - math.lgamma(alpha)
            + (alpha - 1.0) * math.log(sigma2) - beta * sigma2)


def _log_prior_mu(mu: float, mean: float, var: float) -> float:
    return -0.5 * (_LOG_2PI + math.log(var) + (mu - mean) ** 2 / var)


def log_prior_vol_params(phi: float, rho: float, sigma: float,
                         cfg: PriorConfig) -> float:
    """Joint log prior of (phi, rho, sigma^2), excluding mu."""
    if not sigma > 0.0:
        return -math.inf
    return (_log_prior_corr(phi, cfg.a_phi, cfg.b_phi)
            + _log_prior_corr(rho, cfg.a_rho, cfg.b_rho)
            + _log_prior_sigma2(sigma * sigma, cfg.alpha_sigma, cfg.beta_sigma))


def log_prior(p: Params, cfg: PriorConfig) -> float:
    """Joint log prior density of theta evaluated on the natural scale."""
    return (log_prior_vol_params(p.phi, p.rho, p.sigma, cfg)
            + _log_prior_mu(p.mu, cfg.mu_mu, cfg.sigma2_mu))


def log_joint_centered(y: np.ndarray, h: np.ndarray,
                       phi: float, rho: float, sigma: float,
                       mu: float) -> float:
    """log p(y, h | theta) under the centered model, fully normalized.

    Factorizes as p(h_1) * prod_{t<T} p(y_t|h_t) p(h_{t+1}|h_t, y_t) * p(y_T|h_T),
    where the transition conditional has mean mu + phi*(h_t - mu) +
    rho*sigma*y_t*exp(-h_t/2) and variance sigma^2*(1 - rho^2).

    Returns -inf instead of raising when the conditional variance underflows
    to zero or the evaluation produces non-finite intermediates, so that an
    MH step rejects naturally.
    """
    if not (abs(phi) < 1.0 and abs(rho) < 1.0 and sigma > 0.0):
        return -math.inf
    cvar = sigma * sigma * (1.0 - rho * rho)
    if cvar <= 0.0:
        return -math.inf
    T = y.shape[0]
    with np.errstate(over="ignore", invalid="ignore"):
        # observation terms: y_t | h_t ~ N(0, exp(h_t))
        sq = np.where(y == 0.0, 0.0, y * y * np.exp(-h))
        lp = -0.5 * (T * _LOG_2PI + np.sum(h) + np.sum(sq))
        # initial state
        p1 = sigma * sigma / (1.0 - phi * phi)
        lp += -0.5 * (_LOG_2PI + math.log(p1) + (h[0] - mu) ** 2 / p1)
        # transitions t -> t+1 given y_t
        eps = np.where(y[:-1] == 0.0, 0.0, y[:-1] * np.exp(-0.5 * h[:-1]))
        cmean = mu + phi * (h[:-1] - mu) + rho * sigma * eps
        resid = h[1:] - cmean
        lp += -0.5 * ((T - 1) * (_LOG_2PI + math.log(cvar))
                      + np.sum(resid * resid) / cvar)
    return lp if math.isfinite(lp) else -math.inf


def log_joint_noncentered(y: np.ndarray, ht: np.ndarray,
                          phi: float, rho: float, sigma: float,
                          mu: float) -> float:
    """log p(y, htilde | theta) under the non-centered model.

    Same factorization with the state equation htilde_{t+1} = phi*htilde_t +
    eta_t, unit-variance noise, and observation scale exp(mu + sigma*htilde_t).
    """
    if not (abs(phi) < 1.0 and abs(rho) < 1.0 and sigma > 0.0):
        return -math.inf
    cvar = 1.0 - rho * rho
    if cvar <= 0.0:
        return -math.inf
    T = y.shape[0]
    with np.errstate(over="ignore", invalid="ignore"):
        logvar = mu + sigma * ht
        sq = np.where(y == 0.0, 0.0, y * y * np.exp(-logvar))
        lp = -0.5 * (T * _LOG_2PI + np.sum(logvar) + np.sum(sq))
        p1 = 1.0 / (1.0 - phi * phi)
        lp += -0.5 * (_LOG_2PI + math.log(p1) + ht[0] ** 2 / p1)
        eps = np.where(y[:-1] == 0.0, 0.0, y[:-1] * np.exp(-0.5 * logvar[:-1]))
        resid = ht[1:] - phi * ht[:-1] - rho * eps
        lp += -0.5 * ((T - 1) * (_LOG_2PI + math.log(cvar))
                      + np.sum(resid * resid) / cvar)
    return lp if math.isfinite(lp) else -math.inf


def log_posterior_h_centered(h: LatentPath, y: ReturnSeries, p: Params) -> float:
    """log p_C(h | y, theta) up to an additive constant free of h.

    Implemented as the full joint log density log p(y, h | theta), which
    differs from the posterior only by -log p(y | theta).
    """
    if h.parameterization is not Parameterization.CENTERED:
        raise ValueError("expected a centered latent path")
    if len(h) != len(y):
        raise ValueError("latent path and return series lengths differ")
    return log_joint_centered(y.y, h.values, p.phi, p.rho, p.sigma, p.mu)


def simulate_svl(spec: DgpSpec) -> tuple[ReturnSeries, LatentPath]:
    """Simulate (y, h) from the centered model; deterministic given the seed.

    Draw order is fixed: one normal for h_1, then T observation noises, then
    T correlated increment noises (the last one is unused).
    """
    p = spec.params
    T = spec.T
    rng = np.random.default_rng(spec.seed)
    h = np.empty(T)
    h[0] = p.mu + p.sigma / math.sqrt(1.0 - p.phi * p.phi) * rng.standard_normal()
    eps = rng.standard_normal(T)
    eta = p.rho * eps + math.sqrt(1.0 - p.rho * p.rho) * rng.standard_normal(T)
    for t in range(T - 1):
        h[t + 1] = p.mu + p.phi * (h[t] - p.mu) + p.sigma * eta[t]
    y = np.exp(0.5 * h) * eps
    label = f"svl-sim(phi={p.phi},rho={p.rho},sigma={p.sigma},mu={p.mu},T={T},seed={spec.seed})"
    return ReturnSeries(y, label=label), LatentPath(h, Parameterization.CENTERED)
