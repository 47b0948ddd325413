"""Autocorrelation, effective sample size, and sampling-rate summaries.

The inefficiency factor IF = n/ESS estimates the integrated autocorrelation
time tau = 1 + 2*sum_t rho(t); the effective sampling rate ESR divides ESS
by the sampling-phase wall time.  tau is estimated with Geyer's initial
monotone positive sequence rule on the biased (divide-by-n) autocorrelations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "UndefinedAutocorrelationError",
    "autocorrelation",
    "integrated_autocorr_time",
    "ess",
    "ParamEfficiency",
    "EfficiencyReport",
    "efficiency_report",
    "posterior_summary",
]


class UndefinedAutocorrelationError(ValueError):
    """Raised for series whose autocorrelation is undefined (zero variance)."""


def default_max_lag(n: int) -> int:
    return int(min(n - 2, 10.0 * math.sqrt(n)))


def autocorrelation(x: np.ndarray, max_lag: int | None = None) -> np.ndarray:
    """Biased sample autocorrelations rho(0..max_lag), rho(0) = 1.

    Computed by FFT; the divide-by-n convention keeps the estimated spectral
    mass non-negative.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if max_lag is None:
        max_lag = default_max_lag(n)
    if n < max_lag + 2:
        raise ValueError("series too short for the requested max_lag")
    if n == 0 or x.max() == x.min():
        raise UndefinedAutocorrelationError(
            "autocorrelation undefined for a constant series")
    xc = x - x.mean()
    denom = float(xc @ xc)
    if denom <= 0.0:
        raise UndefinedAutocorrelationError(
            "autocorrelation undefined for a constant series")
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:max_lag + 1]
    rho = acov / denom
    rho[0] = 1.0
    return rho


def integrated_autocorr_time(x: np.ndarray, max_lag: int | None = None) -> float:
    """Geyer initial-monotone-positive-sequence estimate of tau.

    Pair sums Gamma_k = rho(2k) + rho(2k+1) are truncated at the first
    non-positive value and forced non-increasing; tau = 2*sum(Gamma) - 1,
    floored at 1/n so that strongly antithetic chains report a finite,
    larger-than-n ESS instead of a sign flip.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 10:
        raise ValueError("need at least 10 draws")
    rho = autocorrelation(x, max_lag)
    m = (rho.size - 1) // 2
    total = 0.0
    prev = math.inf
    for k in range(m + 1):
        if 2 * k + 1 >= rho.size:
            break
        pair = rho[2 * k] + rho[2 * k + 1]
        if pair <= 0.0:
            break
        pair = min(pair, prev)
        total += pair
        prev = pair
    tau = 2.0 * total - 1.0
    return max(tau, 1.0 / n)


def ess(x: np.ndarray, max_lag: int | None = None) -> float:
    """Effective sample size n/tau of a draw vector."""
    x = np.asarray(x, dtype=float)
    return x.size / integrated_autocorr_time(x, max_lag)


@dataclass(frozen=True)
class ParamEfficiency:
    inefficiency: float
    ess: float
    esr: float
    acf: np.ndarray
    error: str | None = None


@dataclass(frozen=True)
class EfficiencyReport:
    per_param: dict
    min_esr: float
    n_draws: int
    wall_seconds: float


def efficiency_report(out, max_lag: int | None = None) -> EfficiencyReport:
    """IF/ESS/ESR per parameter and the minimum ESR over (phi, rho, sigma, mu).

    Estimator failures on individual parameters are recorded in that
    parameter's entry instead of aborting; min_esr is NaN if any of the four
    parameters failed.
    """
    per_param = {}
    esrs = []
    n = out.draws.shape[0]
    for idx, name in enumerate(out.param_names):
        x = out.draws[:, idx]
        try:
            tau = integrated_autocorr_time(x, max_lag)
            acf = autocorrelation(x, max_lag)
            n_eff = n / tau
            esr = n_eff / out.wall_seconds
            per_param[name] = ParamEfficiency(
                inefficiency=tau, ess=n_eff, esr=esr, acf=acf)
            esrs.append(esr)
        except (UndefinedAutocorrelationError, ValueError) as exc:
            per_param[name] = ParamEfficiency(
                inefficiency=math.nan, ess=math.nan, esr=math.nan,
                acf=np.empty(0), error=str(exc))
            esrs.append(math.nan)
    min_esr = float(np.min(esrs)) if esrs else math.nan
    return EfficiencyReport(per_param=per_param, min_esr=min_esr,
                            n_draws=n, wall_seconds=out.wall_seconds)


def posterior_summary(draws: np.ndarray, names) -> dict:
    """Mean, sd, and (2.5, 50, 97.5)% quantiles per parameter column."""
    out = {}
    for idx, name in enumerate(names):
        x = draws[:, idx]
        q = np.percentile(x, [2.5, 50.0, 97.5])
        out[name] = {
            "mean": float(x.mean()),
            "sd": float(x.std(ddof=1)) if x.size > 1 else 0.0,
            "q025": float(q[0]),
            "q500": float(q[1]),
            "q975": float(q[2]),
        }
    return out
