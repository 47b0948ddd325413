"""The four MCMC algorithms: AUX, RWMH-C, RWMH-N, and RWMH-ASIS.

Every sweep of the three RWMH variants starts with the boosted latent move:
indicators are refreshed, a candidate path is drawn from the mixture-model
smoother, and the candidate is accepted with probability

    min{1, p_C(h*|y,theta)/p_C(h|y,theta) * p_A(h|y,theta)/p_A(h*|y,theta)},

where p_A is the indicator-marginal auxiliary posterior.  Parameters then
move by a Gaussian random walk in the unconstrained space, under the
centered or non-centered likelihood, optionally interweaving the two.

AUX never leaves the auxiliary model: (phi, rho, sigma) are drawn by an
independence MH step whose proposal is the Laplace approximation of the
collapsed posterior (htilde and mu integrated out), then mu conjugately,
then the path by simulation smoothing.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.optimize import minimize

from .kalman import (FilterBreakdownError, assemble_ssm, collapsed_loglik,
                     draw_mu_conjugate, simulation_smoother)
from .mixture import (IndicatorVector, Linearized, MixtureTable, OMORI_TABLE,
                      aux_log_density_marginal, linearize, sample_indicators)
from .model import (LatentPath, Parameterization, Params, PriorConfig,
                    ReturnSeries, log_joint_centered, log_joint_noncentered,
                    log_prior_vol_params, _log_prior_mu)

__all__ = [
    "Algorithm",
    "OptimizerConfig",
    "SamplerConfig",
    "ChainState",
    "ChainOutput",
    "latent_update",
    "rwmh_theta",
    "asis_interweave",
    "aux_step2",
    "aux_sweep",
    "run_chain",
]

_LOG_2PI = math.log(2.0 * math.pi)


class Algorithm(Enum):
    AUX = "aux"
    RWMH_C = "rwmh-c"
    RWMH_N = "rwmh-n"
    RWMH_ASIS = "rwmh-asis"


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings of the mode search inside the AUX parameter step."""

    max_evals: int = 500
    ftol: float = 1e-8
    hess_step: float = 1e-4
    fallback_variance: float = 0.1


@dataclass(frozen=True)
class SamplerConfig:
    algorithm: Algorithm = Algorithm.RWMH_ASIS
    n_draws: int = 10000
    n_burnin: int = 2000
    thin: int = 1
    seed: int = 0
    asis_repeats: int = 5
    rw_variance: float = 0.1
    h_store_times: tuple = ()
    offset: float = 1e-10
    optimizer: OptimizerConfig = OptimizerConfig()

    def __post_init__(self):
        if self.n_draws < 1 or self.n_burnin < 0 or self.thin < 1:
            raise ValueError("n_draws >= 1, n_burnin >= 0, thin >= 1 required")
        if self.asis_repeats < 1:
            raise ValueError("asis_repeats must be >= 1")
        rw = np.asarray(self.rw_variance, dtype=float)
        if np.any(rw < 0.0):
            raise ValueError("rw_variance must be >= 0")

    def rw_sd_vector(self) -> np.ndarray:
        return np.sqrt(np.broadcast_to(
            np.asarray(self.rw_variance, dtype=float), (4,)).copy())


@dataclass
class ChainState:
    """Mutable state of one chain: theta, centered path, indicators, counters."""

    params: Params
    h: LatentPath
    s: IndicatorVector
    accepts: dict = field(default_factory=dict)
    attempts: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    step_seconds: dict = field(default_factory=dict)
    iteration: int = 0

    def _count(self, move: str, accepted: bool):
        self.attempts[move] = self.attempts.get(move, 0) + 1
        if accepted:
            self.accepts[move] = self.accepts.get(move, 0) + 1

    def _flag(self, name: str):
        self.flags[name] = self.flags.get(name, 0) + 1


@dataclass
class ChainOutput:
    """Post burn-in draws plus timing, acceptance, and flag bookkeeping."""

    draws: np.ndarray
    param_names: tuple
    h_draws: dict
    wall_seconds: float
    burnin_seconds: float
    accepts: dict
    attempts: dict
    acceptance_rates: dict
    flags: dict
    windows: list
    step_seconds: dict
    seed: int
    config: SamplerConfig

    def column(self, name: str) -> np.ndarray:
        return self.draws[:, self.param_names.index(name)]


def _accept(rng: np.random.Generator, log_ratio: float) -> bool:
    if log_ratio >= 0.0:
        return True
    return math.log(rng.random() + 1e-300) < log_ratio


def latent_update(state: ChainState, y: ReturnSeries, lin: Linearized,
                  table: MixtureTable, rng: np.random.Generator) -> ChainState:
    """Refresh indicators and propose a new path from the auxiliary smoother.

    The refreshed indicators are kept whether or not the path proposal is
    accepted; a smoother breakdown rejects the move and flags the iteration.
    """
    p = state.params
    state.s = sample_indicators(lin, state.h, p, table, rng)
    m = assemble_ssm(lin, state.s, p, table)
    try:
        ht_star = simulation_smoother(m, lin.y_star, rng)
    except FilterBreakdownError:
        state._flag("smoother_breakdown")
        state._count("latent", False)
        return state
    h_star = ht_star.to_centered(p)
    lc_cur = log_joint_centered(y.y, state.h.values, p.phi, p.rho, p.sigma, p.mu)
    lc_new = log_joint_centered(y.y, h_star.values, p.phi, p.rho, p.sigma, p.mu)
    la_cur = aux_log_density_marginal(state.h, lin, p, table)
    la_new = aux_log_density_marginal(h_star, lin, p, table)
    log_ratio = (lc_new - lc_cur) + (la_cur - la_new)
    accepted = math.isfinite(log_ratio) and _accept(rng, log_ratio)
    if accepted:
        state.h = h_star
    state._count("latent", accepted)
    return state


def _theta_from_z(z: np.ndarray):
    phi = math.tanh(z[0])
    rho = math.tanh(z[1])
    try:
        sigma = math.exp(0.5 * z[2])
    except OverflowError:
        sigma = math.inf
    return phi, rho, sigma, z[3]


def _log_target_theta(z: np.ndarray, y: np.ndarray, latent: np.ndarray,
                      prior: PriorConfig, centered: bool) -> float:
    """Joint + prior + Jacobian for theta in the unconstrained space."""
    phi, rho, sigma, mu = _theta_from_z(z)
    if not (abs(phi) < 1.0 and abs(rho) < 1.0
            and sigma > 0.0 and math.isfinite(sigma) and math.isfinite(mu)):
        return -math.inf
    if centered:
        lj = log_joint_centered(y, latent, phi, rho, sigma, mu)
    else:
        lj = log_joint_noncentered(y, latent, phi, rho, sigma, mu)
    lp = log_prior_vol_params(phi, rho, sigma, prior) \
        + _log_prior_mu(mu, prior.mu_mu, prior.sigma2_mu)
    jac = math.log1p(-phi * phi) + math.log1p(-rho * rho) + z[2]
    return lj + lp + jac


def rwmh_theta(state: ChainState, y: ReturnSeries,
               parameterization: Parameterization, cfg: SamplerConfig,
               prior: PriorConfig, rng: np.random.Generator) -> ChainState:
    """Four-dimensional Gaussian random walk on (z_phi, z_rho, log s2, mu).

    Centered mode conditions on the stored h; non-centered mode conditions
    on htilde derived from h with the current (mu, sigma).  The stored h is
    left untouched either way; re-anchoring after an accepted non-centered
    move is the caller's job.
    """
    p = state.params
    centered = parameterization is Parameterization.CENTERED
    if centered:
        latent = state.h.values
    else:
        latent = (state.h.values - p.mu) / p.sigma
    z = np.array([math.atanh(p.phi), math.atanh(p.rho),
                  2.0 * math.log(p.sigma), p.mu])
    z_prop = z + cfg.rw_sd_vector() * rng.standard_normal(4)
    cur = _log_target_theta(z, y.y, latent, prior, centered)
    prop = _log_target_theta(z_prop, y.y, latent, prior, centered)
    log_ratio = prop - cur
    move = "theta_c" if centered else "theta_nc"
    accepted = math.isfinite(prop) and _accept(rng, log_ratio)
    if accepted and not np.array_equal(z_prop, z):
        phi, rho, sigma, mu = _theta_from_z(z_prop)
        state.params = Params(phi=phi, rho=rho, sigma=sigma, mu=mu)
    state._count(move, accepted)
    return state


def _nc_move_and_remap(state: ChainState, y: ReturnSeries, cfg: SamplerConfig,
                       prior: PriorConfig, rng: np.random.Generator):
    """One non-centered theta move holding htilde fixed, then h = mu + sigma*htilde.

    The remap is skipped when (mu, sigma) did not change, so a rejected move
    leaves h bit-for-bit identical.
    """
    p0 = state.params
    ht = (state.h.values - p0.mu) / p0.sigma
    rwmh_theta(state, y, Parameterization.NONCENTERED, cfg, prior, rng)
    p1 = state.params
    if p1.mu != p0.mu or p1.sigma != p0.sigma:
        state.h = LatentPath(p1.mu + p1.sigma * ht, Parameterization.CENTERED)


def asis_interweave(state: ChainState, y: ReturnSeries, prior: PriorConfig,
                    cfg: SamplerConfig, rng: np.random.Generator) -> ChainState:
    """Interweaving block run after the centered theta move.

    Repeats asis_repeats times: map to htilde with the current (mu, sigma),
    move theta under the non-centered likelihood, and map back with the new
    values.  Always ends in the centered parameterization.
    """
    for _ in range(cfg.asis_repeats):
        _nc_move_and_remap(state, y, cfg, prior, rng)
    return state


def _collapsed_objective(zeta: np.ndarray, lin: Linearized, s: IndicatorVector,
                         prior: PriorConfig, table: MixtureTable) -> float:
    phi = math.tanh(zeta[0])
    rho = math.tanh(zeta[1])
    sigma = math.exp(0.5 * zeta[2])
    if not (abs(phi) < 1.0 and abs(rho) < 1.0 and sigma > 0.0
            and math.isfinite(sigma)):
        return math.inf
    try:
        ll = collapsed_loglik(lin, s, phi, rho, sigma, prior, table)
    except FilterBreakdownError:
        return math.inf
    lp = log_prior_vol_params(phi, rho, sigma, prior)
    jac = math.log1p(-phi * phi) + math.log1p(-rho * rho) + zeta[2]
    val = ll + lp + jac
    return -val if math.isfinite(val) else math.inf


def _central_hessian(f, x: np.ndarray, step: float) -> np.ndarray:
    n = x.size
    H = np.empty((n, n))
    f0 = f(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = step
        H[i, i] = (f(x + ei) - 2.0 * f0 + f(x - ei)) / step ** 2
        for k in range(i + 1, n):
            ek = np.zeros(n)
            ek[k] = step
            H[i, k] = H[k, i] = (f(x + ei + ek) - f(x + ei - ek)
                                 - f(x - ei + ek) + f(x - ei - ek)) / (4.0 * step ** 2)
    return H


def aux_step2(state: ChainState, lin: Linearized, table: MixtureTable,
              prior: PriorConfig, optimizer_cfg: OptimizerConfig,
              rng: np.random.Generator) -> ChainState:
    """Independence MH on (phi, rho, sigma) from the Laplace approximation.

    The collapsed posterior (htilde, mu integrated out) is maximized over
    the transformed triple by quasi-Newton with finite-difference gradients;
    the proposal is Gaussian at the mode with the inverse numerical Hessian
    as covariance.  A non-positive-definite Hessian falls back to a scaled
    identity and flags the iteration; optimizer non-convergence keeps the
    current triple and flags.
    """
    p = state.params

    def f(zeta):
        return _collapsed_objective(zeta, lin, state.s, prior, table)

    zeta0 = np.array([math.atanh(p.phi), math.atanh(p.rho),
                      2.0 * math.log(p.sigma)])
    res = minimize(f, zeta0, method="L-BFGS-B",
                   options={"maxfun": optimizer_cfg.max_evals,
                            "ftol": optimizer_cfg.ftol})
    if not res.success or not np.all(np.isfinite(res.x)):
        state._flag("opt_nonconverged")
        state._count("aux_step2", False)
        return state
    mode = res.x
    H = _central_hessian(f, mode, optimizer_cfg.hess_step)

    chol = None
    if np.all(np.isfinite(H)):
        try:
            chol = np.linalg.cholesky(H)
        except np.linalg.LinAlgError:
            chol = None
    normals = rng.standard_normal(3)
    if chol is not None:
        # proposal ~ N(mode, H^{-1}); log q via the H quadratic form
        zeta_prop = mode + np.linalg.solve(chol.T, normals)
        logdet_H = 2.0 * float(np.sum(np.log(np.diag(chol))))

        def logq(zeta):
            r = zeta - mode
            return 0.5 * logdet_H - 1.5 * _LOG_2PI - 0.5 * float(r @ H @ r)
    else:
        state._flag("hessian_fallback")
        v = optimizer_cfg.fallback_variance
        zeta_prop = mode + math.sqrt(v) * normals

        def logq(zeta):
            r = zeta - mode
            return -1.5 * (_LOG_2PI + math.log(v)) - 0.5 * float(r @ r) / v

    l_cur = -f(zeta0)
    l_prop = -f(zeta_prop)
    log_ratio = (l_prop - l_cur) + (logq(zeta0) - logq(zeta_prop))
    accepted = math.isfinite(log_ratio) and _accept(rng, log_ratio)
    if accepted:
        phi = math.tanh(zeta_prop[0])
        rho = math.tanh(zeta_prop[1])
        sigma = math.exp(0.5 * zeta_prop[2])
        state.params = replace(p, phi=phi, rho=rho, sigma=sigma)
    state._count("aux_step2", accepted)
    return state


def aux_sweep(state: ChainState, lin: Linearized, table: MixtureTable,
              prior: PriorConfig, cfg: SamplerConfig,
              rng: np.random.Generator) -> ChainState:
    """One full sweep of the auxiliary-model sampler.

    Indicators, then the collapsed (phi, rho, sigma) step, then the
    conjugate mu draw, then an exact smoothing draw of the path (no MH
    correction is needed within the auxiliary model).
    """
    p = state.params
    state.s = sample_indicators(lin, state.h, p, table, rng)
    t0 = time.perf_counter()
    aux_step2(state, lin, table, prior, cfg.optimizer, rng)
    state.step_seconds["aux_step2"] = (
        state.step_seconds.get("aux_step2", 0.0) + time.perf_counter() - t0)
    p = state.params
    try:
        mu = draw_mu_conjugate(lin, state.s, p.phi, p.rho, p.sigma, prior,
                               rng, table)
        state.params = p = replace(p, mu=mu)
        m = assemble_ssm(lin, state.s, p, table)
        ht = simulation_smoother(m, lin.y_star, rng)
    except FilterBreakdownError:
        state._flag("smoother_breakdown")
        return state
    state.h = ht.to_centered(p)
    return state


def _initial_state(y: ReturnSeries, lin: Linearized, prior: PriorConfig,
                   table: MixtureTable) -> ChainState:
    """Deterministic start: theta at prior means, h from recentered ystar."""
    phi0 = 2.0 * prior.a_phi / (prior.a_phi + prior.b_phi) - 1.0
    rho0 = 2.0 * prior.a_rho / (prior.a_rho + prior.b_rho) - 1.0
    sigma0 = math.sqrt(prior.alpha_sigma / prior.beta_sigma)
    mu0 = prior.mu_mu
    params = Params(phi=phi0, rho=rho0, sigma=sigma0, mu=mu0)
    h0 = lin.y_star - lin.y_star.mean() + mu0
    mid = (table.n_components + 1) // 2
    s0 = IndicatorVector(np.full(len(y), mid, dtype=np.int64))
    return ChainState(params=params,
                      h=LatentPath(h0, Parameterization.CENTERED), s=s0)


def _one_sweep(state: ChainState, y: ReturnSeries, lin: Linearized,
               table: MixtureTable, prior: PriorConfig, cfg: SamplerConfig,
               rng: np.random.Generator):
    alg = cfg.algorithm
    if alg is Algorithm.AUX:
        aux_sweep(state, lin, table, prior, cfg, rng)
        return
    latent_update(state, y, lin, table, rng)
    if alg is Algorithm.RWMH_C:
        rwmh_theta(state, y, Parameterization.CENTERED, cfg, prior, rng)
    elif alg is Algorithm.RWMH_N:
        _nc_move_and_remap(state, y, cfg, prior, rng)
    elif alg is Algorithm.RWMH_ASIS:
        rwmh_theta(state, y, Parameterization.CENTERED, cfg, prior, rng)
        asis_interweave(state, y, prior, cfg, rng)
    else:
        raise ValueError(f"unknown algorithm {alg}")


def run_chain(y: ReturnSeries, prior: PriorConfig, cfg: SamplerConfig,
              table: MixtureTable = OMORI_TABLE) -> ChainOutput:
    """Run one chain: burn-in sweeps, then recorded sweeps, with timing.

    Only the sampling phase enters wall_seconds (burn-in is timed
    separately).  Deterministic given cfg.seed; recoverable numerical flags
    accumulate in counters and never abort the run.
    """
    rng = np.random.default_rng(cfg.seed)
    lin = linearize(y, cfg.offset)
    state = _initial_state(y, lin, prior, table)

    window_size = 1000
    windows = []
    last_counts = ({}, {})

    def snapshot_window():
        acc = {k: state.accepts.get(k, 0) - last_counts[0].get(k, 0)
               for k in state.attempts}
        att = {k: state.attempts.get(k, 0) - last_counts[1].get(k, 0)
               for k in state.attempts}
        rates = {k: acc[k] / att[k] for k in att if att[k] > 0}
        windows.append(rates)
        return dict(state.accepts), dict(state.attempts)

    t0 = time.perf_counter()
    for i in range(cfg.n_burnin):
        _one_sweep(state, y, lin, table, prior, cfg, rng)
        state.iteration += 1
        if state.iteration % window_size == 0:
            last_counts = snapshot_window()
    burnin_seconds = time.perf_counter() - t0

    n_kept = cfg.n_draws // cfg.thin
    draws = np.empty((n_kept, 4))
    h_draws = {t: np.empty(n_kept) for t in cfg.h_store_times}
    state.step_seconds.clear()
    row = 0
    t0 = time.perf_counter()
    for i in range(cfg.n_draws):
        _one_sweep(state, y, lin, table, prior, cfg, rng)
        state.iteration += 1
        if state.iteration % window_size == 0:
            last_counts = snapshot_window()
        if (i + 1) % cfg.thin == 0 and row < n_kept:
            p = state.params
            draws[row] = (p.phi, p.rho, p.sigma, p.mu)
            for t in cfg.h_store_times:
                h_draws[t][row] = state.h.values[t]
            row += 1
    wall_seconds = max(time.perf_counter() - t0, 1e-12)
    state.step_seconds["sweep_total"] = wall_seconds

    rates = {k: state.accepts.get(k, 0) / v
             for k, v in state.attempts.items() if v > 0}
    return ChainOutput(
        draws=draws[:row],
        param_names=("phi", "rho", "sigma", "mu"),
        h_draws=h_draws,
        wall_seconds=wall_seconds,
        burnin_seconds=burnin_seconds,
        accepts=dict(state.accepts),
        attempts=dict(state.attempts),
        acceptance_rates=rates,
        flags=dict(state.flags),
        windows=windows,
        step_seconds=dict(state.step_seconds),
        seed=cfg.seed,
        config=cfg,
    )
