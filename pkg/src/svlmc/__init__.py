"""Bayesian inference for the stochastic volatility model with leverage.

Four competing MCMC strategies (an auxiliary mixture sampler and three
random-walk MH variants, with and without interweaving), the Kalman/
simulation-smoothing machinery behind them, effective-sample-size
diagnostics, and a benchmark harness.
"""

from .model import (Parameterization, Params, TransformedParams, ReturnSeries,
                    LatentPath, PriorConfig, DgpSpec, to_transformed,
                    from_transformed, log_jacobian, log_prior,
                    log_joint_centered, log_joint_noncentered,
                    log_posterior_h_centered, simulate_svl)
from .mixture import (MixtureTable, OMORI_TABLE, Linearized, IndicatorVector,
                      linearize, sample_indicators, aux_log_density_marginal)
from .kalman import (CondGaussSSM, FilterResult, FilterBreakdownError,
                     assemble_ssm, kalman_loglik, simulation_smoother,
                     draw_mu_conjugate, collapsed_loglik)
from .samplers import (Algorithm, OptimizerConfig, SamplerConfig, ChainState,
                       ChainOutput, latent_update, rwmh_theta,
                       asis_interweave, aux_step2, aux_sweep, run_chain)
from .diagnostics import (UndefinedAutocorrelationError, autocorrelation,
                          integrated_autocorr_time, ess, ParamEfficiency,
                          EfficiencyReport, efficiency_report,
                          posterior_summary)
from .benchmark import (GridSpec, RunRecord, parse_grid_file, run_benchmark,
                        run_cell, data_seed, chain_seed)
from .validation import (GewekeRun, geweke_run, prior_draw, redraw_returns,
                         rank_uniformity_pvalue)

__version__ = "0.1.0"
