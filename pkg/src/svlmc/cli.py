"""Command-line surface: simulate, fit, benchmark, report.

Exit codes: 0 success, 2 input error, 3 numerical failure of an entire run.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .benchmark import (GridSpec, cell_filename, default_burnin,
                        parse_grid_file, run_benchmark, simulate_cell_data)
from .dataio import (InputError, build_report, read_draws_csv,
                     read_returns_csv, write_draws_csv, write_latent_csv,
                     write_report_json, write_returns_csv)
from .diagnostics import efficiency_report
from .model import DgpSpec, Params, PriorConfig, simulate_svl
from .samplers import Algorithm, SamplerConfig, run_chain

__all__ = ["main"]


def _add_prior_flags(p: argparse.ArgumentParser):
    d = PriorConfig()
    p.add_argument("--prior-phi", nargs=2, type=float, metavar=("A", "B"),
                   default=[d.a_phi, d.b_phi],
                   help="Beta shapes for (phi+1)/2")
    p.add_argument("--prior-rho", nargs=2, type=float, metavar=("A", "B"),
                   default=[d.a_rho, d.b_rho],
                   help="Beta shapes for (rho+1)/2")
    p.add_argument("--prior-sigma", nargs=2, type=float, metavar=("A", "B"),
                   default=[d.alpha_sigma, d.beta_sigma],
                   help="Gamma shape and rate for sigma^2")
    p.add_argument("--prior-mu", nargs=2, type=float, metavar=("M", "V"),
                   default=[d.mu_mu, d.sigma2_mu],
                   help="normal mean and variance for mu")


def _prior_from_args(args) -> PriorConfig:
    return PriorConfig(
        a_phi=args.prior_phi[0], b_phi=args.prior_phi[1],
        a_rho=args.prior_rho[0], b_rho=args.prior_rho[1],
        alpha_sigma=args.prior_sigma[0], beta_sigma=args.prior_sigma[1],
        mu_mu=args.prior_mu[0], sigma2_mu=args.prior_mu[1])


def _add_sampler_flags(p: argparse.ArgumentParser):
    p.add_argument("--sampler", choices=[a.value for a in Algorithm],
                   default=Algorithm.RWMH_ASIS.value)
    p.add_argument("--asis-repeats", type=int, default=5, metavar="K")
    p.add_argument("--draws", type=int, default=10000, metavar="N")
    p.add_argument("--burnin", type=int, default=None, metavar="N",
                   help="default: 2000 for T <= 300, 10000 otherwise")
    p.add_argument("--thin", type=int, default=1, metavar="N")
    p.add_argument("--seed", type=int, default=0, metavar="S")
    p.add_argument("--rw-var", type=float, default=0.1, metavar="V",
                   help="random-walk variance per transformed coordinate")


def _sidecar_path(out: str) -> str:
    root, ext = os.path.splitext(out)
    return f"{root}.latent{ext or '.csv'}"


def _cmd_simulate(args) -> int:
    if args.grid is not None:
        spec = parse_grid_file(args.grid)
        os.makedirs(args.out, exist_ok=True)
        n = 0
        for phi, rho, sigma, T in spec.points():
            for rep in range(spec.replications):
                y, h = simulate_cell_data(spec, phi, rho, sigma, T, rep)
                name = cell_filename(phi, rho, sigma, spec.mu, T, rep)
                path = os.path.join(args.out, name)
                write_returns_csv(path, y.y)
                write_latent_csv(_sidecar_path(path), h.values)
                n += 1
        print(f"wrote {n} data sets to {args.out}")
        return 0
    params = Params(phi=args.phi, rho=args.rho, sigma=args.sigma, mu=args.mu)
    y, h = simulate_svl(DgpSpec(params=params, T=args.T, seed=args.seed))
    write_returns_csv(args.out, y.y)
    write_latent_csv(_sidecar_path(args.out), h.values)
    print(f"wrote {args.T} returns to {args.out}")
    return 0


def _cmd_fit(args) -> int:
    y = read_returns_csv(args.data, price_mode=args.price_mode)
    prior = _prior_from_args(args)
    burnin = args.burnin if args.burnin is not None else default_burnin(len(y))
    cfg = SamplerConfig(
        algorithm=Algorithm(args.sampler), n_draws=args.draws,
        n_burnin=burnin, thin=args.thin, seed=args.seed,
        asis_repeats=args.asis_repeats, rw_variance=args.rw_var)
    out = run_chain(y, prior, cfg)
    draws_path = f"{args.out}.draws.csv"
    report_path = f"{args.out}.report.json"
    write_draws_csv(draws_path, out.draws, out.param_names)
    eff = efficiency_report(out)
    doc = build_report(out.draws, out.param_names, eff, extra={
        "data": args.data,
        "T": len(y),
        "sampler": cfg.algorithm.value,
        "seed": cfg.seed,
        "n_burnin": cfg.n_burnin,
        "thin": cfg.thin,
        "rw_variance": cfg.rw_variance,
        "asis_repeats": cfg.asis_repeats,
        "burnin_seconds": out.burnin_seconds,
        "acceptance_rates": out.acceptance_rates,
        "flags": out.flags,
        "degenerate_data": bool(np.all(y.y == 0.0)),
        "prior": {
            "a_phi": prior.a_phi, "b_phi": prior.b_phi,
            "a_rho": prior.a_rho, "b_rho": prior.b_rho,
            "alpha_sigma": prior.alpha_sigma, "beta_sigma": prior.beta_sigma,
            "mu_mu": prior.mu_mu, "sigma2_mu": prior.sigma2_mu,
        },
    })
    write_report_json(report_path, doc)
    print(f"wrote {draws_path} and {report_path}")
    return 0


def _cmd_benchmark(args) -> int:
    spec = parse_grid_file(args.grid)
    prior = _prior_from_args(args)
    os.makedirs(args.out, exist_ok=True)
    out_csv = os.path.join(args.out, "records.csv")

    def progress(done, total, rec):
        err = rec.get("error", "")
        tag = f" [{err}]" if err else ""
        print(f"[{done}/{total}] {rec['sampler']} phi={rec['phi_true']} "
              f"rho={rec['rho_true']} sigma={rec['sigma_true']} "
              f"T={rec['T']} rep={rec['replication']}{tag}", flush=True)

    records = run_benchmark(spec, prior, out_csv, jobs=args.jobs,
                            progress=progress)
    failed = sum(1 for r in records if r.get("error"))
    print(f"wrote {len(records)} records to {out_csv} ({failed} flagged)")
    return 0


def _cmd_report(args) -> int:
    draws, names = read_draws_csv(args.data)

    class _Shim:
        pass

    shim = _Shim()
    shim.draws = draws
    shim.param_names = names
    shim.wall_seconds = args.wall_seconds if args.wall_seconds else 1.0
    eff = efficiency_report(shim)
    doc = build_report(draws, names, eff, extra={"data": args.data})
    if args.wall_seconds is None:
        # without a runtime there is no rate to report
        for entry in doc["efficiency"].values():
            entry["esr"] = None
        doc["min_esr"] = None
        doc["wall_seconds"] = None
    write_report_json(args.out, doc)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svlmc",
        description="Bayesian inference for the stochastic volatility "
                    "model with leverage")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate returns from the model")
    p.add_argument("--phi", type=float, default=0.95)
    p.add_argument("--rho", type=float, default=-0.3)
    p.add_argument("--sigma", type=float, default=0.3)
    p.add_argument("--mu", type=float, default=-9.0)
    p.add_argument("--T", type=int, default=300)
    p.add_argument("--seed", type=int, default=0, metavar="S")
    p.add_argument("--grid", default=None, metavar="FILE",
                   help="simulate every grid point x replication into --out dir")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", help="run one chain on a returns CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True,
                   help="output prefix for .draws.csv and .report.json")
    p.add_argument("--price-mode", action="store_true",
                   help="input column holds prices; use de-meaned log returns")
    _add_sampler_flags(p)
    _add_prior_flags(p)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("benchmark", help="run a DGP grid study")
    p.add_argument("--grid", required=True, metavar="FILE")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--jobs", type=int, default=1, metavar="J")
    _add_prior_flags(p)
    p.set_defaults(func=_cmd_benchmark)

    p = sub.add_parser("report", help="recompute diagnostics from a draws CSV")
    p.add_argument("--data", required=True, metavar="DRAWS_CSV")
    p.add_argument("--out", required=True, metavar="JSON")
    p.add_argument("--wall-seconds", type=float, default=None,
                   help="sampling wall time, enables ESR recomputation")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # numerical failure of the whole run
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
