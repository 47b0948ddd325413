"""Grid-study runner: every (DGP point x replication x sampler) cell.

Cells are independent and run on a worker pool; one writer appends each
finished RunRecord to the output CSV immediately, so cancellation keeps the
completed cells.  Cell seeds are derived by hashing (base seed, coordinates,
replication[, sampler]), so the data of a cell never changes when samplers
are added to the study.
"""

from __future__ import annotations

import csv
import hashlib
import math
import multiprocessing
from dataclasses import dataclass, field

import numpy as np

from .dataio import InputError, PARAM_NAMES
from .diagnostics import efficiency_report, posterior_summary
from .model import DgpSpec, Params, PriorConfig, simulate_svl
from .samplers import Algorithm, SamplerConfig, run_chain

__all__ = [
    "GridSpec",
    "RunRecord",
    "parse_grid_file",
    "derive_seed",
    "data_seed",
    "chain_seed",
    "default_burnin",
    "simulate_cell_data",
    "cell_filename",
    "run_cell",
    "run_benchmark",
    "RUN_RECORD_FIELDS",
]


@dataclass(frozen=True)
class GridSpec:
    """The DGP grid, replication count, samplers, and chain settings."""

    phi_values: tuple
    rho_values: tuple
    sigma_values: tuple
    mu: float
    T_values: tuple
    replications: int
    samplers: tuple
    base_seed: int
    draws: int = 10000
    burnin: int | None = None
    thin: int = 1
    asis_repeats: int = 5
    rw_variance: float = 0.1

    def __post_init__(self):
        for name in ("phi_values", "rho_values", "sigma_values", "T_values",
                     "samplers"):
            vals = tuple(getattr(self, name))
            object.__setattr__(self, name, vals)
            if not vals:
                raise ValueError(f"{name} must be non-empty")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        for phi in self.phi_values:
            if not abs(phi) < 1.0:
                raise ValueError(f"invalid phi {phi}")
        for rho in self.rho_values:
            if not abs(rho) < 1.0:
                raise ValueError(f"invalid rho {rho}")
        for sigma in self.sigma_values:
            if not sigma > 0.0:
                raise ValueError(f"invalid sigma {sigma}")

    def points(self):
        for T in self.T_values:
            for phi in self.phi_values:
                for rho in self.rho_values:
                    for sigma in self.sigma_values:
                        yield phi, rho, sigma, int(T)


_GRID_LIST_KEYS = {"phi_values", "rho_values", "sigma_values", "T_values",
                   "samplers"}
_GRID_SCALAR_KEYS = {"mu", "replications", "base_seed", "draws", "burnin",
                     "thin", "asis_repeats", "rw_variance"}
_GRID_REQUIRED = {"phi_values", "rho_values", "sigma_values", "mu", "T_values",
                  "replications", "samplers", "base_seed"}


def parse_grid_file(path: str) -> GridSpec:
    """Parse the flat key = value grid format ('#' starts a comment)."""
    raw = {}
    with open(path) as fh:
        for i, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InputError(f"{path}: line {i}: expected key = value")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _GRID_LIST_KEYS | _GRID_SCALAR_KEYS:
                raise InputError(f"{path}: line {i}: unknown key {key!r}")
            raw[key] = value.strip()
    missing = _GRID_REQUIRED - raw.keys()
    if missing:
        raise InputError(f"{path}: missing keys: {', '.join(sorted(missing))}")
    try:
        kwargs = {
            "phi_values": tuple(float(v) for v in raw["phi_values"].split(",")),
            "rho_values": tuple(float(v) for v in raw["rho_values"].split(",")),
            "sigma_values": tuple(float(v) for v in raw["sigma_values"].split(",")),
            "mu": float(raw["mu"]),
            "T_values": tuple(int(v) for v in raw["T_values"].split(",")),
            "replications": int(raw["replications"]),
            "samplers": tuple(Algorithm(v.strip())
                              for v in raw["samplers"].split(",")),
            "base_seed": int(raw["base_seed"]),
        }
        for key, cast in (("draws", int), ("burnin", int), ("thin", int),
                          ("asis_repeats", int), ("rw_variance", float)):
            if key in raw:
                kwargs[key] = cast(raw[key])
        return GridSpec(**kwargs)
    except (ValueError, KeyError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def derive_seed(base_seed: int, *parts) -> int:
    """Stable 64-bit seed from the base seed and a tag tuple."""
    text = repr((int(base_seed),) + tuple(parts))
    digest = hashlib.blake2b(text.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def data_seed(base_seed: int, phi, rho, sigma, mu, T, rep) -> int:
    return derive_seed(base_seed, "data", repr(float(phi)), repr(float(rho)),
                       repr(float(sigma)), repr(float(mu)), int(T), int(rep))


def chain_seed(base_seed: int, phi, rho, sigma, mu, T, rep, sampler) -> int:
    return derive_seed(base_seed, "chain", repr(float(phi)), repr(float(rho)),
                       repr(float(sigma)), repr(float(mu)), int(T), int(rep),
                       sampler.value if isinstance(sampler, Algorithm) else str(sampler))


def default_burnin(T: int) -> int:
    return 2000 if T <= 300 else 10000


def simulate_cell_data(spec: GridSpec, phi, rho, sigma, T, rep):
    params = Params(phi=phi, rho=rho, sigma=sigma, mu=spec.mu)
    seed = data_seed(spec.base_seed, phi, rho, sigma, spec.mu, T, rep)
    return simulate_svl(DgpSpec(params=params, T=T, seed=seed))


def cell_filename(phi, rho, sigma, mu, T, rep) -> str:
    return f"svl_phi{phi:g}_rho{rho:g}_sigma{sigma:g}_mu{mu:g}_T{T}_rep{rep:02d}.csv"


RUN_RECORD_FIELDS = (
    ["phi_true", "rho_true", "sigma_true", "mu_true", "T", "replication",
     "sampler", "data_seed", "chain_seed", "n_draws", "n_burnin", "thin",
     "wall_seconds", "burnin_seconds"]
    + [f"{p}_{stat}" for p in PARAM_NAMES
       for stat in ("mean", "sd", "q025", "q500", "q975", "ess", "if", "esr")]
    + ["min_esr", "acc_latent", "acc_theta_c", "acc_theta_nc", "acc_aux_step2",
       "flag_smoother_breakdown", "flag_opt_nonconverged",
       "flag_hessian_fallback", "error"]
)


@dataclass
class RunRecord:
    """One benchmark cell, flattened for the aggregate CSV."""

    values: dict = field(default_factory=dict)

    def row(self):
        return [self.values.get(name, "") for name in RUN_RECORD_FIELDS]

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)


def run_cell(payload) -> RunRecord:
    """Simulate the cell's data, run the chain, summarize.

    Any exception is captured in the record's error field; the sweep is
    never aborted by one cell.
    """
    spec, prior, phi, rho, sigma, T, rep, sampler = payload
    cseed = chain_seed(spec.base_seed, phi, rho, sigma, spec.mu, T, rep, sampler)
    rec = RunRecord({
        "phi_true": phi, "rho_true": rho, "sigma_true": sigma,
        "mu_true": spec.mu, "T": T, "replication": rep,
        "sampler": sampler.value,
        "data_seed": data_seed(spec.base_seed, phi, rho, sigma, spec.mu, T, rep),
        "chain_seed": cseed,
        "n_draws": spec.draws,
        "n_burnin": spec.burnin if spec.burnin is not None else default_burnin(T),
        "thin": spec.thin,
        "error": "",
    })
    try:
        y, _ = simulate_cell_data(spec, phi, rho, sigma, T, rep)
        cfg = SamplerConfig(
            algorithm=sampler, n_draws=spec.draws,
            n_burnin=rec["n_burnin"], thin=spec.thin, seed=cseed,
            asis_repeats=spec.asis_repeats, rw_variance=spec.rw_variance)
        out = run_chain(y, prior, cfg)
        summ = posterior_summary(out.draws, out.param_names)
        eff = efficiency_report(out)
        rec.values["wall_seconds"] = out.wall_seconds
        rec.values["burnin_seconds"] = out.burnin_seconds
        for p in PARAM_NAMES:
            rec.values.update({
                f"{p}_mean": summ[p]["mean"], f"{p}_sd": summ[p]["sd"],
                f"{p}_q025": summ[p]["q025"], f"{p}_q500": summ[p]["q500"],
                f"{p}_q975": summ[p]["q975"],
                f"{p}_ess": eff.per_param[p].ess,
                f"{p}_if": eff.per_param[p].inefficiency,
                f"{p}_esr": eff.per_param[p].esr,
            })
        rec.values["min_esr"] = eff.min_esr
        for move, col in (("latent", "acc_latent"), ("theta_c", "acc_theta_c"),
                          ("theta_nc", "acc_theta_nc"),
                          ("aux_step2", "acc_aux_step2")):
            if move in out.acceptance_rates:
                rec.values[col] = out.acceptance_rates[move]
        for flag in ("smoother_breakdown", "opt_nonconverged",
                     "hessian_fallback"):
            rec.values[f"flag_{flag}"] = out.flags.get(flag, 0)
        errs = [f"{p}:{eff.per_param[p].error}" for p in PARAM_NAMES
                if eff.per_param[p].error]
        if errs or not math.isfinite(eff.min_esr):
            rec.values["error"] = "; ".join(errs) or "non-finite min_esr"
    except Exception as exc:  # cell isolation: record, never propagate
        rec.values["error"] = f"{type(exc).__name__}: {exc}"
    return rec


def _cell_key(rec: RunRecord):
    return (rec["T"], rec["phi_true"], rec["rho_true"], rec["sigma_true"],
            rec["replication"], rec["sampler"])


def run_benchmark(spec: GridSpec, prior: PriorConfig, out_csv: str,
                  jobs: int = 1, progress=None) -> list:
    """Run all cells, streaming records to out_csv as they complete.

    The file is rewritten in canonical cell order on successful completion;
    an interrupted run still holds every finished record.
    """
    payloads = [(spec, prior, phi, rho, sigma, T, rep, sampler)
                for phi, rho, sigma, T in spec.points()
                for rep in range(spec.replications)
                for sampler in spec.samplers]
    records = []
    with open(out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RUN_RECORD_FIELDS)
        fh.flush()

        def emit(rec):
            records.append(rec)
            writer.writerow(rec.row())
            fh.flush()
            if progress is not None:
                progress(len(records), len(payloads), rec)

        if jobs <= 1:
            for payload in payloads:
                emit(run_cell(payload))
        else:
            with multiprocessing.Pool(processes=jobs) as pool:
                for rec in pool.imap_unordered(run_cell, payloads):
                    emit(rec)
    records.sort(key=_cell_key)
    with open(out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RUN_RECORD_FIELDS)
        for rec in records:
            writer.writerow(rec.row())
    return records
