"""CSV and JSON input/output for the command-line surface."""

from __future__ import annotations

import csv
import json
import math

import numpy as np

from .diagnostics import EfficiencyReport, posterior_summary
from .model import ReturnSeries

__all__ = [
    "InputError",
    "read_returns_csv",
    "write_returns_csv",
    "write_latent_csv",
    "write_draws_csv",
    "read_draws_csv",
    "build_report",
    "write_report_json",
]

PARAM_NAMES = ("phi", "rho", "sigma", "mu")


class InputError(Exception):
    """Malformed or unusable user input (maps to exit code 2)."""


def _parse_single_column(path: str):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for i, row in enumerate(reader, start=1):
            row = [cell.strip() for cell in row if cell.strip() != ""]
            if not row:
                continue
            if len(row) != 1:
                raise InputError(
                    f"{path}: row {i} has {len(row)} columns, expected 1")
            try:
                rows.append(float(row[0]))
            except ValueError:
                if i == 1:
                    continue  # header line
                raise InputError(
                    f"{path}: row {i} column 1: not a number: {row[0]!r}")
    if not rows:
        raise InputError(f"{path}: no numeric data rows")
    return np.asarray(rows, dtype=float)


def read_returns_csv(path: str, price_mode: bool = False) -> ReturnSeries:
    """Load a one-column CSV of returns, or of prices with price_mode.

    Price mode converts to log returns and removes their sample mean.
    """
    values = _parse_single_column(path)
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values))[0]) + 1
        raise InputError(f"{path}: non-finite value at data row {bad}")
    if price_mode:
        if np.any(values <= 0.0):
            raise InputError(f"{path}: price mode requires positive prices")
        r = np.diff(np.log(values))
        values = r - r.mean()
    if values.size < 2:
        raise InputError(f"{path}: need at least 2 observations")
    try:
        return ReturnSeries(values, label=path)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


def write_returns_csv(path: str, y: np.ndarray, header: str = "y"):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([header])
        for v in y:
            writer.writerow([repr(float(v))])


def write_latent_csv(path: str, h: np.ndarray):
    write_returns_csv(path, h, header="h")


def write_draws_csv(path: str, draws: np.ndarray, names=PARAM_NAMES):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(names))
        for row in draws:
            writer.writerow([repr(float(v)) for v in row])


def read_draws_csv(path: str):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            names = tuple(next(reader))
        except StopIteration:
            raise InputError(f"{path}: empty draws file")
        rows = []
        for i, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(names):
                raise InputError(
                    f"{path}: row {i} has {len(row)} columns, expected {len(names)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise InputError(f"{path}: row {i}: {exc}") from exc
    if not rows:
        raise InputError(f"{path}: no draws")
    return np.asarray(rows), names


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def build_report(draws: np.ndarray, names, report: EfficiencyReport,
                 extra: dict | None = None) -> dict:
    """Assemble the JSON-ready report dict from draws and efficiency stats."""
    eff = {}
    for name, pe in report.per_param.items():
        eff[name] = {
            "inefficiency": _clean(pe.inefficiency),
            "ess": _clean(pe.ess),
            "esr": _clean(pe.esr),
            "error": pe.error,
        }
    doc = {
        "n_draws": report.n_draws,
        "posterior": posterior_summary(draws, names),
        "efficiency": eff,
        "min_esr": _clean(report.min_esr),
        "wall_seconds": report.wall_seconds,
    }
    if extra:
        doc.update(extra)
    return doc


def write_report_json(path: str, doc: dict):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
