"""Command-line front end.

Every subcommand writes one table (CSV or JSON) atomically and a
``<out>.manifest.json`` sidecar holding the resolved configuration.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
import time
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .analysis import (
    accumulation_check,
    balance_audit,
    ce_residual_sweep,
    divergence_sweep,
    project_field,
    random_field,
)
from .config import ConfigParseError, RunConfig, UsageError, parse_config
from .dynamics import evolve_field, propagate_full, propagate_rk4
from .errors import GradError
from .manifolds import closure_coefficients
from .spectral import SystemParams, spectrum_sweep
from .state import FieldState, ModeState

log = logging.getLogger("grad3")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2

HEADERS = {
    "spectrum": ["k", "epsilon", "re_lambda_ac", "im_lambda_ac", "lambda_diff", "residual_max", "method"],
    "closure": ["k", "epsilon", "eps_k", "A", "B"],
    "simulate": ["t", "x", "p", "u", "sigma"],
    "sweep-divergence": ["epsilon", "fast_rate", "eps_times_rate", "re_lambda_ac", "slope_estimate"],
    "sweep-ce": ["epsilon", "stress_residual", "euler_distance", "ns_distance",
                 "stress_slope", "euler_slope", "ns_slope"],
    "balance": ["t", "energy_rate", "capillarity_rate", "dissipation", "residual", "relative_residual"],
    "accumulation": ["epsilon", "k", "fast_axis_distance", "slow_axis_distance"],
}


class Table:
    def __init__(self, columns: Sequence[str]):
        self.columns = list(columns)
        self.rows: list[list[Any]] = []
        self.warnings = 0

    def add(self, *values: Any) -> None:
        if len(values) != len(self.columns):
            raise ValueError("row length does not match header")
        self.rows.append(list(values))


def _fmt(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def render_csv(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _json_value(v: Any) -> Any:
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def render_json(table: Table) -> str:
    rows = [{c: _json_value(v) for c, v in zip(table.columns, row)} for row in table.rows]
    return json.dumps({"columns": table.columns, "rows": rows}, indent=2) + "\n"


def write_atomic(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _workers(cfg: RunConfig) -> int:
    return cfg.threads or (os.cpu_count() or 1)


# --- subcommands -------------------------------------------------------------

def _spectrum(cfg: RunConfig) -> Table:
    t = Table(HEADERS["spectrum"])
    failed = []
    for eps in cfg.epsilons:
        for entry in spectrum_sweep(eps, cfg.k_values(), workers=_workers(cfg)):
            if entry.ok:
                s = entry.spectrum
                t.add(entry.k, eps, s.lambda_ac.real, s.lambda_ac.imag, s.lambda_diff, s.max_residual, s.method)
                failed.append("")
            else:
                nan = float("nan")
                t.add(entry.k, eps, nan, nan, nan, nan, "error")
                failed.append(entry.error)
    if any(failed):
        t.columns.append("error")
        for row, err in zip(t.rows, failed):
            row.append(err)
        t.warnings = sum(1 for f in failed if f)
    return t


def _closure(cfg: RunConfig) -> Table:
    t = Table(HEADERS["closure"])
    for eps in cfg.epsilons:
        for k in cfg.k_values():
            c = closure_coefficients(SystemParams(eps, k))
            t.add(k, eps, eps * k, c.A, c.B)
    return t


def initial_field(cfg: RunConfig) -> FieldState:
    """Initial data for ``simulate``; random choices draw from PCG64 seeded by ``cfg.seed``."""
    n, length, eps = cfg.grid_n, cfg.domain_length, cfg.epsilon
    if cfg.init == "cosine":
        x = np.arange(n) * (length / n)
        zero = np.zeros(n)
        return FieldState(n, length, np.cos(2 * np.pi * x / length), zero, zero)
    rng = np.random.default_rng(cfg.seed)
    f = random_field(n, length, rng)
    if cfg.init == "random":
        return f
    return project_field(f, eps, cfg.init)


def _rk4_spot_check(cfg: RunConfig, field0: FieldState) -> int:
    """Compare the exact propagator with RK4 on the first Fourier mode; returns a warning count."""
    eps = cfg.epsilon
    k = 2 * np.pi / cfg.domain_length
    dt = cfg.dt
    lam_max = max(1.0 / eps, math.sqrt(3.0) * abs(k))
    if dt >= 2.7 * eps or dt * lam_max > 1.0 or cfg.t_end / dt > 1e6:
        log.info("skipping RK4 cross-check: dt=%g unsuitable", dt)
        return 0
    x = field0.spectral()[:, 1]
    if not np.any(x):
        return 0
    st = ModeState.from_vector(SystemParams(eps, k), x)
    a = propagate_full(st, cfg.t_end).vector
    b = propagate_rk4(st, cfg.t_end, dt).vector
    err = np.linalg.norm(a - b) / np.linalg.norm(x)
    if err > 1e-6:
        log.warning("RK4 cross-check disagrees by %.3e", err)
        return 1
    return 0


def _simulate(cfg: RunConfig) -> Table:
    t = Table(HEADERS["simulate"])
    field0 = initial_field(cfg)
    times = np.linspace(0.0, cfg.t_end, cfg.samples) if cfg.samples > 1 else np.array([cfg.t_end])
    for time_ in times:
        f = evolve_field(field0, cfg.epsilon, float(time_), cfg.model)
        for x, p, u, s in zip(f.x, f.p, f.u, f.sigma):
            t.add(float(time_), x, p, u, s)
    if cfg.model == "full":
        t.warnings += _rk4_spot_check(cfg, field0)
    return t


def _sweep_divergence(cfg: RunConfig) -> Table:
    t = Table(HEADERS["sweep-divergence"])
    res = divergence_sweep(cfg.k, cfg.epsilons, t_end=cfg.t_end, samples=max(cfg.samples, 4))
    fit = res.fitted_slopes["fast_rate"]
    for r in res.rows:
        t.add(r["epsilon"], r["fast_rate"], r["eps_times_rate"], r["re_lambda_ac"], fit.slope)
    t.warnings = sum(not f.reliable for f in res.fitted_slopes.values())
    return t


def _sweep_ce(cfg: RunConfig) -> Table:
    t = Table(HEADERS["sweep-ce"])
    res = ce_residual_sweep(cfg.k, cfg.epsilons, t_end=cfg.t_end, samples=max(cfg.samples, 2))
    fits = res.fitted_slopes
    for r in res.rows:
        t.add(r["epsilon"], r["stress_residual"], r["euler_distance"], r["ns_distance"],
              fits["stress_residual"].slope, fits["euler_distance"].slope, fits["ns_distance"].slope)
    t.warnings = sum(not f.reliable for f in fits.values())
    return t


def _balance(cfg: RunConfig) -> Table:
    t = Table(HEADERS["balance"])
    rng = np.random.default_rng(cfg.seed)
    field0 = project_field(random_field(cfg.grid_n, cfg.domain_length, rng), cfg.epsilon, "slow")
    times = np.linspace(0.0, cfg.t_end, cfg.samples)
    rep = balance_audit(field0, cfg.epsilon, times)
    for i, time_ in enumerate(rep.t_samples):
        e, c, d, r = rep.lhs_energy_rate[i], rep.lhs_capillarity_rate[i], rep.rhs_dissipation[i], rep.residual[i]
        scale = max(abs(e), abs(c), abs(d))
        t.add(time_, e, c, d, r, abs(r) / scale if scale else 0.0)
    log.info("balance: max relative residual %.3e, FD disagreement %.3e",
             rep.max_relative_residual, rep.fd_max_relative_error)
    return t


def _accumulation(cfg: RunConfig) -> Table:
    t = Table(HEADERS["accumulation"])
    for eps in cfg.epsilons:
        for k in cfg.k_values():
            d_fast, d_slow = accumulation_check(eps, k)
            t.add(eps, k, d_fast, d_slow)
    return t


DISPATCH = {
    "spectrum": _spectrum,
    "closure": _closure,
    "simulate": _simulate,
    "sweep-divergence": _sweep_divergence,
    "sweep-ce": _sweep_ce,
    "balance": _balance,
    "accumulation": _accumulation,
}


def build_table(cfg: RunConfig) -> Table:
    return DISPATCH[cfg.subcommand](cfg)


def run(cfg: RunConfig) -> int:
    start = time.perf_counter()
    try:
        table = build_table(cfg)
    except GradError as exc:
        log.error("numerical failure: %s: %s", type(exc).__name__, exc)
        return EXIT_NUMERIC
    text = render_csv(table) if cfg.format == "csv" else render_json(table)
    write_atomic(cfg.out, text)
    manifest = {
        "config": cfg.to_dict(),
        "version": __version__,
        "wall_ms": int(round((time.perf_counter() - start) * 1000)),
        "warnings": table.warnings,
    }
    write_atomic(f"{cfg.out}.manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if table.warnings:
        log.warning("%d warning(s); see %s.manifest.json", table.warnings, cfg.out)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
    except (UsageError, ConfigParseError) as exc:
        print(f"grad3: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"grad3: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
