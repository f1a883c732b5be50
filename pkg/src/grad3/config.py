"""Run configuration: flags > config file > environment > defaults."""

from __future__ import annotations

import argparse
import dataclasses
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

SUBCOMMANDS = ("spectrum", "closure", "simulate", "sweep-divergence", "sweep-ce", "balance", "accumulation")
MODELS = ("full", "slow_exact", "fast", "euler", "navier_stokes")
INITS = ("slow", "fast", "random", "cosine")
FORMATS = ("csv", "json")

DEFAULT_EPS_SWEEP = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4)

ENV_OUT_DIR = "GRAD3_OUT_DIR"
ENV_THREADS = "GRAD3_THREADS"


class UsageError(Exception):
    def __init__(self, message: str, flag: str | None = None):
        super().__init__(f"{flag}: {message}" if flag else message)
        self.flag = flag


class ConfigParseError(Exception):
    def __init__(self, message: str, path: str, line: int):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    epsilons: tuple[float, ...]
    k: float | None
    k_min: float
    k_max: float
    k_count: int
    k_spacing: str
    t_end: float
    samples: int
    dt: float
    grid_n: int
    domain_length: float
    model: str
    init: str
    out: str
    format: str
    seed: int
    threads: int

    @property
    def epsilon(self) -> float:
        return self.epsilons[0]

    def k_values(self) -> list[float]:
        """Explicit k grid: the single ``k`` if given, else the min/max/count spacing."""
        if self.k is not None:
            return [self.k]
        if self.k_spacing == "log":
            return [float(v) for v in np.logspace(np.log10(self.k_min), np.log10(self.k_max), self.k_count)]
        return [float(v) for v in np.linspace(self.k_min, self.k_max, self.k_count)]

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["epsilons"] = list(self.epsilons)
        return d


# --- value parsers -----------------------------------------------------------

def _positive_float(s: str) -> float:
    v = float(s)
    if not np.isfinite(v) or v <= 0:
        raise ValueError("must be a positive number")
    return v


def _finite_float(s: str) -> float:
    v = float(s)
    if not np.isfinite(v):
        raise ValueError("must be finite")
    return v


def _epsilon_list(s: str) -> tuple[float, ...]:
    vals = tuple(_positive_float(x) for x in str(s).split(",") if x.strip())
    if not vals:
        raise ValueError("needs at least one value")
    return vals


def _positive_int(s: str) -> int:
    v = int(s)
    if v <= 0:
        raise ValueError("must be a positive integer")
    return v


def _nonneg_int(s: str) -> int:
    v = int(s)
    if v < 0:
        raise ValueError("must be a nonnegative integer")
    return v


def _seed(s: str) -> int:
    v = int(s)
    if not 0 <= v < 2**64:
        raise ValueError("must be a 64-bit unsigned integer")
    return v


def _choice(options: Sequence[str]) -> Callable[[str], str]:
    def parse(s: str) -> str:
        if s not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return s
    return parse


def _bool(s: str) -> bool:
    low = str(s).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("must be a boolean")


# flag / config-file key -> value parser
KEYS: dict[str, Callable[[str], Any]] = {
    "epsilon": _epsilon_list,
    "k": _finite_float,
    "k-min": _positive_float,
    "k-max": _positive_float,
    "k-count": _positive_int,
    "log-k": _bool,
    "linear-k": _bool,
    "t-end": _positive_float,
    "samples": _positive_int,
    "dt": _positive_float,
    "grid-n": _positive_int,
    "domain-length": _positive_float,
    "model": _choice(MODELS),
    "init": _choice(INITS),
    "out": str,
    "format": _choice(FORMATS),
    "seed": _seed,
    "threads": _nonneg_int,
}


def _defaults(sub: str) -> dict[str, Any]:
    d: dict[str, Any] = {
        "epsilon": (0.1,),
        "k": None,
        "k-min": 0.01,
        "k-max": 1000.0,
        "k-count": 200,
        "k-spacing": "log",
        "t-end": 1.0,
        "samples": 5,
        "dt": 1e-3,
        "grid-n": 256,
        "domain-length": 2.0 * np.pi,
        "model": "full",
        "init": "slow",
        "format": "csv",
        "seed": 0,
        "threads": 0,
    }
    if sub in ("sweep-divergence", "sweep-ce"):
        d["epsilon"] = DEFAULT_EPS_SWEEP
        d["k"] = 1.0
    if sub == "sweep-divergence":
        d["t-end"] = 5.0
        d["samples"] = 16
    if sub == "sweep-ce":
        d["samples"] = 101
    if sub == "balance":
        d["t-end"] = 5.0
        d["samples"] = 51
    if sub == "accumulation":
        d["epsilon"] = (0.1, 0.01)
        d["k-min"], d["k-max"], d["k-count"] = 1e3, 1e6, 4
    return d


def read_config_file(path: str | os.PathLike) -> dict[str, Any]:
    """Flat ``key = value`` lines; ``#`` starts a comment. Keys mirror flag names."""
    out: dict[str, Any] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError("expected 'key = value'", str(path), lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("_", "-")
        if key not in KEYS:
            raise ConfigParseError(f"unknown key {key!r}", str(path), lineno)
        try:
            out[key] = KEYS[key](value)
        except ValueError as exc:
            raise ConfigParseError(f"bad value for {key}: {exc}", str(path), lineno) from None
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="grad3", description="Spectral experiments on the three-component Grad system.")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", default=None, metavar="FILE")
    for key, conv in KEYS.items():
        if conv is _bool:
            parser.add_argument(f"--{key}", action="store_const", const="true", default=None)
        else:
            parser.add_argument(f"--{key}", default=None)
    return parser


def parse_config(
    argv: Sequence[str],
    config_file: str | os.PathLike | None = None,
    environ: Mapping[str, str] | None = None,
) -> RunConfig:
    environ = os.environ if environ is None else environ
    ns = vars(_build_parser().parse_args(list(argv)))
    sub = ns.pop("subcommand")

    flags: dict[str, Any] = {}
    for dest, raw in ns.items():
        if raw is None or dest == "config":
            continue
        key = dest.replace("_", "-")
        try:
            flags[key] = KEYS[key](raw)
        except ValueError as exc:
            raise UsageError(f"{exc} (got {raw!r})", f"--{key}") from None

    file_vals = {}
    path = ns.get("config") or config_file
    if path is not None:
        file_vals = read_config_file(path)

    env_vals: dict[str, Any] = {}
    if environ.get(ENV_THREADS):
        try:
            env_vals["threads"] = _nonneg_int(environ[ENV_THREADS])
        except ValueError as exc:
            raise UsageError(str(exc), ENV_THREADS) from None

    merged = {**_defaults(sub), **env_vals, **file_vals, **flags}

    # --log-k / --linear-k collapse into one spacing choice, flag wins over file
    for source in (file_vals, flags):
        if source.get("log-k") and source.get("linear-k"):
            raise UsageError("choose one of --log-k and --linear-k", "--linear-k")
        if source.get("log-k"):
            merged["k-spacing"] = "log"
        elif source.get("linear-k"):
            merged["k-spacing"] = "linear"

    fmt = merged["format"]
    if "out" not in merged:
        name = f"{sub}.{fmt}"
        out_dir = environ.get(ENV_OUT_DIR)
        merged["out"] = str(Path(out_dir) / name) if out_dir else name

    if merged["k-min"] > merged["k-max"]:
        raise UsageError("k-min must not exceed k-max", "--k-min")
    if sub in ("sweep-divergence", "sweep-ce"):
        eps = merged["epsilon"]
        if len(eps) < 4:
            raise UsageError("a sweep needs at least 4 epsilon values", "--epsilon")
        if merged["k"] is None or merged["k"] == 0:
            raise UsageError("sweeps need a single nonzero k", "--k")
        merged["epsilon"] = tuple(sorted(eps, reverse=True))
    if sub in ("simulate", "balance") and len(merged["epsilon"]) != 1:
        raise UsageError("takes a single epsilon", "--epsilon")
    if sub == "balance" and merged["samples"] < 2:
        raise UsageError("needs at least 2 samples", "--samples")

    return RunConfig(
        subcommand=sub,
        epsilons=tuple(merged["epsilon"]),
        k=merged["k"],
        k_min=merged["k-min"],
        k_max=merged["k-max"],
        k_count=merged["k-count"],
        k_spacing=merged["k-spacing"],
        t_end=merged["t-end"],
        samples=merged["samples"],
        dt=merged["dt"],
        grid_n=merged["grid-n"],
        domain_length=merged["domain-length"],
        model=merged["model"],
        init=merged["init"],
        out=merged["out"],
        format=fmt,
        seed=merged["seed"],
        threads=merged["threads"],
    )
