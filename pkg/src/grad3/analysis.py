"""Knudsen-number experiments on the slow and fast manifolds.

Every scaling statement is checked as a least-squares slope on log-log data
rather than by single-point ratios, since the constants in the asymptotic
remainders are not known.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .errors import NonPositiveNorm, NotOnSlowManifold
from .dynamics import dynamics_wave_numbers, reduced_model
from .manifolds import mode_kit
from .spectral import SystemParams, decompose
from .state import FieldState

log = logging.getLogger(__name__)

MIN_R2 = 0.99
# weight of B|p|^2 that closes the energy balance on the slow manifold
CAPILLARITY_WEIGHT = 3.0 / 10.0


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r2: float

    @property
    def reliable(self) -> bool:
        return self.r2 >= MIN_R2


def loglog_fit(x: Sequence[float], y: Sequence[float]) -> SlopeFit:
    """Least-squares line through ``(log x, log |y|)``."""
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    if len(x) < 4:
        raise ValueError("slope fits need at least 4 points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return SlopeFit(float(slope), float(intercept), min(max(r2, 0.0), 1.0))


@dataclass
class SweepResult:
    parameter_name: str
    rows: list[dict[str, float]]
    fitted_slopes: dict[str, SlopeFit] = field(default_factory=dict)

    def __post_init__(self):
        vals = [r[self.parameter_name] for r in self.rows]
        if vals != sorted(vals) and vals != sorted(vals, reverse=True):
            raise ValueError(f"rows must be sorted by {self.parameter_name}")

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def fit(self, observable: str, absolute: bool = True) -> SlopeFit:
        y = self.column(observable)
        fit = loglog_fit(self.column(self.parameter_name), np.abs(y) if absolute else y)
        if not fit.reliable:
            log.warning("slope fit for %s unreliable (r2=%.4f)", observable, fit.r2)
        self.fitted_slopes[observable] = fit
        return fit


def _check_epsilons(epsilons: Sequence[float]) -> list[float]:
    eps = [float(e) for e in epsilons]
    if len(eps) < 4:
        raise ValueError("a Knudsen sweep needs at least 4 values of epsilon")
    if any(e <= 0 for e in eps):
        raise ValueError("epsilon values must be positive")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilon values must be strictly descending")
    return eps


def decay_rate_fit(trajectory: Sequence[tuple[float, float]]) -> float:
    """Slope of ``log(norm)`` against ``t``."""
    if len(trajectory) < 4:
        raise ValueError("need at least 4 samples")
    t = np.array([s[0] for s in trajectory], dtype=float)
    norms = np.array([s[1] for s in trajectory], dtype=float)
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    if np.any(norms <= 0):
        raise NonPositiveNorm("decay-rate fit needs strictly positive norms")
    return float(np.polyfit(t, np.log(norms), 1)[0])


def _unit_fast_state(params: SystemParams) -> np.ndarray:
    f = mode_kit(params).basis.Q[:, 2]
    return f / np.linalg.norm(f)


def divergence_sweep(k: float, epsilons: Sequence[float], t_end: float = 5.0, samples: int = 16) -> SweepResult:
    """Fast-manifold decay rates against Knudsen number.

    ``t_end`` is in units of ``eps`` (the relaxation time), so every row
    resolves the same number of e-foldings regardless of how fast it decays.
    """
    if k == 0:
        raise ValueError("k must be nonzero")
    rows = []
    for eps in _check_epsilons(epsilons):
        params = SystemParams(eps, k)
        x = _unit_fast_state(params)
        model = reduced_model("fast", params)
        times = np.linspace(0.0, t_end * eps, samples)
        traj = []
        for t in times:
            pu = expm(t * model.generator) @ x[:2]
            traj.append((t, float(np.linalg.norm(pu))))
        rate = decay_rate_fit(traj)
        spec = decompose(params)
        rows.append({
            "epsilon": eps,
            "fast_rate": rate,
            "eps_times_rate": eps * rate,
            "lambda_diff": spec.lambda_diff,
            "re_lambda_ac": spec.lambda_ac.real,
        })
    res = SweepResult("epsilon", rows)
    res.fit("fast_rate")
    res.fit("re_lambda_ac")
    return res


def _unit_slow_state(params: SystemParams) -> np.ndarray:
    """Real-field slow state: the sum of the two acoustic eigenvectors, unit (p, u) norm."""
    Q = mode_kit(params).basis.Q
    x = Q[:, 0] + Q[:, 1]
    return x / np.linalg.norm(x[:2])


def ce_residual_sweep(k: float, epsilons: Sequence[float], t_end: float = 1.0, samples: int = 101) -> SweepResult:
    """Slow-manifold distances to the Chapman-Enskog truncations.

    Observables per epsilon: the stress residual against the two-term stress
    expansion, and the sup-in-time distance of the exact slow dynamics from
    the Euler and Navier-Stokes analogues.
    """
    if k == 0:
        raise ValueError("k must be nonzero")
    rows = []
    times = np.linspace(0.0, t_end, samples)
    for eps in _check_epsilons(epsilons):
        params = SystemParams(eps, k)
        x = _unit_slow_state(params)
        p, u, s = x
        ce_stress = -4.0 / 3.0 * eps * 1j * k * u + 4.0 / 3.0 * eps**2 * k * k * p
        G = {kind: reduced_model(kind, params).generator for kind in ("slow_exact", "euler", "navier_stokes")}
        dist = {"euler": 0.0, "navier_stokes": 0.0}
        for t in times:
            ref = expm(t * G["slow_exact"]) @ x[:2]
            for kind in dist:
                d = np.linalg.norm(expm(t * G[kind]) @ x[:2] - ref)
                dist[kind] = max(dist[kind], float(d))
        rows.append({
            "epsilon": eps,
            "stress_residual": float(abs(s - ce_stress)),
            "euler_distance": dist["euler"],
            "ns_distance": dist["navier_stokes"],
        })
    res = SweepResult("epsilon", rows)
    for obs in ("stress_residual", "euler_distance", "ns_distance"):
        res.fit(obs)
    return res


def accumulation_check(epsilon: float, k_large: float) -> tuple[float, float]:
    """Signed distances of ``(lam_diff, Re lam_ac)`` from ``-5/(9 eps)`` and ``-2/(9 eps)``."""
    if abs(k_large) < 100.0 / epsilon:
        log.warning("k=%g is below the asymptotic regime 100/eps=%g", k_large, 100.0 / epsilon)
    spec = decompose(SystemParams(epsilon, k_large))
    return (
        spec.lambda_diff + 5.0 / (9.0 * epsilon),
        spec.lambda_ac.real + 2.0 / (9.0 * epsilon),
    )


def fast_expansion_obstruction(k: float, epsilons: Sequence[float]) -> SweepResult:
    """Numerical form of the argument that fast dynamics have no bounded (p, u) rewrite.

    Writing ``lam3 u = c(alpha) p + (lam3 - alpha) u`` with
    ``c(alpha) = 3i alpha lam3 / (5k)``, the u-term vanishes only for
    ``alpha = lam3`` while ``|c| <= 1`` needs ``|alpha| <= 5|k| / (3|lam3|)``.
    The ratio of the two admissible sizes collapses like ``eps^2``.
    """
    if k == 0:
        raise ValueError("k must be nonzero")
    rows = []
    for eps in _check_epsilons(epsilons):
        lam3 = decompose(SystemParams(eps, k)).lambda_diff
        alpha_match = lam3
        alpha_bound = 5.0 * abs(k) / (3.0 * abs(lam3))
        rows.append({
            "epsilon": eps,
            "alpha_match": alpha_match,
            "alpha_bound": alpha_bound,
            "gap_ratio": alpha_bound / abs(alpha_match),
            "u_term_residual": abs(lam3 - alpha_match),
            "p_coefficient_at_match": abs(3.0 * alpha_match * lam3 / (5.0 * k)),
        })
    res = SweepResult("epsilon", rows)
    res.fit("gap_ratio")
    return res


@dataclass(frozen=True)
class BalanceReport:
    t_samples: list[float]
    lhs_energy_rate: list[float]
    lhs_capillarity_rate: list[float]
    rhs_dissipation: list[float]
    residual: list[float]
    max_relative_residual: float
    fd_max_relative_error: float | None = None


class _SlowFieldFlow:
    """Per-mode slow dynamics of a field's ``(p, u)`` spectrum."""

    def __init__(self, field0: FieldState, epsilon: float, tol: float = 1e-8):
        n, length = field0.grid_size, field0.domain_length
        self.ks = dynamics_wave_numbers(n, length)
        coeffs = field0.spectral()
        # Parseval: sum_m |f_m|^2 L/N == sum_n |F_n|^2 L/N^2
        self.weight = length / n**2
        # modes at the transform's roundoff level count as empty
        floor = 1e-13 * np.linalg.norm(coeffs)
        self.modes = []
        for j, k in enumerate(self.ks):
            x = coeffs[:, j]
            params = SystemParams(epsilon, float(k))
            kit = mode_kit(params)
            norm = np.linalg.norm(x)
            if np.linalg.norm(kit.fast.project(x)) > tol * norm + floor:
                raise NotOnSlowManifold(f"mode k={k} has a fast component")
            if k == 0.0:
                continue
            G = reduced_model("slow_exact", params).generator
            self.modes.append((float(k), kit.closure.A, kit.closure.B, G, x[:2].copy()))

    def state(self, t: float):
        for k, A, B, G, x0 in self.modes:
            yield k, A, B, G, expm(t * G) @ x0

    def functionals(self, t: float) -> tuple[float, float]:
        """Energy ``1/2 sum (3/5|p|^2 + |u|^2)`` and capillarity ``-c k^2 B |p|^2``."""
        e = c = 0.0
        for k, A, B, G, (p, u) in self.state(t):
            e += 0.5 * (0.6 * abs(p) ** 2 + abs(u) ** 2)
            c += -CAPILLARITY_WEIGHT * k * k * B * abs(p) ** 2
        return e * self.weight, c * self.weight

    def rates(self, t: float) -> tuple[float, float, float]:
        e = c = d = 0.0
        for k, A, B, G, x in self.state(t):
            p, u = x
            dp, du = G @ x
            e += 0.6 * (p.conjugate() * dp).real + (u.conjugate() * du).real
            c += -CAPILLARITY_WEIGHT * k * k * B * 2.0 * (p.conjugate() * dp).real
            d += k * k * A * abs(u) ** 2
        w = self.weight
        return e * w, c * w, d * w


def balance_audit(
    field0: FieldState,
    epsilon: float,
    t_samples: Sequence[float],
    fd_step: float | None = 1e-6,
) -> BalanceReport:
    """Evaluate the viscosity-capillarity energy identity along a slow solution.

    Rates are analytic (generator applied to the state). When ``fd_step`` is
    given, the energy and capillarity rates are also compared with central
    differences of the functionals.
    """
    ts = [float(t) for t in t_samples]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError("t_samples must be increasing")
    flow = _SlowFieldFlow(field0, epsilon)
    E, C, D, R, rel = [], [], [], [], []
    fd_err = 0.0
    for t in ts:
        e, c, d = flow.rates(t)
        r = e + c - d
        scale = max(abs(e), abs(c), abs(d))
        E.append(e)
        C.append(c)
        D.append(d)
        R.append(r)
        rel.append(abs(r) / scale if scale > 0 else 0.0)
        if fd_step:
            ep, cp = flow.functionals(t + fd_step)
            em, cm = flow.functionals(t - fd_step)
            fe = (ep - em) / (2 * fd_step)
            fc = (cp - cm) / (2 * fd_step)
            if scale > 0:
                fd_err = max(fd_err, abs(fe - e) / scale, abs(fc - c) / scale)
    return BalanceReport(ts, E, C, D, R, max(rel, default=0.0), fd_err if fd_step else None)


def random_field(n: int, length: float, rng: np.random.Generator) -> FieldState:
    """Independent standard-normal samples for ``p, u, sigma``."""
    p, u, s = rng.standard_normal((3, n))
    return FieldState(n, length, p, u, s)


def project_field(field0: FieldState, epsilon: float, kind: str = "slow") -> FieldState:
    """Project every mode onto the slow or fast manifold; Nyquist content is dropped."""
    ks = dynamics_wave_numbers(field0.grid_size, field0.domain_length)
    coeffs = field0.spectral()
    out = np.zeros_like(coeffs)
    for j, k in enumerate(ks):
        kit = mode_kit(SystemParams(epsilon, float(k)))
        out[:, j] = getattr(kit, kind).project(coeffs[:, j])
    n = field0.grid_size
    if n % 2 == 0:
        out[:, n // 2] = 0.0
    return FieldState.from_spectral(out, field0.domain_length)


def random_slow_field(n: int, length: float, epsilon: float, rng: np.random.Generator) -> FieldState:
    return project_field(random_field(n, length, rng), epsilon, "slow")
