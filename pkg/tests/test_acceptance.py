"""Acceptance criteria, one test per clause, each at its stated tolerance.

Every check appends a PASS/FAIL line to ``RESULTS``; ``conftest.py``
prints them in the terminal summary.
"""

from __future__ import annotations

import csv
import io

import numpy as np
import pytest
from scipy.linalg import expm

from grad3 import cli
from grad3.analysis import (
    balance_audit,
    ce_residual_sweep,
    divergence_sweep,
    fast_expansion_obstruction,
    random_slow_field,
)
from grad3.config import DEFAULT_EPS_SWEEP, parse_config
from grad3.dynamics import propagator, reduced_model
from grad3.manifolds import ClosureCoefficients, closure_coefficients, closure_from_basis, fast_constitutive, mode_kit
from grad3.spectral import (
    SystemParams,
    char_poly_coefficients,
    char_poly_eval,
    decompose,
    eigenvalues_cardano,
    eigenvalues_numeric,
)

RESULTS: list[str] = []

K_GRID = np.logspace(np.log10(0.01), np.log10(1e4), 200)
EPS_GRID = (0.01, 0.1, 1.0)


def record(label: str, ok: bool, detail: str) -> None:
    RESULTS.append(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
    assert ok, f"{label}: {detail}"


@pytest.fixture(scope="module")
def spectra():
    out = []
    for eps in EPS_GRID:
        for k in K_GRID:
            p = SystemParams(eps, float(k))
            out.append((p, eigenvalues_cardano(p), eigenvalues_numeric(p)))
    return out


def test_c1_residual(spectra):
    worst, bad = 0.0, 0
    for p, s, _ in spectra:
        for lam in s.eigenvalues:
            r = abs(char_poly_eval(p, lam)) / max(1.0, abs(lam) ** 3)
            worst = max(worst, r)
            bad += r > 1e-10
    record("C1a characteristic residual <= 1e-10 max(1,|lam|^3)", bad == 0,
           f"{bad}/{3 * len(spectra)} roots over, worst {worst:.2e}")


def test_c1_agreement(spectra):
    worst = max(float(np.max(np.abs(s.eigenvalues - n.eigenvalues))) for _, s, n in spectra)
    record("C1b Cardano vs companion agreement < 1e-9 per root", worst < 1e-9, f"worst {worst:.2e}")


def test_c1_vieta(spectra):
    worst = 0.0
    for p, s, _ in spectra:
        c2, c1, c0 = char_poly_coefficients(p)
        l1, l2, l3 = s.eigenvalues
        worst = max(
            worst,
            abs(l1 + l2 + l3 + c2) / c2,
            abs(l1 * l2 + l1 * l3 + l2 * l3 - c1) / c1,
            abs(l1 * l2 * l3 + c0) / c0,
        )
    record("C1c Vieta identities to 1e-10 relative", worst < 1e-10, f"worst {worst:.2e}")


def test_c2_accumulation():
    details, ok = [], True
    for eps, k in [(0.1, 1e4), (0.01, 1e5)]:
        s = decompose(SystemParams(eps, k))
        d3 = abs(s.lambda_diff + 5.0 / (9.0 * eps))
        dac = abs(s.lambda_ac.real + 2.0 / (9.0 * eps))
        ok &= d3 < 1e-3 and dac < 1e-3
        details.append(f"eps={eps} k={k:g}: {d3:.1e}, {dac:.1e}")
    record("C2 accumulation at -5/(9eps), -2/(9eps) within 1e-3", ok, "; ".join(details))


def test_c3_manifold_invariance():
    rng = np.random.default_rng(2024)
    times = np.linspace(0.0, 10.0, 21)
    worst_fast = worst_red = 0.0
    for eps in EPS_GRID:
        for k in (0.1, 1.0, 10.0, 100.0, -3.0):
            params = SystemParams(eps, k)
            kit = mode_kit(params)
            c = rng.standard_normal((2, 100)) + 1j * rng.standard_normal((2, 100))
            X = kit.basis.Q[:, :2] @ c
            X /= np.linalg.norm(X, axis=0)
            G = reduced_model("slow_exact", params).generator
            for t in times:
                Y = propagator(params, t) @ X
                worst_fast = max(worst_fast, np.linalg.norm(kit.fast.projector @ Y, axis=0).max())
                R = expm(t * G) @ X[:2]
                worst_red = max(worst_red, np.abs(R - Y[:2]).max())
    record("C3 invariance: fast part < 1e-8 norm, reduced vs full < 1e-8",
           worst_fast < 1e-8 and worst_red < 1e-8, f"fast {worst_fast:.1e}, reduced {worst_red:.1e}")


def test_c4_closure():
    rng = np.random.default_rng(4)
    worst_slow = worst_fast = worst_ab = 0.0
    for eps in EPS_GRID:
        for k in (0.1, 1.0, 10.0, 100.0):
            params = SystemParams(eps, k)
            kit = mode_kit(params)
            X = kit.basis.Q[:, :2] @ (rng.standard_normal((2, 100)) + 1j * rng.standard_normal((2, 100)))
            for x in X.T:
                sig = 1j * k * kit.closure.A * x[1] - k * k * kit.closure.B * x[0]
                worst_slow = max(worst_slow, abs(sig - x[2]) / np.linalg.norm(x))
            f = kit.basis.Q[:, 2] * (rng.standard_normal() + 1j * rng.standard_normal())
            c3 = kit.basis.constants[2]
            for which, val in (("from_u", f[1]), ("from_p", f[0])):
                worst_fast = max(worst_fast, abs(fast_constitutive(params, c3, which, val) - f[2]) / np.linalg.norm(f))
            a, b = kit.closure, closure_from_basis(kit.basis)
            worst_ab = max(worst_ab, abs(a.A - b.A) / abs(a.A), abs(a.B - b.B) / abs(a.B))
    exact = all(
        closure_coefficients(SystemParams(eps, 0.0)) == ClosureCoefficients(-4 * eps / 3, -4 * eps**2 / 3)
        for eps in (0.01, 0.1, 1.0, 3.0)
    )
    ok = worst_slow < 1e-9 and worst_fast < 1e-9 and worst_ab < 1e-9 and exact
    record("C4 closure identities to 1e-9, k=0 values exact", ok,
           f"slow {worst_slow:.1e}, fast {worst_fast:.1e}, A/B routes {worst_ab:.1e}, k=0 exact {exact}")


def test_c5_chapman_enskog_slopes():
    res = ce_residual_sweep(1.0, DEFAULT_EPS_SWEEP)
    f = res.fitted_slopes
    targets = {"stress_residual": 3.0, "euler_distance": 1.0, "ns_distance": 2.0}
    ok = all(abs(f[n].slope - v) <= 0.2 and f[n].r2 >= 0.99 for n, v in targets.items())
    detail = ", ".join(f"{n} {f[n].slope:.3f} (r2 {f[n].r2:.5f})" for n in targets)
    record("C5 slopes 3/1/2 +- 0.2 with r2 >= 0.99", ok, detail)


def test_c6_divergence():
    res = divergence_sweep(1.0, DEFAULT_EPS_SWEEP)
    last = res.rows[-1]
    fit = res.fitted_slopes["fast_rate"]
    re_ac = np.abs(res.column("re_lambda_ac"))
    bounded = bool(np.all(re_ac <= re_ac[0]))
    ok = abs(last["eps_times_rate"] + 1) <= 0.02 and abs(fit.slope + 1) <= 0.05 and bounded
    record("C6 eps*r -> -1, |r| slope -1 +- 0.05, |Re lam_ac| bounded", ok,
           f"eps*r={last['eps_times_rate']:.6f} at eps={last['epsilon']:g}, slope {fit.slope:.4f}, bounded {bounded}")


def test_c7_obstruction():
    res = fast_expansion_obstruction(1.0, DEFAULT_EPS_SWEEP)
    fit = res.fitted_slopes["gap_ratio"]
    record("C7 alpha-gap ratio slope 2 +- 0.1", abs(fit.slope - 2) <= 0.1, f"slope {fit.slope:.4f}")


def test_c8_balance():
    field0 = random_slow_field(256, 2 * np.pi, 0.1, np.random.default_rng(0))
    rep = balance_audit(field0, 0.1, np.linspace(0.0, 5.0, 51))
    ok = rep.max_relative_residual < 1e-6 and rep.fd_max_relative_error < 1e-4
    record("C8 balance residual < 1e-6, FD agreement < 1e-4", ok,
           f"residual {rep.max_relative_residual:.1e}, FD {rep.fd_max_relative_error:.1e}")


CLI_RUNS = [
    ["spectrum", "--epsilon", "0.1", "--k-count", "50"],
    ["closure", "--k-count", "50"],
    ["simulate", "--init", "random", "--grid-n", "32", "--samples", "3", "--seed", "7"],
    ["sweep-divergence"],
    ["sweep-ce", "--samples", "21"],
    ["balance", "--grid-n", "64", "--samples", "6", "--seed", "3"],
    ["accumulation"],
]


def test_c9_determinism_and_schemas(tmp_path):
    problems = []
    for argv in CLI_RUNS:
        outs = []
        for tag in ("a", "b"):
            path = tmp_path / f"{argv[0]}_{tag}.csv"
            if cli.main([*argv, "--out", str(path)]) != 0:
                problems.append(f"{argv[0]} exit code")
            outs.append(path.read_bytes())
        if outs[0] != outs[1]:
            problems.append(f"{argv[0]} not byte-identical")
        header = next(csv.reader(io.StringIO(outs[0].decode())))
        if header != cli.HEADERS[argv[0]]:
            problems.append(f"{argv[0]} header {header}")
        cfg = parse_config([*argv, "--out", "x", "--format", "json"], environ={})
        table = cli.build_table(cfg)
        if table.columns != cli.HEADERS[argv[0]]:
            problems.append(f"{argv[0]} json columns")
    record("C9 byte-identical reruns and exact headers", not problems,
           "all 7 subcommands" if not problems else "; ".join(problems))
