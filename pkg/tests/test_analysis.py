from __future__ import annotations

import logging

import numpy as np
import pytest

from grad3.analysis import (
    CAPILLARITY_WEIGHT,
    SweepResult,
    accumulation_check,
    balance_audit,
    ce_residual_sweep,
    decay_rate_fit,
    divergence_sweep,
    fast_expansion_obstruction,
    loglog_fit,
    project_field,
    random_field,
    random_slow_field,
)
import grad3.analysis as analysis
from grad3.errors import NonPositiveNorm, NotOnSlowManifold
from grad3.state import FieldState

EPS4 = [1e-1, 1e-2, 1e-3, 1e-4]


def test_loglog_fit_exact_power():
    x = np.logspace(-4, -1, 6)
    fit = loglog_fit(x, 3.0 * x**2)
    assert fit.slope == pytest.approx(2.0, abs=1e-12)
    assert fit.intercept == pytest.approx(np.log(3.0), abs=1e-12)
    assert fit.r2 == pytest.approx(1.0) and fit.reliable
    with pytest.raises(ValueError):
        loglog_fit([1, 2, 3], [1, 2, 3])
    with pytest.raises(ValueError):
        loglog_fit([1, 2, 3, 4], [1, 0, 3, 4])


def test_unreliable_fit_flagged(caplog):
    res = SweepResult("epsilon", [{"epsilon": e, "y": v} for e, v in zip(EPS4, [1, 5, 1, 5])])
    with caplog.at_level(logging.WARNING):
        fit = res.fit("y")
    assert not fit.reliable
    assert "unreliable" in caplog.text


def test_sweep_rows_must_be_monotone():
    with pytest.raises(ValueError):
        SweepResult("epsilon", [{"epsilon": e} for e in (0.1, 0.001, 0.01, 0.0001)])


def test_decay_rate_fit_cases():
    t = np.linspace(0, 3, 31)
    assert decay_rate_fit(list(zip(t, np.exp(-2 * t)))) == pytest.approx(-2.0, abs=1e-10)
    assert decay_rate_fit(list(zip(t, np.ones_like(t)))) == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(NonPositiveNorm):
        decay_rate_fit([(0, 1.0), (1, 0.5), (2, 0.0), (3, 0.1)])


def test_decay_rate_on_fast_manifold_matches_spectrum():
    res = divergence_sweep(1.0, [1e-1, 3e-2, 1e-2, 3e-3])
    for row in res.rows:
        assert abs(row["fast_rate"] / row["lambda_diff"] - 1) < 0.01


def test_divergence_sweep():
    res = divergence_sweep(1.0, EPS4)
    assert abs(res.rows[-1]["eps_times_rate"] + 1) < 0.02
    fit = res.fitted_slopes["fast_rate"]
    assert fit.slope == pytest.approx(-1.0, abs=0.05) and fit.reliable
    re_ac = np.abs(res.column("re_lambda_ac"))
    assert np.all(re_ac <= re_ac[0]) and np.all(np.diff(re_ac) < 0)


def test_sweep_epsilon_validation():
    with pytest.raises(ValueError):
        divergence_sweep(1.0, [0.1, 0.01, 0.001])
    with pytest.raises(ValueError):
        divergence_sweep(1.0, [0.001, 0.01, 0.1, 1.0])
    with pytest.raises(ValueError):
        divergence_sweep(0.0, EPS4)


def test_ce_residual_slopes():
    res = ce_residual_sweep(1.0, [1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4])
    f = res.fitted_slopes
    assert f["stress_residual"].slope == pytest.approx(3.0, abs=0.2)
    assert f["euler_distance"].slope == pytest.approx(1.0, abs=0.2)
    assert f["ns_distance"].slope == pytest.approx(2.0, abs=0.2)
    assert all(fit.r2 >= 0.99 for fit in f.values())


def test_accumulation_reference_points():
    for eps, k in [(0.1, 1e4), (0.01, 1e6)]:
        d_fast, d_slow = accumulation_check(eps, k)
        assert abs(d_fast) < 1e-3 and abs(d_slow) < 1e-3
    eps = 0.1
    assert -5 / (9 * eps) + 2 * (-2 / (9 * eps)) == pytest.approx(-1 / eps)


def test_accumulation_monotone_in_k():
    for eps in (0.1, 0.01):
        ks = np.logspace(np.log10(10 / eps), np.log10(1e4 / eps), 12)
        d = [max(abs(a), abs(b)) for a, b in (accumulation_check(eps, k) for k in ks)]
        assert all(b < a for a, b in zip(d, d[1:]))


def test_accumulation_warns_below_regime(caplog):
    with caplog.at_level(logging.WARNING):
        accumulation_check(0.1, 10.0)
    assert "asymptotic regime" in caplog.text


def test_fast_expansion_obstruction():
    res = fast_expansion_obstruction(1.0, [1e-1, 1e-2, 1e-3, 1e-4])
    assert res.fitted_slopes["gap_ratio"].slope == pytest.approx(2.0, abs=0.1)
    row = res.rows[2]
    assert row["gap_ratio"] == pytest.approx(5 / 3 * 1e-6, rel=0.1)
    assert all(r["u_term_residual"] == 0.0 for r in res.rows)


@pytest.fixture(scope="module")
def slow_field():
    return random_slow_field(256, 2 * np.pi, 0.1, np.random.default_rng(11))


def test_balance_audit_identity(slow_field):
    rep = balance_audit(slow_field, 0.1, np.linspace(0, 5, 11))
    assert rep.max_relative_residual < 1e-6
    assert rep.fd_max_relative_error < 1e-4
    assert all(d <= 0 for d in rep.rhs_dissipation)


def test_balance_zero_field():
    z = np.zeros(16)
    rep = balance_audit(FieldState(16, 1.0, z, z, z), 0.1, [0.0, 1.0])
    assert rep.lhs_energy_rate == [0.0, 0.0]
    assert rep.lhs_capillarity_rate == [0.0, 0.0]
    assert rep.rhs_dissipation == [0.0, 0.0]
    assert rep.max_relative_residual == 0.0


def test_balance_scale_invariance(slow_field):
    ts = [0.0, 1.0, 2.0]
    a = balance_audit(slow_field, 0.1, ts, fd_step=None)
    c = 7.5
    scaled = FieldState(256, 2 * np.pi, c * slow_field.p, c * slow_field.u, c * slow_field.sigma)
    b = balance_audit(scaled, 0.1, ts, fd_step=None)
    for x, y in zip(a.lhs_energy_rate + a.rhs_dissipation, b.lhs_energy_rate + b.rhs_dissipation):
        assert abs(y / c**2 - x) <= 1e-10 * abs(x)
    for x, y in zip(a.residual, b.residual):
        assert abs(y / c**2 - x) <= 1e-10 * max(abs(v) for v in a.lhs_energy_rate)


def test_balance_rejects_off_manifold_field():
    f = random_field(32, 2 * np.pi, np.random.default_rng(1))
    with pytest.raises(NotOnSlowManifold):
        balance_audit(f, 0.1, [0.0])


def test_balance_rejects_unsorted_times(slow_field):
    with pytest.raises(ValueError):
        balance_audit(slow_field, 0.1, [1.0, 0.5])


def test_printed_capillarity_weight_does_not_balance(slow_field, monkeypatch):
    """The identity only closes with the 3/10 weight; 5/3 leaves an O(1) residual."""
    assert CAPILLARITY_WEIGHT == pytest.approx(0.3)
    monkeypatch.setattr(analysis, "CAPILLARITY_WEIGHT", 5.0 / 3.0)
    rep = balance_audit(slow_field, 0.1, [0.0, 1.0], fd_step=None)
    assert rep.max_relative_residual > 0.1


def test_project_field_kinds():
    f = random_field(32, 2 * np.pi, np.random.default_rng(2))
    s = project_field(f, 0.1, "slow")
    fa = project_field(f, 0.1, "fast")
    # Nyquist dropped, everything else splits exactly
    total = s.spectral() + fa.spectral()
    ref = f.spectral()
    ref[:, 16] = 0
    assert np.abs(total - ref).max() < 1e-10 * np.abs(ref).max()
