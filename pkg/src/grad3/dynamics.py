"""Time evolution: exact per-mode propagators, reduced models and a periodic solver.

The system is linear, so every propagator here is an exact matrix
exponential; ``propagate_rk4`` only exists to cross-check them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import SingularBasis, StabilityViolation
from .manifolds import fast_constitutive, mode_kit, slow_constitutive
from .spectral import SystemParams, grad_operator
from .state import FieldState, ModeState

REDUCED_KINDS = ("slow_exact", "fast", "euler", "navier_stokes")
FIELD_MODELS = ("full",) + REDUCED_KINDS

RK4_STABILITY = 2.7


def propagator(params: SystemParams, t: float) -> np.ndarray:
    """``exp(t L_k)`` via the eigenbasis, falling back to a dense exponential."""
    if t == 0:
        return np.eye(3, dtype=complex)
    if params.k == 0.0:
        return np.diag([1.0, 1.0, math.exp(-t / params.epsilon)]).astype(complex)
    try:
        basis = mode_kit(params).basis
    except SingularBasis:
        return expm(t * grad_operator(params))
    lam = basis.spectrum.eigenvalues
    return (basis.Q * np.exp(lam * t)[None, :]) @ basis.Q_inv


def propagate_full(state: ModeState, t: float) -> ModeState:
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return state
    params = state.params
    return ModeState.from_vector(params, propagator(params, t) @ state.vector)


def propagate_rk4(state: ModeState, t: float, dt: float) -> ModeState:
    """Classical RK4 on ``d/dt x = L_k x``; explicit, so ``dt < 2.7 eps``."""
    if t < 0 or dt <= 0:
        raise ValueError("need t >= 0 and dt > 0")
    if dt >= RK4_STABILITY * state.epsilon:
        raise StabilityViolation(
            f"dt={dt} exceeds the RK4 bound {RK4_STABILITY}*eps={RK4_STABILITY * state.epsilon}"
        )
    if t == 0:
        return state
    params = state.params
    L = grad_operator(params)
    n = max(1, math.ceil(t / dt - 1e-9))
    h = t / n
    x = state.vector
    for _ in range(n):
        k1 = L @ x
        k2 = L @ (x + 0.5 * h * k1)
        k3 = L @ (x + 0.5 * h * k2)
        k4 = L @ (x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return ModeState.from_vector(params, x)


@dataclass(frozen=True)
class ReducedModel:
    """A 2x2 generator acting on ``(p, u)`` at one ``(k, eps)``."""

    kind: str
    generator: np.ndarray
    params: SystemParams

    def stress(self, p_hat: complex, u_hat: complex) -> complex:
        """The stress each model implies for given ``(p, u)``."""
        params = self.params
        if self.kind == "euler":
            return 0j
        if self.kind == "navier_stokes":
            return -4.0 / 3.0 * params.epsilon * 1j * params.k * u_hat
        if params.k == 0.0:
            return 0j
        kit = mode_kit(params)
        if self.kind == "slow_exact":
            return slow_constitutive(params, kit.closure, p_hat, u_hat)
        return fast_constitutive(params, kit.basis.constants[2], "from_u", u_hat)


def reduced_model(kind: str, params: SystemParams) -> ReducedModel:
    k, eps = params.k, params.epsilon
    ik = 1j * k
    if kind == "slow_exact":
        c = mode_kit(params).closure
        G = [[0.0, -5.0 / 3.0 * ik], [-ik * (1.0 - k * k * c.B), k * k * c.A]]
    elif kind == "fast":
        G = [[0.0, -5.0 / 3.0 * ik], [0.0, mode_kit(params).spectrum.lambda_diff]]
    elif kind == "euler":
        G = [[0.0, -5.0 / 3.0 * ik], [-ik, 0.0]]
    elif kind == "navier_stokes":
        # the k^2 factor makes this the O(eps) truncation of the slow generator
        G = [[0.0, -5.0 / 3.0 * ik], [-ik, -4.0 / 3.0 * eps * k * k]]
    else:
        raise ValueError(f"unknown reduced model {kind!r}; expected one of {REDUCED_KINDS}")
    return ReducedModel(kind, np.array(G, dtype=complex), params)


def propagate_reduced(model: ReducedModel, p_hat: complex, u_hat: complex, t: float) -> tuple[complex, complex]:
    if t < 0:
        raise ValueError("t must be nonnegative")
    p, u = expm(t * model.generator) @ np.array([p_hat, u_hat], dtype=complex)
    return complex(p), complex(u)


def dynamics_wave_numbers(n: int, length: float) -> np.ndarray:
    """Wave numbers used for time stepping.

    The unpaired Nyquist mode of an even grid carries no first derivative on
    the grid, so its wave number is set to zero; this keeps real data real.
    """
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=length / n)
    if n % 2 == 0:
        k[n // 2] = 0.0
    return k


def evolve_modes(coeffs: np.ndarray, ks: np.ndarray, epsilon: float, t: float, model: str = "full") -> np.ndarray:
    """Propagate spectral data ``(3, N)`` by ``t`` with the selected model."""
    if model not in FIELD_MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {FIELD_MODELS}")
    if t < 0:
        raise ValueError("t must be nonnegative")
    out = np.empty_like(coeffs, dtype=complex)
    for n, k in enumerate(ks):
        params = SystemParams(epsilon, float(k))
        x = coeffs[:, n]
        if model == "full" or k == 0.0:
            # the zero mode decouples exactly; every model keeps it exact
            out[:, n] = propagator(params, t) @ x
            continue
        rm = reduced_model(model, params)
        p, u = propagate_reduced(rm, x[0], x[1], t)
        out[:, n] = (p, u, rm.stress(p, u))
    return out


def evolve_field(field: FieldState, epsilon: float, t: float, model: str = "full") -> FieldState:
    """Transform, propagate each mode, transform back.

    Raises ``RealityViolation`` if the result is not real to ``1e-8``.
    """
    ks = dynamics_wave_numbers(field.grid_size, field.domain_length)
    coeffs = evolve_modes(field.spectral(), ks, epsilon, t, model)
    return FieldState.from_spectral(coeffs, field.domain_length)
