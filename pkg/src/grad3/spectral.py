"""Spectrum of the Fourier-space Grad-3 operator.

At each wave number ``k`` the linear system for ``(p, u, sigma)`` is
``d/dt x = L_k x`` with

    L_k = [[0,     -5/3 ik,  0   ],
           [-ik,   0,        -ik ],
           [0,     -4/3 ik,  -1/eps]]

Its characteristic polynomial has one real root (the diffusion mode) and a
complex-conjugate acoustic pair. Two independent routes compute the roots:
closed-form Cardano radicals and a dense eigenvalue solve of the companion
matrix.
"""

from __future__ import annotations

import cmath
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BranchFailure, ClassificationFailure, GradError

log = logging.getLogger(__name__)

REAL_TOL = 1e-8
_OMEGA = (1.0, complex(-0.5, math.sqrt(3) / 2), complex(-0.5, -math.sqrt(3) / 2))


@dataclass(frozen=True)
class SystemParams:
    """Knudsen number ``epsilon`` and wave number ``k``."""

    epsilon: float
    k: float = 0.0

    def __post_init__(self):
        eps = float(self.epsilon)
        k = float(self.k)
        if not math.isfinite(eps) or eps <= 0:
            raise ValueError(f"epsilon must be a positive finite number, got {self.epsilon!r}")
        if not math.isfinite(k):
            raise ValueError(f"k must be finite, got {self.k!r}")
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "k", k)

    def with_k(self, k: float) -> SystemParams:
        return SystemParams(self.epsilon, k)


def grad_operator(params: SystemParams) -> np.ndarray:
    """The 3x3 complex generator ``L_k`` acting on ``(p, u, sigma)``."""
    ik = 1j * params.k
    return np.array(
        [
            [0.0, -5.0 / 3.0 * ik, 0.0],
            [-ik, 0.0, -ik],
            [0.0, -4.0 / 3.0 * ik, -1.0 / params.epsilon],
        ],
        dtype=complex,
    )


def char_poly_coefficients(params: SystemParams) -> tuple[float, float, float]:
    """Coefficients ``(c2, c1, c0)`` of the monic form ``lam^3 + c2 lam^2 + c1 lam + c0``."""
    eps, k2 = params.epsilon, params.k * params.k
    return 1.0 / eps, 3.0 * k2, 5.0 * k2 / (3.0 * eps)


def char_poly_eval(params: SystemParams, lam: complex) -> complex:
    eps, k2 = params.epsilon, params.k * params.k
    return -(lam**3) - lam**2 / eps - 3.0 * k2 * lam - 5.0 / 3.0 * k2 / eps


@dataclass(frozen=True)
class SpectralDecomposition:
    params: SystemParams
    lambda_ac: complex
    lambda_ac_conj: complex
    lambda_diff: float
    residuals: tuple[float, float, float]
    method: str  # "explicit_cardano" | "numeric_oracle" | "degenerate_k0"

    @property
    def degenerate(self) -> bool:
        return self.method == "degenerate_k0"

    @property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues ordered (acoustic, conjugate acoustic, diffusion)."""
        return np.array([self.lambda_ac, self.lambda_ac_conj, self.lambda_diff], dtype=complex)

    @property
    def acoustic_sum(self) -> float:
        return 2.0 * self.lambda_ac.real

    @property
    def acoustic_product(self) -> float:
        return abs(self.lambda_ac) ** 2

    @property
    def max_residual(self) -> float:
        return max(self.residuals)


def _is_real(lam: complex) -> bool:
    return abs(lam.imag) <= REAL_TOL * (1.0 + abs(lam))


def one_plus_eps_lambda(params: SystemParams, lam: complex) -> complex:
    """``1 + eps*lam`` for a root ``lam``, without cancellation near ``-1/eps``.

    Uses ``lam^2 (1 + eps lam) = -eps (3k^2 lam + 5k^2/(3 eps))``, valid on
    the spectrum only.
    """
    eps = params.epsilon
    if lam == 0 or abs(1.0 + eps * lam) >= 0.2:
        return 1.0 + eps * lam
    k2 = params.k * params.k
    return -(3.0 * eps * k2 * lam + 5.0 / 3.0 * k2) / (lam * lam)


def _acoustic_from_diffusion(params: SystemParams, lam3: float) -> complex:
    """Deflate the cubic by the real root and return the upper acoustic root.

    The quotient is ``lam^2 + s lam + q`` with ``s = c2 + lam3`` and
    ``q = -c0 / lam3``. When ``eps*lam3`` is close to -1 the sum ``s`` is
    formed from the cubic itself to avoid cancellation.
    """
    _, _, c0 = char_poly_coefficients(params)
    s = one_plus_eps_lambda(params, lam3).real / params.epsilon
    q = -c0 / lam3
    disc = q - 0.25 * s * s
    if disc < 0:
        raise ClassificationFailure(
            f"deflated quadratic has real roots at k={params.k}, eps={params.epsilon}"
        )
    return complex(-0.5 * s, math.sqrt(disc))


def _assemble(params: SystemParams, lam_ac: complex, lam3: float, method: str) -> SpectralDecomposition:
    conj = lam_ac.conjugate()
    residuals = tuple(abs(char_poly_eval(params, lam)) for lam in (lam_ac, conj, lam3))
    return SpectralDecomposition(params, lam_ac, conj, float(lam3), residuals, method)


def eigenvalues_degenerate(params: SystemParams) -> SpectralDecomposition:
    """At ``k = 0`` the cubic factors as ``-lam^2 (lam + 1/eps)``."""
    if params.k != 0.0:
        raise ValueError("eigenvalues_degenerate requires k == 0")
    return _assemble(params, 0j, -1.0 / params.epsilon, "degenerate_k0")


def eigenvalues_cardano(params: SystemParams) -> SpectralDecomposition:
    """Closed-form roots from the two-cube-root radical expression.

    With ``x = (k eps)^2`` and ``mu = 3 eps lam + 1`` the cubic becomes
    ``mu^3 + (27x - 3) mu + (2 + 18x) = 0``; its Cardano radicands
    ``-1 - 9x +/- 3 sqrt(5x - 18x^2 + 81x^3)`` multiply to ``(1 - 9x)^3``.
    Only the larger one goes through a principal complex cube root ``u``;
    the partner is ``v = (1 - 9x)/u``, which avoids the cancellation in the
    smaller radicand near ``x = 1/9``. Each of the three rotations of ``u``
    gives one root; the one with the smallest imaginary part is the
    diffusion mode.
    """
    if params.k == 0.0:
        raise ValueError("k == 0 must go through eigenvalues_degenerate")
    eps = params.epsilon
    x = (params.k * eps) ** 2
    root = 3.0 * math.sqrt(x * (5.0 - 18.0 * x + 81.0 * x * x))
    big = complex(-1.0 - 9.0 * x - root)
    target = 1.0 - 9.0 * x
    small = target**3 / big
    u0 = cmath.exp(cmath.log(big) / 3.0)

    pairs = []
    for wu in _OMEGA:
        u = wu * u0
        pairs.append((u, target / u))
    # consistency of the pairing with the small radicand
    if any(abs(v**3 - small) > 1e-9 * abs(big) for _, v in pairs):
        raise BranchFailure(f"cube-root pairings do not match the radicands at k={params.k}, eps={eps}")
    pairs.sort(key=lambda uv: abs((uv[0] + uv[1]).imag))
    u, v = pairs[0]
    mu = u + v
    if abs(u) + abs(v) > 8.0 * max(abs(mu), 1.0):
        # u + v cancels for large k*eps; take the real root from the product
        # of all three roots, mu_r |mu_ac|^2 = -(2 + 18x), instead
        mu_ac = pairs[1][0] + pairs[1][1]
        mu = complex(-(2.0 + 18.0 * x) / abs(mu_ac) ** 2, mu.imag)
    lam3 = (mu - 1.0) / (3.0 * eps)
    if abs(lam3.imag) > REAL_TOL * (1.0 + abs(lam3)):
        raise BranchFailure(f"diffusion root not real (Im={lam3.imag:.3e}) at k={params.k}, eps={eps}")
    lam3 = lam3.real
    return _assemble(params, _acoustic_from_diffusion(params, lam3), lam3, "explicit_cardano")


def companion_matrix(params: SystemParams) -> np.ndarray:
    c2, c1, c0 = char_poly_coefficients(params)
    return np.array([[-c2, -c1, -c0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def classify_roots(params: SystemParams, roots: Sequence[complex]) -> tuple[complex, float]:
    """Split three roots into (upper acoustic root, real diffusion root).

    The candidate real root is the one closest to the real axis; the other
    two must form a conjugate pair. Near ``k = 0`` the pair can itself sit
    inside the realness tolerance, which is accepted as long as the two are
    conjugates of each other.
    """
    roots = sorted((complex(r) for r in roots), key=lambda r: abs(r.imag))
    real, a, b = roots
    if not _is_real(real):
        raise ClassificationFailure(f"no real root among {roots} at k={params.k}")
    if abs(a - b.conjugate()) > REAL_TOL * (1.0 + abs(a)):
        raise ClassificationFailure(
            f"three real roots {roots} at k={params.k}, eps={params.epsilon}"
        )
    upper = a if a.imag >= b.imag else b
    # average the pair so the conjugate relation is exact
    upper = complex(0.5 * (a.real + b.real), abs(upper.imag))
    return upper, real.real


def eigenvalues_numeric(params: SystemParams) -> SpectralDecomposition:
    """Roots from a dense eigenvalue solve of the companion matrix."""
    if params.k == 0.0:
        return eigenvalues_degenerate(params)
    roots = np.linalg.eigvals(companion_matrix(params))
    lam_ac, lam3 = classify_roots(params, roots)
    return _assemble(params, lam_ac, lam3, "numeric_oracle")


def decompose(params: SystemParams) -> SpectralDecomposition:
    """Default route: Cardano, falling back to the numeric oracle."""
    if params.k == 0.0:
        return eigenvalues_degenerate(params)
    try:
        return eigenvalues_cardano(params)
    except BranchFailure as exc:
        log.warning("Cardano branch failed, using numeric oracle: %s", exc)
        return eigenvalues_numeric(params)


@dataclass(frozen=True)
class SweepEntry:
    """One k of a spectrum sweep; exactly one of ``spectrum``/``error`` is set."""

    k: float
    spectrum: SpectralDecomposition | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.spectrum is not None


def _sweep_one(epsilon: float, k: float) -> SweepEntry:
    try:
        return SweepEntry(k, decompose(SystemParams(epsilon, k)))
    except GradError as exc:
        log.error("spectrum failed at k=%r: %s", k, exc)
        return SweepEntry(k, error=f"{type(exc).__name__}: {exc}")


def spectrum_sweep(epsilon: float, k_grid: Sequence[float], workers: int = 1) -> list[SweepEntry]:
    """Decompose the operator at each k; failures are tagged, not raised."""
    ks = [float(k) for k in k_grid]
    if not ks:
        raise ValueError("k_grid must be nonempty")
    if not all(math.isfinite(k) for k in ks):
        raise ValueError("k_grid must be finite")
    SystemParams(epsilon)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda k: _sweep_one(epsilon, k), ks))
    return [_sweep_one(epsilon, k) for k in ks]
