"""Eigenvector basis, slow/fast invariant subspaces and their closures."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DegenerateDenominator, GradError, SingularBasis
from .spectral import (
    SpectralDecomposition,
    SystemParams,
    decompose,
    grad_operator,
    one_plus_eps_lambda,
)
from .state import ModeState

IMAG_TOL = 1e-10


@dataclass(frozen=True)
class ModeConstants:
    """``a = lam/k`` and ``b = 3(1 + eps lam)/(4 eps k)`` for one eigenvalue."""

    lam: complex
    a: complex
    b: complex
    # -1 - a*b, evaluated as 5(1 + eps lam)/(4 eps lam) (equal on the spectrum)
    p_component: complex

    @classmethod
    def from_eigenvalue(cls, params: SystemParams, lam: complex) -> ModeConstants:
        if params.k == 0.0:
            raise ValueError("mode constants are undefined at k == 0")
        eps, k = params.epsilon, params.k
        gap = one_plus_eps_lambda(params, lam)
        a = lam / k
        b = 3.0 * gap / (4.0 * eps * k)
        p = 5.0 * gap / (4.0 * eps * lam)
        return cls(complex(lam), complex(a), complex(b), complex(p))

    @property
    def eigenvector(self) -> np.ndarray:
        return np.array([self.p_component, 1j * self.b, 1.0], dtype=complex)


@dataclass(frozen=True)
class EigenBasis:
    params: SystemParams
    spectrum: SpectralDecomposition
    constants: tuple[ModeConstants, ModeConstants, ModeConstants]
    Q: np.ndarray
    Q_inv: np.ndarray
    condition_estimate: float

    @property
    def eigen_residual(self) -> float:
        """``max|L Q - Q Lambda| / max|L|``."""
        L = grad_operator(self.params)
        R = L @ self.Q - self.Q * self.spectrum.eigenvalues[None, :]
        return float(np.abs(R).max() / np.abs(L).max())


def build_eigenbasis(params: SystemParams, spec: SpectralDecomposition | None = None) -> EigenBasis:
    """Assemble ``Q`` with columns ``(-1 - a_j b_j, i b_j, 1)``.

    Columns are ordered acoustic, conjugate acoustic, diffusion and keep the
    unit stress component (no renormalisation).
    """
    if params.k == 0.0:
        raise SingularBasis("eigenvector normalisation divides by k; k == 0 has no eigenbasis")
    spec = spec or decompose(params)
    consts = tuple(ModeConstants.from_eigenvalue(params, lam) for lam in spec.eigenvalues)
    Q = np.column_stack([c.eigenvector for c in consts])
    scale = np.linalg.norm(Q, 2)
    if abs(np.linalg.det(Q)) < 1e-12 * scale**3:
        raise SingularBasis(f"det Q vanishes at k={params.k}, eps={params.epsilon}")
    Q_inv = np.linalg.inv(Q)
    return EigenBasis(params, spec, consts, Q, Q_inv, float(np.linalg.cond(Q)))


@dataclass(frozen=True)
class ClosureCoefficients:
    A: float
    B: float


def closure_coefficients(params: SystemParams, spec: SpectralDecomposition | None = None) -> ClosureCoefficients:
    """Slow-manifold closure functions ``A(k^2, eps)`` and ``B(k^2, eps)``.

    Both depend on the acoustic pair only through ``lam1 + lam2`` and
    ``lam1 * lam2``, which are real; a non-negligible imaginary part is an
    error rather than something to truncate silently.
    """
    eps, k = params.epsilon, params.k
    if k == 0.0:
        s = prod = 0j
    else:
        spec = spec or decompose(params)
        lam1, lam2 = spec.lambda_ac, spec.lambda_ac_conj
        s, prod = lam1 + lam2, lam1 * lam2
    denom = 3.0 + 3.0 * eps * s + eps**2 * (3.0 * prod - 4.0 * k * k)
    if abs(denom) < 1e-12:
        raise DegenerateDenominator(f"closure denominator vanishes at k={k}, eps={eps}")
    A = -4.0 * eps * (1.0 + eps * s) / denom
    B = -4.0 * eps**2 / denom
    for name, val in (("A", A), ("B", B)):
        if abs(val.imag) > IMAG_TOL * max(1.0, abs(val)):
            raise GradError(f"closure coefficient {name} not real: {val!r}")
    return ClosureCoefficients(float(A.real), float(B.real))


def closure_from_basis(basis: EigenBasis) -> ClosureCoefficients:
    """Recover ``A, B`` by imposing ``sigma = ikA u - k^2 B p`` on both slow columns."""
    k = basis.params.k
    p, u, s = basis.Q[0, :2], basis.Q[1, :2], basis.Q[2, :2]
    M = np.column_stack([1j * k * u, -k * k * p])
    A, B = np.linalg.solve(M, s)
    return ClosureCoefficients(float(A.real), float(B.real))


def slow_constitutive(params: SystemParams, coeffs: ClosureCoefficients, p_hat: complex, u_hat: complex) -> complex:
    k = params.k
    return 1j * k * coeffs.A * u_hat - k * k * coeffs.B * p_hat


def fast_constitutive(params: SystemParams, constants_diff: ModeConstants, which: str, value: complex) -> complex:
    """Stress on the fast manifold from either ``u`` or ``p``."""
    if which == "from_u":
        if abs(constants_diff.b) < 1e-12:
            raise DegenerateDenominator("b_3 vanishes")
        return value / (1j * constants_diff.b)
    if which == "from_p":
        if abs(constants_diff.p_component) < 1e-12:
            raise DegenerateDenominator("1 + a_3 b_3 vanishes")
        return value / constants_diff.p_component
    raise ValueError(f"which must be 'from_u' or 'from_p', got {which!r}")


@dataclass(frozen=True)
class ManifoldBasis:
    kind: str  # "slow" | "fast"
    basis_vectors: tuple[np.ndarray, ...]
    projector: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.basis_vectors)

    def project(self, vec: np.ndarray) -> np.ndarray:
        return self.projector @ np.asarray(vec, dtype=complex)


def manifold_from_basis(basis: EigenBasis, kind: str) -> ManifoldBasis:
    cols = {"slow": slice(0, 2), "fast": slice(2, 3)}[kind]
    Qs = basis.Q[:, cols]
    P = Qs @ basis.Q_inv[cols, :]
    return ManifoldBasis(kind, tuple(Qs.T.copy()), P)


def project(basis: ManifoldBasis, state: ModeState) -> ModeState:
    """Component of ``state`` in the manifold; slow and fast parts sum to ``state``."""
    return ModeState.from_vector(state.params, basis.project(state.vector))


def _k0_manifold(kind: str) -> ManifoldBasis:
    # L_0 = diag(0, 0, -1/eps): slow = (p, u) plane, fast = sigma axis
    e = np.eye(3, dtype=complex)
    if kind == "slow":
        return ManifoldBasis("slow", (e[0], e[1]), np.diag([1.0, 1.0, 0.0]).astype(complex))
    return ManifoldBasis("fast", (e[2],), np.diag([0.0, 0.0, 1.0]).astype(complex))


@dataclass(frozen=True)
class ModeKit:
    """Everything derived from one ``(k, eps)``; cached because fields reuse it."""

    params: SystemParams
    spectrum: SpectralDecomposition
    basis: EigenBasis | None
    closure: ClosureCoefficients
    slow: ManifoldBasis
    fast: ManifoldBasis


@lru_cache(maxsize=8192)
def mode_kit(params: SystemParams) -> ModeKit:
    spec = decompose(params)
    coeffs = closure_coefficients(params, spec)
    if params.k == 0.0:
        return ModeKit(params, spec, None, coeffs, _k0_manifold("slow"), _k0_manifold("fast"))
    basis = build_eigenbasis(params, spec)
    return ModeKit(
        params, spec, basis, coeffs,
        manifold_from_basis(basis, "slow"), manifold_from_basis(basis, "fast"),
    )


def slow_manifold(params: SystemParams) -> ManifoldBasis:
    return mode_kit(params).slow


def fast_manifold(params: SystemParams) -> ManifoldBasis:
    return mode_kit(params).fast
