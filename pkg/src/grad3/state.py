"""Per-mode and real-space state containers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral import SystemParams


@dataclass(frozen=True)
class ModeState:
    """Complex amplitudes ``(p, u, sigma)`` at one wave number."""

    p_hat: complex
    u_hat: complex
    sigma_hat: complex
    k: float
    epsilon: float

    def __post_init__(self):
        for name in ("p_hat", "u_hat", "sigma_hat"):
            val = complex(getattr(self, name))
            if not (math.isfinite(val.real) and math.isfinite(val.imag)):
                raise ValueError(f"{name} must be finite, got {val!r}")
            object.__setattr__(self, name, val)

    @classmethod
    def from_vector(cls, params: SystemParams, vec) -> ModeState:
        p, u, s = np.asarray(vec, dtype=complex)
        return cls(p, u, s, params.k, params.epsilon)

    @property
    def params(self) -> SystemParams:
        return SystemParams(self.epsilon, self.k)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.p_hat, self.u_hat, self.sigma_hat], dtype=complex)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))

    def scaled(self, c: complex) -> ModeState:
        return ModeState.from_vector(self.params, c * self.vector)


@dataclass(frozen=True)
class FieldState:
    """Real samples of ``p, u, sigma`` at ``x_m = m L / N`` on a periodic grid."""

    grid_size: int
    domain_length: float
    p: np.ndarray
    u: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        if self.grid_size <= 0 or self.domain_length <= 0:
            raise ValueError("grid_size and domain_length must be positive")
        for name in ("p", "u", "sigma"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (self.grid_size,):
                raise ValueError(f"{name} must have shape ({self.grid_size},), got {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.grid_size) * (self.domain_length / self.grid_size)

    @property
    def fields(self) -> np.ndarray:
        return np.stack([self.p, self.u, self.sigma])

    def wave_numbers(self) -> np.ndarray:
        """``2 pi n / L`` in FFT order, ``n`` in ``[-N/2, N/2)``."""
        return 2.0 * np.pi * np.fft.fftfreq(self.grid_size, d=self.domain_length / self.grid_size)

    def spectral(self) -> np.ndarray:
        """Unnormalised forward DFT of each field, shape ``(3, N)``."""
        return np.fft.fft(self.fields, axis=1)

    @classmethod
    def from_spectral(cls, coeffs: np.ndarray, domain_length: float, check: bool = True) -> FieldState:
        from .errors import RealityViolation

        vals = np.fft.ifft(coeffs, axis=1)
        if check:
            scale = max(np.linalg.norm(vals), 1e-300)
            resid = np.linalg.norm(vals.imag)
            if resid > 1e-8 * scale and resid > 1e-300:
                raise RealityViolation(f"imaginary residue {resid:.3e} relative to {scale:.3e}")
        n = coeffs.shape[1]
        return cls(n, domain_length, vals[0].real, vals[1].real, vals[2].real)
