"""Exception hierarchy for the Grad-3 numerics."""

from __future__ import annotations


class GradError(Exception):
    """Base class for numerical failures raised by this package."""


class BranchFailure(GradError):
    """No cube-root pairing produced a real diffusion eigenvalue."""


class ClassificationFailure(GradError):
    """Roots could not be split into one real root and a conjugate pair."""


class SingularBasis(GradError):
    """The eigenvector matrix is numerically singular."""


class DegenerateDenominator(GradError):
    """A closure formula hit a vanishing denominator."""


class StabilityViolation(GradError):
    """Explicit time step too large for the stiff relaxation term."""


class RealityViolation(GradError):
    """Inverse transform left a non-negligible imaginary part."""


class NotOnSlowManifold(GradError):
    """Field data has a fast component where slow data was required."""


class NonPositiveNorm(GradError):
    """A decay-rate fit received a zero or negative norm."""
