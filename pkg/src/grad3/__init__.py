"""Spectral analysis of the linear three-component Grad system in one dimension."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import GradError
from .spectral import SpectralDecomposition, SystemParams, decompose, eigenvalues_cardano, eigenvalues_numeric
from .manifolds import ClosureCoefficients, build_eigenbasis, closure_coefficients, fast_manifold, slow_manifold
from .dynamics import evolve_field, propagate_full, propagate_reduced, propagate_rk4, reduced_model
from .state import FieldState, ModeState

__all__ = [
    "GradError",
    "SpectralDecomposition",
    "SystemParams",
    "decompose",
    "eigenvalues_cardano",
    "eigenvalues_numeric",
    "ClosureCoefficients",
    "build_eigenbasis",
    "closure_coefficients",
    "fast_manifold",
    "slow_manifold",
    "evolve_field",
    "propagate_full",
    "propagate_reduced",
    "propagate_rk4",
    "reduced_model",
    "FieldState",
    "ModeState",
]
