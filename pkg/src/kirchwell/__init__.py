"""Potential-well analysis and spectral dynamics for the Kirchhoff-type
nonlocal parabolic equation

    u_t - (a + b ||grad u||_2^2) Laplace(u) = |u|^(q-1) u   in Omega,
    u = 0 on the boundary.
"""

from kirchwell.domain import Domain, DomainSpec, SpectralField, build_domain
from kirchwell.errors import (
    ConfigurationError,
    DiagnosticError,
    DomainError,
    NotApplicable,
)
from kirchwell.functionals import ModelParams

__all__ = [
    "ConfigurationError",
    "DiagnosticError",
    "Domain",
    "DomainError",
    "DomainSpec",
    "ModelParams",
    "NotApplicable",
    "SpectralField",
    "build_domain",
]

__version__ = "0.1.0"
