"""Energy J, Nehari functionals I and I_delta, fibering roots and the
nonlocal operator ``L(u) = -(a + b ||grad u||^2) Laplace(u)``.

Everything reduces to two scalars per field: the Dirichlet energy
``G = ||grad u||_2^2`` and ``P = ||u||_{q+1}^{q+1}``.  Along a ray
``lam * u`` they scale as ``lam^2 G`` and ``lam^(q+1) P``, so all fibering
computations are scalar once G and P are known.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from kirchwell.domain import Domain, SpectralField
from kirchwell.errors import ConfigurationError, DomainError

TOL_ROOT = 1e-12


@dataclass(frozen=True)
class ModelParams:
    a: float = 1.0
    b: float = 1.0
    q: float = 5.0

    def __post_init__(self):
        for name in ("a", "b", "q"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ConfigurationError(f"{name} must be finite, got {v}")
        if self.a <= 0 or self.b <= 0:
            raise ConfigurationError(f"need a > 0 and b > 0, got a={self.a}, b={self.b}")
        if self.q <= 3:
            # the fibering map loses its single-peak shape at q <= 3
            raise ConfigurationError(f"need q > 3, got q={self.q}")


@dataclass(frozen=True)
class EnergySnapshot:
    t: float
    J: float
    I: float
    l2_sq: float
    h1_sq: float
    lqp1: float
    residual: float = 0.0


# -- scalar forms --------------------------------------------------------

def J_scalar(G, P, p: ModelParams):
    return 0.5 * p.a * G + 0.25 * p.b * G * G - P / (p.q + 1)


def I_scalar(G, P, p: ModelParams, delta=1.0):
    return delta * (p.a + p.b * G) * G - P


def fiber_root(G: float, P: float, p: ModelParams, delta: float = 1.0,
               tol: float = TOL_ROOT) -> float:
    """The unique ``lam > 0`` with ``I_delta(lam u) = 0`` given ``G, P`` of u.

    Works with ``h(lam) = delta (a lam^(1-q) G + b lam^(3-q) G^2) - P``, which
    is strictly decreasing for q > 3: bracket by doubling/halving from 1,
    then bisect to relative width ``tol``.
    """
    if delta <= 0:
        raise DomainError(f"delta must be positive, got {delta}")
    if not G > 0:
        raise DomainError("fibering root undefined for a field with zero gradient")
    if not P > 0:
        raise DomainError("fibering root undefined: ||u||_{q+1} vanishes")
    q = p.q

    def h(lam):
        return delta * (p.a * lam ** (1 - q) * G + p.b * lam ** (3 - q) * G * G) - P

    lo = hi = 1.0
    if h(1.0) > 0:
        while h(hi) > 0:
            lo, hi = hi, 2.0 * hi
    else:
        while h(lo) <= 0:
            lo, hi = 0.5 * lo, lo
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if h(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- field forms ---------------------------------------------------------

def gradient_sq(domain: Domain, u: SpectralField) -> float:
    u = domain.check(u)
    return float(np.sum(domain.eigenvalues * u * u))


def lqp1(domain: Domain, u: SpectralField, p: ModelParams) -> float:
    return domain.lp_power(u, p.q + 1)


def norms(domain: Domain, u: SpectralField, p: ModelParams):
    """``(G, P) = (||grad u||_2^2, ||u||_{q+1}^{q+1})``."""
    return gradient_sq(domain, u), lqp1(domain, u, p)


def energy_J(domain: Domain, u: SpectralField, p: ModelParams) -> float:
    G, P = norms(domain, u, p)
    return float(J_scalar(G, P, p))


def nehari_I(domain: Domain, u: SpectralField, p: ModelParams) -> float:
    G, P = norms(domain, u, p)
    return float(I_scalar(G, P, p))


def nehari_I_delta(domain: Domain, u: SpectralField, delta: float, p: ModelParams) -> float:
    if delta <= 0:
        raise DomainError(f"delta must be positive, got {delta}")
    G, P = norms(domain, u, p)
    return float(I_scalar(G, P, p, delta))


def fiber_lambda_star(domain: Domain, u: SpectralField, p: ModelParams,
                      tol: float = TOL_ROOT) -> float:
    """Maximiser of ``lam -> J(lam u)``; equivalently ``I(lam u) = 0``."""
    return fiber_lambda_delta(domain, u, 1.0, p, tol)


def fiber_lambda_delta(domain: Domain, u: SpectralField, delta: float, p: ModelParams,
                       tol: float = TOL_ROOT) -> float:
    G, P = norms(domain, u, p)
    if G == 0:
        raise DomainError("zero field has no fibering root")
    return fiber_root(G, P, p, delta, tol)


def fiber_J(domain: Domain, u: SpectralField, p: ModelParams, lams) -> np.ndarray:
    """``J(lam u)`` for an array of scalings, from one quadrature."""
    G, P = norms(domain, u, p)
    lams = np.asarray(lams, dtype=float)
    return J_scalar(lams ** 2 * G, lams ** (p.q + 1) * P, p)


def source_term(domain: Domain, u: SpectralField, p: ModelParams) -> SpectralField:
    """Galerkin projection of ``|u|^(q-1) u``."""
    v = domain.synthesize(u)
    return domain.analyze(np.abs(v) ** (p.q - 1) * v)


def apply_nonlocal_L(domain: Domain, u: SpectralField, p: ModelParams) -> SpectralField:
    """Coefficients of ``L(u)`` against the eigenbasis: ``(a + b G) lam_k c_k``."""
    u = domain.check(u)
    G = gradient_sq(domain, u)
    return (p.a + p.b * G) * domain.eigenvalues * u


def pairing(domain: Domain, f: SpectralField, v: SpectralField) -> float:
    """Duality pairing of dual coefficients ``f`` with a field ``v``."""
    return float(np.dot(f, domain.check(v)))


def monotonicity_gap(domain: Domain, u: SpectralField, v: SpectralField,
                     p: ModelParams) -> float:
    """``<L(u) - L(v), u - v>``."""
    diff = apply_nonlocal_L(domain, u, p) - apply_nonlocal_L(domain, v, p)
    return pairing(domain, diff, np.asarray(u) - np.asarray(v))


def monotonicity_floor(domain: Domain, u: SpectralField, v: SpectralField,
                       p: ModelParams) -> float:
    """Lower bound ``a ||u-v||^2 + (b/2)(G(u) - G(v))^2`` for the gap."""
    w = np.asarray(u) - np.asarray(v)
    Gu, Gv = gradient_sq(domain, u), gradient_sq(domain, v)
    return p.a * gradient_sq(domain, w) + 0.5 * p.b * (Gu - Gv) ** 2


def J_via_nehari(G, I, p: ModelParams):
    """J rewritten through I; agrees with J_scalar identically."""
    q = p.q
    return (p.a * (q - 1) / (2 * (q + 1)) * G + p.b * (q - 3) / (4 * (q + 1)) * G * G
            + I / (q + 1))


def snapshot(domain: Domain, u: SpectralField, p: ModelParams, t: float = 0.0,
             residual: float = 0.0) -> EnergySnapshot:
    G, P = norms(domain, u, p)
    return EnergySnapshot(t=float(t), J=float(J_scalar(G, P, p)),
                          I=float(I_scalar(G, P, p)), l2_sq=float(np.dot(u, u)),
                          h1_sq=float(G), lqp1=float(P), residual=float(residual))
