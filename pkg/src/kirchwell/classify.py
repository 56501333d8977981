"""Regime classification of initial data and the experiments built on it."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np
from scipy import optimize

from kirchwell import functionals as fn
from kirchwell.domain import Domain, SpectralField
from kirchwell.dynamics import SolverControls, integrate
from kirchwell.errors import DiagnosticError, DomainError, NotApplicable
from kirchwell.functionals import ModelParams
from kirchwell.wellgeometry import HighEnergyBounds, WellGeometry, estimate_high_energy_bounds

TOL_I = 1e-10


@dataclass
class Classification:
    J0: float
    I0: float
    l2: float
    regime: str
    prediction: str
    reason: str = ""
    evidence: List[str] = field(default_factory=list)
    margins: dict = field(default_factory=dict)
    observed: Optional[str] = None

    @property
    def agrees(self) -> Optional[bool]:
        """None when no run is attached or no prediction was made."""
        if self.observed is None or self.prediction == "NoPrediction":
            return None
        expected = {"Global": "GlobalDecay", "BlowUp": "BlowUp"}[self.prediction]
        return self.observed == expected

    def to_dict(self) -> dict:
        out = asdict(self)
        out["agrees"] = self.agrees
        return out


def tol_d(geometry: WellGeometry) -> float:
    gap = geometry.d_refine_gap
    return max(1e-6, 2.0 * gap) if gap is not None else 1e-6


def holder_constant(domain: Domain, p: ModelParams) -> float:
    """``4(q+1)/(q-3) |Omega|^((q-1)/2)``."""
    return 4 * (p.q + 1) / (p.q - 3) * domain.measure ** ((p.q - 1) / 2)


def high_energy_criterion(domain: Domain, u0: SpectralField, p: ModelParams, d_est: float) -> bool:
    """High-energy blow-up criterion ``C J(u0) <= ||u0||_2^(q+1)``.

    Only meaningful above the well depth.  When it holds the datum must
    also have ``I(u0) < 0``; that consequence is checked, not assumed.
    """
    G, P = fn.norms(domain, u0, p)
    J = float(fn.J_scalar(G, P, p))
    if not J > d_est:
        raise NotApplicable(f"predicate needs J(u0) > d = {d_est:.6g}, got {J:.6g}")
    l2 = domain.norm_l2(u0)
    holds = holder_constant(domain, p) * J <= l2 ** (p.q + 1)
    if holds and not fn.I_scalar(G, P, p) < 0:
        raise AssertionError("predicate holds but I(u0) >= 0")
    return bool(holds)


def classify_initial(domain: Domain, u0: SpectralField, p: ModelParams,
                     geometry: WellGeometry, bounds: Optional[HighEnergyBounds] = None,
                     margin: float = 0.1, n_samples: int = 2000) -> Classification:
    """Apply the potential-well threshold rules to ``u0`` and return the prediction."""
    G, P = fn.norms(domain, u0, p)
    J0 = float(fn.J_scalar(G, P, p))
    I0 = float(fn.I_scalar(G, P, p))
    l2 = domain.norm_l2(u0)
    d = geometry.d_est
    td = tol_d(geometry)
    tol_I = TOL_I * (1 + p.a * G + p.b * G * G)
    margins = {"J0 - d": J0 - d, "tol_d": td, "I0": I0}
    if J0 < d - td:
        regime = "Subcritical"
    elif J0 <= d + td:
        regime = "Critical"
    else:
        regime = "Supercritical"
    out = Classification(J0=J0, I0=I0, l2=l2, regime=regime, prediction="NoPrediction",
                         margins=margins)
    if regime in ("Subcritical", "Critical"):
        label = "sub-critical" if regime == "Subcritical" else "critical"
        if I0 >= -tol_I:
            out.prediction = "Global"
            out.evidence.append(
                f"{label} energy with I(u0) >= 0: global existence in the potential well")
            if l2 == 0:
                out.evidence.append("zero datum is a steady state")
        else:
            out.prediction = "BlowUp"
            case = "J(u0) <= 0" if J0 <= 0 else "0 < J(u0) <= d"
            out.evidence.append(
                f"{label} energy with I(u0) < 0 ({case}): concavity argument gives blow-up")
        return out

    if high_energy_criterion(domain, u0, p, d):
        out.prediction = "BlowUp"
        out.evidence.append("high-energy Hoelder criterion C J(u0) <= ||u0||^(q+1) holds")
        margins["criterion_slack"] = l2 ** (p.q + 1) - holder_constant(domain, p) * J0
        return out
    if bounds is None or bounds.s < J0:
        bounds = estimate_high_energy_bounds(domain, p, J0, geometry, n_samples=n_samples,
                                             seed=geometry.seed)
    margins.update(lambda_s_est=bounds.lambda_s_est, Lambda_s_est=bounds.Lambda_s_est,
                   bounds_s=bounds.s, margin=margin)
    if I0 > 0 and l2 <= bounds.lambda_s_est * (1 - margin):
        out.prediction = "Global"
        out.evidence.append("supercritical, I(u0) > 0 and ||u0|| below sampled lambda_s "
                            f"with {margin:.0%} margin: decay to zero")
    elif I0 < 0 and l2 >= bounds.Lambda_s_est * (1 + margin):
        out.prediction = "BlowUp"
        out.evidence.append("supercritical, I(u0) < 0 and ||u0|| above sampled Lambda_s "
                            f"with {margin:.0%} margin: blow-up")
    else:
        out.reason = "supercritical datum outside both norm conditions"
    return out


def observe(domain: Domain, u0: SpectralField, p: ModelParams,
            controls: Optional[SolverControls] = None):
    traj = integrate(domain, u0, p, controls)
    return traj.outcome.kind, traj


# -- datum constructors ---------------------------------------------------

def scale_to_energy(domain: Domain, u_shape: SpectralField, E_target: float,
                    p: ModelParams, branch: str = "ascending", tol: float = 1e-12) -> float:
    """Scaling ``mu`` on the requested side of the fibering peak with ``J(mu u) = E``."""
    if branch not in ("ascending", "descending"):
        raise DomainError(f"branch must be 'ascending' or 'descending', got {branch!r}")
    G, P = fn.norms(domain, u_shape, p)
    lam = fn.fiber_root(G, P, p)

    def J(mu):
        return float(fn.J_scalar(mu * mu * G, mu ** (p.q + 1) * P, p))

    peak = J(lam)
    if E_target > peak:
        raise DomainError(f"target energy {E_target:.12g} exceeds the fibering maximum "
                          f"{peak:.12g}")
    if branch == "ascending":
        if not E_target > 0:
            raise DomainError("ascending branch needs a positive target energy")
        lo, hi = 0.0, lam
    else:
        lo, hi = lam, 2 * lam
        while J(hi) > E_target:
            lo, hi = hi, 2 * hi
    sign = 1.0 if branch == "ascending" else -1.0
    # J is monotone on the bracket: increasing (ascending) or decreasing
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if sign * (J(mid) - E_target) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def ray_landmarks(domain: Domain, u_shape: SpectralField, p: ModelParams):
    """Scalings where ``I(mu u) = 0`` and where ``J(mu u) = 0`` (past the peak)."""
    G, P = fn.norms(domain, u_shape, p)
    lam = fn.fiber_root(G, P, p)
    # J(mu u) = 0  <=>  mu^(q-1) P/(q+1) = a G/2 + b mu^2 G^2/4
    def J(mu):
        return float(fn.J_scalar(mu * mu * G, mu ** (p.q + 1) * P, p))

    hi = 2 * lam
    while J(hi) > 0:
        hi *= 2
    mu_zero = optimize.brentq(J, lam, hi, xtol=1e-15, rtol=1e-15)
    return lam, mu_zero


def bump(domain: Domain, x0: float, x1: float, freq: int = 0) -> SpectralField:
    """Projected ``sin^2(pi s) cos(2 pi freq (s - 1/2))`` on ``[x0, x1]`` (interval only)."""
    if domain.dim != 1:
        raise DomainError("bump construction is implemented for intervals")

    def f(x):
        s = (x - x0) / (x1 - x0)
        inside = (s > 0) & (s < 1)
        return np.where(inside, np.sin(np.pi * s) ** 2 * np.cos(2 * np.pi * freq * (s - 0.5)), 0.0)

    return domain.analyze(f(domain.nodes[0]))


def support_leakage(domain: Domain, c: SpectralField, x0: float, x1: float) -> float:
    """Relative L2 mass of the projected field outside ``[x0, x1]``."""
    v = domain.synthesize(c)
    x = domain.nodes[0]
    outside = (x <= x0) | (x >= x1)
    total = domain.integrate(v * v)
    return math.sqrt(domain.integrate(np.where(outside, v * v, 0.0)) / total) if total else 0.0


@dataclass
class HighEnergyDatum:
    u: SpectralField
    M_target: float
    J: float
    I: float
    alpha: float
    beta: float
    freq: int
    J_left: float
    J_right: float
    cross_term: float
    leakage: float
    predicate: bool

    def summary(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "u"}
        out["additivity_defect"] = self.J - self.J_left - self.J_right - self.cross_term
        return out


def construct_high_energy(M_target: float, domain: Domain, p: ModelParams,
                          geometry: WellGeometry, max_freq: Optional[int] = None,
                          tol: float = 1e-12) -> HighEnergyDatum:
    """A datum with energy ``M_target`` that satisfies the high-energy blow-up
    criterion, built from two bumps on disjoint thirds of the interval.

    The left bump is scaled until its energy is nonpositive and its L2 norm
    clears the Hoelder threshold; the right bump (of increasing oscillation
    if needed) is scaled on its ascending fibering branch until the energy
    of the *sum* equals the target.  Energies of disjointly supported
    pieces are not additive here: the Kirchhoff term contributes the cross
    term ``(b/2) ||grad v||^2 ||grad w||^2``, which is reported.
    """
    d = geometry.d_est
    if not M_target > d:
        raise DomainError(f"need M_target > d = {d:.6g}, got {M_target}")
    if domain.dim != 1:
        raise DomainError("high-energy construction is implemented for intervals")
    L = domain.spec.lengths[0]
    q1 = p.q + 1
    C = holder_constant(domain, p)

    v = bump(domain, 0.0, L / 3)
    Gv, Pv = fn.norms(domain, v, p)
    _, alpha_J = ray_landmarks(domain, v, p)
    alpha_norm = (C * M_target) ** (1.0 / q1) / domain.norm_l2(v)
    alpha = max(alpha_J, alpha_norm) * (1 + 1e-6)
    av = alpha * v
    nodes_v = domain.synthesize(av)
    J_left = fn.energy_J(domain, av, p)
    if max_freq is None:
        max_freq = max(1, domain.spec.n_modes // 12)

    lam = domain.eigenvalues
    for freq in range(0, max_freq + 1):
        w = bump(domain, 2 * L / 3, L, freq)
        if np.sum(w[-domain.n // 8:] ** 2) > 1e-6 * np.sum(w ** 2):
            break
        nodes_w = domain.synthesize(w)
        Gvw = float(np.sum(lam * av * w))
        Gw = float(np.sum(lam * w * w))

        def J_sum(beta):
            G = Gv * alpha ** 2 + 2 * beta * Gvw + beta * beta * Gw
            P = domain.integrate(np.abs(nodes_v + beta * nodes_w) ** q1)
            return float(fn.J_scalar(G, P, p))

        # locate the ascending branch and its peak on a geometric scan
        betas = np.geomspace(1e-6, 1e6, 1201)
        vals = np.array([J_sum(b) for b in betas])
        k = int(np.argmax(vals))
        if k == 0 or k == betas.size - 1:
            continue
        res = optimize.minimize_scalar(lambda b: -J_sum(b), bracket=(betas[k - 1], betas[k], betas[k + 1]))
        b_peak = float(res.x)
        if J_sum(b_peak) < M_target:
            continue
        beta = _bisect_increasing(J_sum, 0.0, b_peak, M_target, tol)
        u = av + beta * w
        G, P = fn.norms(domain, u, p)
        J = float(fn.J_scalar(G, P, p))
        I = float(fn.I_scalar(G, P, p))
        bw = beta * w
        J_right = fn.energy_J(domain, bw, p)
        cross = 0.5 * p.b * Gv * alpha ** 2 * fn.gradient_sq(domain, bw)
        leak = max(support_leakage(domain, av, 0.0, L / 3),
                   support_leakage(domain, bw, 2 * L / 3, L))
        pred = high_energy_criterion(domain, u, p, d)
        return HighEnergyDatum(u=u, M_target=float(M_target), J=J, I=I, alpha=float(alpha),
                               beta=float(beta), freq=freq, J_left=float(J_left),
                               J_right=float(J_right), cross_term=float(cross),
                               leakage=float(leak), predicate=pred)
    raise DiagnosticError(f"energy {M_target:.6g} unreachable with {domain.spec.n_modes} modes; "
                          "increase n_modes")


def _bisect_increasing(f, lo, hi, target, tol):
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if f(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- threshold sweep -------------------------------------------------------

@dataclass
class SweepResult:
    mu_star: float
    mu_lo: float
    mu_hi: float
    probes: List[dict]

    @property
    def rel_width(self) -> float:
        return (self.mu_hi - self.mu_lo) / self.mu_hi

    def flips(self) -> int:
        seq = [pr["observed"] for pr in sorted(self.probes, key=lambda pr: pr["mu"])]
        return sum(1 for x, y in zip(seq, seq[1:]) if x != y)

    def to_dict(self) -> dict:
        return {"mu_star": self.mu_star, "mu_lo": self.mu_lo, "mu_hi": self.mu_hi,
                "rel_width": self.rel_width, "flips": self.flips(), "probes": self.probes}


class BracketError(DomainError):
    def __init__(self, message, lo_outcome, hi_outcome):
        super().__init__(message)
        self.lo_outcome = lo_outcome
        self.hi_outcome = hi_outcome


def threshold_sweep(domain: Domain, u_shape: SpectralField, p: ModelParams,
                    geometry: WellGeometry, controls: Optional[SolverControls] = None,
                    mu_lo: float = 0.5, mu_hi: float = 2.0, rel_width: float = 1e-3,
                    bounds: Optional[HighEnergyBounds] = None) -> SweepResult:
    """Bisect along ``mu * u_shape`` on the observed outcome."""
    probes = []

    def probe(mu):
        u0 = mu * np.asarray(u_shape, dtype=float)
        cls = classify_initial(domain, u0, p, geometry, bounds)
        kind, _ = observe(domain, u0, p, controls)
        cls.observed = kind
        probes.append({"mu": float(mu), "J0": cls.J0, "I0": cls.I0, "regime": cls.regime,
                       "prediction": cls.prediction, "observed": kind, "agrees": cls.agrees})
        return kind

    lo_kind, hi_kind = probe(mu_lo), probe(mu_hi)
    if lo_kind != "GlobalDecay" or hi_kind != "BlowUp":
        raise BracketError(f"invalid bracket: mu_lo -> {lo_kind}, mu_hi -> {hi_kind}",
                           lo_kind, hi_kind)
    lo, hi = mu_lo, mu_hi
    while (hi - lo) > rel_width * hi:
        mid = 0.5 * (lo + hi)
        kind = probe(mid)
        if kind == "GlobalDecay":
            lo = mid
        elif kind == "BlowUp":
            hi = mid
        else:
            raise DiagnosticError(f"probe at mu={mid:.8g} undetermined", best=mid)
    return SweepResult(mu_star=0.5 * (lo + hi), mu_lo=lo, mu_hi=hi, probes=probes)
