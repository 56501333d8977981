"""Potential-well landscape on the discrete subspace.

The embedding constant, the depth d, the curve d(delta) and the sampled
bounds on N_s are all computed over the span of the retained modes, so the
inequalities relating them hold exactly there rather than asymptotically.

Optimisations are posed on directions: every objective is invariant under
``c -> t c`` and is evaluated at ``c / |c|``.  Gradients use the exact
derivative of the discrete quadrature, ``grad P = (q + 1) * proj(|u|^(q-1) u)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from kirchwell import functionals as fn
from kirchwell.domain import Domain, SpectralField
from kirchwell.errors import DiagnosticError, DomainError
from kirchwell.functionals import ModelParams

log = logging.getLogger(__name__)

TOL_MONO = 1e-6
ROOT_TOL = 1e-8


# -- direction optimisation ----------------------------------------------

def _low_mode_starts(domain: Domain, count: int, rng: np.random.Generator,
                     width: int = 8) -> List[np.ndarray]:
    m = min(width, domain.n)
    decay = 1.0 / np.arange(1, m + 1) ** 2
    starts = []
    for _ in range(count):
        c = domain.zeros()
        c[:m] = rng.standard_normal(m) * decay
        starts.append(c)
    return starts


def _minimize_direction(objective: Callable, starts: Sequence[np.ndarray],
                        what: str, scale: np.ndarray,
                        gtol: float = 1e-10, maxiter: int = 5000):
    """Run L-BFGS from each start on a 0-homogeneous objective; keep the best.

    ``objective(c) -> (value, grad)`` is evaluated at unit vectors.  The
    search runs in the coordinates ``y = scale * c``; callers pass the H_0^1
    weights ``sqrt(lam_k)``, which keep the problem well conditioned.
    Returns ``(value, c)`` with ``c`` of unit Euclidean length.
    """
    def unit(c):
        return c / np.linalg.norm(c)

    def wrapped(y):
        nrm = np.linalg.norm(y)
        c = y / nrm / scale
        cn = np.linalg.norm(c)
        val, grad = objective(c / cn)
        # chain rule through c = y/|y|/scale/|.|; objective is 0-homogeneous
        return val, grad / (cn * nrm) / scale

    results = []
    for c0 in starts:
        c0 = np.asarray(c0, dtype=float)
        if not np.linalg.norm(c0) > 0:
            continue
        y0 = unit(c0 * scale)
        try:
            res = optimize.minimize(wrapped, y0, jac=True, method="L-BFGS-B",
                                    options={"maxiter": maxiter, "gtol": gtol,
                                             "ftol": 1e-16, "maxcor": 30})
            y = unit(res.x)
            val, gy = wrapped(y)
        except DomainError:
            continue
        if np.isfinite(val):
            results.append((float(val), float(np.linalg.norm(gy)), unit(y / scale)))
    if not results:
        raise DiagnosticError(f"{what}: no start produced a finite objective")
    converged = [r for r in results if r[1] <= 1e-5 * max(1.0, abs(r[0]))]
    if not converged:
        val, gnorm, c = min(results, key=lambda r: r[0])
        raise DiagnosticError(
            f"{what}: optimiser stalled with gradient norm {gnorm:.3e}", best=c, value=val)
    val, _, c = min(converged, key=lambda r: r[0])
    return val, c


def _log_ratio_objective(domain: Domain, p: ModelParams, sign: float = -1.0):
    """``sign * log(P / G^((q+1)/2))`` with gradient."""
    q1 = p.q + 1

    def objective(c):
        G = fn.gradient_sq(domain, c)
        P = fn.lqp1(domain, c, p)
        if not (G > 0 and P > 0):
            raise DomainError("degenerate direction")
        gP = q1 * fn.source_term(domain, c, p)
        gG = 2.0 * domain.eigenvalues * c
        val = math.log(P) - 0.5 * q1 * math.log(G)
        grad = gP / P - 0.5 * q1 * gG / G
        return sign * val, sign * grad

    return objective


def sobolev_quotient(domain: Domain, u: SpectralField, p: ModelParams) -> float:
    """``||u||_{q+1} / ||grad u||_2``."""
    G, P = fn.norms(domain, u, p)
    return P ** (1.0 / (p.q + 1)) / math.sqrt(G)


def estimate_sobolev_constant(domain: Domain, q: float = 5.0, restarts: int = 4,
                              iters: int = 5000, seed: int = 0,
                              extra_starts: Sequence[np.ndarray] = ()):
    """Best constant S with ``||u||_{q+1} <= S ||grad u||_2`` on the subspace.

    Returns ``(S_est, maximiser)``.  Multi-start L-BFGS ascent of the
    quotient from the first eigenfunction and random low-mode mixtures.
    """
    p = ModelParams(1.0, 1.0, q)
    rng = np.random.default_rng(seed)
    starts = [domain.mode(0), *extra_starts, *_low_mode_starts(domain, restarts, rng)]
    val, c = _minimize_direction(_log_ratio_objective(domain, p, -1.0), starts,
                                 "Sobolev quotient ascent", scale=np.sqrt(domain.eigenvalues),
                                 maxiter=iters)
    return math.exp(-val / (p.q + 1)), c


def estimate_flattest_direction(domain: Domain, q: float = 5.0, restarts: int = 4,
                                iters: int = 5000, seed: int = 0):
    """Smallest quotient ``R = P / G^((q+1)/2)`` on the subspace.

    Returns ``(R_min, direction)``.  Descent starts from the top modes,
    where the quotient is smallest among eigenfunctions.
    """
    p = ModelParams(1.0, 1.0, q)
    rng = np.random.default_rng(seed)
    n = domain.n
    starts = [domain.mode(n - 1 - k) for k in range(min(3, n))]
    for _ in range(restarts):
        c = np.zeros(n)
        top = max(1, n // 8)
        c[-top:] = rng.standard_normal(top)
        starts.append(c)
    val, c = _minimize_direction(_log_ratio_objective(domain, p, 1.0), starts,
                                 "quotient descent", scale=np.sqrt(domain.eigenvalues),
                                 maxiter=iters)
    return math.exp(val), c


def nehari_gradient_sq(R: float, delta: float, p: ModelParams) -> float:
    """``X = ||grad u||^2`` on N_delta for a direction with quotient R."""
    return fn.fiber_root(1.0, R, p, delta) ** 2


def nehari_level(X: float, delta: float, p: ModelParams) -> float:
    """J on N_delta as a function of ``X = ||grad u||^2``."""
    c = delta / (p.q + 1)
    return p.a * X * (0.5 - c) + p.b * X * X * (0.25 - c)


def reduced_depth(delta: float, p: ModelParams, R_max: float, R_min: float):
    """Exact ``d(delta)`` over a set of directions whose quotients fill
    ``[R_min, R_max]``.  Returns ``(value, which)`` with which in
    {"max", "min"} naming the extremal direction that attains it.

    Along N_delta, X is decreasing in R and J is a quadratic in X that is
    increasing for ``delta <= (q+1)/4`` and concave beyond, so the minimum
    over the interval sits at one of its ends.
    """
    if delta <= 0:
        raise DomainError(f"delta must be positive, got {delta}")
    e_max = nehari_level(nehari_gradient_sq(R_max, delta, p), delta, p)
    if delta <= (p.q + 1) / 4:
        return e_max, "max"
    e_min = nehari_level(nehari_gradient_sq(R_min, delta, p), delta, p)
    return (e_max, "max") if e_max <= e_min else (e_min, "min")


def depth_lower_bound(p: ModelParams, S: float) -> float:
    """Analytic lower bound on the depth in terms of the embedding constant."""
    if not S > 0:
        raise DomainError(f"S must be positive, got {S}")
    q = p.q
    base = p.a / S ** (q + 1)
    return (p.a * (q - 1) / (2 * (q + 1)) * base ** (2.0 / (q - 1))
            + p.b * (q - 3) / (4 * (q + 1)) * base ** (4.0 / (q - 1)))


def r_delta(delta: float, p: ModelParams, S: float) -> float:
    """Gradient-norm radius below which ``I_delta >= 0``."""
    if delta <= 0 or S <= 0:
        raise DomainError("r(delta) needs delta > 0 and S > 0")
    return (delta * p.b / S ** (p.q + 1)) ** (1.0 / (p.q - 3))


def _fiber_energy_objective(domain: Domain, p: ModelParams, delta: float):
    """``c -> J(lam_delta(c) c)`` with its gradient via implicit differentiation."""
    a, b, q = p.a, p.b, p.q

    def objective(c):
        G, P = fn.norms(domain, c, p)
        lam = fn.fiber_root(G, P, p, delta)
        l2, l4, lq, lq1 = lam ** 2, lam ** 4, lam ** q, lam ** (q + 1)
        val = 0.5 * a * l2 * G + 0.25 * b * l4 * G * G - lq1 * P / (q + 1)
        j_lam = a * lam * G + b * lam ** 3 * G * G - lq * P
        j_G = 0.5 * a * l2 + 0.5 * b * l4 * G
        j_P = -lq1 / (q + 1)
        phi_lam = delta * (2 * a * lam * G + 4 * b * lam ** 3 * G * G) - (q + 1) * lq * P
        phi_G = delta * (a * l2 + 2 * b * l4 * G)
        phi_P = -lq1
        f_G = j_G - j_lam * phi_G / phi_lam
        f_P = j_P - j_lam * phi_P / phi_lam
        grad = f_G * 2.0 * domain.eigenvalues * c + f_P * (q + 1) * fn.source_term(domain, c, p)
        return val, grad

    return objective


def nehari_projection(domain: Domain, u: SpectralField, p: ModelParams,
                      delta: float = 1.0) -> SpectralField:
    return fn.fiber_lambda_delta(domain, u, delta, p) * np.asarray(u)


def minimize_on_nehari(domain: Domain, p: ModelParams, delta: float = 1.0,
                       starts: Sequence[np.ndarray] = (), restarts: int = 4,
                       seed: int = 0, include_top_mode: bool = False):
    """``min over directions of J(lam_delta(u) u)``; returns (value, point on N_delta)."""
    rng = np.random.default_rng(seed)
    all_starts = [*starts, domain.mode(0), *_low_mode_starts(domain, restarts, rng)]
    if include_top_mode:
        all_starts.append(domain.mode(domain.n - 1))
    val, c = _minimize_direction(_fiber_energy_objective(domain, p, delta), all_starts,
                                 f"depth minimisation at delta={delta:g}",
                                scale=np.sqrt(domain.eigenvalues))
    return val, nehari_projection(domain, c, p, delta)


def compute_depth(domain: Domain, p: ModelParams, restarts: int = 4, seed: int = 0,
                  starts: Sequence[np.ndarray] = ()):
    """``(d_est, minimiser)`` with the minimiser on the Nehari manifold."""
    return minimize_on_nehari(domain, p, 1.0, starts=starts, restarts=restarts, seed=seed)


# -- geometry container ---------------------------------------------------

@dataclass
class WellGeometry:
    """The computed landscape plus a cached evaluator for ``d(delta)``."""

    domain: Domain
    params: ModelParams
    S_est: float
    d_est: float
    d_lower: float
    minimizer: SpectralField
    sobolev_maximizer: SpectralField
    d_curve: List[Tuple[float, float]] = field(default_factory=list)
    delta_tilde: Optional[float] = None
    d_refine_gap: Optional[float] = None
    R_min: Optional[float] = None
    flattest: Optional[SpectralField] = None
    seed: int = 0
    restarts: int = 0
    _cache: Dict[float, Tuple[float, np.ndarray]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._cache.setdefault(1.0, (self.d_est, self.minimizer))

    def _nearest_start(self, delta: float):
        if not self._cache:
            return []
        key = min(self._cache, key=lambda k: abs(math.log(k) - math.log(delta)))
        return [self._cache[key][1]]

    @property
    def R_max(self) -> float:
        return self.S_est ** (self.params.q + 1)

    def depth_at(self, delta: float) -> float:
        """``d(delta)``: the quotient reduction when the flattest direction
        is known, constrained minimisation otherwise."""
        if self.R_min is None:
            return self.depth_numeric(delta)[0]
        return reduced_depth(delta, self.params, self.R_max, self.R_min)[0]

    def depth_point(self, delta: float):
        """``(d(delta), minimiser on N_delta)``."""
        if self.R_min is None:
            return self.depth_numeric(delta)
        val, which = reduced_depth(delta, self.params, self.R_max, self.R_min)
        direction = self.sobolev_maximizer if which == "max" else self.flattest
        return val, nehari_projection(self.domain, direction, self.params, delta)

    def depth_numeric(self, delta: float):
        """Constrained minimisation of J over N_delta, warm-started from the
        nearest cached minimiser."""
        if delta <= 0:
            raise DomainError(f"delta must be positive, got {delta}")
        delta = float(delta)
        if delta in self._cache:
            return self._cache[delta]
        starts = self._nearest_start(delta) + [self.sobolev_maximizer]
        if self.flattest is not None:
            starts.append(self.flattest)
        val, u = minimize_on_nehari(self.domain, self.params, delta, starts=starts,
                                    restarts=self.restarts, seed=self.seed,
                                    include_top_mode=delta > 1.0)
        self._cache[delta] = (val, u)
        return val, u

    def r(self, delta: float) -> float:
        return r_delta(delta, self.params, self.S_est)

    def to_dict(self) -> dict:
        return {
            "S_est": self.S_est,
            "d_est": self.d_est,
            "d_lower": self.d_lower,
            "d_refine_gap": self.d_refine_gap,
            "delta_tilde": self.delta_tilde,
            "R_max": self.R_max,
            "R_min": self.R_min,
            "d_curve": [[float(d), float(v)] for d, v in self.d_curve],
            "r_delta": [[float(d), self.r(d)] for d, _ in self.d_curve],
        }


def default_delta_grid(p: ModelParams, n_low: int = 12, n_high: int = 12,
                       delta_min: float = 0.05) -> np.ndarray:
    """Log grid on [delta_min, 1] and [1, delta_max] with delta_max past the
    point (q+1)/2 where every Nehari_delta energy is already negative."""
    delta_max = 1.1 * (p.q + 1) / 2
    low = np.geomspace(delta_min, 1.0, n_low)
    high = np.geomspace(1.0, delta_max, n_high)[1:]
    return np.concatenate([low, high])


def d_delta_curve(geometry: WellGeometry, delta_grid: Sequence[float]):
    """Sample ``d(delta)``, sweeping outward from 1 so numeric solves are warm-started."""
    grid = np.asarray(delta_grid, dtype=float)
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise DomainError("delta grid must be positive and strictly increasing")
    below = [d for d in grid if d <= 1.0][::-1]
    above = [d for d in grid if d > 1.0]
    for d in below + above:
        geometry.depth_at(d)
    return [(float(d), geometry.depth_at(d)) for d in grid]


def curve_shape_violation(curve: Sequence[Tuple[float, float]]) -> float:
    """Largest breach of 'increasing up to 1, decreasing after' (0 if none)."""
    worst = 0.0
    for (d0, v0), (d1, v1) in zip(curve, curve[1:]):
        if d1 <= 1.0:
            worst = max(worst, v0 - v1)
        elif d0 >= 1.0:
            worst = max(worst, v1 - v0)
    return worst


def find_zero_crossing(geometry: WellGeometry, lo: float, hi: float,
                       tol: float = 1e-12) -> float:
    """``delta > 1`` where ``d`` changes sign, by bisection on [lo, hi]."""
    if not (geometry.depth_at(lo) > 0 >= geometry.depth_at(hi)):
        raise DomainError("d(delta) does not change sign on the bracket")
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if geometry.depth_at(mid) > 0:
            lo = mid
        else:
            hi = mid
    return hi


class _RootFound(Exception):
    def __init__(self, x):
        self.x = x


def find_delta_roots(J0: float, geometry: WellGeometry, tol: float = ROOT_TOL):
    """The two roots ``delta_1 < 1 < delta_2`` of ``d(delta) = J0``.

    Brent's method on each monotone branch (in log delta below 1); stops as
    soon as ``|d - J0| <= tol (1 + J0)``.

    For ``b > 0`` the depth collapses just above ``delta_c = (q+1)/4``: on the
    Nehari set of a nearly flat direction the quartic term changes sign
    there.  In the continuum the drop is a jump to minus infinity, so for
    ``J0 < d(delta_c)`` only the discrete model has an upper root, inside
    the sliver between ``delta_c`` and the zero crossing ``delta_tilde``.
    That sliver is far narrower than the depth's sensitivity allows double
    precision to resolve, so there ``delta_2`` is returned as the last
    representable point with ``d > J0`` and the residual check does not
    apply.  It is still the supremum of ``{delta > 1 : d(delta) > J0}``,
    which is what the well-invariance argument needs.
    """
    d = geometry.d_est
    if not (0 < J0 < d):
        raise DomainError(f"need 0 < J0 < d = {d:.12g}, got J0 = {J0:.12g}")
    scale = tol * (1 + abs(J0))

    def residual(x, log=False):
        delta = math.exp(x) if log else x
        r = geometry.depth_at(delta) - J0
        if abs(r) <= scale:
            raise _RootFound(x)
        return r

    def solve(f, lo, hi):
        try:
            x = optimize.brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                                maxiter=200)
        except _RootFound as hit:
            return hit.x
        return x

    lo = 0.5
    while geometry.depth_at(lo) >= J0:
        lo *= 0.25
        if lo < 1e-300:
            raise DiagnosticError("cannot bracket the lower delta root")
    delta1 = math.exp(solve(lambda x: residual(x, log=True), math.log(lo), 0.0))

    hi_u = geometry.delta_tilde
    if hi_u is None:
        hi_u = find_zero_crossing(geometry, 1.0, (geometry.params.q + 1) / 2)
    delta2 = solve(residual, 1.0, hi_u)
    return delta1, delta2


def analyze_geometry(domain: Domain, p: ModelParams, restarts: int = 4, seed: int = 0,
                     delta_grid: Optional[Sequence[float]] = None,
                     with_curve: bool = True, refine: bool = False) -> WellGeometry:
    """Embedding constant, depth, its lower bound and (optionally) the d(delta) curve."""
    S_est, smax = estimate_sobolev_constant(domain, p.q, restarts=restarts, seed=seed)
    d_est, minimizer = compute_depth(domain, p, restarts=restarts, seed=seed, starts=[smax])
    R_min, flat = estimate_flattest_direction(domain, p.q, restarts=restarts, seed=seed)
    geom = WellGeometry(domain=domain, params=p, S_est=S_est, d_est=d_est,
                        d_lower=depth_lower_bound(p, S_est), minimizer=minimizer,
                        sobolev_maximizer=smax, R_min=R_min, flattest=flat, seed=seed)
    geom.delta_tilde = find_zero_crossing(geom, 1.0, (p.q + 1) / 2)
    if refine:
        from kirchwell.domain import DomainSpec, build_domain

        spec = domain.spec
        fine = build_domain(DomainSpec(spec.kind, spec.lengths, n_modes=2 * spec.n_modes))
        d_fine, _ = compute_depth(fine, p, restarts=restarts, seed=seed,
                                  starts=[embed_coefficients(domain, fine, minimizer)])
        geom.d_refine_gap = abs(d_fine - d_est)
    if with_curve:
        grid = default_delta_grid(p) if delta_grid is None else delta_grid
        geom.d_curve = d_delta_curve(geom, grid)
    return geom


def embed_coefficients(coarse: Domain, fine: Domain, c: SpectralField) -> SpectralField:
    """Copy coefficients into a larger mode set (matching per-axis mode numbers)."""
    lookup = {tuple(m): i for i, m in enumerate(fine.mode_index)}
    out = fine.zeros()
    for i, m in enumerate(coarse.mode_index):
        out[lookup[tuple(m)]] = c[i]
    return out


# -- property sweeps --------------------------------------------------------

def random_field(domain: Domain, rng: np.random.Generator, family: Optional[str] = None):
    """Random direction drawn from a few spectral families."""
    family = family or rng.choice(["low", "decay", "sparse", "single"])
    c = domain.zeros()
    n = domain.n
    if family == "low":
        m = min(n, 8)
        c[:m] = rng.standard_normal(m)
    elif family == "decay":
        s = rng.uniform(0.5, 3.0)
        c[:] = rng.standard_normal(n) / np.arange(1, n + 1) ** s
    elif family == "sparse":
        idx = rng.choice(n, size=min(n, 3), replace=False)
        c[idx] = rng.standard_normal(idx.size)
    else:
        c[rng.integers(0, min(n, 16))] = 1.0
    return c


def verify_norm_thresholds(domain: Domain, p: ModelParams, delta: float, S: float,
                           n_samples: int = 1000, seed: int = 0, tol: float = 1e-10) -> dict:
    """Check the r(delta) dichotomy on random fields scaled across the threshold."""
    if delta <= 0:
        raise DomainError(f"delta must be positive, got {delta}")
    rng = np.random.default_rng(seed)
    r = r_delta(delta, p, S)
    violations = 0
    negatives = 0
    worst = np.inf
    for _ in range(n_samples):
        c = random_field(domain, rng)
        c *= r / domain.norm_h1(c) * math.exp(rng.uniform(-1.0, 3.0))
        Id = fn.nehari_I_delta(domain, c, delta, p)
        g = domain.norm_h1(c)
        if Id < 0:
            negatives += 1
            worst = min(worst, g - r)
            if g <= r - tol * r:
                violations += 1
        elif g <= r and Id < -tol:
            violations += 1
    return {"delta": delta, "r": r, "n_samples": n_samples, "n_negative": negatives,
            "violations": violations, "min_margin_negative": float(worst)}


@dataclass
class HighEnergyBounds:
    s: float
    lambda_s_est: float
    Lambda_s_est: float
    n_samples: int
    n_accepted: int
    lambda_s_lower: float
    Lambda_s_upper: float
    gn_constant: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def nehari_energy(X: float, p: ModelParams) -> float:
    """J on the Nehari manifold as a function of ``X = ||grad u||^2``."""
    q = p.q
    return p.a * (q - 1) / (2 * (q + 1)) * X + p.b * (q - 3) / (4 * (q + 1)) * X * X


def gagliardo_nirenberg_constant(domain: Domain, p: ModelParams, restarts: int = 4,
                                 seed: int = 0) -> float:
    """Best C with ``||u||_{q+1}^{q+1} <= C ||grad u||^(n(q-1)/2) ||u||_2^alpha``."""
    n = domain.dim
    q1 = p.q + 1
    e_grad = n * (p.q - 1) / 2.0
    alpha = q1 - e_grad

    def objective(c):
        G = fn.gradient_sq(domain, c)
        P = fn.lqp1(domain, c, p)
        L = float(c @ c)
        val = math.log(P) - 0.5 * e_grad * math.log(G) - 0.5 * alpha * math.log(L)
        grad = (q1 * fn.source_term(domain, c, p) / P
                - 0.5 * e_grad * 2.0 * domain.eigenvalues * c / G - alpha * c / L)
        return -val, -grad

    rng = np.random.default_rng(seed)
    starts = [domain.mode(0), *_low_mode_starts(domain, restarts, rng)]
    val, _ = _minimize_direction(objective, starts, "Gagliardo-Nirenberg ascent",
                                 scale=np.sqrt(domain.eigenvalues))
    return math.exp(-val)


def estimate_high_energy_bounds(domain: Domain, p: ModelParams, s: float,
                                geometry: Optional[WellGeometry] = None,
                                n_samples: int = 2000, seed: int = 0) -> HighEnergyBounds:
    """Sampled inner estimates of ``lambda_s`` and ``Lambda_s``.

    Random directions are projected onto the Nehari manifold and kept when
    their energy is below ``s``.  The sampled minimum over-estimates
    ``lambda_s`` and the sampled maximum under-estimates ``Lambda_s``.
    Certified bounds are reported alongside: a Gagliardo-Nirenberg lower
    bound on ``lambda_s`` and a Hoelder upper bound on ``Lambda_s``.
    """
    if geometry is not None and not s > geometry.d_est:
        raise DomainError(f"need s > d = {geometry.d_est:.6g}, got {s}")
    rng = np.random.default_rng(seed)
    norms_kept = []
    candidates = [geometry.minimizer] if geometry is not None else []
    for _ in range(n_samples):
        candidates.append(random_field(domain, rng))
    for c in candidates:
        if fn.gradient_sq(domain, c) == 0:
            continue
        u = nehari_projection(domain, c, p)
        X = fn.gradient_sq(domain, u)
        if nehari_energy(X, p) < s:
            norms_kept.append(domain.norm_l2(u))
    if not norms_kept:
        raise DiagnosticError(f"no sampled Nehari point has energy below s={s}; "
                              "increase s or n_samples")
    q = p.q
    n = domain.dim
    S = geometry.S_est if geometry is not None else estimate_sobolev_constant(domain, q)[0]
    C = gagliardo_nirenberg_constant(domain, p, seed=seed)
    alpha = q + 1 - n * (q - 1) / 2.0
    e = 2.0 - n * (q - 1) / 2.0
    if e >= 0:
        grad_bound = (p.a / S ** (q + 1)) ** (1.0 / (q - 1))
    else:
        # largest ||grad u|| allowed by the energy constraint on N_s
        A = p.b * (q - 3) / (4 * (q + 1))
        B = p.a * (q - 1) / (2 * (q + 1))
        grad_bound = math.sqrt((-B + math.sqrt(B * B + 4 * A * s)) / (2 * A))
    lam_lower = (p.a / C * grad_bound ** e) ** (1.0 / alpha)
    Lam_upper = (domain.measure ** ((q - 1) / 2) * 4 * (q + 1) / (q - 3) * s) ** (1.0 / (q + 1))
    return HighEnergyBounds(s=float(s), lambda_s_est=float(min(norms_kept)),
                            Lambda_s_est=float(max(norms_kept)),
                            n_samples=len(candidates), n_accepted=len(norms_kept),
                            lambda_s_lower=float(lam_lower), Lambda_s_upper=float(Lam_upper),
                            gn_constant=float(C))
