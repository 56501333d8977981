"""Property suites run by ``kirchwell verify``.

Each property returns a :class:`PropertyResult` with a signed margin
(non-negative means the property held).  The suites call the library
through module attributes, so a patched functional is what gets checked.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, Dict, List

import numpy as np

from kirchwell import classify, dynamics
from kirchwell import functionals as fn
from kirchwell import wellgeometry as wg
from kirchwell.domain import Domain
from kirchwell.functionals import ModelParams

SUITES = ("lemmas", "dynamics", "all")


@dataclass
class PropertyResult:
    name: str
    passed: bool
    margin: float
    detail: str = ""

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"{mark} {self.name:<28} margin={self.margin:+.3e} {self.detail}".rstrip()


@dataclass
class Context:
    domain: Domain
    params: ModelParams
    geometry: wg.WellGeometry
    seed: int = 0
    n_samples: int = 200


def _result(name, margin, detail=""):
    margin = float(margin)
    return PropertyResult(name, bool(margin >= 0), margin, detail)


def _fields(ctx: Context, n: int, salt: int):
    rng = np.random.default_rng([ctx.seed, salt])
    for _ in range(n):
        c = wg.random_field(ctx.domain, rng)
        yield c * np.exp(rng.uniform(-1.5, 1.5)) / ctx.domain.norm_h1(c)


def prop_energy_identity(ctx: Context) -> PropertyResult:
    """J rewritten through I agrees with J."""
    p = ctx.params
    worst = np.inf
    for c in _fields(ctx, ctx.n_samples, 1):
        G, P = fn.norms(ctx.domain, c, p)
        J = fn.J_scalar(G, P, p)
        alt = fn.J_via_nehari(G, fn.I_scalar(G, P, p), p)
        worst = min(worst, 1e-10 * (1 + abs(J) + P) - abs(J - alt))
    return _result("energy/nehari identity", worst)


def prop_fibering(ctx: Context) -> PropertyResult:
    """I vanishes at lambda*, is positive before it and negative after."""
    p = ctx.params
    worst = np.inf
    for c in _fields(ctx, ctx.n_samples, 2):
        G, P = fn.norms(ctx.domain, c, p)
        lam = fn.fiber_root(G, P, p)

        def I_at(t):
            return fn.I_scalar(t * t * G, t ** (p.q + 1) * P, p)

        scale = (p.a + p.b * lam * lam * G) * lam * lam * G
        worst = min(worst, 1e-9 * scale - abs(I_at(lam)),
                    I_at(0.5 * lam) / scale, -I_at(2.0 * lam) / scale)
    return _result("fibering root and sign", worst)


def prop_monotonicity(ctx: Context) -> PropertyResult:
    p = ctx.params
    worst = np.inf
    us = list(_fields(ctx, ctx.n_samples, 3))
    vs = list(_fields(ctx, ctx.n_samples, 4))
    for u, v in zip(us, vs):
        gap = fn.monotonicity_gap(ctx.domain, u, v, p)
        floor = fn.monotonicity_floor(ctx.domain, u, v, p)
        worst = min(worst, gap - floor + 1e-9 * (1 + abs(gap)))
    return _result("strong monotonicity", worst)


def prop_depth_bound(ctx: Context) -> PropertyResult:
    g = ctx.geometry
    return _result("depth >= analytic bound", g.d_est - g.d_lower + 1e-8,
                   f"d={g.d_est:.10g} bound={g.d_lower:.10g}")


def prop_depth_reduction(ctx: Context) -> PropertyResult:
    """The quotient reduction matches constrained minimisation."""
    g = ctx.geometry
    worst = np.inf
    for delta in (0.5, 1.0, 1.25):
        num = g.depth_numeric(delta)[0]
        worst = min(worst, 1e-8 * (1 + abs(num)) - abs(num - g.depth_at(delta)))
    return _result("depth reduction vs minimiser", worst)


def prop_nehari_point(ctx: Context) -> PropertyResult:
    g = ctx.geometry
    G, P = fn.norms(ctx.domain, g.minimizer, ctx.params)
    I = fn.I_scalar(G, P, ctx.params)
    J = fn.J_scalar(G, P, ctx.params)
    return _result("minimiser on Nehari set",
                   min(1e-8 * P - abs(I), 1e-8 * (1 + g.d_est) - abs(J - g.d_est)))


def prop_curve_shape(ctx: Context) -> PropertyResult:
    g = ctx.geometry
    curve = g.d_curve or wg.d_delta_curve(g, wg.default_delta_grid(ctx.params))
    return _result("d(delta) rises then falls", wg.TOL_MONO - wg.curve_shape_violation(curve))


def prop_norm_thresholds(ctx: Context) -> PropertyResult:
    total = 0
    worst = np.inf
    for delta in (0.5, 1.0, 2.0):
        rep = wg.verify_norm_thresholds(ctx.domain, ctx.params, delta, ctx.geometry.S_est,
                                        n_samples=ctx.n_samples, seed=ctx.seed)
        total += rep["violations"]
        worst = min(worst, rep["min_margin_negative"])
    return PropertyResult("r(delta) dichotomy", total == 0,
                          float(worst) if total == 0 else -float(total),
                          f"violations={total}")


def _decay_run(ctx: Context):
    u0 = 0.1 * ctx.domain.mode(0)
    return dynamics.integrate(ctx.domain, u0, ctx.params, dynamics.SolverControls(rel_tol=1e-8))


def prop_energy_balance(ctx: Context, cache: dict) -> PropertyResult:
    traj = cache.setdefault("decay", _decay_run(ctx))
    res = dynamics.energy_residual(traj)
    return _result("energy dissipation balance", 1e-6 * (1 + abs(traj.J0)) - res,
                   f"residual={res:.3e}")


def prop_decay_bound(ctx: Context, cache: dict) -> PropertyResult:
    traj = cache.setdefault("decay", _decay_run(ctx))
    d1, d2 = wg.find_delta_roots(traj.J0, ctx.geometry)
    cache["decay_roots"] = (d1, d2)
    chk = dynamics.decay_bound_check(traj, d1, ctx.params, ctx.domain.lambda1)
    return PropertyResult("L2 decay bound", chk.passed, chk.worst_margin)


def prop_invariance(ctx: Context, cache: dict) -> PropertyResult:
    traj = cache.setdefault("decay", _decay_run(ctx))
    roots = cache.get("decay_roots") or wg.find_delta_roots(traj.J0, ctx.geometry)
    chk = dynamics.well_invariance_check(traj, roots, ctx.geometry)
    return PropertyResult("stable-set invariance", chk.passed, chk.worst_margin)


def prop_blowup(ctx: Context, cache: dict) -> PropertyResult:
    g = ctx.geometry
    mu = classify.scale_to_energy(ctx.domain, ctx.domain.mode(0), 0.5 * g.d_est,
                                  ctx.params, "descending")
    traj = dynamics.integrate(ctx.domain, mu * ctx.domain.mode(0), ctx.params)
    if traj.outcome.kind != "BlowUp":
        return PropertyResult("unstable-set blow-up", False, -1.0, traj.outcome.kind)
    conc = dynamics.concavity_diagnostics(traj, ctx.params)
    roots = wg.find_delta_roots(traj.J0, g)
    chk = dynamics.well_invariance_check(traj, roots, g)
    margin = min(chk.worst_margin, 0.0 if conc.onset is not None else -1.0)
    return _result("unstable-set blow-up", margin, f"T_est={traj.outcome.T_est:.6g}")


LEMMA_PROPERTIES: List[Callable] = [prop_energy_identity, prop_fibering, prop_monotonicity,
                                    prop_depth_bound, prop_nehari_point, prop_depth_reduction,
                                    prop_curve_shape, prop_norm_thresholds]
DYNAMICS_PROPERTIES: List[Callable] = [prop_energy_balance, prop_decay_bound,
                                       prop_invariance, prop_blowup]


def run_suite(name: str, ctx: Context) -> List[PropertyResult]:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    out = []
    if name in ("lemmas", "all"):
        out += [prop(ctx) for prop in LEMMA_PROPERTIES]
    if name in ("dynamics", "all"):
        cache: Dict[str, object] = {}
        out += [prop(ctx, cache) for prop in DYNAMICS_PROPERTIES]
    return out


def summary(results: List[PropertyResult]) -> dict:
    return {"passed": all(r.passed for r in results),
            "properties": [asdict(r) for r in results]}
