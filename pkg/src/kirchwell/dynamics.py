"""Galerkin time integration of the nonlocal parabolic flow.

The scheme is exponential Euler with the Kirchhoff coefficient
``m = a + b ||grad u||^2`` frozen over each step: the stiff linear part is
advanced exactly and the source ``|u|^(q-1) u`` enters explicitly through
the phi_1 weight.  Step-size control compares one full step with two half
steps; the two-half-step state is the one kept.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from kirchwell import functionals as fn
from kirchwell.domain import Domain, SpectralField
from kirchwell.errors import ConfigurationError, NotApplicable
from kirchwell.functionals import ModelParams

COLUMNS = ("t", "dt", "l2_sq", "h1_sq", "lqp1", "J", "I", "dissipation",
           "residual", "M", "F")


class StateOverflow(FloatingPointError):
    """The state left the floating-point range during a step."""


@dataclass(frozen=True)
class SolverControls:
    dt_init: float = 1e-3
    dt_min: float = 1e-12
    dt_max: float = 0.05
    t_max: float = 50.0
    rel_tol: float = 1e-6
    norm_cap: float = 1e8
    decay_floor: float = 1e-12
    snapshot_stride: int = 1
    adaptive: bool = True

    def __post_init__(self):
        if not (0 < self.dt_min < self.dt_init <= self.dt_max):
            raise ConfigurationError(
                "need 0 < dt_min < dt_init <= dt_max, got "
                f"{self.dt_min}, {self.dt_init}, {self.dt_max}")
        if not self.t_max > 0:
            raise ConfigurationError(f"t_max must be positive, got {self.t_max}")
        if not self.rel_tol > 0:
            raise ConfigurationError(f"rel_tol must be positive, got {self.rel_tol}")
        if not (self.norm_cap > 0 and self.decay_floor > 0):
            raise ConfigurationError("norm_cap and decay_floor must be positive")
        if int(self.snapshot_stride) != self.snapshot_stride or self.snapshot_stride < 1:
            raise ConfigurationError("snapshot_stride must be a positive integer")


@dataclass(frozen=True)
class GlobalDecay:
    rate: float
    fit_quality: float
    kind: str = "GlobalDecay"


@dataclass(frozen=True)
class BlowUp:
    T_est: float
    fit_quality: float
    trigger: str
    kind: str = "BlowUp"


@dataclass(frozen=True)
class Undetermined:
    reason: str
    kind: str = "Undetermined"


@dataclass
class TrajectoryRecord:
    params: ModelParams
    columns: dict
    outcome: object
    u0: SpectralField
    u_final: SpectralField
    n_steps: int = 0
    n_rejected: int = 0

    def __getitem__(self, name) -> np.ndarray:
        return self.columns[name]

    def __len__(self):
        return len(self.columns["t"])

    @property
    def J0(self) -> float:
        return float(self.columns["J"][0])

    @property
    def M_series(self) -> List[Tuple[float, float]]:
        return list(zip(self["t"].tolist(), self["M"].tolist()))

    @property
    def snapshots(self) -> List[fn.EnergySnapshot]:
        c = self.columns
        return [fn.EnergySnapshot(t=c["t"][i], J=c["J"][i], I=c["I"][i],
                                  l2_sq=c["l2_sq"][i], h1_sq=c["h1_sq"][i],
                                  lqp1=c["lqp1"][i], residual=c["residual"][i])
                for i in range(len(self))]


# -- one step -------------------------------------------------------------

def exponential_euler(domain: Domain, u: np.ndarray, h: float, p: ModelParams,
                      with_source: bool = True) -> np.ndarray:
    """One step with ``m = a + b ||grad u||^2`` frozen at the start of the step."""
    lam = domain.eigenvalues
    m = p.a + p.b * float(np.sum(lam * u * u))
    x = m * lam * h
    out = np.exp(-x) * u
    if with_source:
        # h * phi_1(-x) = (1 - exp(-x)) / (m lam)
        out += (-np.expm1(-x) / (m * lam)) * fn.source_term(domain, u, p)
    if not np.all(np.isfinite(out)):
        raise StateOverflow("non-finite state")
    return out


def _step(domain, u, h, p, with_source=True):
    with np.errstate(over="ignore", invalid="ignore"):
        full = exponential_euler(domain, u, h, p, with_source)
        mid = exponential_euler(domain, u, 0.5 * h, p, with_source)
        two = exponential_euler(domain, mid, 0.5 * h, p, with_source)
    scale = max(float(np.linalg.norm(two)), 1e-300)
    return two, float(np.linalg.norm(full - two)) / scale, mid


def step(domain: Domain, u: SpectralField, dt: float, p: ModelParams,
         with_source: bool = True):
    """Advance by ``dt``; returns ``(u_next, relative_error_estimate)``.

    ``with_source=False`` drops the power nonlinearity (test harness only).
    Raises :class:`StateOverflow` when the state stops being finite.
    """
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    u = domain.check(u)
    u_next, err, _ = _step(domain, u, dt, p, with_source)
    return u_next, err


def time_derivative(domain: Domain, u: SpectralField, p: ModelParams) -> np.ndarray:
    """``u_t = -L(u) + |u|^(q-1) u`` in coefficients (strong-form residual)."""
    return fn.source_term(domain, u, p) - fn.apply_nonlocal_L(domain, u, p)


# -- whole trajectory ----------------------------------------------------

def _fit_line(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        return 0.0, float(y[-1]) if y.size else 0.0, 0.0
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss if ss > 0 else 1.0
    return float(slope), float(intercept), r2


def _decay_outcome(cols) -> GlobalDecay:
    t = np.asarray(cols["t"])
    l2 = np.asarray(cols["l2_sq"])
    keep = l2 > 0
    t, l2 = t[keep], l2[keep]
    if t.size < 3:
        return GlobalDecay(rate=float("-inf"), fit_quality=1.0)
    tail = t >= t[0] + 0.5 * (t[-1] - t[0])
    slope, _, r2 = _fit_line(t[tail], np.log(l2[tail]))
    return GlobalDecay(rate=slope, fit_quality=r2)


def _blowup_outcome(cols, q: float, trigger: str) -> BlowUp:
    t = np.asarray(cols["t"])
    g = np.sqrt(np.asarray(cols["h1_sq"]))
    n = max(3, min(40, len(t) // 5))
    t, g = t[-n:], g[-n:]
    y = g ** (-(q - 1))
    slope, intercept, r2 = _fit_line(t, y)
    T = -intercept / slope if slope < 0 else float(t[-1])
    return BlowUp(T_est=float(max(T, t[-1])), fit_quality=r2, trigger=trigger)


def integrate(domain: Domain, u0: SpectralField, p: ModelParams,
              controls: Optional[SolverControls] = None) -> TrajectoryRecord:
    """Integrate from ``u0`` until decay, blow-up or ``t_max``.

    The dissipation ``int ||u_t||^2`` and ``M = int ||u||^2`` are accumulated
    step by step with Simpson's rule on (start, half-step, end) states; the
    integrands are evaluated from the strong form in coefficient space.
    """
    c = controls or SolverControls()
    u = domain.check(u0).copy()
    lam = domain.eigenvalues
    cols = {k: [] for k in COLUMNS}
    q = p.q

    def rates(v):
        ut = time_derivative(domain, v, p)
        return float(ut @ ut), float(v @ v)

    def record(t, dt, v, diss, M, J0):
        G, P = fn.norms(domain, v, p)
        J = float(fn.J_scalar(G, P, p))
        I = float(fn.I_scalar(G, P, p))
        l2 = float(v @ v)
        row = (t, dt, l2, G, P, J, I, diss, diss + J - (J if J0 is None else J0), M,
               -2.0 * I * M - 0.5 * (q + 1) * l2 * l2)
        for k, val in zip(COLUMNS, row):
            cols[k].append(float(val))
        return J, I, G, l2

    J0, I0, G0, l2_0 = record(0.0, 0.0, u, 0.0, 0.0, None)
    t, dt, diss, M = 0.0, c.dt_init, 0.0, 0.0
    n_steps = n_rejected = 0
    r_prev = rates(u)
    outcome = None
    if l2_0 < c.decay_floor and I0 >= 0:
        outcome = GlobalDecay(rate=float("-inf"), fit_quality=1.0)
    last_dt = 0.0
    pending = False
    while outcome is None:
        if t >= c.t_max:
            outcome = Undetermined(f"reached t_max = {c.t_max}")
            break
        h = min(dt, c.t_max - t)
        try:
            u_new, err, mid = _step(domain, u, h, p)
        except StateOverflow:
            u_new, err, mid = None, math.inf, None
        if c.adaptive and err > c.rel_tol:
            if h <= c.dt_min * (1 + 1e-12):
                I_now = cols["I"][-1] if not pending else float(fn.nehari_I(domain, u, p))
                if I_now < 0:
                    outcome = "collapse"
                else:
                    outcome = Undetermined("step size collapsed without blow-up evidence")
                break
            dt = max(0.5 * h, c.dt_min)
            n_rejected += 1
            continue
        if u_new is None:
            outcome = "overflow"
            break
        r_mid, r_new = rates(mid), rates(u_new)
        diss += h / 6.0 * (r_prev[0] + 4 * r_mid[0] + r_new[0])
        M += h / 6.0 * (r_prev[1] + 4 * r_mid[1] + r_new[1])
        r_prev = r_new
        t += h
        u = u_new
        n_steps += 1
        last_dt = h
        pending = True
        G = float(np.sum(lam * u * u))
        l2 = r_new[1]
        terminal = (math.sqrt(G) > c.norm_cap or l2 < c.decay_floor)
        if n_steps % c.snapshot_stride == 0 or terminal:
            _, I_now, _, _ = record(t, last_dt, u, diss, M, J0)
            pending = False
            if math.sqrt(G) > c.norm_cap:
                outcome = "cap"
            elif l2 < c.decay_floor and I_now > 0:
                outcome = GlobalDecay(rate=0.0, fit_quality=0.0)
        if c.adaptive and err < 0.25 * c.rel_tol:
            dt = min(1.5 * h, c.dt_max)
        elif not c.adaptive:
            dt = c.dt_init
    if pending:
        record(t, last_dt, u, diss, M, J0)
    cols = {k: np.asarray(v) for k, v in cols.items()}
    if isinstance(outcome, GlobalDecay) and len(cols["t"]) > 2:
        outcome = _decay_outcome(cols)
    elif isinstance(outcome, str):
        trigger = {"cap": "gradient norm exceeded norm_cap",
                   "collapse": "step size collapsed to dt_min with I < 0",
                   "overflow": "state overflow"}[outcome]
        outcome = _blowup_outcome(cols, q, trigger)
    return TrajectoryRecord(params=p, columns=cols, outcome=outcome,
                            u0=np.asarray(u0, dtype=float).copy(), u_final=u,
                            n_steps=n_steps, n_rejected=n_rejected)


# -- diagnostics ---------------------------------------------------------

def energy_residual(traj: TrajectoryRecord) -> float:
    """``max |int_0^t ||u_t||^2 + J(u(t)) - J(u0)|`` over snapshots."""
    if len(traj) == 0:
        raise ConfigurationError("empty trajectory")
    return float(np.max(np.abs(traj["residual"])))


@dataclass
class ConcavityReport:
    t: np.ndarray
    F: np.ndarray
    M: np.ndarray
    dM: np.ndarray
    ddM: np.ndarray
    onset: Optional[float]


def concavity_diagnostics(traj: TrajectoryRecord, p: Optional[ModelParams] = None) -> ConcavityReport:
    """``F = M'' M - (q+1)/2 M'^2`` with ``M' = ||u||^2`` and ``M'' = -2 I(u)``.

    ``onset`` is the first snapshot time after which F stays positive to
    the end of the record (None when the final F is not positive).
    """
    p = p or traj.params
    if len(traj) == 0:
        raise ConfigurationError("empty trajectory")
    M = traj["M"]
    dM = traj["l2_sq"]
    ddM = -2.0 * traj["I"]
    F = ddM * M - 0.5 * (p.q + 1) * dM * dM
    onset = None
    nonpos = np.nonzero(F <= 0)[0]
    if F[-1] > 0:
        first = 0 if nonpos.size == 0 else nonpos[-1] + 1
        onset = float(traj["t"][first])
    return ConcavityReport(t=traj["t"], F=F, M=M, dM=dM, ddM=ddM, onset=onset)


@dataclass
class CheckResult:
    passed: bool
    worst_margin: float
    detail: dict = field(default_factory=dict)


def decay_bound_check(traj: TrajectoryRecord, delta1: Optional[float],
                      p: Optional[ModelParams] = None, lambda1: float = 1.0,
                      tol: float = 1e-3) -> CheckResult:
    """``||u(t)||^2 <= ||u0||^2 exp(-2 a lam_1 (1 - delta_1) t) (1 + tol)``."""
    p = p or traj.params
    if delta1 is None or not (0 < delta1 < 1):
        raise NotApplicable("decay bound needs a lower delta root in (0, 1)")
    if getattr(traj.outcome, "kind", None) != "GlobalDecay":
        raise NotApplicable("decay bound applies to decaying trajectories")
    t = traj["t"]
    bound = traj["l2_sq"][0] * np.exp(-2 * p.a * lambda1 * (1 - delta1) * t) * (1 + tol)
    margin = (bound - traj["l2_sq"]) / np.maximum(bound, 1e-300)
    worst = float(np.min(margin))
    return CheckResult(passed=worst >= 0, worst_margin=worst,
                       detail={"rate": 2 * p.a * lambda1 * (1 - delta1), "delta1": delta1})


def well_invariance_check(traj: TrajectoryRecord, delta_range: Tuple[float, float],
                          geometry, n_deltas: int = 11, tol: float = 1e-9) -> CheckResult:
    """Membership of the trajectory in W_delta (or V_delta) for sampled delta.

    ``delta_range`` is ``(delta_1, delta_2)``, the roots of ``d(delta) = J(u0)``;
    the samples are interior points of that interval.
    """
    p = traj.params
    J0 = traj.J0
    I0 = float(traj["I"][0])
    if not (0 < J0 < geometry.d_est):
        raise NotApplicable("well invariance needs 0 < J(u0) < d")
    if I0 == 0:
        raise NotApplicable("I(u0) = 0: neither W nor V")
    lo, hi = delta_range
    deltas = np.linspace(lo, hi, n_deltas + 2)[1:-1]
    G, P, J = traj["h1_sq"], traj["lqp1"], traj["J"]
    inside_W = I0 > 0
    violations = 0
    worst = np.inf
    per_delta = []
    for delta in deltas:
        d_delta = geometry.depth_at(delta)
        scale = delta * (p.a + p.b * G) * G
        Id = scale - P
        slack = tol * (1 + np.abs(scale) + np.abs(P))
        if inside_W:
            sign_margin = Id + slack
        else:
            sign_margin = slack - Id
        energy_margin = d_delta + tol * (1 + abs(d_delta)) - J
        m = np.minimum(sign_margin, energy_margin)
        nbad = int(np.sum(m < 0))
        violations += nbad
        worst = min(worst, float(np.min(m)))
        per_delta.append((float(delta), float(d_delta), nbad))
    detail = {"well": "W" if inside_W else "V", "deltas": per_delta,
              "violations": violations}
    if not inside_W:
        # lower bound on M'' implied by I_{delta_2} <= 0 and the radius r(delta_2)
        r2 = geometry.r(hi) ** 2
        bound = 2 * p.a * (hi - 1) * r2
        ddM = -2.0 * traj["I"]
        detail["ddM_bound"] = bound
        detail["ddM_margin"] = float(np.min(ddM - bound))
    return CheckResult(passed=violations == 0, worst_margin=worst, detail=detail)


def escalation_violations(traj: TrajectoryRecord, norm_cap: float) -> int:
    """Snapshots where ``||grad u||`` drops after exceeding norm_cap/10 with I < 0."""
    g = np.sqrt(traj["h1_sq"])
    I = traj["I"]
    started = False
    bad = 0
    for k in range(1, len(g)):
        if not started and g[k - 1] > norm_cap / 10 and I[k - 1] < 0:
            started = True
        if started and g[k] < g[k - 1]:
            bad += 1
    return bad


# -- export ----------------------------------------------------------------

def trajectory_csv(traj: TrajectoryRecord) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for i in range(len(traj)):
        writer.writerow([repr(float(traj[k][i])) for k in COLUMNS])
    return buf.getvalue()


def write_trajectory(traj: TrajectoryRecord, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(trajectory_csv(traj))


def read_trajectory(path) -> dict:
    """Load a trajectory file; the header must match the column contract."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != COLUMNS:
            raise ConfigurationError(f"trajectory header mismatch: {header}")
        rows = [[float(x) for x in row] for row in reader]
    arr = np.asarray(rows, dtype=float).reshape(-1, len(COLUMNS))
    return {k: arr[:, i] for i, k in enumerate(COLUMNS)}
