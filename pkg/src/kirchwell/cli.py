"""Command-line entry point: ``kirchwell <command> [--config PATH] ...``.

Exit codes: 0 success, 2 configuration or precondition error, 3 invalid
sweep bracket, 4 constructor failure, 5 property-suite failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from kirchwell import classify as cl
from kirchwell import dynamics as dy
from kirchwell import suites
from kirchwell import wellgeometry as wg
from kirchwell.config import RunConfig, _energy, load_config, resolve_energy, with_overrides
from kirchwell.domain import Domain, DomainSpec, build_domain
from kirchwell.errors import ConfigurationError, DiagnosticError, DomainError, NotApplicable

REPORT_FORMAT = "kirchwell-report"
REPORT_VERSION = 1
DATUM_HEADER = "# kirchwell-datum v1"

EXIT_OK, EXIT_CONFIG, EXIT_BRACKET, EXIT_CONSTRUCT, EXIT_SUITE = 0, 2, 3, 4, 5


# -- serialisation --------------------------------------------------------

def _plain(obj):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def write_report(path: Path, command: str, body: dict) -> None:
    doc = {"format": REPORT_FORMAT, "version": REPORT_VERSION, "command": command, **body}
    path.write_text(json.dumps(_plain(doc), indent=2, sort_keys=True) + "\n")


def write_datum(path: Path, spec: DomainSpec, coeffs) -> None:
    lines = [DATUM_HEADER, f"# domain.kind = {spec.kind}",
             "# domain.lengths = " + " ".join(repr(x) for x in spec.lengths),
             f"# domain.n_modes = {spec.n_modes}", f"# domain.n_quad = {spec.n_quad}"]
    lines += [repr(float(c)) for c in coeffs]
    path.write_text("\n".join(lines) + "\n")


def read_datum(path):
    """``(DomainSpec, coefficients)`` from a datum file."""
    header = {}
    values = []
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
        if first != DATUM_HEADER:
            raise ConfigurationError(f"{path}: not a datum file (header {first!r})")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                header[key.strip()] = value.strip()
            elif line:
                try:
                    values.append(float(line))
                except ValueError:
                    raise ConfigurationError(f"{path}:{lineno}: bad coefficient {line!r}") from None
    try:
        spec = DomainSpec(header["domain.kind"],
                          tuple(float(x) for x in header["domain.lengths"].split()),
                          int(header["domain.n_modes"]), int(header["domain.n_quad"]))
    except KeyError as exc:
        raise ConfigurationError(f"{path}: missing header field {exc}") from None
    return spec, np.asarray(values, dtype=float)


# -- shared set-up --------------------------------------------------------

class Session:
    def __init__(self, cfg: RunConfig, with_curve: bool = False):
        self.cfg = cfg
        self.domain: Domain = build_domain(cfg.domain)
        self.params = cfg.model
        self.geometry = wg.analyze_geometry(self.domain, self.params, restarts=cfg.restarts,
                                            seed=cfg.seed, with_curve=with_curve,
                                            refine=cfg.refine)
        self.out = Path(cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)

    def shape(self, name: str):
        if name == "phi1":
            return self.domain.mode(0)
        u = self.geometry.minimizer
        return u / self.domain.norm_l2(u)

    def datum(self):
        """``(u0, description)`` from the datum section."""
        ds = self.cfg.datum
        dom, p, g = self.domain, self.params, self.geometry
        phi1 = dom.mode(0)
        if ds.kind == "preset":
            name = ds.preset
            if name == "small-groundstate":
                u = 0.1 * g.minimizer
            elif name == "standard-decay":
                u = 0.1 * phi1
            elif name == "negative-energy":
                u = 3.0 * phi1
            elif name == "subcritical-descending":
                u = cl.scale_to_energy(dom, phi1, 0.5 * g.d_est, p, "descending") * phi1
            elif name in ("critical-ascending", "critical-descending"):
                branch = name.split("-")[1]
                u = cl.scale_to_energy(dom, phi1, g.d_est, p, branch) * phi1
            elif name == "supercritical-small":
                k = min(dom.n, 10) - 1
                u = cl.scale_to_energy(dom, dom.mode(k), 1.5 * g.d_est, p, "ascending") * dom.mode(k)
            else:
                u = cl.construct_high_energy(10 * g.d_est, dom, p, g).u
            desc = {"kind": "preset", "preset": name}
        elif ds.kind == "coefficients":
            if len(ds.coefficients) > dom.n:
                raise ConfigurationError(f"{len(ds.coefficients)} coefficients for {dom.n} modes")
            u = dom.zeros()
            u[:len(ds.coefficients)] = ds.coefficients
            desc = {"kind": "coefficients", "count": len(ds.coefficients)}
        elif ds.kind == "mode-mix":
            u = dom.zeros()
            for k, w in ds.weights:
                if k > dom.n:
                    raise ConfigurationError(f"mode {k} exceeds the {dom.n} retained modes")
                u[k - 1] += w
            desc = {"kind": "mode-mix", "weights": [list(kw) for kw in ds.weights]}
        elif ds.kind == "scaled-shape":
            shape = self.shape(ds.shape)
            E = resolve_energy(ds.energy, g.d_est)
            mu = cl.scale_to_energy(dom, shape, E, p, ds.branch)
            u = mu * shape
            desc = {"kind": "scaled-shape", "shape": ds.shape, "energy": E,
                    "branch": ds.branch, "mu": mu}
        else:
            spec, coeffs = read_datum(ds.path)
            if spec != dom.spec:
                raise ConfigurationError(f"{ds.path}: datum domain {spec} differs from config")
            u = coeffs
            desc = {"kind": "file", "path": ds.path}
        desc["scale"] = ds.scale
        return ds.scale * np.asarray(u, dtype=float), desc


def _config_echo(cfg: RunConfig) -> dict:
    return {"domain": {"kind": cfg.domain.kind, "lengths": list(cfg.domain.lengths),
                       "n_modes": cfg.domain.n_modes, "n_quad": cfg.domain.n_quad},
            "model": {"a": cfg.model.a, "b": cfg.model.b, "q": cfg.model.q},
            "seed": cfg.seed, "restarts": cfg.restarts}


def _outcome_dict(outcome) -> dict:
    return dict(vars(outcome))


def run_checks(traj: dy.TrajectoryRecord, geometry: wg.WellGeometry, domain: Domain) -> dict:
    """Every trajectory check whose hypotheses hold."""
    checks = {"energy_residual": dy.energy_residual(traj)}
    J0, I0 = traj.J0, float(traj["I"][0])
    if 0 < J0 < geometry.d_est and I0 != 0:
        roots = wg.find_delta_roots(J0, geometry)
        checks["delta_roots"] = list(roots)
        inv = dy.well_invariance_check(traj, roots, geometry)
        checks["invariance"] = {"passed": inv.passed, "worst_margin": inv.worst_margin,
                                "well": inv.detail["well"],
                                "violations": inv.detail["violations"]}
        try:
            dec = dy.decay_bound_check(traj, roots[0], traj.params, domain.lambda1)
            checks["decay_bound"] = {"passed": dec.passed, "worst_margin": dec.worst_margin,
                                     "rate": dec.detail["rate"]}
        except NotApplicable:
            pass
    if traj.outcome.kind == "BlowUp":
        conc = dy.concavity_diagnostics(traj, traj.params)
        checks["concavity_onset"] = conc.onset
    return checks


# -- commands -------------------------------------------------------------

def cmd_analyze(cfg: RunConfig) -> int:
    s = Session(cfg, with_curve=True)
    g = s.geometry
    body = {"config": _config_echo(cfg), "geometry": g.to_dict(),
            "curve_shape_violation": wg.curve_shape_violation(g.d_curve)}
    write_report(s.out / "geometry.json", "analyze", body)
    print(f"S_est={g.S_est:.12g} d_est={g.d_est:.12g} d_lower={g.d_lower:.12g} "
          f"delta_tilde={g.delta_tilde:.12g}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    s = Session(cfg)
    u0, desc = s.datum()
    cls = cl.classify_initial(s.domain, u0, s.params, s.geometry, margin=cfg.margin,
                              n_samples=cfg.n_samples)
    traj = dy.integrate(s.domain, u0, s.params, cfg.solver)
    cls.observed = traj.outcome.kind
    dy.write_trajectory(traj, s.out / "trajectory.csv")
    body = {"config": _config_echo(cfg), "datum": desc, "classification": cls.to_dict(),
            "outcome": _outcome_dict(traj.outcome), "n_steps": traj.n_steps,
            "n_rejected": traj.n_rejected, "checks": run_checks(traj, s.geometry, s.domain),
            "d_est": s.geometry.d_est}
    write_report(s.out / "report.json", "simulate", body)
    print(f"regime={cls.regime} prediction={cls.prediction} observed={cls.observed}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    s = Session(cfg)
    shape = s.shape(cfg.datum.shape)
    lo = cfg.mu_lo if cfg.mu_lo is not None else 1.0
    hi = cfg.mu_hi if cfg.mu_hi is not None else 3.0
    try:
        res = cl.threshold_sweep(s.domain, shape, s.params, s.geometry, cfg.solver, lo, hi)
    except cl.BracketError as exc:
        print(f"error: {exc}", file=sys.stderr)
        write_report(s.out / "sweep.json", "sweep",
                     {"error": str(exc), "mu_lo": lo, "mu_hi": hi,
                      "lo_outcome": exc.lo_outcome, "hi_outcome": exc.hi_outcome})
        return EXIT_BRACKET
    lam, mu_zero = cl.ray_landmarks(s.domain, shape, s.params)
    body = {"config": _config_echo(cfg), "shape": cfg.datum.shape, **res.to_dict(),
            "landmarks": {"mu_nehari": lam, "mu_zero_energy": mu_zero},
            "d_est": s.geometry.d_est}
    write_report(s.out / "sweep.json", "sweep", body)
    print(f"mu_star={res.mu_star:.8g} width={res.rel_width:.2e} probes={len(res.probes)}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, suite: str) -> int:
    s = Session(cfg)
    ctx = suites.Context(s.domain, s.params, s.geometry, seed=cfg.seed)
    results = suites.run_suite(suite, ctx)
    for r in results:
        print(r.line())
    summ = suites.summary(results)
    write_report(s.out / "verify.json", "verify", {"suite": suite, **summ})
    return EXIT_OK if summ["passed"] else EXIT_SUITE


def cmd_construct_blowup(cfg: RunConfig, simulate: bool) -> int:
    s = Session(cfg)
    g = s.geometry
    M = resolve_energy(cfg.m_target or "10d", g.d_est)
    if not M > g.d_est:
        print(f"error: need M_target > d_est = {g.d_est:.12g}, got {M:.12g}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        datum = cl.construct_high_energy(M, s.domain, s.params, g)
    except DiagnosticError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCT
    write_datum(s.out / "datum.txt", s.domain.spec, datum.u)
    cls = cl.classify_initial(s.domain, datum.u, s.params, g, margin=cfg.margin,
                              n_samples=cfg.n_samples)
    body = {"config": _config_echo(cfg), "construction": datum.summary(),
            "classification": cls.to_dict(), "d_est": g.d_est}
    if simulate:
        traj = dy.integrate(s.domain, datum.u, s.params, cfg.solver)
        cls.observed = traj.outcome.kind
        body["classification"] = cls.to_dict()
        body["outcome"] = _outcome_dict(traj.outcome)
        body["checks"] = run_checks(traj, g, s.domain)
        dy.write_trajectory(traj, s.out / "trajectory.csv")
    write_report(s.out / "construct.json", "construct-blowup", body)
    print(f"J(u_M)={datum.J:.12g} target={M:.12g} predicate={datum.predicate} "
          f"leakage={datum.leakage:.3e}")
    return EXIT_OK


# -- argument parsing -----------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kirchwell", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value configuration file")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", metavar="DIR", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="well geometry report")
    sub.add_parser("simulate", parents=[common], help="classify and integrate a datum")
    sw = sub.add_parser("sweep", parents=[common], help="threshold bisection along a ray")
    sw.add_argument("--mu-lo", type=float)
    sw.add_argument("--mu-hi", type=float)
    ve = sub.add_parser("verify", parents=[common], help="run property suites")
    ve.add_argument("--suite", choices=suites.SUITES, default="lemmas")
    cb = sub.add_parser("construct-blowup", parents=[common],
                        help="build a high-energy blow-up datum")
    cb.add_argument("--m-target", help="target energy, a number or a multiple like 10d")
    cb.add_argument("--simulate-after-construct", action="store_true")
    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        m_target = getattr(args, "m_target", None)
        if m_target is not None:
            try:
                _energy(m_target)
            except ValueError as exc:
                raise ConfigurationError(f"--m-target: {exc}") from None
        cfg = with_overrides(cfg, seed=args.seed, out=args.out,
                             mu_lo=getattr(args, "mu_lo", None),
                             mu_hi=getattr(args, "mu_hi", None),
                             m_target=m_target)
        if args.command == "analyze":
            return cmd_analyze(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, args.suite)
        return cmd_construct_blowup(cfg, args.simulate_after_construct)
    except (ConfigurationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
