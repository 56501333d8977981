"""Run configuration: flat ``key = value`` text with dotted section prefixes.

::

    # comments start with '#'
    seed = 0
    domain.kind = interval
    domain.lengths = 3.141592653589793
    domain.n_modes = 64
    model.a = 1
    model.b = 1
    model.q = 5
    solver.rel_tol = 1e-6
    datum.kind = preset
    datum.preset = small-groundstate

Every key has a default, so an empty file is a valid configuration.
Unknown keys and malformed values are rejected with the offending line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Dict, Optional, Tuple

from kirchwell.domain import DomainSpec
from kirchwell.dynamics import SolverControls
from kirchwell.errors import ConfigurationError
from kirchwell.functionals import ModelParams

DATUM_KINDS = ("preset", "coefficients", "mode-mix", "scaled-shape", "file")
PRESETS = ("small-groundstate", "standard-decay", "negative-energy",
           "subcritical-descending", "critical-ascending", "critical-descending",
           "supercritical-small", "high-energy")
SHAPES = ("phi1", "groundstate")


@dataclass(frozen=True)
class DatumSpec:
    """How to build ``u0``.

    ``preset`` names a standard experiment.  ``coefficients`` lists the
    coefficient vector (missing trailing entries are zero).  ``mode-mix``
    gives ``weights`` as ``mode:weight`` pairs with 1-based mode numbers.
    ``scaled-shape`` scales ``shape`` to ``energy`` on ``branch``; the
    energy may be a number or a multiple of the depth such as ``0.5d``.
    ``file`` loads a datum file.  ``scale`` multiplies the result.
    """

    kind: str = "preset"
    preset: str = "small-groundstate"
    coefficients: Tuple[float, ...] = ()
    weights: Tuple[Tuple[int, float], ...] = ()
    shape: str = "phi1"
    energy: str = "1d"
    branch: str = "ascending"
    path: str = ""
    scale: float = 1.0


@dataclass(frozen=True)
class RunConfig:
    domain: DomainSpec = field(default_factory=DomainSpec)
    model: ModelParams = field(default_factory=ModelParams)
    solver: SolverControls = field(default_factory=SolverControls)
    datum: DatumSpec = field(default_factory=DatumSpec)
    seed: int = 0
    out: str = "kirchwell-out"
    restarts: int = 4
    refine: bool = False
    n_samples: int = 2000
    margin: float = 0.1
    mu_lo: Optional[float] = None
    mu_hi: Optional[float] = None
    m_target: Optional[str] = None


def _float(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError(f"non-finite number {text!r}")
    return v


def _int(text: str) -> int:
    v = float(text)
    if v != int(v):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(v)


def _bool(text: str) -> bool:
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _floats(text: str) -> Tuple[float, ...]:
    return tuple(_float(x) for x in text.replace(",", " ").split())


def _weights(text: str) -> Tuple[Tuple[int, float], ...]:
    out = []
    for item in text.replace(",", " ").split():
        k, _, w = item.partition(":")
        if not w:
            raise ValueError(f"expected mode:weight, got {item!r}")
        k = _int(k)
        if k < 1:
            raise ValueError(f"mode numbers start at 1, got {k}")
        out.append((k, _float(w)))
    return tuple(out)


def _choice(options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text
    return parse


def _energy(text: str) -> str:
    t = text.strip()
    body = t[:-1] if t.endswith("d") else t
    _float(body or "1")
    return t


# (section, field) -> parser
_PARSERS = {
    ("domain", "kind"): _choice(("interval", "rectangle")),
    ("domain", "lengths"): _floats,
    ("domain", "n_modes"): _int,
    ("domain", "n_quad"): _int,
    ("model", "a"): _float,
    ("model", "b"): _float,
    ("model", "q"): _float,
    ("datum", "kind"): _choice(DATUM_KINDS),
    ("datum", "preset"): _choice(PRESETS),
    ("datum", "coefficients"): _floats,
    ("datum", "weights"): _weights,
    ("datum", "shape"): _choice(SHAPES),
    ("datum", "energy"): _energy,
    ("datum", "branch"): _choice(("ascending", "descending")),
    ("datum", "path"): str,
    ("datum", "scale"): _float,
    ("", "seed"): _int,
    ("", "out"): str,
    ("geometry", "restarts"): _int,
    ("geometry", "refine"): _bool,
    ("geometry", "n_samples"): _int,
    ("classify", "margin"): _float,
    ("sweep", "mu_lo"): _float,
    ("sweep", "mu_hi"): _float,
    ("construct", "m_target"): _energy,
}
for f in fields(SolverControls):
    _PARSERS[("solver", f.name)] = {bool: _bool, int: _int}.get(type(f.default), _float)

_TOP = {("geometry", "restarts"): "restarts", ("geometry", "refine"): "refine",
        ("geometry", "n_samples"): "n_samples", ("classify", "margin"): "margin",
        ("sweep", "mu_lo"): "mu_lo", ("sweep", "mu_hi"): "mu_hi",
        ("construct", "m_target"): "m_target", ("", "seed"): "seed", ("", "out"): "out"}


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse config text; errors name ``source:line``."""
    sections: Dict[str, dict] = {"domain": {}, "model": {}, "solver": {}, "datum": {}}
    top: dict = {}
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigurationError(f"{where}: expected 'key = value', got {raw.strip()!r}")
        key, value = key.strip(), value.strip()
        if key in seen:
            raise ConfigurationError(f"{where}: duplicate key {key!r} (first on line {seen[key]})")
        seen[key] = lineno
        section, _, name = key.rpartition(".")
        parser = _PARSERS.get((section, name))
        if parser is None:
            raise ConfigurationError(f"{where}: unknown key {key!r}")
        try:
            parsed = parser(value)
        except ValueError as exc:
            raise ConfigurationError(f"{where}: bad value for {key!r}: {exc}") from None
        if (section, name) in _TOP:
            top[_TOP[(section, name)]] = parsed
        else:
            sections[section][name] = parsed
    try:
        dom = sections["domain"]
        if "kind" in dom and "lengths" not in dom and dom["kind"] == "rectangle":
            dom["lengths"] = (math.pi, math.pi)
        cfg = RunConfig(domain=DomainSpec(**dom), model=ModelParams(**sections["model"]),
                        solver=SolverControls(**sections["solver"]),
                        datum=DatumSpec(**sections["datum"]), **top)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{source}: {exc}") from None
    _check(cfg, source)
    return cfg


def _check(cfg: RunConfig, source: str) -> None:
    if cfg.restarts < 0 or cfg.n_samples < 1:
        raise ConfigurationError(f"{source}: geometry.restarts >= 0 and n_samples >= 1 required")
    if not 0 <= cfg.margin < 1:
        raise ConfigurationError(f"{source}: classify.margin must lie in [0, 1)")
    if cfg.datum.kind == "file" and not cfg.datum.path:
        raise ConfigurationError(f"{source}: datum.kind = file needs datum.path")


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, source=str(path))


def with_overrides(cfg: RunConfig, **kwargs) -> RunConfig:
    """Apply command-line overrides that are not None."""
    return replace(cfg, **{k: v for k, v in kwargs.items() if v is not None})


def resolve_energy(text: str, d_est: float) -> float:
    """``'0.5d'`` -> ``0.5 * d_est``; plain numbers pass through."""
    t = text.strip()
    if t.endswith("d"):
        return (float(t[:-1]) if t[:-1] else 1.0) * d_est
    return float(t)
