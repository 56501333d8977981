"""Box domains with homogeneous Dirichlet data and their sine eigenbasis.

A field is stored as its coefficient vector against the L2-orthonormal
Dirichlet eigenfunctions, ordered by ascending eigenvalue.  Nodal values
live on the interior grid of the type-I discrete sine transform, where the
trapezoid rule integrates trigonometric polynomials of degree below
2 (n_quad + 1) exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
import scipy.fft

from kirchwell.errors import ConfigurationError

#: A field is just its coefficient vector; see module docstring.
SpectralField = np.ndarray


@dataclass(frozen=True)
class DomainSpec:
    """Interval ``(0, L)`` or rectangle ``(0, Lx) x (0, Ly)``.

    ``n_modes`` and ``n_quad`` are per axis.  When ``n_quad`` is omitted it
    defaults to ``3 * n_modes + 2``, which makes the quadrature exact for
    sextic products of band-limited fields (the ``q = 5`` energy integrand).
    """

    kind: str = "interval"
    lengths: Tuple[float, ...] = (np.pi,)
    n_modes: int = 64
    n_quad: int | None = None

    def __post_init__(self):
        if self.kind not in ("interval", "rectangle"):
            raise ConfigurationError(f"unknown domain kind {self.kind!r}")
        dim = 1 if self.kind == "interval" else 2
        lengths = tuple(float(x) for x in np.atleast_1d(self.lengths))
        if len(lengths) != dim:
            raise ConfigurationError(
                f"{self.kind} needs {dim} length(s), got {len(lengths)}")
        if not all(np.isfinite(x) and x > 0 for x in lengths):
            raise ConfigurationError(f"lengths must be positive, got {lengths}")
        object.__setattr__(self, "lengths", lengths)
        if int(self.n_modes) != self.n_modes or self.n_modes < 1:
            raise ConfigurationError(f"n_modes must be a positive integer, got {self.n_modes}")
        object.__setattr__(self, "n_modes", int(self.n_modes))
        n_quad = 3 * self.n_modes + 2 if self.n_quad is None else self.n_quad
        if int(n_quad) != n_quad or n_quad < 2 * self.n_modes + 2:
            raise ConfigurationError(
                f"n_quad must be an integer >= 2*n_modes+2 = {2 * self.n_modes + 2}, "
                f"got {n_quad}")
        object.__setattr__(self, "n_quad", int(n_quad))

    @property
    def dim(self) -> int:
        return len(self.lengths)


@dataclass(frozen=True, eq=False)
class Domain:
    """A prepared domain.  Immutable; share freely."""

    spec: DomainSpec
    eigenvalues: np.ndarray
    # per-axis mode numbers of each flat coefficient (shape (n, dim))
    mode_index: np.ndarray
    nodes: Tuple[np.ndarray, ...]
    weight: float
    _scatter: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def n(self) -> int:
        """Total number of coefficients."""
        return self.eigenvalues.size

    @property
    def measure(self) -> float:
        return float(np.prod(self.spec.lengths))

    @property
    def lambda1(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def grid_shape(self) -> Tuple[int, ...]:
        return (self.spec.n_quad,) * self.dim

    def zeros(self) -> SpectralField:
        return np.zeros(self.n)

    def mode(self, k: int) -> SpectralField:
        """Unit coefficient vector of the k-th eigenfunction (0-based, sorted)."""
        c = self.zeros()
        c[k] = 1.0
        return c

    def check(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        if c.shape != (self.n,):
            raise ConfigurationError(f"expected {self.n} coefficients, got shape {c.shape}")
        return c

    # -- transforms -------------------------------------------------------
    def synthesize(self, c: SpectralField) -> np.ndarray:
        """Nodal values on the quadrature grid."""
        c = self.check(c)
        N = self.spec.n_quad
        full = np.zeros(self.grid_shape)
        full[self._scatter] = c
        scale = 1.0
        for length in self.spec.lengths:
            scale *= 0.5 * np.sqrt(2.0 / length)
        return scale * scipy.fft.dstn(full, type=1, axes=tuple(range(self.dim)))

    def analyze(self, values) -> SpectralField:
        """Project nodal values onto the retained modes (discrete L2 projection)."""
        values = np.asarray(values, dtype=float)
        if values.shape != self.grid_shape:
            raise ConfigurationError(
                f"expected nodal array of shape {self.grid_shape}, got {values.shape}")
        N = self.spec.n_quad
        scale = 1.0
        for length in self.spec.lengths:
            scale *= length / (N + 1) * 0.5 * np.sqrt(2.0 / length)
        full = scipy.fft.dstn(values, type=1, axes=tuple(range(self.dim)))
        return scale * full[self._scatter]

    def integrate(self, values) -> float:
        """Quadrature of nodal values over the domain."""
        return float(self.weight * np.sum(values))

    # -- norms ------------------------------------------------------------
    def norm_l2(self, c) -> float:
        c = self.check(c)
        return float(np.sqrt(c @ c))

    def norm_h1(self, c) -> float:
        """Dirichlet seminorm ||grad u||_2, the H_0^1 norm used throughout."""
        c = self.check(c)
        return float(np.sqrt(np.sum(self.eigenvalues * c * c)))

    def lp_power(self, c, p: float) -> float:
        """``||u||_p^p`` by quadrature."""
        if p < 1:
            raise ConfigurationError(f"p must be >= 1, got {p}")
        return self.integrate(np.abs(self.synthesize(c)) ** p)

    def norm_lp(self, c, p: float) -> float:
        return self.lp_power(c, p) ** (1.0 / p)

    def node_grid(self) -> Tuple[np.ndarray, ...]:
        """Broadcastable coordinate arrays matching :meth:`synthesize` output."""
        return tuple(np.meshgrid(*self.nodes, indexing="ij"))


def build_domain(spec: DomainSpec | None = None, **kwargs) -> Domain:
    """Prepare eigenvalues, quadrature nodes and the coefficient ordering.

    >>> dom = build_domain(DomainSpec("interval", (np.pi,), n_modes=4))
    >>> dom.eigenvalues
    array([ 1.,  4.,  9., 16.])
    """
    if spec is None:
        spec = DomainSpec(**kwargs)
    elif kwargs:
        raise ConfigurationError("pass either a DomainSpec or keyword fields, not both")
    K, N = spec.n_modes, spec.n_quad
    k = np.arange(1, K + 1)
    axis_eigs = [(np.pi / length) ** 2 * (k * k) for length in spec.lengths]
    grids = np.meshgrid(*[k] * spec.dim, indexing="ij")
    modes = np.stack([g.ravel() for g in grids], axis=1)
    eigs = sum(axis_eigs[d][modes[:, d] - 1] for d in range(spec.dim))
    # stable sort keeps lexicographic order among degenerate eigenvalues
    order = np.argsort(eigs, kind="stable")
    modes = modes[order]
    eigs = np.asarray(eigs)[order]
    scatter = tuple(modes[:, d] - 1 for d in range(spec.dim))
    nodes = tuple(np.arange(1, N + 1) * length / (N + 1) for length in spec.lengths)
    weight = float(np.prod([length / (N + 1) for length in spec.lengths]))
    return Domain(spec=spec, eigenvalues=eigs, mode_index=modes, nodes=nodes,
                  weight=weight, _scatter=scatter)


def default_domain(n_modes: int = 64) -> Domain:
    """The reference configuration: ``(0, pi)`` with 64 modes."""
    return build_domain(DomainSpec("interval", (np.pi,), n_modes=n_modes))


def sine_coefficients(domain: Domain, func) -> SpectralField:
    """Project a callable ``func(*coords)`` onto the retained modes."""
    return domain.analyze(func(*domain.node_grid()))
