import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kirchwell import functionals as fn
from kirchwell.domain import default_domain
from kirchwell.errors import ConfigurationError, DomainError
from kirchwell.functionals import ModelParams

from oracles import quad

PI = math.pi
# closed forms for u = sin x on (0, pi), a = b = 1, q = 5
G_SIN = PI / 2
P_SIN = 5 * PI / 16
J_SIN = PI / 4 + PI ** 2 / 16 - 5 * PI / 96
I_SIN = PI / 2 + PI ** 2 / 4 - 5 * PI / 16
I_HALF_SIN = 0.5 * (PI / 2 + PI ** 2 / 4) - 5 * PI / 16


def lam_star_oracle():
    # (5 pi/16) y^2 - (pi^2/4) y - pi/2 = 0 with y = lam^2
    A, B, C = P_SIN, -(G_SIN ** 2), -G_SIN
    y = (-B + math.sqrt(B * B - 4 * A * C)) / (2 * A)
    return math.sqrt(y)


def test_params_validation():
    for bad in [dict(a=0), dict(b=-1), dict(q=3), dict(a=float("nan"))]:
        with pytest.raises(ConfigurationError):
            ModelParams(**bad)


def test_closed_form_values_frozen():
    # independent adaptive quadrature of the integrals behind the closed forms
    G = quad(lambda x: math.cos(x) ** 2)
    P = quad(lambda x: math.sin(x) ** 6)
    assert 0.5 * G + 0.25 * G * G - P / 6 == pytest.approx(1.2386238, abs=1e-7)
    assert G + G * G - P == pytest.approx(3.0564497, abs=1e-7)
    assert 0.5 * (G + G * G) - P == pytest.approx(1.0373510, abs=1e-7)
    assert lam_star_oracle() == pytest.approx(1.7434593, abs=1e-7)


def test_energy_and_nehari_on_sine(dom, params, sin_coeffs):
    assert fn.energy_J(dom, sin_coeffs, params) == pytest.approx(J_SIN, rel=1e-8)
    assert fn.nehari_I(dom, sin_coeffs, params) == pytest.approx(I_SIN, rel=1e-8)
    assert fn.nehari_I_delta(dom, sin_coeffs, 0.5, params) == pytest.approx(I_HALF_SIN, rel=1e-8)
    assert fn.nehari_I_delta(dom, sin_coeffs, 1.0, params) == fn.nehari_I(dom, sin_coeffs, params)


def test_zero_field(dom, params):
    z = dom.zeros()
    assert fn.energy_J(dom, z, params) == 0
    assert fn.nehari_I(dom, z, params) == 0
    assert not np.any(fn.apply_nonlocal_L(dom, z, params))
    with pytest.raises(DomainError):
        fn.fiber_lambda_star(dom, z, params)
    with pytest.raises(DomainError):
        fn.fiber_lambda_delta(dom, z, 0.5, params)


def test_delta_must_be_positive(dom, params, sin_coeffs):
    with pytest.raises(DomainError):
        fn.nehari_I_delta(dom, sin_coeffs, 0.0, params)
    with pytest.raises(DomainError):
        fn.fiber_lambda_delta(dom, sin_coeffs, -1.0, params)


def test_lambda_star_matches_quadratic(dom, params, sin_coeffs):
    lam = fn.fiber_lambda_star(dom, sin_coeffs, params)
    assert lam == pytest.approx(lam_star_oracle(), rel=1e-8)
    assert abs(fn.nehari_I(dom, lam * sin_coeffs, params)) <= 1e-10


def test_lambda_star_is_one_on_nehari_set(dom, params, sin_coeffs):
    u = fn.fiber_lambda_star(dom, sin_coeffs, params) * sin_coeffs
    assert fn.fiber_lambda_star(dom, u, params) == pytest.approx(1.0, rel=1e-11)


def test_lambda_delta(dom, params, sin_coeffs):
    lam1 = fn.fiber_lambda_delta(dom, sin_coeffs, 1.0, params)
    lam_half = fn.fiber_lambda_delta(dom, sin_coeffs, 0.5, params)
    assert lam1 == fn.fiber_lambda_star(dom, sin_coeffs, params)
    assert lam_half < lam1
    assert abs(fn.nehari_I_delta(dom, lam_half * sin_coeffs, 0.5, params)) <= 1e-10
    # dense scan oracle: the sign change of I_delta along the ray
    grid = np.linspace(0.5, 2.0, 150001)
    vals = 0.5 * (grid ** 2 * G_SIN + grid ** 4 * G_SIN ** 2) - grid ** 6 * P_SIN
    scan = grid[np.argmax(vals < 0)]
    assert abs(scan - lam_half) <= 2e-5


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(0.2, 3.0))
def test_fibering_shape(seed, delta):
    dom = default_domain(16)
    p = ModelParams()
    c = np.random.default_rng(seed).standard_normal(dom.n) / np.arange(1, 17)
    lam = fn.fiber_lambda_delta(dom, c, delta, p)
    G, P = fn.norms(dom, c, p)
    assert abs(fn.I_scalar(lam * lam * G, lam ** 6 * P, p, delta)) <= 1e-9 * delta * (1 + lam ** 4 * G * G)
    ls = fn.fiber_lambda_star(dom, c, p)
    grid = ls * np.geomspace(1e-3, 10, 400)
    J = fn.fiber_J(dom, c, p, grid)
    before = grid < ls
    assert np.all(np.diff(J[before]) > 0)
    assert np.all(np.diff(J[~before]) < 0)
    assert 0 < J[0] < 1e-4 * J.max()
    assert J[-1] < 0


def test_large_scaling_negative_energy(dom, params, sin_coeffs):
    assert fn.energy_J(dom, 10 * sin_coeffs, params) < 0


def test_nonlocal_operator(dom, params):
    e1 = dom.mode(0)
    out = fn.apply_nonlocal_L(dom, e1, params)
    assert np.allclose(out, 2 * e1)
    # pairing by quadrature: <L e1, e1> = (a + b) int (phi_1')^2
    assert fn.pairing(dom, out, e1) == pytest.approx(2 * quad(lambda s: 2 / PI * math.cos(s) ** 2))
    assert not np.allclose(fn.apply_nonlocal_L(dom, 2 * e1, params), 2 * out)


def test_monotonicity_gap_sine(dom, params, sin_coeffs):
    assert fn.monotonicity_gap(dom, sin_coeffs, sin_coeffs, params) == 0
    gap = fn.monotonicity_gap(dom, sin_coeffs, dom.zeros(), params)
    assert gap == pytest.approx(PI / 2 + PI ** 2 / 4, rel=1e-12)
    assert gap == pytest.approx(4.0381974, abs=1e-7)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_strong_monotonicity(seed):
    dom = default_domain(16)
    p = ModelParams()
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(dom.n) * rng.uniform(0.01, 5)
    v = rng.standard_normal(dom.n) * rng.uniform(0.01, 5)
    gap = fn.monotonicity_gap(dom, u, v, p)
    assert gap >= p.a * fn.gradient_sq(dom, u - v) - 1e-10 * (1 + abs(gap))
    assert gap >= fn.monotonicity_floor(dom, u, v, p) - 1e-9 * (1 + abs(gap))


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(0.5, 2.0), st.floats(0.5, 2.0),
       st.floats(3.5, 9.0))
def test_energy_identity_through_nehari(G, P, a, b, q):
    p = ModelParams(a, b, q)
    J = fn.J_scalar(G, P, p)
    assert fn.J_via_nehari(G, fn.I_scalar(G, P, p), p) == pytest.approx(J, rel=1e-10, abs=1e-10 * (G * G + P))


def test_source_term_matches_galerkin_projection(dom, params, sin_coeffs):
    # <|u|^4 u, phi_1> for u = sin x is int sin^6 * sqrt(2/pi)
    f = fn.source_term(dom, sin_coeffs, params)
    assert f[0] == pytest.approx(math.sqrt(2 / PI) * 5 * PI / 16, rel=1e-13)


def test_snapshot(dom, params, sin_coeffs):
    s = fn.snapshot(dom, sin_coeffs, params, t=0.5)
    assert s.t == 0.5 and s.J == pytest.approx(J_SIN, rel=1e-12)
    assert s.h1_sq == pytest.approx(G_SIN) and s.lqp1 == pytest.approx(P_SIN)
