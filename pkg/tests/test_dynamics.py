import math

import numpy as np
import pytest

from kirchwell import dynamics as dy
from kirchwell import functionals as fn
from kirchwell import wellgeometry as wg
from kirchwell.domain import default_domain
from kirchwell.errors import ConfigurationError, NotApplicable


@pytest.fixture(scope="module")
def blowup_run(dom, params):
    return dy.integrate(dom, 3.0 * dom.mode(0), params)


def test_controls_validation():
    with pytest.raises(ConfigurationError):
        dy.SolverControls(dt_min=1e-2, dt_init=1e-3)
    with pytest.raises(ConfigurationError):
        dy.SolverControls(rel_tol=0)
    with pytest.raises(ConfigurationError):
        dy.SolverControls(snapshot_stride=0)


def test_zero_field_is_equilibrium(dom, params):
    u, err = dy.step(dom, dom.zeros(), 1e-2, params)
    assert not np.any(u) and err == 0
    traj = dy.integrate(dom, dom.zeros(), params)
    assert traj.outcome.kind == "GlobalDecay" and traj.n_steps == 0


def test_step_rejects_bad_dt(dom, params):
    with pytest.raises(ConfigurationError):
        dy.step(dom, dom.mode(0), 0.0, params)


def test_linear_step_frozen_coefficient(dom, params):
    e1 = dom.mode(0)
    dt = 0.37
    out = dy.exponential_euler(dom, e1, dt, params, with_source=False)
    assert out[0] == pytest.approx(math.exp(-(1 + 1.0) * dt), rel=1e-15)
    assert not np.any(out[1:])


def test_small_amplitude_follows_linearisation(dom, params):
    amp = 1e-3
    traj = dy.integrate(dom, amp * dom.mode(0), params,
                        dy.SolverControls(rel_tol=1e-9, t_max=1.0))
    t = traj["t"]
    ref = amp * np.exp(-params.a * dom.lambda1 * t)
    assert np.max(np.abs(np.sqrt(traj["l2_sq"]) / ref - 1)) <= 1e-4
    assert t[-1] == pytest.approx(1.0)


def test_fixed_step_first_order(params):
    dom = default_domain(16)
    u0 = 1.2 * dom.mode(0) + 0.3 * dom.mode(2)

    def final(dt):
        c = dy.SolverControls(dt_init=dt, dt_min=dt / 10, dt_max=dt, t_max=0.2,
                              adaptive=False)
        return dy.integrate(dom, u0, params, c).u_final

    ref = final(2e-5)
    e1 = np.linalg.norm(final(2e-3) - ref)
    e2 = np.linalg.norm(final(1e-3) - ref)
    assert 1.7 < e1 / e2 < 2.3


def test_decay_run(decay_run, dom, params, geometry):
    assert decay_run.outcome.kind == "GlobalDecay"
    assert decay_run.outcome.rate == pytest.approx(-2 * params.a * dom.lambda1, rel=1e-3)
    assert decay_run.J0 < geometry.d_est and decay_run["I"][0] > 0
    # M'' = -2 I < 0 while I > 0
    conc = dy.concavity_diagnostics(decay_run, params)
    assert np.all(conc.ddM < 0)


def test_energy_identity(decay_run):
    assert dy.energy_residual(decay_run) <= 1e-6 * (1 + abs(decay_run.J0))
    assert decay_run["residual"][0] == 0


def test_energy_residual_tracks_tolerance(dom, params):
    u0 = 0.1 * dom.mode(0)
    loose = dy.integrate(dom, u0, params, dy.SolverControls(rel_tol=1e-6))
    tight = dy.integrate(dom, u0, params, dy.SolverControls(rel_tol=1e-8))
    assert dy.energy_residual(loose) > dy.energy_residual(tight)


def test_decay_bound(decay_run, dom, params, geometry):
    d1, _ = wg.find_delta_roots(decay_run.J0, geometry)
    chk = dy.decay_bound_check(decay_run, d1, params, dom.lambda1)
    assert chk.passed
    with pytest.raises(NotApplicable):
        dy.decay_bound_check(decay_run, None, params)


def test_invariance_on_decay_run(decay_run, geometry):
    roots = wg.find_delta_roots(decay_run.J0, geometry)
    chk = dy.well_invariance_check(decay_run, roots, geometry)
    assert chk.passed and chk.detail["well"] == "W"
    assert len(chk.detail["deltas"]) == 11


def test_negative_energy_blows_up(blowup_run, params):
    assert blowup_run.J0 < 0
    out = blowup_run.outcome
    assert out.kind == "BlowUp" and math.isfinite(out.T_est)
    assert out.T_est >= blowup_run["t"][-1]
    conc = dy.concavity_diagnostics(blowup_run, params)
    assert conc.onset is not None
    assert np.all(conc.F[conc.t >= conc.onset] > 0)
    assert dy.escalation_violations(blowup_run, norm_cap=1000.0) == 0


def test_invariance_not_applicable_for_negative_energy(blowup_run, geometry):
    with pytest.raises(NotApplicable):
        dy.well_invariance_check(blowup_run, (0.5, 1.2), geometry)
    with pytest.raises(NotApplicable):
        dy.decay_bound_check(blowup_run, 0.5)


def test_unstable_set_run(dom, params, geometry):
    from kirchwell.classify import scale_to_energy

    mu = scale_to_energy(dom, dom.mode(0), 0.5 * geometry.d_est, params, "descending")
    traj = dy.integrate(dom, mu * dom.mode(0), params)
    assert traj["I"][0] < 0 and traj.outcome.kind == "BlowUp"
    roots = wg.find_delta_roots(traj.J0, geometry)
    chk = dy.well_invariance_check(traj, roots, geometry)
    assert chk.passed and chk.detail["well"] == "V"
    assert chk.detail["ddM_margin"] >= -1e-9


def test_nehari_datum_has_flat_second_moment(dom, params, geometry):
    traj = dy.integrate(dom, geometry.minimizer, params, dy.SolverControls(t_max=1e-3))
    conc = dy.concavity_diagnostics(traj, params)
    assert abs(conc.ddM[0]) <= 1e-8 * fn.lqp1(dom, geometry.minimizer, params)


def test_determinism(dom, params):
    u0 = 0.5 * dom.mode(0) + 0.1 * dom.mode(1)
    a = dy.integrate(dom, u0, params, dy.SolverControls(t_max=0.5))
    b = dy.integrate(dom, u0, params, dy.SolverControls(t_max=0.5))
    assert dy.trajectory_csv(a) == dy.trajectory_csv(b)


def test_trajectory_round_trip(tmp_path, decay_run):
    path = tmp_path / "traj.csv"
    dy.write_trajectory(decay_run, path)
    cols = dy.read_trajectory(path)
    for k in dy.COLUMNS:
        assert np.array_equal(cols[k], decay_run[k])
    text = path.read_text().splitlines()
    assert text[0] == ",".join(dy.COLUMNS)
    bad = tmp_path / "bad.csv"
    bad.write_text("t,dt\n0,0\n")
    with pytest.raises(ConfigurationError):
        dy.read_trajectory(bad)


def test_t_max_gives_undetermined(dom, params, geometry):
    traj = dy.integrate(dom, geometry.minimizer, params, dy.SolverControls(t_max=0.01))
    assert traj.outcome.kind == "Undetermined"
