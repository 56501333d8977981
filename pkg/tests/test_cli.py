import json

import numpy as np
import pytest

from kirchwell import cli
from kirchwell import dynamics as dy
from kirchwell import functionals as fn


def run(tmp_path, argv, config="", name="out"):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(config)
    out = tmp_path / name
    code = cli.main([*argv, "--config", str(cfg), "--out", str(out)])
    return code, out


def report(path):
    doc = json.loads(path.read_text())
    assert doc["format"] == cli.REPORT_FORMAT and doc["version"] == cli.REPORT_VERSION
    return doc


def test_analyze(tmp_path, capsys):
    code, out = run(tmp_path, ["analyze"])
    assert code == 0
    g = report(out / "geometry.json")["geometry"]
    assert g["d_est"] >= g["d_lower"]
    assert g["d_curve"] and g["r_delta"] and g["delta_tilde"] > 1
    assert "d_est=" in capsys.readouterr().out


def test_analyze_is_byte_identical(tmp_path):
    _, a = run(tmp_path, ["analyze"], "seed = 5", name="a")
    _, b = run(tmp_path, ["analyze"], "seed = 5", name="b")
    assert (a / "geometry.json").read_bytes() == (b / "geometry.json").read_bytes()


def test_malformed_field_exits_2(tmp_path, capsys):
    code, _ = run(tmp_path, ["analyze"], "seed = 1\nmodel.b = one")
    assert code == 2
    assert "run.cfg:2:" in capsys.readouterr().err


def test_simulate_small_groundstate(tmp_path):
    code, out = run(tmp_path, ["simulate"], "datum.preset = small-groundstate")
    assert code == 0
    rep = report(out / "report.json")
    assert rep["outcome"]["kind"] == "GlobalDecay"
    assert rep["classification"]["prediction"] == "Global"
    assert rep["checks"]["decay_bound"]["passed"]
    assert rep["checks"]["invariance"]["passed"]
    header = (out / "trajectory.csv").read_text().splitlines()[0]
    assert header == ",".join(dy.COLUMNS)


@pytest.mark.parametrize("preset", ["negative-energy", "critical-descending"])
def test_simulate_blowup_presets(tmp_path, preset):
    code, out = run(tmp_path, ["simulate"], f"datum.preset = {preset}")
    assert code == 0
    rep = report(out / "report.json")
    assert rep["outcome"]["kind"] == "BlowUp"
    assert np.isfinite(rep["outcome"]["T_est"])
    assert rep["classification"]["prediction"] == "BlowUp"
    assert rep["checks"]["concavity_onset"] is not None


def test_simulate_mode_mix_and_scaled_shape(tmp_path):
    code, out = run(tmp_path, ["simulate"],
                    "datum.kind = mode-mix\ndatum.weights = 1:0.2, 2:0.05", name="mix")
    assert code == 0 and report(out / "report.json")["outcome"]["kind"] == "GlobalDecay"
    code, out = run(tmp_path, ["simulate"],
                    "datum.kind = scaled-shape\ndatum.shape = groundstate\n"
                    "datum.energy = 0.5d\ndatum.branch = descending", name="shape")
    rep = report(out / "report.json")
    assert code == 0 and rep["outcome"]["kind"] == "BlowUp"
    assert rep["datum"]["energy"] == pytest.approx(0.5 * rep["d_est"])


def test_simulate_rejects_out_of_range_mode(tmp_path):
    code, _ = run(tmp_path, ["simulate"], "datum.kind = mode-mix\ndatum.weights = 65:1")
    assert code == 2


def test_sweep_invalid_bracket_exits_3(tmp_path, capsys):
    code, out = run(tmp_path, ["sweep", "--mu-lo", "0.5", "--mu-hi", "1.0"])
    assert code == 3
    rep = report(out / "sweep.json")
    assert rep["lo_outcome"] == rep["hi_outcome"] == "GlobalDecay"
    assert "GlobalDecay" in capsys.readouterr().err


def test_construct_blowup_and_reload(tmp_path):
    code, out = run(tmp_path, ["construct-blowup", "--m-target", "10d"])
    assert code == 0
    rep = report(out / "construct.json")
    assert rep["construction"]["predicate"] is True
    assert rep["classification"]["prediction"] == "BlowUp"
    spec, coeffs = cli.read_datum(out / "datum.txt")
    assert spec.n_modes == 64
    cfg = f"datum.kind = file\ndatum.path = {out / 'datum.txt'}"
    code, sim = run(tmp_path, ["simulate"], cfg, name="reload")
    assert code == 0
    rep2 = report(sim / "report.json")
    assert rep2["classification"]["J0"] == rep["construction"]["J"]
    # repr floats reload bit-identically
    cli.write_datum(tmp_path / "again.txt", spec, coeffs)
    assert (tmp_path / "again.txt").read_bytes() == (out / "datum.txt").read_bytes()


def test_construct_below_depth_exits_2(tmp_path, capsys):
    code, _ = run(tmp_path, ["construct-blowup", "--m-target", "0.5d"])
    assert code == 2
    assert "M_target" in capsys.readouterr().err


def test_construct_unreachable_exits_4(tmp_path):
    code, _ = run(tmp_path, ["construct-blowup"], "domain.n_modes = 8")
    assert code == 4


def test_bad_m_target(tmp_path):
    code, _ = run(tmp_path, ["construct-blowup", "--m-target", "lots"])
    assert code == 2


def test_bad_datum_file(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("1.0\n2.0\n")
    code, _ = run(tmp_path, ["simulate"], f"datum.kind = file\ndatum.path = {bad}")
    assert code == 2


def test_verify_lemmas_passes(tmp_path, capsys):
    code, out = run(tmp_path, ["verify", "--suite", "lemmas"])
    assert code == 0
    assert report(out / "verify.json")["passed"] is True
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(line.startswith("PASS") for line in lines)


def test_verify_catches_sign_flip(tmp_path, monkeypatch):
    orig = fn.I_scalar
    monkeypatch.setattr(fn, "I_scalar", lambda *a, **k: -orig(*a, **k))
    code, out = run(tmp_path, ["verify", "--suite", "lemmas"])
    assert code == 5
    assert report(out / "verify.json")["passed"] is False


def test_verify_empty_suite_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as info:
        cli.main(["verify", "--suite", ""])
    assert info.value.code == 2


def test_simulate_is_byte_identical(tmp_path):
    cfg = "seed = 3\ndatum.preset = standard-decay\nsolver.t_max = 2"
    _, a = run(tmp_path, ["simulate"], cfg, name="a")
    _, b = run(tmp_path, ["simulate"], cfg, name="b")
    for f in ("report.json", "trajectory.csv"):
        assert (a / f).read_bytes() == (b / f).read_bytes()
