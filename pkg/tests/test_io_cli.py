import dataclasses
import json

import numpy as np
import pytest

from noisetomo.calibration import ClickRecord
from noisetomo.cli import main
from noisetomo.errors import DataError
from noisetomo.fock import PhotonDistribution
from noisetomo.io import content_hash, read_measurements, to_jsonable, write_measurements
from noisetomo.povm import ProbeSetting, conditioning_report, design_matrix
from noisetomo.simulator import ExperimentPlan, probe_schedule, simulate_clicks


def write(path, text):
    path.write_text(text)
    return path


def test_read_minimal(tmp_path):
    f = write(tmp_path / "m.csv", "# comment\nsetting_id,probe_mean,pulses,no_clicks\n0,0.0,100,90\n1,2.5,100,60\n")
    records, settings = read_measurements(f)
    assert [r.no_clicks for r in records] == [90, 60]
    assert settings[1] == ProbeSetting(1, 2.5)


def test_blocked_file_has_no_settings(tmp_path):
    f = write(tmp_path / "m.csv", "setting_id,blocked_no_clicks,pulses,no_clicks\n3,95,100,90\n")
    records, settings = read_measurements(f)
    assert settings is None and records[0].blocked_no_clicks == 95


@pytest.mark.parametrize("text, match", [
    ("setting_id,probe_mean,pulses,no_clicks\n", "no settings"),
    ("", "no header"),
    ("setting_id,probe_mean,pulses,no_clicks\n0,1.0,100,101\n", "line 2"),
    ("setting_id,probe_mean,pulses,no_clicks\n0,1.0,100,50\n0,2.0,100,50\n", "duplicate"),
    ("setting_id,probe_mean,pulses,no_clicks\n0,abc,100,50\n", "line 2"),
    ("setting_id,probe_mean,pulses,no_clicks\n0,1.0,100\n", "expected 4 fields"),
    ("setting_id,pulses,no_clicks\n0,100,50\n", "exactly one"),
    ("setting_id,probe_mean,blocked_no_clicks,pulses,no_clicks\n0,1,1,100,50\n", "exactly one"),
    ("setting_id,probe_mean,pulses,no_clicks,colour\n0,1,100,50,red\n", "unknown columns"),
    ("setting_id,probe_mean,pulses,no_clicks,signal_only_pulses\n0,1,100,50,100\n", "together"),
    ("setting_id,probe_mean,pulses,no_clicks\n0,1.0,100,50.5\n", "integer"),
])
def test_malformed_files(tmp_path, text, match):
    with pytest.raises(DataError, match=match):
        read_measurements(write(tmp_path / "bad.csv", text))


def test_row_error_names_line(tmp_path):
    f = write(tmp_path / "m.csv", "setting_id,probe_mean,pulses,no_clicks\n0,1.0,100,50\n\n# x\n9,1.0,100,500\n")
    with pytest.raises(DataError, match=r"line 5 \(setting 9\)"):
        read_measurements(f)


@pytest.mark.parametrize("calibration", ["probe_mean", "blocked"])
def test_simulator_round_trip(tmp_path, lab, heralded, calibration):
    settings = probe_schedule(lab, 20, 200.0, kind="response")
    records = simulate_clicks(ExperimentPlan(lab, heralded, settings, 10**6, seed=8))
    f = tmp_path / "sim.csv"
    write_measurements(f, records, settings, calibration=calibration)
    back, back_settings = read_measurements(f)
    if calibration == "probe_mean":
        # a probe-mean file carries no blocked counts
        assert back == [dataclasses.replace(r, blocked_no_clicks=None) for r in records]
        assert back_settings == settings
    else:
        assert back == records
        assert back_settings is None


def test_partial_signal_only_round_trip(tmp_path):
    recs = [ClickRecord(0, 10, 5, 7, 3, 10), ClickRecord(1, 10, 4, 6)]
    f = tmp_path / "m.csv"
    write_measurements(f, recs, calibration="blocked")
    assert read_measurements(f)[0] == recs


def test_jsonable_rounds_to_twelve_digits():
    out = to_jsonable({"a": np.array([1 / 3, np.nan]), "b": np.float32(2.5), "c": (np.int64(3),)})
    assert out == {"a": [0.333333333333, None], "b": 2.5, "c": [3]}


def test_content_hash_is_order_sensitive(tmp_path):
    assert content_hash(b"a", b"b") != content_hash(b"b", b"a")
    assert content_hash(b"ab") != content_hash(b"a", b"b")
    f = write(tmp_path / "x", "hello")
    assert content_hash(f) == content_hash(b"hello")


@pytest.fixture
def config(tmp_path):
    cfg = {
        "scheme": {"eta": 0.15, "transmissivity": 0.9, "overlap": 0.45, "signal_cutoff": 3},
        "model": "overlap",
        "seed": 1,
        "bootstrap": 10,
        "simulation": {
            "true_state": [0.095, 0.905],
            "pulses": 10**6,
            "settings": {"count": 40, "max_mean": 200, "kind": "response"},
        },
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    return path


def run_cli(*args):
    return main([str(a) for a in args])


def test_closed_loop(tmp_path, config):
    data, sim, rec = tmp_path / "m.csv", tmp_path / "sim.json", tmp_path / "rec.json"
    assert run_cli("--mode", "simulate", "--config", config, "--data", data, "--out", sim) == 0
    assert run_cli("--mode", "reconstruct", "--config", config, "--data", data, "--out", rec) == 0
    report = json.loads(rec.read_text())
    tv = report["truth_vs_estimate"]
    assert len(tv["truth"]) == len(tv["estimate"]) == 4
    gap = 0.5 * np.abs(np.subtract(tv["truth"], tv["estimate"])).sum()
    assert tv["total_variation"] == pytest.approx(gap, abs=1e-11)
    assert report["estimate"] == tv["estimate"]
    assert report["seed"] == 1 and report["config"]["model"] == "overlap"
    assert len(report["bootstrap"]["std"]) == 4
    assert len(report["residuals"]["p_hat"]) == 40
    assert len(report["input_hash"]) == 64
    curves = (tmp_path / "rec.curves.csv").read_text().splitlines()
    assert curves[0] == "setting_id,probe_mean,p_hat,p_model" and len(curves) == 41


def test_reports_deterministic(tmp_path, config):
    data = tmp_path / "m.csv"
    run_cli("--mode", "simulate", "--config", config, "--data", data, "--out", tmp_path / "s.json")
    for name in ("a.json", "b.json"):
        run_cli("--mode", "reconstruct", "--config", config, "--data", data, "--out", tmp_path / name)
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    run_cli("--mode", "reconstruct", "--config", config, "--data", data, "--out", tmp_path / "c.json",
            "--seed", "2")
    assert (tmp_path / "a.json").read_bytes() != (tmp_path / "c.json").read_bytes()


def test_diagnose_matches_library(tmp_path, config, lab):
    data, out = tmp_path / "m.csv", tmp_path / "d.json"
    run_cli("--mode", "simulate", "--config", config, "--data", data, "--out", tmp_path / "s.json")
    assert run_cli("--mode", "diagnose", "--config", config, "--data", data, "--out", out) == 0
    report = json.loads(out.read_text())
    assert "estimate" not in report
    _, settings = read_measurements(data)
    direct = conditioning_report(design_matrix("overlap", lab, settings))
    assert report["conditioning"]["effective_rank"] == direct.effective_rank
    assert report["conditioning"]["condition_number"] == pytest.approx(direct.condition_number, rel=1e-11)


def test_calibrate_mode(tmp_path, config):
    cfg = json.loads(config.read_text())
    cfg["simulation"]["calibration"] = "blocked"
    cfg["drift_correction"] = {"enabled": True, "reference_state": [0.095, 0.905]}
    config.write_text(json.dumps(cfg))
    data, out = tmp_path / "m.csv", tmp_path / "c.json"
    assert run_cli("--mode", "simulate", "--config", config, "--data", data, "--out", tmp_path / "s.json") == 0
    assert run_cli("--mode", "calibrate", "--config", config, "--data", data, "--out", out) == 0
    report = json.loads(out.read_text())
    assert len(report["probe_means"]["mean"]) == 40
    assert np.allclose(report["drift"]["eta"], 0.15, atol=0.01)


def test_exit_codes(tmp_path, config, capsys):
    assert run_cli("--mode", "reconstruct", "--config", config) == 2
    assert "config" in capsys.readouterr().err
    assert run_cli("--mode", "reconstruct", "--config", tmp_path / "missing.json", "--data", "x") == 2
    bad = write(tmp_path / "bad.csv", "setting_id,probe_mean,pulses,no_clicks\n0,1.0,10,11\n")
    assert run_cli("--mode", "reconstruct", "--config", config, "--data", bad) == 3
    assert run_cli("--mode", "reconstruct", "--config", config, "--data", bad, "--model", "simple") == 3
    broken = write(tmp_path / "broken.json", "{not json")
    assert run_cli("--mode", "diagnose", "--config", broken, "--data", bad) == 2
    drift = write(tmp_path / "drift.json", json.dumps({"drift_correction": {"enabled": True}}))
    assert run_cli("--mode", "reconstruct", "--config", drift, "--data", bad) == 2


def test_solver_error_exit_code(tmp_path, config, monkeypatch):
    import noisetomo.cli as cli
    from noisetomo.errors import SolverError, ConsistencyError

    data = tmp_path / "m.csv"
    run_cli("--mode", "simulate", "--config", config, "--data", data, "--out", tmp_path / "s.json")
    for exc, code in ((SolverError("stuck"), 4), (ConsistencyError("leak"), 5)):
        def boom(*a, exc=exc, **k):
            raise exc
        monkeypatch.setattr(cli, "reconstruct", boom)
        assert run_cli("--mode", "reconstruct", "--config", config, "--data", data) == code


def test_irrelevant_keys_warn(tmp_path, config, caplog):
    data = tmp_path / "m.csv"
    run_cli("--mode", "simulate", "--config", config, "--data", data, "--out", tmp_path / "s.json")
    with caplog.at_level("WARNING"):
        assert run_cli("--mode", "diagnose", "--config", config, "--data", data, "--out", tmp_path / "d.json") == 0
    assert "bootstrap" in caplog.text


def test_stdout_report(tmp_path, config, capsys):
    data = tmp_path / "m.csv"
    run_cli("--mode", "simulate", "--config", config, "--data", data, "--out", tmp_path / "s.json")
    capsys.readouterr()
    assert run_cli("--mode", "diagnose", "--config", config, "--data", data) == 0
    assert "conditioning" in json.loads(capsys.readouterr().out)


def test_flags_override_config(tmp_path, config):
    data, out = tmp_path / "m.csv", tmp_path / "r.json"
    run_cli("--mode", "simulate", "--config", config, "--data", data, "--out", tmp_path / "s.json")
    run_cli("--mode", "reconstruct", "--config", config, "--data", data, "--out", out,
            "--model", "perfect", "--bootstrap", "3", "--seed", "9")
    report = json.loads(out.read_text())
    assert report["config"]["model"] == "perfect"
    assert report["config"]["bootstrap"] == 3 and report["seed"] == 9
