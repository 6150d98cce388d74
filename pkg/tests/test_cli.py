import csv
import hashlib
import json

import numpy as np
import pytest
import yaml

from lrwave import cli


def run(tmp_path, name, cfg, command, *extra):
    path = tmp_path / f"{name}.yaml"
    path.write_text(yaml.safe_dump(cfg))
    out = tmp_path / name
    code = cli.main([command, str(path), "--out", str(out), *extra])
    return code, out


def load(out, name):
    return json.loads((out / name).read_text())


FLAT_FLOW = {"spec": {"name": "FLAT"}, "flow": {"start": {"x": [1.0], "xi": [2.0]}, "t_span": [0.0, -5.0],
                                                 "samples": 11}}


def test_flow_flat_trajectory(tmp_path):
    code, out = run(tmp_path, "flow", FLAT_FLOW, "flow")
    assert code == 0
    rows = list(csv.DictReader((out / "trajectory.csv").open()))
    assert len(rows) == 11 and list(rows[0]) == ["t", "x0", "xi0", "action", "energy_drift"]
    for r in rows:
        t = float(r["t"])
        assert float(r["x0"]) == pytest.approx(1.0 + 2.0 * t, abs=1e-10)
        assert abs(float(r["energy_drift"])) <= 1e-12
    assert load(out, "flow.json")["end"]["x"] == pytest.approx([-9.0], abs=1e-10)


@pytest.mark.parametrize("cfg", [
    {"spec": {"name": "FLAT"}, "flow": {"start": {"x": [1.0], "xi": [1.0]}, "t_span": [0, 1], "bogus": 1}},
    {"spec": {"name": "FLAT"}},
    {"spec": {"name": "FLAT"}, "flow": {"start": {"x": [1.0]}, "t_span": [0, 1]}},
    ["not", "a", "mapping"],
])
def test_malformed_config_exits_2(tmp_path, cfg):
    code, _ = run(tmp_path, "bad", cfg, "flow")
    assert code == 2


def test_unknown_spec_exits_2(tmp_path):
    code, out = run(tmp_path, "unk", {**FLAT_FLOW, "spec": {"name": "NOPE"}}, "flow")
    assert code == 2 and load(out, "manifest.json")["status"] == "invalid_request"


def test_outputs_deterministic_and_hashed(tmp_path):
    cfg = {"spec": {"name": "LR", "params": {"c": 0.5, "mu": 0.8}}, "seed": 7,
           "scatter": {"random": {"count": 2}, "t0": -1.0}}
    _, a = run(tmp_path, "a", cfg, "scatter")
    _, b = run(tmp_path, "b", cfg, "scatter")
    man = load(a, "manifest.json")
    assert [f["path"] for f in man["files"]] == ["scatter.json"]
    for f in man["files"]:
        data = (a / f["path"]).read_bytes()
        assert data == (b / f["path"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == f["sha256"] and len(data) == f["bytes"]
    assert man["config_sha256"] == load(b, "manifest.json")["config_sha256"]


def test_seed_changes_random_starts(tmp_path):
    cfg = {"spec": {"name": "FLAT"}, "scatter": {"random": {"count": 2}}}
    _, a = run(tmp_path, "a", cfg, "scatter", "--seed", "1")
    _, b = run(tmp_path, "b", cfg, "scatter", "--seed", "2")
    assert load(a, "scatter.json") != load(b, "scatter.json")


def test_scatter_flat_closed_form(tmp_path):
    cfg = {"spec": {"name": "FLAT"}, "scatter": {"starts": [{"x": [1.0], "xi": [2.0]}, {"x": [0.5], "xi": [-1.0]}],
                                                  "R": 10.0}}
    code, out = run(tmp_path, "sc", cfg, "scatter")
    assert code == 0
    res = load(out, "scatter.json")["results"]
    assert res[0]["scattering"]["z_minus"] == pytest.approx([11.0], abs=1e-8)
    assert res[1]["scattering"]["z_minus"] == pytest.approx([-9.5], abs=1e-8)
    assert res[1]["scattering"]["xi_minus"] == pytest.approx([-1.0], abs=1e-8)


def test_scatter_trapped_is_indeterminate(tmp_path, monkeypatch, trapped_spec):
    monkeypatch.setattr(cli, "get_spec", lambda name, **kw: trapped_spec)
    cfg = {"spec": {"name": "TRAP"}, "scatter": {"starts": [{"x": [0.5, 0.0], "xi": [0.0, 1.0]}]}}
    code, out = run(tmp_path, "trap", cfg, "scatter")
    assert code == 3
    row = load(out, "scatter.json")["results"][0]
    assert row["verdict"] == "indeterminate" and "scattering" not in row


def test_hj_table(tmp_path):
    cfg = {"spec": {"name": "FLAT"}, "hj": {"R": 10.0, "t_min": -1.0, "t_grid": [-1.0, -0.5],
                                             "xi_grid": [[30.0], [-40.0]]}}
    code, out = run(tmp_path, "hj", cfg, "hj")
    assert code == 0
    rows = list(csv.DictReader((out / "w_table.csv").open()))
    assert len(rows) == 4
    for r in rows:
        t, xi = float(r["t"]), float(r["xi0"])
        assert float(r["W"]) == pytest.approx(-10.0 * abs(xi) + 0.5 * t * xi * xi, abs=1e-9)
    assert load(out, "hj.json")["residual"] is not None


def test_verify_flat_all_pass(tmp_path):
    code, out = run(tmp_path, "v", {"spec": {"name": "FLAT"}, "verify": {"samples": 2}}, "verify")
    body = load(out, "verify.json")
    assert code == 0 and body["all_passed"]
    assert set(body["checks"]) == set(cli.CHECKS)


def test_verify_asymmetric_metric_fails(tmp_path):
    cfg = {"spec": {"name": "ANISO"},
           "verify": {"samples": 2, "checks": ["assumptions"], "test_mode": {"asymmetric_metric": 0.1}}}
    code, out = run(tmp_path, "asym", cfg, "verify")
    assert code == 3 and not load(out, "verify.json")["checks"]["assumptions"]["passed"]


def test_verify_asymmetry_needs_two_dimensions(tmp_path):
    cfg = {"spec": {"name": "FLAT"}, "verify": {"checks": ["assumptions"], "test_mode": {"asymmetric_metric": 0.1}}}
    code, _ = run(tmp_path, "asym1", cfg, "verify")
    assert code == 2


WAVEFRONT = {"spec": {"name": "FLAT"},
             "wavefront": {"t0": 0.1, "R": 10.0, "datum": {"kind": "jump"}, "grid": {"N": 4096, "L": 40.0},
                           "probes": [{"x0": 1.0, "xi0": 1.2, "rx": 0.5, "rxi": 0.6},
                                      {"x0": -6.0, "xi0": 1.2, "rx": 0.5, "rxi": 0.6}],
                           "ladder": [0.125, 0.0625, 0.03125], "harness": ["pushforward"]}}


def test_wavefront_flat_pushforward_passes(tmp_path):
    code, out = run(tmp_path, "wf", WAVEFRONT, "wavefront")
    body = load(out, "wavefront.json")
    assert code == 0 and body["agreement"] == {"pushforward": ["pass", "pass"]}
    rows = list(csv.DictReader((out / "wavefront.csv").open()))
    assert len(rows) == 2 * 2 * 3 and {r["side"] for r in rows} == {"A", "C"}


def test_wavefront_band_probe_inconclusive(tmp_path):
    cfg = {"spec": {"name": "LR", "params": {"c": 0.5, "mu": 0.8}},
           "wavefront": {"t0": 0.1, "R": 2.0, "datum": {"kind": "jump"}, "grid": {"N": 4096, "L": 40.0},
                         "probes": [{"x0": 1.0, "xi0": 0.3, "rx": 0.5, "rxi": 0.15}],
                         "ladder": [0.125, 0.0625, 0.03125], "harness": ["modified"]}}
    code, out = run(tmp_path, "band", cfg, "wavefront")
    body = load(out, "wavefront.json")
    assert code == 3 and body["agreement"]["modified"] == ["inconclusive"]
    assert body["modified"][0]["B"]["notes"]


def test_numerical_failure_exits_4(tmp_path):
    cfg = {"spec": {"name": "FLAT"}, "wavefront": {**WAVEFRONT["wavefront"], "t0": 3.0}}
    code, out = run(tmp_path, "edge", cfg, "wavefront")
    assert code == 4
    assert load(out, "error.json")["error"] == "BoundaryMassError"
    assert load(out, "manifest.json")["exit_code"] == 4


def test_json_config_accepted(tmp_path):
    path = tmp_path / "flow.json"
    path.write_text(json.dumps(FLAT_FLOW))
    assert cli.main(["flow", str(path), "--out", str(tmp_path / "j")]) == 0
    assert np.isfinite(load(tmp_path / "j", "flow.json")["energy_drift"])


def test_non_finite_numbers_written_as_null():
    assert json.loads(cli.dumps({"a": float("inf"), "b": np.float64("nan"), "c": [1.5]})) == \
        {"a": None, "b": None, "c": [1.5]}
