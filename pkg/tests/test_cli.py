from __future__ import annotations

import csv
import io
import json

import numpy as np
import pytest

from vessiot_kit.cli import main

from conftest import FOLD, IMPASSE

FOLD_DOC = {"m": 1, "q": 1, "equations": [FOLD]}
IMPASSE_DOC = {"m": 1, "q": 2, "equations": [IMPASSE], "parameters": {"a": 1, "b": 1, "c": 1}}
EXP_DOC = {"m": 1, "q": 1, "equations": ["u1_1 - u1_0"]}


def run(tmp_path, command, config, *extra):
    path = tmp_path / f"{command}.json"
    config = {"out": str(tmp_path / "out"), **config}
    path.write_text(json.dumps(config))
    buf = io.StringIO()
    code = main([command, "--config", str(path), *extra], stdout=buf)
    return code, buf.getvalue()


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_check_reports_signature(tmp_path):
    code, out = run(tmp_path, "check", {"equation": IMPASSE_DOC})
    assert code == 0 and out.startswith("quasi-linear: true, q=2, m=1")
    assert "top order 2" in out
    code, out = run(tmp_path, "check", {"equation": FOLD_DOC})
    assert code == 0 and out.startswith("quasi-linear: false, q=1, m=1")


def test_check_with_equation_file(tmp_path):
    eq = tmp_path / "eq.json"
    eq.write_text(json.dumps(FOLD_DOC))
    code, out = run(tmp_path, "check", {"equation": "eq.json"})
    assert code == 0
    code, _ = run(tmp_path, "check", {}, "--equation", str(eq))
    assert code == 0


def test_malformed_input_fails(tmp_path, capsys):
    code, _ = run(tmp_path, "check", {"equation": {"m": 1, "q": 1, "equations": ["u1_1 * / 2"]}})
    assert code == 2
    assert "position" in capsys.readouterr().err
    bad = tmp_path / "broken.json"
    bad.write_text("{not json")
    assert main(["check", "--config", str(bad)]) == 2
    assert main(["check", "--config", str(tmp_path / "missing.json")]) == 2
    code, _ = run(tmp_path, "check", {"equation": "nowhere.json"})
    assert code == 2
    assert main(["nonsense"]) == 2


def test_classify_fold_line(tmp_path):
    config = {
        "equation": FOLD_DOC,
        "classify": {"sweep": {"t": [0, np.pi, 101]}, "fixed": {"u1_1": 0.0}, "guess": {"u1_0": 1.0}},
    }
    code, _ = run(tmp_path, "classify", config)
    assert code == 0
    rows = read_csv(tmp_path / "out" / "classify.csv")
    assert list(rows[0]) == ["t", "u1_0", "u1_1", "class", "rank_full", "rank_B"]
    irregular = [float(r["t"]) for r in rows if r["class"] == "IrregularSingular"]
    assert irregular == pytest.approx([np.pi / 4, 3 * np.pi / 4])
    others = {r["class"] for r in rows if r["class"] != "IrregularSingular"}
    assert others == {"RegularSingular"}
    assert all(abs(float(r["u1_0"]) - (1 + np.sin(2 * float(r["t"])) / 2)) < 1e-9 for r in rows)


def test_classify_explicit_and_empty(tmp_path, monkeypatch):
    monkeypatch.setenv("VESSIOT_KIT_THREADS", "2")
    config = {"equation": EXP_DOC, "classify": {"sweep": {"t": [0, 1, 4], "u1_0": [0.5, 2, 3]}}}
    code, _ = run(tmp_path, "classify", config)
    rows = read_csv(tmp_path / "out" / "classify.csv")
    assert code == 0 and len(rows) == 12 and {r["class"] for r in rows} == {"Regular"}
    code, _ = run(tmp_path, "classify", {"equation": EXP_DOC, "classify": {"sweep": {"t": [0, 1, 0]}}})
    assert code == 0
    assert (tmp_path / "out" / "classify.csv").read_text() == "t,u1_0,u1_1,class,rank_full,rank_B\n"
    monkeypatch.setenv("VESSIOT_KIT_THREADS", "many")
    code, _ = run(tmp_path, "classify", config)
    assert code == 2


def test_integrate_exponential(tmp_path):
    config = {"equation": EXP_DOC,
              "integrate": {"start": [0, 1, 1], "step_size": 1e-3, "bounds": [[0, 1], [-10, 10], [-10, 10]]}}
    code, out = run(tmp_path, "integrate", config)
    assert code == 0 and json.loads(out)["stop_reason"] == "Boundary"
    recs = [json.loads(line) for line in (tmp_path / "out" / "trajectory.jsonl").read_text().splitlines()]
    inside = [r["point"] for r in recs if r["point"][0] <= 1]
    assert max(abs(u - np.exp(t)) for t, u, _ in inside) <= 1e-6
    assert (tmp_path / "out" / "trajectory.csv").exists()
    assert (tmp_path / "out" / "geometric.svg").read_text().startswith("<svg")


def test_integrate_fold_geometric_solution(tmp_path):
    config = {"equation": FOLD_DOC, "integrate": {"start": [0.3, 0.5, 1.0], "max_steps": 300}}
    code, _ = run(tmp_path, "integrate", config)
    assert code == 0
    rows = read_csv(tmp_path / "out" / "trajectory.csv")
    t = np.array([float(r["t"]) for r in rows])
    assert np.any(np.diff(t) > 0) and np.any(np.diff(t) < 0)


def test_integrate_irregular_start(tmp_path, capsys):
    config = {"equation": FOLD_DOC, "integrate": {"start": [3 * np.pi / 4, 0.5, 0.0]}}
    code, _ = run(tmp_path, "integrate", config)
    assert code == 4
    assert "Vessiot space" in capsys.readouterr().err
    assert not (tmp_path / "out" / "trajectory.jsonl").exists()


def test_integrate_near_singularity_exit_code(tmp_path):
    config = {"equation": FOLD_DOC, "integrate": {
        "start": [0.3, 0.5, 1.0], "max_steps": 2000, "d_s": 0.05,
        "singular_points": [[np.pi / 4, 1.5, 0], [3 * np.pi / 4, 0.5, 0], [np.pi / 4, -1.5, 0], [3 * np.pi / 4, -0.5, 0]]}}
    code, out = run(tmp_path, "integrate", config)
    assert code == 4 and json.loads(out)["stop_reason"] == "NearSingularity"


def test_invman_carr(tmp_path):
    config = {"invman": {"field": {"variables": ["x", "y"], "components": ["x*y", "-y-x^2"]},
                         "point": [0, 0], "selector": "center", "degree": 4}}
    code, out = run(tmp_path, "invman", config)
    assert code == 0
    doc = json.loads((tmp_path / "out" / "taylor_model.json").read_text())
    g = {tuple(e): v[0] for e, v in doc["g_coeffs"]}
    assert [g[(k,)] for k in (1, 2, 3, 4)] == pytest.approx([0, 0, -1, 0], abs=1e-12)


def test_invman_linear_field(tmp_path):
    config = {"invman": {"field": {"variables": ["x", "y"], "components": ["2*x", "-y"]},
                         "point": [0, 0], "selector": "unstable", "degree": 3}}
    code, _ = run(tmp_path, "invman", config)
    doc = json.loads((tmp_path / "out" / "taylor_model.json").read_text())
    assert code == 0 and all(v == [0.0] for _, v in doc["h_coeffs"])


def test_invman_impasse_with_reduced_portrait(tmp_path):
    config = {"equation": IMPASSE_DOC,
              "invman": {"field": "projected", "point": [0.0, 0.25, 0.5], "selector": "center", "degree": 4,
                         "portrait": {"radius": 0.3, "d_sep": 0.06, "d_test": 0.03, "h": 0.006}}}
    code, out = run(tmp_path, "invman", config)
    assert code == 0 and json.loads(out)["dim_E"] == 2
    doc = json.loads((tmp_path / "out" / "reduced_portrait.json").read_text())
    # embedded lines cross the plane t = 0 containing the parabola of impasse points
    crossing = [np.ptp(np.sign(np.asarray(line)[:, 0])) == 2 for line in doc["embedded"] if len(line) > 1]
    assert any(crossing)
    assert (tmp_path / "out" / "reduced_portrait.svg").exists()


def test_invalid_portrait_parameters_rejected_up_front(tmp_path):
    config = {"invman": {"field": {"variables": ["x", "y"], "components": ["x*y", "-y-x^2"]},
                         "point": [0, 0], "degree": 4, "portrait": {"d_sep": 0.01, "d_test": 0.02}}}
    code, _ = run(tmp_path, "invman", config)
    assert code == 2
    assert not (tmp_path / "out" / "taylor_model.json.partial").exists()


def test_failed_run_leaves_only_quarantined_files(tmp_path):
    config = {"equation": IMPASSE_DOC,
              "invman": {"field": "projected", "point": [0.0, 0.25, 0.5], "degree": 3,
                         "portrait": {"radius": 0.3, "seed": [5.0, 5.0]}}}
    code, _ = run(tmp_path, "invman", config)
    assert code == 3
    assert not (tmp_path / "out" / "taylor_model.json").exists()
    assert (tmp_path / "out" / "taylor_model.json.partial").exists()


def test_portrait_uniform_deterministic(tmp_path):
    config = {"field": {"variables": ["x", "y"], "components": ["1", "0"]},
              "portrait": {"mode": "2d", "d_sep": 0.1, "d_test": 0.05, "h": 0.01,
                           "region": [[0, 1], [0, 1]], "seed": [0.5, 0.5]}}
    code, _ = run(tmp_path, "portrait", config)
    first = (tmp_path / "out" / "streamlines.json").read_bytes()
    svg = (tmp_path / "out" / "streamlines.svg").read_text()
    assert code == 0 and svg.count("<polyline") == 11
    code, _ = run(tmp_path, "portrait", config)
    assert (tmp_path / "out" / "streamlines.json").read_bytes() == first
    # flags override the config file
    code, _ = run(tmp_path, "portrait", config, "--set", "d_sep=0.2", "--set", "d_test=0.1", "--seed", "5")
    doc = json.loads((tmp_path / "out" / "streamlines.json").read_text())
    assert code == 0 and doc["params"]["d_sep"] == 0.2 and doc["params"]["rng_seed"] == 5
    assert main(["portrait", "--config", str(tmp_path / "portrait.json"), "--set", "oops"]) == 2


def test_portrait_volume_with_stationary_curve(tmp_path):
    config = {"equation": IMPASSE_DOC,
              "portrait": {"mode": "3d", "field": "projected", "d_sep": 0.2, "d_test": 0.1, "h": 0.02, "d_s": 0.04,
                           "region": [[-0.5, 0.5], [0, 1], [0.5, 1.5]],
                           "stationary_curve": {"start": [0, 0, 1], "direction": [0, 0, 1], "step": 0.02,
                                                "n_steps": 30}}}
    code, _ = run(tmp_path, "portrait", config)
    assert code == 0
    doc = json.loads((tmp_path / "out" / "streamlines.json").read_text())
    assert len(doc["params"]["singular_points"]) > 30
    assert all(len(s["attributes"]) == len(s["points"]) for s in doc["streamlines"])
    assert not (tmp_path / "out" / "streamlines.svg").exists()


def test_portrait_surface(tmp_path):
    config = {"equation": {"m": 1, "q": 1, "equations": ["t^2 + u1_0^2 + u1_1^2 - 1"]},
              "portrait": {"mode": "2.5d", "d_sep": 0.4, "d_test": 0.2, "h": 0.04, "d_s": 0.1,
                           "region": [[-1.1, 1.1]] * 3, "singular_points": [[0, 1, 0], [0, -1, 0]],
                           "seed": [0.6, 0, 0.8]}}
    code, _ = run(tmp_path, "portrait", config)
    assert code == 0
    assert (tmp_path / "out" / "streamlines.svg").exists()
    code, _ = run(tmp_path, "portrait", {**config, "portrait": {**config["portrait"], "mode": "4d"}})
    assert code == 2
