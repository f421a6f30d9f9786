import json
import math

import numpy as np
import pytest

from qqm import harness as H
from qqm import workbench as W
from qqm.harness import RunConfig
from qqm.verdict import Verdict


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig(exact_tol=0.0)
    with pytest.raises(ValueError):
        RunConfig(samples=0)
    with pytest.raises(ValueError):
        RunConfig(grid=1)


def test_parse_caps():
    caps = H.parse_caps("carrier=3, homs=10")
    assert caps.carrier == 3 and caps.homs == 10 and caps.quantale == W.Caps().quantale
    with pytest.raises(ValueError, match="unknown cap"):
        H.parse_caps("bogus=1")
    with pytest.raises(ValueError):
        H.parse_caps("carrier=many")


def test_environment_overrides():
    env = {"QQM_SEED": "7", "QQM_EXACT_TOL": "1e-6", "QQM_CARRIER": "definable", "QQM_CAPS": "carrier=2",
           "UNRELATED": "x"}
    cfg = H.config_from_env(RunConfig(samples=5), environ=env)
    assert (cfg.seed, cfg.exact_tol, cfg.carrier, cfg.samples, cfg.caps.carrier) == (7, 1e-6, "definable", 5, 2)
    assert H.config_from_env(environ={}) == RunConfig()


def test_report_shape_and_determinism():
    cfg = RunConfig(seed=3, samples=20)
    a = H.dumps(H.fundamental_suite(cfg, ["ex412", "sin"]))
    b = H.dumps(H.fundamental_suite(cfg, ["ex412", "sin"]))
    assert a == b
    rep = json.loads(a)
    assert rep["schema"] == H.SCHEMA_VERSION and rep["command"] == "check-fundamental"
    assert rep["config"]["seed"] == 3 and rep["config"]["caps"] == W.Caps().to_json()
    assert rep["verdict"]["status"] == "sampled_ok" and rep["verdict"]["n_points"] == 40
    assert H.dumps(H.fundamental_suite(RunConfig(seed=4, samples=20), ["ex412"])) != a


def test_parallel_matches_serial():
    cfg = RunConfig(seed=1, samples=15)
    terms = ["ex412", "sin", "mul-proj"]
    serial = H.dumps(H.fundamental_suite(cfg, terms))
    parallel = json.loads(H.dumps(H.fundamental_suite(RunConfig(seed=1, samples=15, workers=2), terms)))
    parallel["config"]["workers"] = 1
    assert H.dumps(parallel) == serial


def test_replay_matches_the_stream():
    cfg = RunConfig(seed=5, samples=10)
    rec = H.replay_fundamental(cfg, "ex412", 7)
    assert rec["sample_index"] == 7 and rec["holds"]
    assert "--sample-index 7" in rec["replay"]
    again = H.replay_fundamental(RunConfig(seed=5, samples=1000), "ex412", 7)
    assert again["gamma"] == rec["gamma"] and again["gap"] == rec["gap"]


def test_bound_sweep_small():
    out = H.bound_sweep((0.1, 0.01))
    assert out["sound"] and out["decreasing"]
    assert [r["a"] for r in out["rows"]] == pytest.approx([0.01, 0.0001])


def test_workbench_trials():
    cfg = RunConfig(seed=2)
    t = H.workbench_trial(0, cfg)
    assert set(H.SHADOWS) <= set(t)
    assert all(t[k] is None or isinstance(t[k], Verdict) for k in H.SHADOWS)
    rep = H.workbench_suite(cfg, pairs=6)
    assert rep["verdict"]["status"] == "proved"
    assert all(rep["summary"][k]["failed"] == 0 for k in H.SHADOWS)
    assert rep["summary"]["chain"]["checked"] == 6


def test_chain_check_on_a_metric():
    phi = np.array([[0.0, 1.0], [math.inf, 0.0]])
    out = H._chain_check(phi)
    assert out["broken"] == [] and out["verdicts"][W.TRANSITIVE]


def test_qet_suite_small():
    rep = H.qet_suite(RunConfig(), derivations=40)
    assert rep["verdict"]["status"] in ("proved", "sampled_ok")
    assert rep["accepted"] + rep["rejected"] == 40
    assert rep["broken_weakening"]["status"] == "refuted"


def test_write_report(tmp_path):
    path = tmp_path / "r.json"
    rep = H.make_report("x", RunConfig(), Verdict.exact(True), value=math.inf)
    text = H.write_report(rep, str(path))
    assert path.read_text() == text
    assert json.loads(text)["value"] == "inf"
