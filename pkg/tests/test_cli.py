import json
import math
from pathlib import Path

import pytest

from qqm import cli
from qqm.prims import default_table

ROOT = Path(__file__).resolve().parents[1]


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


@pytest.mark.parametrize("text,value", [("2pi", 2 * math.pi), ("-pi/2", -math.pi / 2), ("inf", math.inf),
                                        ("0.25", 0.25), ("3 * 2", 6.0)])
def test_parse_real(text, value):
    assert cli.parse_real(text) == value


def test_parse_real_rejects_code():
    for bad in ("__import__('os')", "x", "1 +"):
        with pytest.raises(cli.UsageError):
            cli.parse_real(bad)


def test_typecheck(capsys):
    code, rep, _ = run(["typecheck", "--term", "\\x:Real. <x, sin x>"], capsys)
    assert code == 0 and rep["type"] == "Real -> Real * Real"
    code, rep, _ = run(["typecheck", "--term", "sin <1.0, 2.0>"], capsys)
    assert code == 1 and "error" in rep["verdict"]["witness"]


def test_eval_with_point(capsys):
    code, rep, _ = run(["eval", "--term", "corpus:ex412", "--point", "f=sin,x=0"], capsys)
    assert code == 0
    assert rep["value"] == pytest.approx((math.sin(0.1) - math.sin(0.0)) / 0.1)


def test_derive_difference_quotient(capsys):
    code, rep, _ = run(["derive", "--term", "corpus:ex412", "--point", "f=sin,x=0",
                        "--radius", "d=self(sin),a=0.01"], capsys)
    assert code == 0
    # oscillation of sin over [c - r, c + r], computed independently
    def osc(c, r, n=20001):
        ys = [math.sin(c - r + 2 * r * i / (n - 1)) for i in range(n)]
        return max(abs(y - math.sin(c)) for y in ys)
    want = (osc(0.1, 0.01) + osc(0.0, 0.01)) / 0.1
    assert rep["bound"] == pytest.approx(want, rel=1e-6)
    assert rep["bound"] == pytest.approx(0.19955, abs=1e-5)


def test_distance_exact_flag(capsys):
    code, rep, _ = run(["distance", "--left", "sin", "--right", "id", "--point", "pi", "--radius", "2pi",
                        "--exact"], capsys)
    assert code == 0 and rep["verdict"]["status"] == "proved"
    assert rep["distance"]["value"] == pytest.approx(3 * math.pi)


def test_member_refutation(capsys):
    code, rep, _ = run(["member", "--type", "Real", "--left", "0", "--radius", "0.5", "--right", "1"], capsys)
    assert code == 1 and rep["verdict"]["status"] == "refuted"
    code, rep, _ = run(["member", "--type", "Real", "--left", "0", "--radius", "1", "--right", "1"], capsys)
    assert code == 0


def test_selfdist_probes(capsys):
    code, rep, _ = run(["selfdist", "--type", "Real -> Real", "--value", "id", "--at", "0:1.5,2:0"], capsys)
    assert code == 0
    assert [p["sigma"] for p in rep["probes"]] == pytest.approx([1.5, 0.0])


def test_bound2(capsys):
    code, rep, _ = run(["bound2", "--t", "\\x:Real. sin x", "--s", "\\x:Real. x", "--point", "0",
                        "--radius", "1"], capsys)
    assert code == 0 and rep["bound"] >= 1.0 - 1e-12


def test_check_fundamental_replay(capsys):
    code, rep, _ = run(["check-fundamental", "--term", "ex412", "--samples", "5", "--sample-index", "3"], capsys)
    assert code == 0 and rep["replay"]["sample_index"] == 3


@pytest.mark.parametrize("name,code", [("lit", 0), ("trans", 0), ("ex412-reflexivity", 0),
                                       ("sem-replace", 0), ("broken-weakening", 1)])
def test_prove_shipped_files(name, code, capsys):
    got, rep, _ = run(["prove", str(ROOT / "data" / "derivations" / f"{name}.json")], capsys)
    assert got == code
    if code:
        assert rep["verdict"]["witness"]["rule"] == "weaken"


def test_workbench_exit_codes(capsys):
    space = str(ROOT / "data" / "spaces" / "ex49.json")
    assert run(["workbench", "--space", space, "--axioms", "QuasiReflexive,Transitive"], capsys)[0] == 0
    assert run(["workbench", "--space", space, "--axioms", "ST1"], capsys)[0] == 1
    code, _, err = run(["workbench", "--space", space, "--axioms", "ST9"], capsys)
    assert code == 2 and "unknown axioms" in err


def test_workbench_construct_and_save(tmp_path, capsys):
    space = str(ROOT / "data" / "spaces" / "ex49.json")
    out = tmp_path / "prod.json"
    code, rep, _ = run(["workbench", "--space", space, "--construct", "product", "--save", str(out)], capsys)
    assert code == 0 and json.loads(out.read_text()) == rep["construction"]


def test_usage_errors(capsys):
    code, rep, err = run(["eval", "--term", "(\\x:Real. x"], capsys)
    assert code == 2 and rep is None and err.startswith("qqm eval:")
    code, _, err = run(["eval", "--term", "corpus:nope"], capsys)
    assert code == 2
    code, _, _ = run(["workbench", "--space", "/nonexistent.json"], capsys)
    assert code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["no-such-command"])
    assert exc.value.code == 2


def test_out_flag_writes_the_report(tmp_path, capsys):
    out = tmp_path / "r.json"
    code, rep, _ = run(["eval", "--term", "1.5", "--out", str(out)], capsys)
    assert code == 0 and json.loads(out.read_text()) == rep


def test_empty_table_keeps_no_primitives(capsys):
    code, rep, _ = run(["demo-no-greatest", "--prims", "empty"], capsys)
    assert code == 0 and rep["config"]["prims"] == "empty"
    assert "sin" in default_table()


def test_environment_seed(monkeypatch, capsys):
    monkeypatch.setenv("QQM_SEED", "11")
    _, rep, _ = run(["eval", "--term", "1.0"], capsys)
    assert rep["config"]["seed"] == 11
    _, rep, _ = run(["eval", "--term", "1.0", "--seed", "3"], capsys)
    assert rep["config"]["seed"] == 3
