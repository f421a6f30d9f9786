import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qqm import corpus as C
from qqm import qet
from qqm import syntax as S
from qqm.qet import Apply, Derivation, Join, Lit, PrimMod, Radius, Subst, Tensor, judge
from qqm.sampling import SamplerConfig, draw_triple
from qqm.semantics import derive, evaluate

DATA = Path(__file__).resolve().parents[1] / "data" / "derivations"
R = S.REAL
RR = S.Arrow(R, R)


def verdict(d, **kw):
    return qet.check_derivation(d, **kw).verdict


# ---------------------------------------------------------------- fixed examples


def test_literal_then_broken_weakening():
    lit = qet.literal(2.0, 3.0, 1.0)
    assert verdict(lit).proved
    rep = qet.check_derivation(qet.broken_weakening())
    assert rep.verdict.refuted
    w = rep.verdict.witness
    assert w["node"] == "root" and w["rule"] == "weaken"
    assert w["evidence"] == {"left": 0.5, "right": 1.0}
    assert [n["path"] for n in rep.nodes] == ["root", "root/0"]


def test_trans_is_structural():
    a, b = qet.literal(1.0, 2.0), qet.literal(2.0, 4.0)
    d = Derivation("trans", (a, b), judge((), S.Const(1.0), Tensor(Lit(1.0), Lit(2.0)), S.Const(4.0), R))
    assert verdict(d).proved
    same = Derivation("trans", (a, b), judge((), S.Const(1.0), Lit(3.0), S.Const(4.0), R))
    assert not verdict(same).refuted
    bad = Derivation("trans", (a, b), judge((), S.Const(1.0), Lit(2.5), S.Const(4.0), R))
    assert verdict(bad).refuted
    gap = Derivation("trans", (a, qet.literal(3.0, 4.0)),
                     judge((), S.Const(1.0), Tensor(Lit(1.0), Lit(1.0)), S.Const(4.0), R))
    assert verdict(gap).refuted


def test_literal_with_wrong_distance():
    assert verdict(qet.literal(2.0, 3.0, 0.9)).refuted
    # over-approximating literals need weakening, the literal rule itself is exact
    assert verdict(qet.literal(2.0, 3.0, 1.5)).refuted
    assert verdict(qet.weakened(qet.literal(2.0, 3.0), Lit(1.5))).proved


def test_unknown_rule_and_arity():
    with pytest.raises(qet.DerivationError):
        Derivation("magic", (), judge((), S.Const(1.0), Lit(0.0), S.Const(1.0), R))
    d = Derivation("weaken", (), judge((), S.Const(1.0), Lit(0.0), S.Const(1.0), R))
    assert verdict(d).refuted


def test_variable_rule():
    ctx = (("x", R), ("y", R))
    good = Derivation("var", (), judge(ctx, S.Var("y"), Radius("y"), S.Var("y"), R))
    assert verdict(good).proved
    wrong = Derivation("var", (), judge(ctx, S.Var("y"), Radius("x"), S.Var("y"), R))
    assert verdict(wrong).refuted


def test_ill_typed_judgment_is_refuted():
    d = Derivation("lit", (), judge((), S.Const(1.0), Lit(0.0), S.Const(1.0), RR))
    assert verdict(d).refuted


def test_join_and_qrefl():
    a = qet.literal(0.0, 1.0)
    w = qet.weakened(a, Lit(3.0))
    j = Derivation("join", (a, w), judge((), S.Const(0.0), Join((Lit(1.0), Lit(3.0)), R), S.Const(1.0), R))
    assert verdict(j).proved
    q = Derivation("qrefl", (a,), judge((), S.Const(0.0), Lit(1.0), S.Const(0.0), R))
    assert verdict(q).proved
    bad = Derivation("qrefl", (a,), judge((), S.Const(0.0), Lit(1.0), S.Const(1.0), R))
    assert verdict(bad).refuted


# ---------------------------------------------------------------- reflexivity


def test_reflexivity_of_variables_and_literals():
    d = qet.reflexivity_derivation([("x", R), ("y", R)], S.Var("x"))
    assert d.rule == "var" and d.premises == () and d.conclusion.dist == Radius("x")
    lit = qet.reflexivity_derivation([], S.Const(2.5))
    assert lit.rule == "lit" and lit.conclusion.dist == Lit(0.0)


@pytest.mark.parametrize("entry", C.get_corpus(), ids=lambda e: e.name)
def test_reflexivity_for_every_corpus_term(entry):
    d = qet.reflexivity_derivation(entry.ctx(), entry.term())
    assert not verdict(d).refuted
    # the root distance is the error derivative on sampled contexts
    if all(t in ("Real", "Real -> Real", "Real * Real") for _, t in entry.context) and entry.expected == "Real":
        cfg = SamplerConfig(seed=1)
        rng = cfg.rng(5)
        for _ in range(10):
            env, xi = qet.sample_context(entry.ctx(), rng, cfg)
            got = qet.evaluate_dist(d.conclusion.dist, env, xi)
            want = derive(entry.term(), env, xi)
            assert got == want or math.isclose(got, want, rel_tol=1e-12)


def test_difference_quotient_root_distance():
    entry = C.entry("ex412")
    d = qet.reflexivity_derivation(entry.ctx(), entry.term())
    from qqm.sampling import SIN, exact_rho_hat_rr

    sigma = exact_rho_hat_rr(SIN, SIN)
    for x, a in ((0.0, 0.01), (1.0, 0.2), (-2.0, 0.0)):
        env, xi = {"f": SIN, "x": x}, {"f": sigma, "x": a}
        want = (sigma(x + 0.1, a) + sigma(x, a)) / 0.1
        assert qet.evaluate_dist(d.conclusion.dist, env, xi) == pytest.approx(want)


# ---------------------------------------------------------------- substitution


def test_substitution_into_fresh_variable():
    ctx = (("x", R), ("y", R))
    d1 = qet.reflexivity_derivation(ctx, S.parse("sin y"))
    d2 = qet.literal(1.0, 1.5)
    first, second = qet.substitution_derivation(d1, "x", d2)
    assert first.conclusion.context == (("y", R),)
    assert first.conclusion.dist == d1.conclusion.dist
    assert not verdict(first).refuted and not verdict(second).refuted


def test_substitution_into_the_variable_itself():
    ctx = (("y", R), ("x", R))
    d1 = qet.reflexivity_derivation(ctx, S.Var("x"))
    d2 = qet.literal(1.0, 1.5)
    first, second = qet.substitution_derivation(d1, "x", d2)
    assert first == qet.recontext(d2, (("y", R),)) == second
    assert verdict(first).proved


def test_substitution_composite_cross_checked_on_samples():
    entry = C.entry("ex412")
    d1 = qet.reflexivity_derivation(entry.ctx(), entry.term())
    d2 = qet.weakened(qet.literal(0.0, 0.05), Lit(0.05))
    first, second = qet.substitution_derivation(d1, "x", d2)
    assert first.conclusion.context == (("f", RR),)
    assert not verdict(first).refuted and not verdict(second).refuted
    p, b = d2.conclusion.left, d2.conclusion.dist
    c = first.conclusion.dist
    oracle = Subst(d1.conclusion.dist, "x", p, b)
    cfg = SamplerConfig(seed=2)
    rng = cfg.rng(9)
    for _ in range(50):
        f, d, g = draw_triple(RR, rng, cfg)
        env, xi = {"f": f}, {"f": d}
        assert qet.evaluate_dist(c, env, xi) == pytest.approx(qet.evaluate_dist(oracle, env, xi))
        # soundness of the substituted judgment on a related pair of functions
        gap = abs(evaluate(first.conclusion.left, {"f": f}) - evaluate(first.conclusion.right, {"f": g}))
        assert gap <= qet.evaluate_dist(c, env, xi) + 1e-9


def test_substitution_through_trans():
    ctx = (("x", R),)
    r = qet.reflexivity_derivation(ctx, S.parse("sin x"))
    j = r.conclusion
    d1 = Derivation("trans", (r, r), judge(ctx, j.left, Tensor(j.dist, j.dist), j.right, R))
    assert verdict(d1).proved
    first, second = qet.substitution_derivation(d1, "x", qet.literal(1.0, 1.2))
    assert first.conclusion.context == () and second.rule == "weaken"
    assert not verdict(first).refuted and not verdict(second).refuted


def test_substitution_errors():
    d1 = qet.reflexivity_derivation((("x", R),), S.parse("sin x"))
    with pytest.raises(qet.DerivationError, match="exactly once"):
        qet.substitution_derivation(d1, "z", qet.literal(0.0, 0.0))
    open_d2 = qet.reflexivity_derivation((("y", R),), S.Var("y"))
    with pytest.raises(qet.DerivationError, match="closed"):
        qet.substitution_derivation(d1, "x", open_d2)
    pair = qet.reflexivity_derivation((), S.parse("<1.0, 2.0>"))
    with pytest.raises(qet.DerivationError, match="type"):
        qet.substitution_derivation(d1, "x", pair)
    shadow = qet.reflexivity_derivation((("x", R),), S.parse("(\\x:Real. x) 1.0"))
    with pytest.raises(qet.DerivationError, match="rebinds"):
        qet.substitution_derivation(shadow, "x", qet.literal(0.0, 0.0))


def test_push_subst_rewrites_radii_and_arguments():
    e = PrimMod("sin", None, (S.Var("x"),), (Radius("x"),))
    out = qet.push_subst(e, "x", S.Const(2.0), Lit(0.5))
    assert out == PrimMod("sin", None, (S.Const(2.0),), (Lit(0.5),))
    assert qet.evaluate_dist(out, {}, {}) == pytest.approx(qet.evaluate_dist(e, {"x": 2.0}, {"x": 0.5}))


# ---------------------------------------------------------------- random trees


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_accepted_ground_derivations_are_sound(seed, depth):
    d = qet.random_ground_derivation(np.random.default_rng(seed), depth)
    if verdict(d).refuted:
        return
    assert qet.ground_soundness(d)["holds"]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 3))
def test_structural_rules_preserve_acceptance(seed, slack):
    d = qet.random_ground_derivation(np.random.default_rng(seed), 2, sloppy=0.0)
    assert not verdict(d).refuted
    j = d.conclusion
    v = qet.evaluate_dist(j.dist, {}, {})
    looser = qet.weakened(d, Lit(v + slack))
    built = [
        looser,
        Derivation("qrefl", (d,), judge((), j.left, j.dist, j.left, R)),
        Derivation("join", (d, looser), judge((), j.left, Join((j.dist, Lit(v + slack))), j.right, R)),
        Derivation("trans", (d, qet.reflexivity_derivation((), j.right)),
                   judge((), j.left, Tensor(j.dist, Lit(0.0)), j.right, R)),
        Derivation("sem-replace", (d,), judge((), S.App(S.Lam("w", R, S.Var("w")), j.left), j.dist, j.right, R)),
    ]
    for b in built:
        assert not verdict(b).refuted, b.rule
        assert qet.ground_soundness(b)["holds"]


def test_random_trees_include_rejections():
    rng = np.random.default_rng(0)
    outcomes = [verdict(qet.random_ground_derivation(rng, 3)).refuted for _ in range(200)]
    assert any(outcomes) and not all(outcomes)


# ---------------------------------------------------------------- JSON


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_json_round_trip_random(seed):
    d = qet.random_ground_derivation(np.random.default_rng(seed), 3)
    back = qet.from_json(json.loads(json.dumps(qet.to_json(d))))
    assert back == d


@pytest.mark.parametrize("name", ["ex412", "proj-lam", "compose", "at-one", "swap"])
def test_json_round_trip_corpus(name, tmp_path):
    e = C.entry(name)
    d = qet.reflexivity_derivation(e.ctx(), e.term())
    path = tmp_path / "d.json"
    qet.save(d, path)
    assert qet.from_json(path) == d


def test_context_is_inherited():
    obj = {"rule": "lam", "context": [], "left": "\\x:Real. x", "right": "\\x:Real. x", "type": "Real -> Real",
           "dist": {"abs": "x", "body": {"radius": "x"}},
           "premises": [{"rule": "var", "left": "x", "right": "x", "type": "Real", "dist": {"radius": "x"}}]}
    d = qet.from_json(obj)
    assert d.premises[0].conclusion.context == (("x", R),)
    assert verdict(d).proved


def test_malformed_json():
    with pytest.raises(qet.DerivationError):
        qet.from_json({"rule": "lit", "left": "1.0"})
    with pytest.raises(qet.DerivationError):
        qet.dist_from_json({"bogus": 1})


def test_dist_json_covers_every_form():
    forms = [Lit(math.inf), Radius("x"), PrimMod("add", 0.1, (S.Var("x"),), (Radius("x"),)),
             Apply(Radius("f"), S.Var("x"), Radius("x")), qet.Abs("z", Radius("z")),
             qet.PairD(Lit(1.0), Lit(2.0)), qet.FstD(Radius("p")), qet.SndD(Radius("p")),
             Tensor(Lit(1.0), Lit(2.0)), Join((Lit(1.0), Lit(2.0)), R), qet.Meet((Lit(1.0),), R),
             qet.Deriv(S.parse("sin x")), Subst(Radius("x"), "x", S.Const(1.0), Lit(0.5))]
    for e in forms:
        assert qet.dist_from_json(json.loads(json.dumps(qet.dist_to_json(e)))) == e


@pytest.mark.parametrize("name,status", [("lit", "proved"), ("trans", "proved"), ("ex412-reflexivity", "proved"),
                                         ("broken-weakening", "refuted"), ("sem-replace", "sampled_ok")])
def test_shipped_derivations(name, status):
    assert qet.check_derivation(qet.from_json(DATA / f"{name}.json")).verdict.status == status
