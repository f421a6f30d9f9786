import itertools
import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qqm import workbench as W
from qqm.finite import boolean, godel_chain, lukasiewicz_chain, monotone_maps, quantale_by_name, truncated_lawvere

GOLDEN = Path(__file__).parent / "golden"
SMALL = [boolean(), godel_chain(3), lukasiewicz_chain(3), truncated_lawvere(2)]
KINDS = ["qqm", "quasi_metric", "metric", "weighted", "discrete"]


# ---------------------------------------------------------------- brute-force oracles over predicate triples


def members(space):
    return {(int(x), int(a), int(y)) for x, a, y in space.triples()}


def oracle_weak_symmetry(space):
    q, P, s = space.quantale, members(space), space.sigma
    T, L = q.tensor_table, q.leq_table
    n, k = space.n, q.size
    for x, y, z, w in itertools.product(range(n), repeat=4):
        for a, b in itertools.product(range(k), repeat=2):
            ab = T[a, b]
            if (x, T[a, s[w]], y) in P and (x, b, z) in P and L[ab, s[y]] and (y, ab, z) not in P:
                return False
    return True


def oracle_lst(space):
    q, P, s = space.quantale, members(space), space.sigma
    T = q.tensor_table
    n, k = space.n, q.size
    for x, y, z in itertools.product(range(n), repeat=3):
        for a, b in itertools.product(range(k), repeat=2):
            if (x, T[a, s[y]], y) in P and (y, b, z) in P and (x, T[a, b], z) not in P:
                return False
    return True


def oracle_self_indistancy(space):
    P, s = members(space), space.sigma
    return all(x == y for x in range(space.n) for y in range(space.n) if (x, s[x], y) in P)


def oracle_transitive(space):
    q, P = space.quantale, members(space)
    T = q.tensor_table
    return all((x, T[a, b], z) in P for (x, a, y) in P for (y2, b, z) in P if y == y2)


def oracle_quasi_reflexive(space):
    P = members(space)
    return all((x, a, x) in P for (x, a, y) in P)


ORACLES = {W.WEAK_SYMMETRY: oracle_weak_symmetry, W.LST: oracle_lst, W.SELF_INDISTANCY: oracle_self_indistancy,
           W.TRANSITIVE: oracle_transitive, W.QUASI_REFLEXIVE: oracle_quasi_reflexive}


@settings(max_examples=120, deadline=None)
@given(st.sampled_from(SMALL), st.integers(1, 3), st.sampled_from(KINDS), st.integers(0, 2**32 - 1))
def test_axiom_checks_agree_with_brute_force(q, n, kind, seed):
    space = W.random_space(q, n, np.random.default_rng(seed), kind)
    for axiom, oracle in ORACLES.items():
        assert bool(W.check_axiom(space, axiom)) == oracle(space), axiom


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(SMALL), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_lst_relation_form_matches_predicate_form(q, n, seed):
    space = W.random_space(q, n, np.random.default_rng(seed))
    assert bool(W.check_axiom(space, W.LST, "predicate")) == bool(W.check_axiom(space, W.LST, "relation"))


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(SMALL), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_relation_predicate_round_trip(q, n, seed):
    rng = np.random.default_rng(seed)
    phi = rng.integers(0, q.size, size=(n, n))
    assert np.array_equal(W.hat(q, W.predicate_of(q, phi)), phi)
    space = W.random_space(q, n, rng)
    assert np.array_equal(W.predicate_of(q, W.hat(q, space.pred)), space.pred)


def test_diagonal_space():
    q = godel_chain(3)
    sigma = np.array([2, 1])
    pred = np.zeros((2, q.size, 2), dtype=bool)
    for x in range(2):
        pred[x, :, x] = q.leq_table[:, sigma[x]]
    # the empty join forces the bottom radius between every pair
    assert W.closure_report(q, pred).witness["missing_radius"] == q.name_of(q.bottom)
    pred[:, q.bottom, :] = True
    space = W.FiniteQqmSpace(["a", "b"], q, pred)
    assert list(space.sigma) == [2, 1]
    for axiom in (W.QUASI_REFLEXIVE, W.TRANSITIVE, W.LST):
        assert W.check_axiom(space, axiom).proved


def test_discrete_metric_is_reflexive_and_strong():
    space = W.random_space(truncated_lawvere(3), 3, np.random.default_rng(0), "discrete")
    assert W.check_axiom(space, W.REFLEXIVE).proved
    for axiom in W.STRONG:
        assert W.check_axiom(space, axiom).proved


def test_non_closed_predicate_is_rejected():
    q = godel_chain(3)
    pred = np.zeros((1, 3, 1), dtype=bool)
    pred[0, 2, 0] = True  # top admitted but the radii below it are not
    rep = W.closure_report(q, pred)
    assert rep.refuted and rep.witness["closure"] == "down"
    with pytest.raises(W.SpaceError):
        W.FiniteQqmSpace(["p"], q, pred)
    assert W.FiniteQqmSpace(["p"], q, pred, raw=True).raw


def test_not_quasi_reflexive_is_rejected():
    q = boolean()
    phi = np.array([[0, 1], [0, 1]])  # phi(0, 1) = true but phi(0, 0) = false
    with pytest.raises(W.SpaceError, match="QuasiReflexive"):
        W.FiniteQqmSpace.from_relation(["a", "b"], q, phi)


def test_space_json_forms(tmp_path):
    space = W.random_space(godel_chain(3), 3, np.random.default_rng(5))
    path = tmp_path / "s.json"
    space.save(path)
    back = W.load_space(path)
    assert np.array_equal(back.pred, space.pred) and back.labels == space.labels
    data = {"carrier": ["a"], "quantale": "godel3", "predicate": [["a", "0", "a"], ["a", "1", "a"]]}
    assert W.FiniteQqmSpace.from_json(data).phi("a", "a") == "1"


def test_custom_quantale_in_space_json():
    q = lukasiewicz_chain(3)
    q.name = "custom"
    space = W.FiniteQqmSpace.from_relation(["p"], q, [[q.unit]])
    data = json.loads(json.dumps(space.to_json()))
    assert isinstance(data["quantale"], dict)
    assert W.FiniteQqmSpace.from_json(data).quantale.names == q.names


# ---------------------------------------------------------------- strong-transitivity examples


def test_probe_space_values():
    space = W.st_counterexample_space()
    assert space.to_json()["relation"] == [["0", "1", "3"], ["2", "2", "2"], ["2", "2", "2"]]
    st1 = W.check_axiom(space, W.ST1)
    assert st1.refuted and (st1.witness["lhs"], st1.witness["rhs"]) == ("3", "5")
    assert W.check_axiom(space, W.ST2).refuted
    assert W.check_axiom(space, W.ST3).refuted


def test_probe_space_rejects_non_integer_distances():
    from qqm.sampling import SIN, IDENTITY

    with pytest.raises(W.SpaceError):
        W.probe_space({"s": SIN, "i": IDENTITY}, 0.0, 1.0)


CHAIN = [(W.ST3, W.ST2), (W.ST2, W.ST1), (W.ST1, W.ST4), (W.ST4, W.LST), (W.LST, W.ST4), (W.LST, W.TRANSITIVE)]


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 5), st.booleans(), st.integers(0, 2**32 - 1))
def test_implication_chain_on_exact_relations(n, both, seed):
    phi = W.random_lawvere_relation(n, np.random.default_rng(seed), both_sides=both)
    assert W.check_lawvere_relation(phi, W.QUASI_REFLEXIVE)
    assert W.check_lawvere_relation(phi, W.TRANSITIVE)
    v = {ax: bool(W.check_lawvere_relation(phi, ax)) for ax in (W.ST1, W.ST2, W.ST3, W.ST4, W.LST, W.TRANSITIVE)}
    for a, b in CHAIN:
        assert not v[a] or v[b], (a, b, phi.tolist())


def test_lawvere_residual():
    assert W.lawvere_residual(2.0, 5.0) == 3.0
    assert W.lawvere_residual(5.0, 2.0) == 0.0
    assert W.lawvere_residual(np.inf, 7.0) == 0.0
    assert W.lawvere_residual(1.0, np.inf) == np.inf


# ---------------------------------------------------------------- constructions


def oracle_exponential(a, b):
    """Triples (f, e, g) of the exponential as label tuples, enumerated from scratch."""
    qa, qb = a.quantale, b.quantale
    maps = [tuple(m) for m in monotone_maps(qa, qb)]
    errs = list(itertools.product(maps, repeat=a.n))
    funcs = list(itertools.product(range(b.n), repeat=a.n))
    PA, PB = members(a), members(b)
    out = set()
    for f, e, g in itertools.product(funcs, errs, funcs):
        if all((f[x], e[x][r], g[y]) in PB and (f[x], e[x][r], f[y]) in PB for x, r, y in PA):
            out.add((f, sum(e, ()), g))
    return out, len(funcs), len(errs)


def two_point(q, phi, name):
    return W.FiniteQqmSpace.from_relation(["0", "1"], q, np.asarray(phi), name=name)


def test_golden_exponential():
    q = godel_chain(3)
    a = two_point(q, [[2, 1], [0, 2]], "A")
    b = two_point(q, [[2, 0], [1, 1]], "B")
    e = W.exponential(a, b)
    golden = json.loads((GOLDEN / "exponential_2x2_godel3.json").read_text())
    want, n_funcs, n_errs = oracle_exponential(a, b)
    got = {(tuple(e.meta["functions"][f]), tuple(e.quantale.E[r]), tuple(e.meta["functions"][g]))
           for f, r, g in e.triples()}
    assert got == want
    assert (e.n, e.quantale.size, len(got)) == (n_funcs, n_errs, golden["triples"])
    assert e.n == golden["carrier"] and e.quantale.size == golden["quantale"]
    assert e.to_json()["relation"] == golden["relation"]
    assert W.check_axiom(e, W.QUASI_REFLEXIVE).proved and W.check_axiom(e, W.TRANSITIVE).proved


def test_exponential_caps():
    big = W.random_space(godel_chain(3), 5, np.random.default_rng(0))
    with pytest.raises(W.SizeCapExceeded):
        W.exponential(big, big)


def test_product_and_terminal():
    a = W.random_space(boolean(), 2, np.random.default_rng(1))
    b = W.random_space(godel_chain(3), 2, np.random.default_rng(2))
    p = W.product(a, b)
    assert p.n == 4 and p.quantale.size == 6
    assert W.check_axiom(p, W.TRANSITIVE).proved
    t = W.terminal()
    assert t.n == 1 and W.check_axiom(t, W.REFLEXIVE).proved


def test_closure_suite_on_discrete_metrics():
    q = truncated_lawvere(2)
    d = W.random_space(q, 2, np.random.default_rng(0), "discrete")
    rep = W.closure_theorem_suite(d, d)
    assert rep["applicable"] and rep["holds"]
    for axiom in W.STRONG:
        assert rep["conclusions"][axiom].proved


def test_closure_suite_reports_failed_hypotheses():
    space = W.st_counterexample_space()
    rep = W.closure_theorem_suite(space, space)
    assert rep["applicable"] is False


def test_category_laws():
    q = boolean()
    a = W.random_space(q, 2, np.random.default_rng(3))
    homs = W.enumerate_morphisms(a, a)
    assert any(m.same(W.identity(a)) for m in homs)
    assert all(m.validate().proved for m in homs)
    laws = W.category_laws(homs[:6])
    assert laws["identity"].proved and laws["associativity"].proved and laws["composites_are_morphisms"].proved


def test_invalid_morphism_is_refuted():
    q = boolean()
    a = W.FiniteQqmSpace.from_relation(["0", "1"], q, np.array([[1, 1], [1, 1]]))
    b = W.FiniteQqmSpace.from_relation(["0", "1"], q, np.array([[1, 0], [0, 1]]))
    # swap points but claim a zero-error table: (0, true, 1) in a must land in b
    m = W.FiniteMorphism(a, b, [0, 1], [[0, 1], [0, 1]], [0, 1])
    assert m.validate().refuted


def test_weak_coproduct():
    a = W.random_space(boolean(), 1, np.random.default_rng(4))
    b = W.random_space(godel_chain(3), 2, np.random.default_rng(5))
    target = W.random_space(boolean(), 2, np.random.default_rng(6))
    rep = W.weak_coproduct_report(a, b, [target])
    assert rep["pairs"] > 0
    for key in ("section_is_morphism", "retraction_after_section", "naturality"):
        assert rep[key].proved, key


def test_observational_relations():
    space = W.random_space(truncated_lawvere(3), 3, np.random.default_rng(7), "metric")
    for side in ("left", "right"):
        phi = W.observational(space, side)
        assert phi.shape == (3, 3)
    # on a reflexive space the left observational relation is at least as strong as phi
    left = W.observational(space, "left")
    assert all(space.quantale.leq_table[space.relation[x, y], left[x, y]] for x in range(3) for y in range(3))
    rep = W.lst_identity_report(space)
    assert set(rep) == {"with_sigma_y", "with_sigma_x"}


def test_mine_finds_a_space_with_requested_profile():
    rng = np.random.default_rng(0)
    found = W.mine(truncated_lawvere(3), 3, [W.TRANSITIVE], [W.RIGHT_QUASI_REFLEXIVE], rng, trials=500)
    assert found is not None
    assert W.check_axiom(found, W.TRANSITIVE) and W.check_axiom(found, W.RIGHT_QUASI_REFLEXIVE).refuted


def test_unknown_axiom():
    with pytest.raises(KeyError):
        W.check_axiom(W.terminal(), "Symmetric")


def test_quantale_names_are_stable():
    assert quantale_by_name("lawvere<=8").names[-1] == "inf"
