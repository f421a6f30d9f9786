import itertools
import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qqm import finite as F

QUANTALES = F.standard_quantales() + [F.trivial(), F.lifted(F.godel_chain(3)), F.truncated_lawvere(8)]


def brute_join(q, items):
    """Least upper bound by scanning every element."""
    ups = [c for c in range(q.size) if all(q.leq_table[i, c] for i in items)]
    least = [c for c in ups if all(q.leq_table[c, d] for d in ups)]
    assert len(least) == 1
    return least[0]


def brute_residual(q, a, b):
    return brute_join(q, [c for c in range(q.size) if q.leq_table[q.tensor_table[a, c], b]])


@pytest.mark.parametrize("q", QUANTALES, ids=lambda q: q.name)
def test_laws_hold(q):
    laws = q.check_laws()
    assert all(bool(v) for v in laws.values()), {k: v for k, v in laws.items() if not v}


@pytest.mark.parametrize("q", QUANTALES, ids=lambda q: q.name)
def test_tables_match_brute_force(q):
    for a, b in itertools.product(range(q.size), repeat=2):
        assert q.join_table[a, b] == brute_join(q, [a, b])
        assert q.residual_table[a, b] == brute_residual(q, a, b)


def test_truncated_lawvere_arithmetic():
    q = F.truncated_lawvere(8)
    assert q.name_of(q.tensor_table[q.index("1"), q.index("2")]) == "3"
    assert q.name_of(q.tensor_table[q.index("5"), q.index("4")]) == "inf"
    assert q.name_of(q.residual_table[q.index("2"), q.index("5")]) == "3"
    assert q.name_of(q.residual_table[q.index("inf"), q.index("7")]) == "0"
    assert q.unit == q.index("0") and q.bottom == q.index("inf") and q.top == q.index("0")


def test_lifted_bottom_absorbs():
    q = F.lifted(F.truncated_lawvere(3))
    assert q.names[0] == "∅"
    assert q.tensor_table[q.index("{2}"), 0] == 0
    assert q.bottom == 0


def test_non_quantale_is_detected():
    # tensor = max on a chain: the top is not a unit
    idx = np.arange(3)
    bad = F.FiniteQuantale(["0", "1", "2"], idx[:, None] <= idx[None, :], np.maximum(idx[:, None], idx[None, :]), 2)
    laws = bad.check_laws()
    assert laws["unit"].refuted
    assert not bad.is_quantale()


def test_json_round_trip(tmp_path):
    q = F.product(F.boolean(), F.godel_chain(3))
    path = tmp_path / "q.json"
    path.write_text(json.dumps(q.to_json()))
    back = F.FiniteQuantale.from_json(path)
    assert back.names == q.names
    assert np.array_equal(back.leq_table, q.leq_table)
    assert np.array_equal(back.tensor_table, q.tensor_table)
    assert back.unit == q.unit


def test_shipped_quantale_file():
    path = Path(__file__).resolve().parents[1] / "data" / "quantales" / "luk3.json"
    q = F.FiniteQuantale.from_json(path)
    ref = F.quantale_by_name("luk3")
    assert q.is_quantale()
    assert np.array_equal(q.tensor_table, ref.tensor_table) and np.array_equal(q.leq_table, ref.leq_table)


def test_tensor_triples_form():
    data = {"elements": ["0", "1"], "order": [["0", "1"]], "unit": "1",
            "tensor_triples": [["0", "0", "0"], ["0", "1", "0"], ["1", "1", "1"]]}
    q = F.FiniteQuantale.from_json(data)
    assert q.is_quantale()
    with pytest.raises(ValueError):
        F.FiniteQuantale.from_json({**data, "tensor_triples": [["0", "0", "0"]]})


@pytest.mark.parametrize("name", ["bool", "one", "godel4", "luk3", "lawvere<=5", "boolxgodel3"])
def test_quantale_by_name(name):
    assert F.quantale_by_name(name).is_quantale()


def test_monotone_maps_brute_force():
    q, p = F.godel_chain(3), F.boolean()
    got = {tuple(r) for r in F.monotone_maps(q, p)}
    want = {m for m in itertools.product(range(p.size), repeat=q.size)
            if all(p.leq_table[m[i], m[j]] for i in range(q.size) for j in range(q.size) if q.leq_table[i, j])}
    assert got == want


def test_function_space_is_quantale_and_residual_brute_force():
    inner, outer = F.boolean(), F.godel_chain(3)
    fs = F.function_space(2, inner, outer)
    assert fs.size == len(F.monotone_maps(inner, outer)) ** 2
    assert fs.is_quantale()
    for a, b in itertools.product(range(fs.size), repeat=2):
        assert fs.residual_table[a, b] == brute_residual(fs, a, b)


def test_function_space_cap():
    with pytest.raises(ValueError):
        F.function_space(4, F.godel_chain(4), F.godel_chain(4), cap=100)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(QUANTALES), st.data())
def test_adjunction_property(q, data):
    a, b, c = (data.draw(st.integers(0, q.size - 1)) for _ in range(3))
    T, L, R = q.tensor_table, q.leq_table, q.residual_table
    assert L[T[a, c], b] == L[c, R[a, b]]
