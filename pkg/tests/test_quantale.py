import math

import pytest
from hypothesis import given, strategies as st

from qqm.quantale import (EMPTY, INF, LAWVERE, FiniteCarrier, FunSpace, Lift, Lifted, Product, ShapeError,
                          check_monotone, const_errfun, ErrFun, lw_leq)
from qqm.finite import godel_chain

lawvere_values = st.one_of(st.just(INF), st.integers(0, 50).map(float))


def test_reversed_order():
    assert LAWVERE.leq(5, 3).proved
    assert LAWVERE.leq(3, 5).refuted
    assert LAWVERE.leq(INF, 0).proved
    assert LAWVERE.leq(0, INF).refuted


def test_lawvere_operations():
    assert LAWVERE.tensor(2, 3) == 5
    assert LAWVERE.meet([1, 3]) == 3
    assert LAWVERE.join([1, 3]) == 1
    assert LAWVERE.residual(2, 5) == 3
    assert LAWVERE.residual(5, 2) == 0
    assert LAWVERE.residual(INF, 7) == 0
    assert LAWVERE.residual(3, INF) == INF
    assert LAWVERE.meet([]) == 0.0  # top
    assert LAWVERE.join([]) == INF  # bottom


def test_rejects_bad_values():
    for bad in (-1.0, math.nan, "1", True):
        with pytest.raises(ShapeError):
            LAWVERE.check_value(bad)


@given(lawvere_values)
def test_reflexive_and_unit(a):
    assert LAWVERE.leq(a, a).proved
    assert LAWVERE.tensor(LAWVERE.unit, a) == a
    assert LAWVERE.meet([a]) == a
    assert LAWVERE.residual(LAWVERE.unit, a) == a


@given(lawvere_values, lawvere_values, lawvere_values)
def test_residuation_adjunction(a, b, c):
    # a (x) c below b  iff  c below a -o b
    assert bool(LAWVERE.leq(LAWVERE.tensor(a, c), b)) == bool(LAWVERE.leq(c, LAWVERE.residual(a, b)))


@given(lawvere_values, lawvere_values, lawvere_values)
def test_tensor_monoid_and_join_distributivity(a, b, c):
    t = LAWVERE.tensor
    assert t(a, t(b, c)) == t(t(a, b), c)
    assert t(a, b) == t(b, a)
    assert t(a, LAWVERE.join([b, c])) == LAWVERE.join([t(a, b), t(a, c)])


def test_product():
    P = Product(LAWVERE, LAWVERE)
    assert P.leq((4, 1), (2, 1)).proved
    assert P.leq((4, 1), (2, 3)).refuted
    assert P.tensor((1, 2), (3, 4)) == (4, 6)
    assert P.unit == (0.0, 0.0)
    assert P.residual((1, 1), (4, 0)) == (3, 0)


def test_lifted():
    L = Lifted(LAWVERE)
    assert L.tensor(Lift(2.0), EMPTY) == EMPTY
    assert L.tensor(Lift(2.0), Lift(3.0)) == Lift(5.0)
    assert L.leq(EMPTY, Lift(0.0)).proved
    assert L.leq(Lift(0.0), EMPTY).refuted
    assert L.join([EMPTY, Lift(4.0), Lift(1.0)]) == Lift(1.0)
    assert L.meet([EMPTY, Lift(4.0)]) == EMPTY
    assert L.residual(EMPTY, Lift(3.0)) == L.unit
    assert L.residual(Lift(1.0), EMPTY) == EMPTY


def test_funspace_over_finite_domain_is_exact():
    q = godel_chain(3)
    F = FunSpace(FiniteCarrier((0, 1)), q, q)
    f = ErrFun(lambda x, a: a, "id")
    g = const_errfun(q.top)
    assert F.leq(f, g).proved
    assert F.leq(g, f).refuted


def test_funspace_sampled_and_residual():
    from qqm.semantics import quantale_of_type
    from qqm import syntax as S

    F = quantale_of_type(S.Arrow(S.REAL, S.REAL))
    small = ErrFun(lambda x, a: a, "a")
    big = ErrFun(lambda x, a: 2 * a + 1, "2a+1")
    assert F.leq(big, small).sampled
    assert F.leq(small, big).refuted
    r = F.residual(small, big)
    # residual at (x, a) is the meet over radii above a of (2b + 1 - b) = b + 1, i.e. a + 1
    assert r(0.0, 0.5) == pytest.approx(1.5)
    assert check_monotone(F, big).sampled
    assert check_monotone(F, ErrFun(lambda x, a: max(0.0, 5 - a), "decreasing")).refuted


def test_lw_leq_tolerance():
    assert lw_leq(1.0, 1.0 + 1e-12, tol=1e-9)
    assert not lw_leq(1.0, 1.1, tol=1e-9)
