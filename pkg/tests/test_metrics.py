import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qqm import metrics as M
from qqm import syntax as S
from qqm.quantale import const_errfun
from qqm.sampling import (ABS, COS, IDENTITY, NAMED_FUNCTIONS, SIN, SQUARE, SamplerConfig, affine_fun, const_fun,
                          draw_triple, exact_rho_hat_rr, function_by_name, supports_triples)

RR = M.RR


def brute_rho(f, g, x, a, n=4001):
    """max over |y - x| <= a of max(|f x - g y|, |f x - f y|), pure Python on a fine grid."""
    fx = f(x)
    ys = [x - a + 2 * a * i / (n - 1) for i in range(n)] + [x]
    return max(max(abs(fx - g(y)), abs(fx - f(y))) for y in ys)


def test_asymmetric_example_exact_and_grid():
    for mode in (True, False):
        fwd = M.rho_hat_arrow(SIN, IDENTITY, math.pi, 2 * math.pi, exact=mode)
        bwd = M.rho_hat_arrow(IDENTITY, SIN, math.pi, 2 * math.pi, exact=mode)
        assert fwd.value == pytest.approx(3 * math.pi, abs=1e-3)
        assert bwd.value == pytest.approx(2 * math.pi, abs=1e-3)
    assert M.rho_hat_arrow(SIN, IDENTITY, math.pi, 2 * math.pi).mode == "exact"


def test_zero_radius_distance_is_pointwise():
    assert M.rho_hat_arrow(SIN, SIN, 0.4, 0.0).value == 0.0
    assert M.rho_hat_arrow(SIN, COS, 0.0, 0.0, exact=False).value == pytest.approx(1.0)


pool = st.sampled_from(sorted(NAMED_FUNCTIONS)) | st.builds(lambda c: f"const:{c}", st.integers(-3, 3)) | \
    st.builds(lambda m, c: f"affine:{m},{c}", st.integers(-2, 2), st.integers(-2, 2))


@settings(max_examples=80, deadline=None)
@given(pool, pool, st.floats(-3, 3), st.floats(0, 3))
def test_exact_distance_matches_brute_force(fname, gname, x, a):
    f, g = function_by_name(fname), function_by_name(gname)
    exact = exact_rho_hat_rr(f, g)(x, a)
    brute = brute_rho(f, g, x, a)
    assert exact >= brute - 1e-9
    assert exact == pytest.approx(brute, abs=1e-3 * max(1.0, a) ** 2)


def test_grid_distance_never_exceeds_exact():
    for f, g in ((SIN, SQUARE), (ABS, COS), (SQUARE, IDENTITY)):
        for x, a in ((0.3, 1.7), (-1.0, 0.25)):
            grid = M.rho_hat_arrow(f, g, x, a, exact=False)
            assert grid.value <= exact_rho_hat_rr(f, g)(x, a) + 1e-12
            assert grid.converged


def test_membership_examples():
    assert M.member(S.REAL, 0.0, 2.0, 1.0).proved
    assert M.member(S.REAL, 0.0, 0.5, 1.0).refuted
    v = M.member(RR, SIN, const_errfun(0.0), SIN)
    assert v.refuted and "point" in v.witness
    assert M.member(RR, const_fun(1.0), M.self_distance(RR, const_fun(1.0)), const_fun(1.0)).sampled
    pair = S.Prod(S.REAL, S.REAL)
    assert M.member(pair, (0.0, 0.0), (1.0, 0.1), (1.0, 0.5)).witness["component"] == "snd"


def test_membership_with_probes_at_higher_type():
    ty = S.Arrow(RR, S.REAL)
    at0 = lambda f: f(0.0)  # noqa: E731
    probes = [(SIN, exact_rho_hat_rr(SIN, COS), COS)]
    good = lambda f, d: d(0.0, 0.0)  # noqa: E731
    assert M.member(ty, at0, good, at0, probes=probes).sampled
    assert M.member(ty, at0, lambda f, d: 0.0, at0, probes=probes).refuted


def test_self_distances():
    assert M.self_distance(S.REAL, 3.7) == 0.0
    sigma = M.self_distance(RR, const_fun(2.0))
    assert all(sigma(x, a) == 0.0 for x in (-1.0, 0.0, 5.0) for a in (0.0, 1.0, 100.0))
    s = M.self_distance(RR, IDENTITY)
    assert s(0.0, 1.5) == pytest.approx(1.5)


def test_two_term_bound_when_terms_coincide():
    t = S.parse("\\x:Real. sin x")
    d = M.derive(t)
    for x, a in ((0.0, 0.1), (1.0, 2.0)):
        assert M.two_term_bound(t, t, x, a) == d(x, a)


def test_two_term_bound_is_sound():
    t = S.parse("\\x:Real. sin x")
    s = S.parse("\\x:Real. x")
    rng = np.random.default_rng(3)
    for _ in range(200):
        x, a = rng.uniform(-3, 3), rng.exponential(1.0)
        bound = M.two_term_bound(t, s, x, a)
        y = x + rng.uniform(-a, a)
        assert abs(math.sin(x) - y) <= bound + 1e-12
        assert abs(math.sin(x) - math.sin(y)) <= bound + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([S.REAL, S.Prod(S.REAL, S.REAL), RR]), st.integers(0, 2**32 - 1))
def test_sampled_triples_are_members(ty, seed):
    assert supports_triples(ty)
    x, a, y = draw_triple(ty, np.random.default_rng(seed), SamplerConfig())
    assert not M.member(ty, x, a, y, SamplerConfig(seed=seed), tol=1e-9).refuted


def test_example_bound_replay_values():
    row = M.example_bound_replay(0.1, 0.01)
    assert row["sound"]
    assert row["bound"] >= row["actual"]
    assert row["derived"] >= row["actual"]
    # a / eps dominates at this scale
    assert row["bound"] == pytest.approx(0.1, rel=1e-9)


def test_affine_range_handles_infinity():
    f = affine_fun(2.0, 1.0)
    assert f.range_on(-math.inf, 0.0) == (-math.inf, 1.0)
