import pytest
from hypothesis import given, settings, strategies as st

from qqm import syntax as S
from qqm.normalize import beta_eta_equal, normal_form

RR = S.Arrow(S.REAL, S.REAL)
FX = [("f", RR), ("x", S.REAL)]


def eq(ctx, a, b):
    return beta_eta_equal(ctx, S.parse(a), S.parse(b))


def test_eta_for_functions_and_pairs():
    assert eq(FX, "f", "\\y:Real. f y")
    assert eq([("p", S.Prod(S.REAL, S.REAL))], "p", "<fst(p), snd(p)>")


def test_beta_and_let():
    assert eq(FX, "let u be sin x in add2(u, u)", "add2(sin x, sin x)")
    assert eq(FX, "(\\g:Real -> Real. g (g x)) f", "f (f x)")
    assert eq([], "fst(<1.0, 2.0>)", "1.0")


def test_primitives_are_opaque():
    assert not eq(FX, "add2(x, x)", "mul(x, 2.0)")
    assert not eq(FX, "sin x", "sin (sin x)")


def test_alpha_equivalence():
    assert eq([], "\\a:Real. \\b:Real. a", "\\u:Real. \\v:Real. u")
    assert not eq([], "\\a:Real. \\b:Real. a", "\\u:Real. \\v:Real. v")


def test_different_types_are_unequal():
    assert not eq([("x", S.REAL)], "x", "\\y:Real. x")


def test_normal_form_is_eta_long():
    nf = normal_form([("f", RR)], S.parse("f"))
    assert isinstance(nf, S.Lam) and isinstance(nf.body, S.App)


SOURCES = ["x", "sin x", "(\\z:Real. z) x", "f x", "(\\g:Real -> Real. g x) f", "let y be f x in add2(y, x)",
           "fst(<f x, x>)", "snd(<x, f (f x)>)", "(\\z:Real. f z) (f x)", "f (f x)", "add2(f x, x)"]


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(SOURCES), st.sampled_from(SOURCES))
def test_normal_forms_are_idempotent_and_decide_equality(a, b):
    ta, tb = S.parse(a), S.parse(b)
    na = normal_form(FX, ta)
    assert normal_form(FX, na) == na
    assert beta_eta_equal(FX, ta, tb) == (na == normal_form(FX, tb))
    assert beta_eta_equal(FX, ta, na)


def test_unannotated_lambda_outside_let_is_rejected():
    with pytest.raises(S.LambdaTypeError):
        normal_form([], S.Lam("x", None, S.Var("x")))
