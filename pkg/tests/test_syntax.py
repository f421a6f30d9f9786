import pytest
from hypothesis import given, settings, strategies as st

from qqm import syntax as S

RR = S.Arrow(S.REAL, S.REAL)


def test_lambda_application_reading():
    t = S.parse("\\f:Real->Real. f 0.0")
    assert t == S.Lam("f", RR, S.App(S.Var("f"), S.Const(0.0)))


def test_let_is_sugar_for_application():
    t = S.parse("let y be add[0.1](x) in diff[0.1](f y, f x)")
    assert isinstance(t, S.App) and isinstance(t.fn, S.Lam)
    assert t.fn.binder == "y" and t.fn.annot is None
    assert t.arg == S.PrimApp("add", (S.Var("x"),), 0.1)


@pytest.mark.parametrize("src", ["fst 3.0 4.0", "\\x. x", "(1.0", "<1.0, 2.0", "let x be in x",
                                 "sin", "1.0 )"])
def test_syntax_errors(src):
    with pytest.raises(S.LambdaSyntaxError):
        S.parse(src)


def test_syntax_error_has_position():
    with pytest.raises(S.LambdaSyntaxError) as err:
        S.parse("add2(1.0, ]")
    assert err.value.pos == 10


def test_application_is_left_associative_and_arrows_right():
    t = S.parse("f x y", {})
    assert t == S.App(S.App(S.Var("f"), S.Var("x")), S.Var("y"))
    assert S.parse_type("Real -> Real -> Real") == S.Arrow(S.REAL, RR)
    assert S.parse_type("Real * Real -> Real") == S.Arrow(S.Prod(S.REAL, S.REAL), S.REAL)


def test_typing_examples():
    t = S.parse("\\f:(Real -> Real) -> Real. f (\\x:Real. 1.0)")
    assert str(S.typecheck([], t)) == str(S.parse_type("((Real -> Real) -> Real) -> Real"))
    ctx = [("f", RR), ("x", S.REAL)]
    assert S.typecheck(ctx, S.parse("diff[0.1](f (add[0.1](x)), f x)")) == S.REAL
    assert S.typecheck(ctx, S.parse("let y be add[0.1](x) in diff[0.1](f y, f x)")) == S.REAL


@pytest.mark.parametrize("src,ctx", [
    ("(\\x:Real. x) <1.0, 2.0>", []),
    ("fst(1.0)", []),
    ("f x", [("f", S.REAL), ("x", S.REAL)]),
    ("sin(<1.0, 1.0>)", []),
    ("y", []),
])
def test_type_errors(src, ctx):
    with pytest.raises(S.LambdaTypeError):
        S.typecheck(ctx, S.parse(src))


def test_arity_mismatch_is_a_type_error():
    with pytest.raises(S.LambdaTypeError, match="arity"):
        S.typecheck([], S.parse("add2(1.0)"))


def test_missing_parameter_fails_at_evaluation():
    from qqm.semantics import evaluate

    t = S.parse("add(1.0)")
    assert S.typecheck([], t) == S.REAL
    with pytest.raises(ValueError, match="parameter"):
        evaluate(t)


def test_elaborate_annotates_let():
    ctx = [("x", S.REAL)]
    t = S.elaborate(ctx, S.parse("let u be sin x in add2(u, u)"))
    assert t.fn.annot == S.REAL


def test_substitute_avoids_capture():
    t = S.parse("\\y:Real. add2(x, y)")
    s = S.substitute(t, "x", S.Var("y"))
    assert isinstance(s, S.Lam) and s.binder != "y"
    assert S.free_vars(s) == {"y"}


def test_free_vars_and_size():
    t = S.parse("\\x:Real. add2(x, z)")
    assert S.free_vars(t) == {"z"}
    assert S.size(S.parse("x")) == 1


# ---------------------------------------------------------------- printer round trip

names = st.sampled_from(["x", "y", "z", "u", "v"])
types = st.recursive(st.just(S.REAL), lambda t: st.builds(S.Arrow, t, t) | st.builds(S.Prod, t, t), max_leaves=4)


def terms():
    leaf = names.map(S.Var) | st.floats(0, 100, allow_nan=False).map(S.Const)

    def grow(sub):
        return st.one_of(
            st.builds(S.App, sub, sub),
            st.builds(S.Lam, names, types, sub),
            st.builds(S.Pair, sub, sub),
            st.builds(S.Fst, sub),
            st.builds(S.Snd, sub),
            st.builds(lambda a: S.PrimApp("sin", (a,)), sub),
            st.builds(lambda a, b: S.PrimApp("add2", (a, b)), sub, sub),
            st.builds(lambda a, p: S.PrimApp("add", (a,), p), sub, st.floats(0.001, 10)),
            st.builds(lambda x, b, body: S.let(x, b, body), names, sub, sub),
        )

    return st.recursive(leaf, grow, max_leaves=12)


@settings(max_examples=300, deadline=None)
@given(terms())
def test_pretty_parse_round_trip(t):
    assert S.parse(S.pretty(t)) == t


@settings(max_examples=200, deadline=None)
@given(types)
def test_type_print_round_trip(ty):
    assert S.parse_type(str(ty)) == ty
