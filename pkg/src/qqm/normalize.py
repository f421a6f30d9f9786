"""βη-long normal forms by normalization by evaluation.

Primitive applications and literals are treated as opaque constants, so two
terms get the same normal form exactly when they are βη-equal in the pure
simply typed calculus over those constants.  Bound variables of normal forms
are named by binding depth, which makes α-equivalent terms compare equal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from qqm import syntax as S


@dataclass(frozen=True)
class _Fun:
    apply: Callable


@dataclass(frozen=True)
class _Pair:
    left: object
    right: object


def _bound_name(depth: int) -> str:
    # not lexable as an identifier, so it cannot clash with a context variable
    return f"%{depth}"


def _reflect(ty: S.Type, ne: S.Term):
    if isinstance(ty, S.RealT):
        return ne
    if isinstance(ty, S.Arrow):
        return _Fun(lambda v, depth: _reflect(ty.cod, S.App(ne, _reify(ty.dom, v, depth))))
    if isinstance(ty, S.Prod):
        return _Pair(_reflect(ty.left, S.Fst(ne)), _reflect(ty.right, S.Snd(ne)))
    raise TypeError(f"not a type: {ty!r}")


def _reify(ty: S.Type, v, depth: int) -> S.Term:
    if isinstance(ty, S.RealT):
        return v
    if isinstance(ty, S.Arrow):
        name = _bound_name(depth)
        body = v.apply(_reflect(ty.dom, S.Var(name)), depth + 1)
        return S.Lam(name, ty.dom, _reify(ty.cod, body, depth + 1))
    if isinstance(ty, S.Prod):
        return S.Pair(_reify(ty.left, v.left, depth), _reify(ty.right, v.right, depth))
    raise TypeError(f"not a type: {ty!r}")


def _eval(t: S.Term, env: dict, depth: int):
    if isinstance(t, S.Var):
        return env[t.name]
    if isinstance(t, S.Const):
        return S.Const(float(t.value))
    if isinstance(t, S.PrimApp):
        return S.PrimApp(t.prim, tuple(_reify(S.REAL, _eval(a, env, depth), depth) for a in t.args), t.param)
    if isinstance(t, S.Lam):
        if t.annot is None:
            raise S.LambdaTypeError("normalization needs annotated binders; elaborate the term first")
        name, body = t.binder, t.body

        def apply(v, d):
            return _eval(body, {**env, name: v}, d)

        return _Fun(apply)
    if isinstance(t, S.App):
        return _eval(t.fn, env, depth).apply(_eval(t.arg, env, depth), depth)
    if isinstance(t, S.Pair):
        return _Pair(_eval(t.left, env, depth), _eval(t.right, env, depth))
    if isinstance(t, S.Fst):
        return _eval(t.term, env, depth).left
    if isinstance(t, S.Snd):
        return _eval(t.term, env, depth).right
    raise TypeError(f"not a term: {t!r}")


def normal_form(ctx, t: S.Term, prims=None) -> S.Term:
    """βη-long normal form of ``t`` in ``ctx``."""
    ctx = list(ctx)
    t = S.elaborate(ctx, t, prims)
    ty = S.typecheck(ctx, t, prims)
    env = {name: _reflect(cty, S.Var(name)) for name, cty in ctx}
    return _reify(ty, _eval(t, env, 0), 0)


def beta_eta_equal(ctx, t: S.Term, s: S.Term, prims=None) -> bool:
    ctx = list(ctx)
    if S.typecheck(ctx, t, prims) != S.typecheck(ctx, s, prims):
        return False
    return normal_form(ctx, t, prims) == normal_form(ctx, s, prims)
