"""Value semantics and error-derivative semantics of terms.

``evaluate`` maps a term and an environment of values to a value: a float, a
pair, or a :class:`FunValue`.  ``derive`` maps a term, a value environment and
an error environment to an element of the quantale of the term's type: a
scalar radius, a pair, or a lazily evaluated :class:`ErrFun`.

Environments are dicts from variable names to values; later bindings shadow
earlier ones exactly as in the typing context.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from qqm import syntax as S
from qqm.prims import PrimitiveTable, default_table
from qqm.quantale import LAWVERE, BoxCarrier, Carrier, ErrFun, FunSpace, Product, Quantale, SampledCarrier


@dataclass(frozen=True, eq=False)
class FunValue:
    """A function value.

    ``range_on(lo, hi)``, when present, returns the exact (min, max) of the
    function over ``[lo, hi]`` for real-to-real functions; it lets distances
    be computed exactly instead of on a grid.
    """

    fn: Callable[[Any], Any]
    label: str = "fun"
    range_on: Callable[[float, float], tuple[float, float]] | None = field(default=None, repr=False)

    def __call__(self, v):
        return self.fn(v)

    def __repr__(self):
        return f"FunValue({self.label})"


def _extend(env: Mapping, name: str, value) -> dict:
    out = dict(env)
    out.pop(name, None)
    out[name] = value
    return out


def evaluate(t: S.Term, env: Mapping | None = None, prims: PrimitiveTable | None = None):
    """Denotation of ``t`` in ``env``."""
    prims = default_table() if prims is None else prims
    return _eval(t, dict(env or {}), prims)


def _eval(t, env, prims):
    if isinstance(t, S.Var):
        try:
            return env[t.name]
        except KeyError:
            raise S.LambdaTypeError(f"unbound variable {t.name}") from None
    if isinstance(t, S.Const):
        return float(t.value)
    if isinstance(t, S.PrimApp):
        return prims.evaluate(t.prim, t.param, [_eval(a, env, prims) for a in t.args])
    if isinstance(t, S.Lam):
        body, name = t.body, t.binder
        return FunValue(lambda v: _eval(body, _extend(env, name, v), prims), label=f"\\{name}")
    if isinstance(t, S.App):
        return _eval(t.fn, env, prims)(_eval(t.arg, env, prims))
    if isinstance(t, S.Pair):
        return (_eval(t.left, env, prims), _eval(t.right, env, prims))
    if isinstance(t, S.Fst):
        return _eval(t.term, env, prims)[0]
    if isinstance(t, S.Snd):
        return _eval(t.term, env, prims)[1]
    raise TypeError(f"not a term: {t!r}")


def derive(t: S.Term, env: Mapping | None = None, xi: Mapping | None = None, prims: PrimitiveTable | None = None,
           mode: str = "analytic"):
    """Error derivative of ``t`` at values ``env`` and error radii ``xi``."""
    prims = default_table() if prims is None else prims
    return _derive(t, dict(env or {}), dict(xi or {}), prims, mode)


def _derive(t, env, xi, prims, mode):
    if isinstance(t, S.Var):
        try:
            return xi[t.name]
        except KeyError:
            raise S.LambdaTypeError(f"no error radius for {t.name}") from None
    if isinstance(t, S.Const):
        return 0.0
    if isinstance(t, S.PrimApp):
        xs = [_eval(a, env, prims) for a in t.args]
        as_ = [_derive(a, env, xi, prims, mode) for a in t.args]
        return prims.modulus(t.prim, t.param, xs, as_, mode=mode)
    if isinstance(t, S.Lam):
        body, name = t.body, t.binder
        return ErrFun(lambda v, a: _derive(body, _extend(env, name, v), _extend(xi, name, a), prims, mode),
                      label=f"d\\{name}")
    if isinstance(t, S.App):
        d = _derive(t.fn, env, xi, prims, mode)
        return d(_eval(t.arg, env, prims), _derive(t.arg, env, xi, prims, mode))
    if isinstance(t, S.Pair):
        return (_derive(t.left, env, xi, prims, mode), _derive(t.right, env, xi, prims, mode))
    if isinstance(t, S.Fst):
        return _derive(t.term, env, xi, prims, mode)[0]
    if isinstance(t, S.Snd):
        return _derive(t.term, env, xi, prims, mode)[1]
    raise TypeError(f"not a term: {t!r}")


# ---------------------------------------------------------------- types to spaces


def carrier_of_type(ty: S.Type, box: tuple[float, float] = (-4.0, 4.0)) -> Carrier:
    """A sampleable stand-in for the set interpreting ``ty``."""
    if isinstance(ty, S.RealT):
        return BoxCarrier(*box)
    if isinstance(ty, S.Prod):
        left = carrier_of_type(ty.left, box)
        right = carrier_of_type(ty.right, box)
        return SampledCarrier(lambda rng: (left.points(rng, 1)[0], right.points(rng, 1)[0]), name=str(ty))
    if isinstance(ty, S.Arrow):
        from qqm.sampling import draw_value

        return SampledCarrier(lambda rng: draw_value(ty, rng, box), name=str(ty))
    raise TypeError(f"not a type: {ty!r}")


def quantale_of_type(ty: S.Type) -> Quantale:
    """Lawvere at Real, products at products, error-function spaces at arrows."""
    if isinstance(ty, S.RealT):
        return LAWVERE
    if isinstance(ty, S.Prod):
        return Product(quantale_of_type(ty.left), quantale_of_type(ty.right))
    if isinstance(ty, S.Arrow):
        return FunSpace(carrier_of_type(ty.dom), quantale_of_type(ty.dom), quantale_of_type(ty.cod))
    raise TypeError(f"not a type: {ty!r}")


def is_first_order(ty: S.Type) -> bool:
    """Real, products of first-order types, and arrows from ground data to first-order types."""
    if isinstance(ty, S.RealT):
        return True
    if isinstance(ty, S.Prod):
        return is_first_order(ty.left) and is_first_order(ty.right)
    if isinstance(ty, S.Arrow):
        return is_ground(ty.dom) and is_first_order(ty.cod)
    return False


def is_ground(ty: S.Type) -> bool:
    if isinstance(ty, S.RealT):
        return True
    if isinstance(ty, S.Prod):
        return is_ground(ty.left) and is_ground(ty.right)
    return False


def zero_radius(ty: S.Type):
    """The unit radius of Q_ty (0 everywhere)."""
    if isinstance(ty, S.RealT):
        return 0.0
    if isinstance(ty, S.Prod):
        return (zero_radius(ty.left), zero_radius(ty.right))
    return quantale_of_type(ty).unit


def value_close(ty: S.Type, u, v, tol: float = 1e-9, probes: list | None = None) -> bool:
    """Approximate equality of denotations; functions are compared on probes."""
    if isinstance(ty, S.RealT):
        if math.isinf(u) or math.isinf(v):
            return u == v
        return abs(u - v) <= tol * max(1.0, abs(u), abs(v))
    if isinstance(ty, S.Prod):
        return value_close(ty.left, u[0], v[0], tol, probes) and value_close(ty.right, u[1], v[1], tol, probes)
    if isinstance(ty, S.Arrow):
        from qqm.sampling import draw_value
        import numpy as np

        rng = np.random.default_rng(0)
        points = probes if probes is not None else [draw_value(ty.dom, rng) for _ in range(8)]
        return all(value_close(ty.cod, u(x), v(x), tol) for x in points)
    raise TypeError(f"not a type: {ty!r}")
