"""Primitive real functions and their moduli of continuity.

The modulus of a primitive at ``xs`` with radii ``as_`` is the supremum of
``|f(xs) - f(ys)|`` over the box ``|xs[i] - ys[i]| <= as_[i]``.  The analytic
forms below are exact or certified over-approximations.  The grid oracle
evaluates on a finite grid inside the box and therefore under-approximates;
it is only used to cross-check the analytic forms.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

INF = math.inf


class MissingModulus(LookupError):
    pass


class UnknownPrimitive(KeyError):
    pass


def _mul0(c: float, a: float) -> float:
    """Product with the convention ``0 * inf = 0`` (zero sensitivity wins)."""
    if c == 0 or a == 0:
        return 0.0
    return c * a


@dataclass(frozen=True)
class Primitive:
    name: str
    arity: int
    fn: Callable  # (param, xs) -> float
    modulus: Callable | None = None  # (param, xs, as_) -> float
    lipschitz: Callable | None = None  # param -> per-argument constants
    needs_param: bool = False
    doc: str = ""

    def __call__(self, param, xs: Sequence[float]) -> float:
        if self.needs_param and param is None:
            raise ValueError(f"primitive {self.name} needs a parameter, e.g. {self.name}[0.1]")
        return float(self.fn(param, xs))


def _trig_oscillation(f: Callable[[float], float], crit_phase: float, x: float, a: float) -> float:
    """Exact sup of |f(x) - f(y)| over |y - x| <= a for f in {sin, cos}.

    Extremes of f on an interval occur at the endpoints or at critical points
    ``crit_phase + k*pi`` inside it.
    """
    fx = f(x)
    if a >= 2 * math.pi:
        return 1.0 + abs(fx)
    lo, hi = x - a, x + a
    vals = [f(lo), f(hi)]
    k = math.ceil((lo - crit_phase) / math.pi)
    c = crit_phase + k * math.pi
    while c <= hi:
        vals.append(f(c))
        c += math.pi
    return min(max(max(vals) - fx, fx - min(vals)), 2.0)


def _sin_mod(param, xs, as_):
    return _trig_oscillation(math.sin, math.pi / 2, xs[0], as_[0])


def _cos_mod(param, xs, as_):
    return _trig_oscillation(math.cos, 0.0, xs[0], as_[0])


def _mul_mod(param, xs, as_):
    x, y = xs
    a, b = as_
    if a == INF or b == INF:
        # unbounded unless the other factor is pinned to zero
        if a == INF and b == 0 and y == 0:
            return 0.0
        if b == INF and a == 0 and x == 0:
            return 0.0
        return INF
    # the deviation x'y' - xy is bilinear, so its extremes over the box are at corners
    base = x * y
    return max(abs((x + s * a) * (y + t * b) - base) for s in (-1, 1) for t in (-1, 1))


def _scaled_sum(consts):
    def mod(param, xs, as_):
        cs = consts(param)
        return float(sum(_mul0(abs(c), a) for c, a in zip(cs, as_)))

    return mod


def _const_eval(param, xs):
    if param is None:
        raise ValueError("const needs a parameter, e.g. const[1.0]")
    return param


class PrimitiveTable:
    """Name -> primitive; parameters are supplied at each use site."""

    def __init__(self, prims: Sequence[Primitive] = (), strict: bool = True, label: str = "custom"):
        self._prims = {p.name: p for p in prims}
        self.strict = strict
        self.label = label

    def __contains__(self, name) -> bool:
        return name in self._prims

    def __len__(self) -> int:
        return len(self._prims)

    def names(self) -> list[str]:
        return sorted(self._prims)

    def get(self, name: str) -> Primitive:
        try:
            return self._prims[name]
        except KeyError:
            raise UnknownPrimitive(name) from None

    def arities(self) -> dict[str, int]:
        return {n: p.arity for n, p in self._prims.items()}

    def evaluate(self, name: str, param, xs: Sequence[float]) -> float:
        prim = self.get(name)
        if len(xs) != prim.arity:
            raise ValueError(f"{name} expects {prim.arity} arguments")
        return prim(param, xs)

    def modulus(self, name: str, param, xs: Sequence[float], as_: Sequence[float], mode: str = "analytic",
                resolution: int = 65) -> float:
        """Primitive modulus at ``xs`` with radii ``as_``.

        ``mode`` is ``"analytic"`` (sound upper bound) or ``"grid"``
        (under-approximation on ``resolution`` points per radius axis).
        """
        prim = self.get(name)
        if len(xs) != prim.arity or len(as_) != prim.arity:
            raise ValueError(f"{name} expects {prim.arity} points and radii")
        if mode == "grid":
            return grid_modulus(prim, param, xs, as_, resolution)
        if mode != "analytic":
            raise ValueError(f"unknown modulus mode {mode!r}")
        if prim.modulus is not None:
            return float(prim.modulus(param, list(xs), list(as_)))
        if prim.lipschitz is not None:
            return _scaled_sum(prim.lipschitz)(param, xs, as_)
        if self.strict:
            raise MissingModulus(name)
        return INF

    def restricted(self, names: Sequence[str]) -> "PrimitiveTable":
        return PrimitiveTable([self._prims[n] for n in names], strict=self.strict, label=self.label)

    def with_aliases(self, entries: Sequence[dict]) -> "PrimitiveTable":
        """Add entries ``{"name", "builtin", "param"?}`` reusing builtin evaluators."""
        prims = dict(self._prims)
        builtins = {p.name: p for p in _BUILTINS}
        for e in entries:
            base = builtins[e["builtin"]]
            fixed = e.get("param")
            if fixed is None:
                prims[e["name"]] = Primitive(e["name"], base.arity, base.fn, base.modulus, base.lipschitz,
                                             base.needs_param, base.doc)
                continue

            def bind(f, fixed=fixed):
                return None if f is None else (lambda param, *rest: f(fixed, *rest))

            prims[e["name"]] = Primitive(e["name"], base.arity, bind(base.fn), bind(base.modulus),
                                         None if base.lipschitz is None else (lambda param, b=base, fx=fixed: b.lipschitz(fx)),
                                         False, base.doc)
        return PrimitiveTable(list(prims.values()), strict=self.strict, label=self.label)


def grid_modulus(prim: Primitive, param, xs, as_, resolution: int = 65, max_points: int = 200_000,
                 inf_radius: float = 1e3) -> float:
    """Grid lower estimate of the modulus; infinite radii are clipped to ``inf_radius``."""
    n = prim.arity
    if n == 0:
        return 0.0
    per_axis = max(2, min(resolution, int(max_points ** (1.0 / n))))
    axes = []
    for x, a in zip(xs, as_):
        a = min(a, inf_radius)
        axes.append(np.unique(np.concatenate([np.linspace(x - a, x + a, per_axis), [x]])))
    fx = prim(param, xs)
    best = 0.0
    for ys in itertools.product(*axes):
        best = max(best, abs(prim(param, list(ys)) - fx))
    return best


_BUILTINS = [
    Primitive("add", 1, lambda p, xs: xs[0] + p, lambda p, xs, as_: as_[0], lambda p: [1.0], needs_param=True,
              doc="x + eps"),
    Primitive("diff", 2, lambda p, xs: (xs[0] - xs[1]) / p, lambda p, xs, as_: (as_[0] + as_[1]) / p,
              lambda p: [1.0 / p, 1.0 / p], needs_param=True, doc="(x - y) / eps"),
    Primitive("sin", 1, lambda p, xs: math.sin(xs[0]), _sin_mod, lambda p: [1.0], doc="sine"),
    Primitive("cos", 1, lambda p, xs: math.cos(xs[0]), _cos_mod, lambda p: [1.0], doc="cosine"),
    Primitive("mul", 2, lambda p, xs: xs[0] * xs[1], _mul_mod, None, doc="x * y"),
    Primitive("add2", 2, lambda p, xs: xs[0] + xs[1], lambda p, xs, as_: as_[0] + as_[1], lambda p: [1.0, 1.0],
              doc="x + y"),
    Primitive("neg", 1, lambda p, xs: -xs[0], lambda p, xs, as_: as_[0], lambda p: [1.0], doc="-x"),
    Primitive("abs", 1, lambda p, xs: abs(xs[0]), lambda p, xs, as_: as_[0], lambda p: [1.0], doc="|x|"),
    Primitive("id", 1, lambda p, xs: xs[0], lambda p, xs, as_: as_[0], lambda p: [1.0], doc="x"),
    Primitive("const", 1, lambda p, xs: _const_eval(p, xs), lambda p, xs, as_: 0.0, lambda p: [0.0],
              needs_param=True, doc="constant c, ignoring its argument"),
]


def default_table(strict: bool = True) -> PrimitiveTable:
    return PrimitiveTable(_BUILTINS, strict=strict, label="default")


def empty_table() -> PrimitiveTable:
    return PrimitiveTable([], label="empty")


def load_table(path, strict: bool = True) -> PrimitiveTable:
    """Load a manifest ``{"include": [...], "aliases": [{"name", "builtin", "param"?}]}``."""
    data = json.loads(Path(path).read_text())
    base = default_table(strict)
    include = data.get("include", base.names())
    table = base.restricted(include).with_aliases(data.get("aliases", []))
    table.label = str(path)
    return table


def select_table(source: str, strict: bool = True) -> PrimitiveTable:
    if source == "default":
        return default_table(strict)
    if source == "empty":
        return empty_table()
    return load_table(source, strict)
