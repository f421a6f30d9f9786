"""Commutative integral quantales and their values.

Four shapes are provided here: the Lawvere quantale of extended nonnegative
reals, binary products, monotone error-function spaces, and lifting.  Finite
quantales given by tables live in :mod:`qqm.finite`.

Order convention: ``leq(a, b)`` is the quantale order.  On the Lawvere
quantale the order is reversed numeric order, so ``leq(5, 3)`` holds.  Code in
this package compares scalars through :func:`lw_leq` rather than raw ``<=``.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from qqm.verdict import Verdict

INF = math.inf


class ShapeError(TypeError):
    """A value does not belong to the quantale it was used with."""


def lw_leq(a: float, b: float, tol: float = 0.0) -> bool:
    """Lawvere order on scalars: ``a`` is below ``b`` when ``a >= b``."""
    return a + tol >= b


def _rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


# ---------------------------------------------------------------- carriers


class Carrier:
    """A set of points that error functions are defined on."""

    finite = False

    def points(self, rng, n: int) -> list:
        raise NotImplementedError


@dataclass(frozen=True)
class FiniteCarrier(Carrier):
    elements: tuple

    finite = True

    def points(self, rng=None, n: int = 0) -> list:
        return list(self.elements)


@dataclass(frozen=True)
class BoxCarrier(Carrier):
    """Real numbers, sampled from a box with a few fixed landmarks."""

    lo: float = -4.0
    hi: float = 4.0

    def points(self, rng, n: int) -> list:
        rng = _rng(rng)
        fixed = [0.0, self.lo, self.hi]
        rest = rng.uniform(self.lo, self.hi, size=max(n - len(fixed), 0))
        return (fixed + [float(v) for v in rest])[: max(n, 1)]


@dataclass(frozen=True)
class SampledCarrier(Carrier):
    draw: Callable[[np.random.Generator], Any]
    name: str = "sampled"

    def points(self, rng, n: int) -> list:
        rng = _rng(rng)
        return [self.draw(rng) for _ in range(n)]


# ---------------------------------------------------------------- values


@dataclass(frozen=True)
class Lift:
    """Element of a lifted quantale; ``Lift(None)`` is the empty set."""

    content: Any = None

    @property
    def empty(self) -> bool:
        return self.content is None

    def __repr__(self):
        return "Lift(∅)" if self.empty else f"Lift({self.content!r})"


EMPTY = Lift(None)


class ErrFun:
    """Error function ``(point, radius) -> quantale value``, evaluated lazily."""

    __slots__ = ("fn", "label")

    def __init__(self, fn: Callable[[Any, Any], Any], label: str = "errfun"):
        self.fn = fn
        self.label = label

    def __call__(self, x, a):
        return self.fn(x, a)

    def __repr__(self):
        return f"ErrFun({self.label})"


def const_errfun(value, label: str | None = None) -> ErrFun:
    return ErrFun(lambda x, a: value, label or f"const({value!r})")


# ---------------------------------------------------------------- descriptors


class Quantale:
    """Interface shared by all quantale descriptors."""

    unit: Any
    bottom: Any

    def check_value(self, v) -> None:
        raise NotImplementedError

    def leq(self, a, b) -> Verdict:
        raise NotImplementedError

    def tensor(self, a, b):
        raise NotImplementedError

    def meet(self, family: Iterable):
        raise NotImplementedError

    def join(self, family: Iterable):
        raise NotImplementedError

    def residual(self, a, b):
        raise NotImplementedError

    def upper_chain(self, a, k: int = 16) -> list:
        """Some elements above ``a``, always including ``a`` itself."""
        raise NotImplementedError

    def samples(self, rng, n: int = 8) -> list:
        raise NotImplementedError

    def equal(self, a, b) -> Verdict:
        return Verdict.combine([self.leq(a, b), self.leq(b, a)])


class Lawvere(Quantale):
    """[0, +inf] with reversed order and addition."""

    unit = 0.0
    bottom = INF

    def __eq__(self, other):
        return isinstance(other, Lawvere)

    def __hash__(self):
        return hash("Lawvere")

    def __repr__(self):
        return "Lawvere()"

    def check_value(self, v):
        if isinstance(v, bool) or not isinstance(v, numbers.Real) or not v >= 0:
            raise ShapeError(f"{v!r} is not an extended nonnegative real")

    def leq(self, a, b, tol: float = 0.0) -> Verdict:
        self.check_value(a)
        self.check_value(b)
        return Verdict.exact(lw_leq(a, b, tol), witness={"left": a, "right": b})

    def tensor(self, a, b):
        self.check_value(a)
        self.check_value(b)
        return float(a) + float(b)

    def meet(self, family):
        vals = [float(v) for v in family]
        for v in vals:
            self.check_value(v)
        return max(vals, default=0.0)

    def join(self, family):
        vals = [float(v) for v in family]
        for v in vals:
            self.check_value(v)
        return min(vals, default=INF)

    def residual(self, a, b):
        self.check_value(a)
        self.check_value(b)
        if a == INF:
            return 0.0
        return max(float(b) - float(a), 0.0)

    def upper_chain(self, a, k: int = 16) -> list:
        if a == INF:
            finite = [0.0] + [float(v) for v in np.geomspace(1e-3, 1e6, max(k - 2, 1))]
            return finite + [INF]
        return [float(v) for v in np.linspace(0.0, float(a), max(k, 2))]

    def samples(self, rng, n: int = 8) -> list:
        rng = _rng(rng)
        base = [0.0, INF, 1.0]
        rest = rng.exponential(1.0, size=max(n - len(base), 0))
        return (base + [float(v) for v in rest])[: max(n, 1)]


LAWVERE = Lawvere()


@dataclass(frozen=True)
class Product(Quantale):
    left: Quantale
    right: Quantale

    @property
    def unit(self):
        return (self.left.unit, self.right.unit)

    @property
    def bottom(self):
        return (self.left.bottom, self.right.bottom)

    def check_value(self, v):
        if not isinstance(v, tuple) or len(v) != 2:
            raise ShapeError(f"{v!r} is not a pair")
        self.left.check_value(v[0])
        self.right.check_value(v[1])

    def leq(self, a, b) -> Verdict:
        self.check_value(a)
        self.check_value(b)
        return Verdict.combine([self.left.leq(a[0], b[0]), self.right.leq(a[1], b[1])])

    def tensor(self, a, b):
        return (self.left.tensor(a[0], b[0]), self.right.tensor(a[1], b[1]))

    def meet(self, family):
        fam = list(family)
        return (self.left.meet([v[0] for v in fam]), self.right.meet([v[1] for v in fam]))

    def join(self, family):
        fam = list(family)
        return (self.left.join([v[0] for v in fam]), self.right.join([v[1] for v in fam]))

    def residual(self, a, b):
        return (self.left.residual(a[0], b[0]), self.right.residual(a[1], b[1]))

    def upper_chain(self, a, k: int = 16) -> list:
        m = max(2, int(math.ceil(math.sqrt(k))))
        return [(l, r) for l in self.left.upper_chain(a[0], m) for r in self.right.upper_chain(a[1], m)]

    def samples(self, rng, n: int = 8) -> list:
        rng = _rng(rng)
        ls = self.left.samples(rng, n)
        rs = self.right.samples(rng, n)
        return [(l, r) for l, r in zip(ls, rs)]


@dataclass(frozen=True)
class Lifted(Quantale):
    """``{∅} ∪ {{a}}`` with ∅ as a new bottom that absorbs the tensor."""

    base: Quantale

    @property
    def unit(self):
        return Lift(self.base.unit)

    bottom = EMPTY

    def check_value(self, v):
        if not isinstance(v, Lift):
            raise ShapeError(f"{v!r} is not a lifted value")
        if not v.empty:
            self.base.check_value(v.content)

    def leq(self, a, b) -> Verdict:
        self.check_value(a)
        self.check_value(b)
        if a.empty:
            return Verdict.proof()
        if b.empty:
            return Verdict.refute({"left": a, "right": b})
        return self.base.leq(a.content, b.content)

    def tensor(self, a, b):
        self.check_value(a)
        self.check_value(b)
        if a.empty or b.empty:
            return EMPTY
        return Lift(self.base.tensor(a.content, b.content))

    def meet(self, family):
        fam = list(family)
        if any(v.empty for v in fam):
            return EMPTY
        return Lift(self.base.meet([v.content for v in fam]))

    def join(self, family):
        full = [v.content for v in family if not v.empty]
        if not full:
            return EMPTY
        return Lift(self.base.join(full))

    def residual(self, a, b):
        self.check_value(a)
        self.check_value(b)
        if a.empty:
            return self.unit
        if b.empty:
            return EMPTY
        return Lift(self.base.residual(a.content, b.content))

    def upper_chain(self, a, k: int = 16) -> list:
        if a.empty:
            return [EMPTY] + [Lift(v) for v in self.base.samples(0, max(k - 1, 1))]
        return [Lift(v) for v in self.base.upper_chain(a.content, k)]

    def samples(self, rng, n: int = 8) -> list:
        return [EMPTY] + [Lift(v) for v in self.base.samples(rng, max(n - 1, 1))]


@dataclass(frozen=True)
class FunSpace(Quantale):
    """Monotone maps ``domain x inner -> outer`` with pointwise structure.

    The order and equality of error functions are checked on samples: all
    points of a finite domain, otherwise ``n_points`` draws from the domain
    crossed with ``n_radii`` radii of the inner quantale.
    """

    domain: Carrier
    inner: Quantale
    outer: Quantale
    n_points: int = 24
    n_radii: int = 6
    chain: int = 16
    seed: int = 0

    @property
    def unit(self):
        return const_errfun(self.outer.unit, "unit")

    @property
    def bottom(self):
        return const_errfun(self.outer.bottom, "bottom")

    def check_value(self, v):
        if not callable(v):
            raise ShapeError(f"{v!r} is not an error function")

    def probe_points(self, rng=None) -> list:
        rng = _rng(self.seed if rng is None else rng)
        xs = self.domain.points(rng, self.n_points)
        radii = self.inner.samples(rng, self.n_radii)
        return [(x, a) for x in xs for a in radii]

    def _exact_domain(self) -> bool:
        from qqm.finite import FiniteQuantale

        return self.domain.finite and isinstance(self.inner, FiniteQuantale)

    def leq(self, f, g, probes: Sequence | None = None) -> Verdict:
        self.check_value(f)
        self.check_value(g)
        exhaustive = probes is None and self._exact_domain()
        if probes is None:
            if exhaustive:
                probes = [(x, a) for x in self.domain.points() for a in range(self.inner.size)]
            else:
                probes = self.probe_points()
        verdicts = []
        for x, a in probes:
            v = self.outer.leq(f(x, a), g(x, a))
            if v.refuted:
                return Verdict.refute({"point": x, "radius": a, "left": f(x, a), "right": g(x, a)})
            verdicts.append(v)
        inner = Verdict.combine(verdicts)
        if exhaustive and inner.proved:
            return inner
        return Verdict.sampled_ok(max(len(probes), inner.n_points))

    def tensor(self, f, g):
        return ErrFun(lambda x, a: self.outer.tensor(f(x, a), g(x, a)), "tensor")

    def meet(self, family):
        fam = list(family)
        return ErrFun(lambda x, a: self.outer.meet([f(x, a) for f in fam]), "meet")

    def join(self, family):
        fam = list(family)
        return ErrFun(lambda x, a: self.outer.join([f(x, a) for f in fam]), "join")

    def residual(self, f, g):
        def res(x, a):
            chain = self.inner.upper_chain(a, self.chain)
            return self.outer.meet([self.outer.residual(f(x, b), g(x, b)) for b in chain])

        return ErrFun(res, "residual")

    def upper_chain(self, f, k: int = 16) -> list:
        return [f, self.unit]

    def samples(self, rng, n: int = 8) -> list:
        rng = _rng(rng)
        outs = self.outer.samples(rng, n)
        return [self.unit, self.bottom] + [const_errfun(v) for v in outs[: max(n - 2, 0)]]


def check_monotone(q: FunSpace, f, rng=0, n_points: int = 16) -> Verdict:
    """Sampled check that ``f(x, -)`` is monotone along radius chains."""
    rng = _rng(rng)
    count = 0
    for x in q.domain.points(rng, n_points):
        for a in q.inner.samples(rng, 4):
            chain = q.inner.upper_chain(a, 8)
            for b in chain:
                count += 1
                # b is above a, so f(x, a) must be below f(x, b)
                if q.outer.leq(f(x, a), f(x, b)).refuted:
                    return Verdict.refute({"point": x, "low": a, "high": b})
    return Verdict.sampled_ok(count)


# ---------------------------------------------------------------- wrappers


def leq(q: Quantale, a, b) -> Verdict:
    return q.leq(a, b)


def tensor(q: Quantale, a, b):
    return q.tensor(a, b)


def meet(q: Quantale, family: Iterable):
    return q.meet(family)


def join(q: Quantale, family: Iterable):
    return q.join(family)


def residual(q: Quantale, a, b):
    return q.residual(a, b)
