"""Sampler configuration, a pool of real functions with exact ranges, and
generators of triples that are known to lie in the interpreted metrics.

Every generator here is sound by construction: the radius handed back is at
least as large (numerically) as the true distance, so the triple is a member
of the relation.  The fundamental-lemma suite relies on this.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from qqm import syntax as S
from qqm.quantale import ErrFun
from qqm.semantics import FunValue

INF = math.inf

FULL = "full"
DEFINABLE = "definable"


@dataclass(frozen=True)
class SamplerConfig:
    seed: int = 0
    points_per_domain: int = 16
    box: tuple[float, float] = (-4.0, 4.0)
    radius_chain: tuple[float, ...] = (0.0, 0.01, 0.1, 0.5, 1.0, 2.0)
    carrier_mode: str = FULL
    corpus_id: str = "default"
    inf_radius_rate: float = 0.05

    def __post_init__(self):
        if self.points_per_domain < 2:
            raise ValueError("points_per_domain must be at least 2")
        if not self.box[0] < self.box[1]:
            raise ValueError("sampling box must be nonempty")
        if self.carrier_mode not in (FULL, DEFINABLE):
            raise ValueError(f"unknown carrier mode {self.carrier_mode!r}")

    def rng(self, salt: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.seed, salt])

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "points_per_domain": self.points_per_domain,
            "box": list(self.box),
            "radius_chain": list(self.radius_chain),
            "carrier_mode": self.carrier_mode,
            "corpus_id": self.corpus_id,
        }


# ---------------------------------------------------------------- real functions with ranges


def _trig_range(f, crit_phase, lo, hi):
    if hi - lo >= 2 * math.pi or math.isinf(lo) or math.isinf(hi):
        return (-1.0, 1.0)
    vals = [f(lo), f(hi)]
    c = crit_phase + math.ceil((lo - crit_phase) / math.pi) * math.pi
    while c <= hi:
        vals.append(f(c))
        c += math.pi
    return (min(vals), max(vals))


def const_fun(c: float) -> FunValue:
    return FunValue(lambda x: c, label=f"const({c!r})", range_on=lambda lo, hi: (c, c))


def affine_fun(m: float, c: float) -> FunValue:
    def rng(lo, hi):
        if m == 0:
            return (c, c)
        ends = [m * lo + c if not math.isinf(lo) else -math.copysign(INF, m),
                m * hi + c if not math.isinf(hi) else math.copysign(INF, m)]
        return (min(ends), max(ends))

    label = "id" if (m, c) == (1.0, 0.0) else f"affine({m!r},{c!r})"
    return FunValue(lambda x: m * x + c, label=label, range_on=rng)


IDENTITY = affine_fun(1.0, 0.0)
SIN = FunValue(math.sin, "sin", lambda lo, hi: _trig_range(math.sin, math.pi / 2, lo, hi))
COS = FunValue(math.cos, "cos", lambda lo, hi: _trig_range(math.cos, 0.0, lo, hi))
ABS = FunValue(abs, "abs", lambda lo, hi: (0.0 if lo <= 0 <= hi else min(abs(lo), abs(hi)), max(abs(lo), abs(hi))))
SQUARE = FunValue(lambda x: x * x, "square",
                  lambda lo, hi: (0.0 if lo <= 0 <= hi else min(lo * lo, hi * hi), max(lo * lo, hi * hi)))
TANH = FunValue(math.tanh, "tanh", lambda lo, hi: (math.tanh(lo), math.tanh(hi)))

NAMED_FUNCTIONS = {"sin": SIN, "cos": COS, "id": IDENTITY, "abs": ABS, "square": SQUARE, "tanh": TANH}


def function_by_name(name: str) -> FunValue:
    """``sin``, ``id``, ``const:1.5``, ``affine:2,1`` and the other pool names."""
    if name in NAMED_FUNCTIONS:
        return NAMED_FUNCTIONS[name]
    if name.startswith("const:"):
        return const_fun(float(name.split(":", 1)[1]))
    if name.startswith("affine:"):
        m, c = (float(v) for v in name.split(":", 1)[1].split(","))
        return affine_fun(m, c)
    raise KeyError(f"unknown function {name!r}")


def real_function_pool(rng: np.random.Generator) -> FunValue:
    k = rng.integers(0, 8)
    if k == 0:
        return const_fun(float(np.round(rng.uniform(-3, 3), 3)))
    if k == 1:
        return affine_fun(float(np.round(rng.uniform(-2, 2), 3)), float(np.round(rng.uniform(-2, 2), 3)))
    return list(NAMED_FUNCTIONS.values())[int(rng.integers(0, len(NAMED_FUNCTIONS)))]


# ---------------------------------------------------------------- values of any type


def draw_value(ty: S.Type, rng: np.random.Generator, box: tuple[float, float] = (-4.0, 4.0)):
    if isinstance(ty, S.RealT):
        return float(rng.uniform(*box))
    if isinstance(ty, S.Prod):
        return (draw_value(ty.left, rng, box), draw_value(ty.right, rng, box))
    if isinstance(ty, S.Arrow):
        if ty == S.Arrow(S.REAL, S.REAL):
            return real_function_pool(rng)
        out = draw_value(ty.cod, rng, box)
        if isinstance(ty.dom, S.Arrow) and isinstance(ty.cod, S.RealT) and rng.random() < 0.5:
            c = float(rng.uniform(*box))
            return FunValue(lambda f: f(c), label=f"at({c:.3g})")
        return FunValue(lambda _: out, label="const")
    raise TypeError(f"not a type: {ty!r}")


def draw_radius(rng: np.random.Generator, cfg: SamplerConfig) -> float:
    u = rng.random()
    if u < cfg.inf_radius_rate:
        return INF
    if u < 0.25:
        return float(cfg.radius_chain[int(rng.integers(0, len(cfg.radius_chain)))])
    return float(rng.exponential(0.5))


def exact_rho_hat_rr(f: FunValue, g: FunValue) -> ErrFun:
    """Exact arrow distance between real functions that know their ranges."""

    def d(x, a):
        fx = f(x)
        lo, hi = x - a, x + a
        gm, gM = g.range_on(lo, hi)
        fm, fM = f.range_on(lo, hi)
        return max(abs(fx - gm), abs(fx - gM), abs(fx - fm), abs(fx - fM))

    return ErrFun(d, label=f"rho({f.label},{g.label})")


def slackened(d: ErrFun, c: float, k: float) -> ErrFun:
    """``d + c + k*a``: numerically larger, hence still an admissible radius."""
    return ErrFun(lambda x, a: d(x, a) + c + (0.0 if k == 0 else k * a), label=f"{d.label}+slack")


def draw_triple(ty: S.Type, rng: np.random.Generator, cfg: SamplerConfig):
    """A triple ``(x, a, y)`` that lies in the metric of ``ty``.

    Supported types are Real, products, and Real -> Real; these are the
    context types used by the fundamental-lemma suite.
    """
    if isinstance(ty, S.RealT):
        x = float(rng.uniform(*cfg.box))
        a = draw_radius(rng, cfg)
        if math.isinf(a):
            y = float(rng.uniform(*cfg.box))
        else:
            y = x + float(rng.uniform(-1.0, 1.0)) * a
            if abs(x - y) > a:  # rounding
                y = x
        return x, a, y
    if isinstance(ty, S.Prod):
        x1, a1, y1 = draw_triple(ty.left, rng, cfg)
        x2, a2, y2 = draw_triple(ty.right, rng, cfg)
        return (x1, x2), (a1, a2), (y1, y2)
    if ty == S.Arrow(S.REAL, S.REAL):
        f = real_function_pool(rng)
        g = f if rng.random() < 0.3 else real_function_pool(rng)
        d = exact_rho_hat_rr(f, g)
        if rng.random() < 0.5:
            d = slackened(d, float(rng.exponential(0.3)), float(rng.choice([0.0, 0.5, 1.0])))
        return f, d, g
    raise NotImplementedError(f"no sound triple generator for {ty}")


def supports_triples(ty: S.Type) -> bool:
    if isinstance(ty, S.RealT):
        return True
    if isinstance(ty, S.Prod):
        return supports_triples(ty.left) and supports_triples(ty.right)
    return ty == S.Arrow(S.REAL, S.REAL)
