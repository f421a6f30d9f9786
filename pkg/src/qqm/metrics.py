"""Membership, distance estimation and self-distances in the interpreted spaces.

``member(ty, x, a, y)`` decides ``(x, a, y)`` at Real exactly, at products
componentwise, and at arrow types by checking both defining clauses on
sampled admissible arguments.  ``rho_hat`` computes the best radius: exactly
at Real, from ranges for real functions that know them, and on refining grids
otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from qqm import syntax as S
from qqm.prims import PrimitiveTable, default_table
from qqm.quantale import ErrFun, lw_leq
from qqm.sampling import (DEFINABLE, SamplerConfig, const_fun, draw_radius, draw_triple, exact_rho_hat_rr,
                          IDENTITY, supports_triples)
from qqm.semantics import FunValue, derive, evaluate
from qqm.verdict import Verdict

INF = math.inf
RR = S.Arrow(S.REAL, S.REAL)


# ---------------------------------------------------------------- membership


def member(ty: S.Type, x, a, y, cfg: SamplerConfig | None = None, tol: float = 0.0,
           probes: list | None = None) -> Verdict:
    """Is ``(x, a, y)`` in the metric of ``ty``?

    At arrow types the argument triples come from ``probes`` when given,
    otherwise from the sampler.  For Real -> Real with a range-aware right
    function, every sampled ``(u, b)`` is checked against all ``v`` in the
    ball at once.
    """
    cfg = cfg or SamplerConfig()
    if isinstance(ty, S.RealT):
        gap = abs(x - y) if not (math.isinf(x) and x == y) else 0.0
        return Verdict.exact(lw_leq(a, gap, tol), witness={"left": x, "radius": a, "right": y, "gap": gap})
    if isinstance(ty, S.Prod):
        left = member(ty.left, x[0], a[0], y[0], cfg, tol)
        if left.refuted:
            return Verdict.refute({"component": "fst", "inner": left.witness})
        right = member(ty.right, x[1], a[1], y[1], cfg, tol)
        if right.refuted:
            return Verdict.refute({"component": "snd", "inner": right.witness})
        return Verdict.combine([left, right])
    if isinstance(ty, S.Arrow):
        return _member_arrow(ty, x, a, y, cfg, tol, probes)
    raise TypeError(f"not a type: {ty!r}")


def _member_arrow(ty, f, d, g, cfg, tol, probes):
    rng = cfg.rng(17)
    n = 0
    if ty == RR and probes is None and _has_range(f) and _has_range(g):
        for _ in range(cfg.points_per_domain):
            u = float(rng.uniform(*cfg.box))
            b = draw_radius(rng, cfg)
            best = exact_rho_hat_rr(f, g)(u, b)
            n += 1
            if not lw_leq(d(u, b), best, tol):
                return Verdict.refute({"point": u, "radius": b, "claimed": d(u, b), "required": best})
        return Verdict.sampled_ok(n, "exact over each sampled ball")
    triples = probes if probes is not None else argument_triples(ty.dom, cfg, rng)
    sub = []
    for u, b, v in triples:
        r = d(u, b)
        fu = f(u)
        for label, other in (("fx,gy", g(v)), ("fx,fy", f(v))):
            verdict = member(ty.cod, fu, r, other, cfg, tol)
            n += 1
            if verdict.refuted:
                return Verdict.refute({"clause": label, "argument": (u, b, v), "inner": verdict.witness})
            sub.append(verdict)
    return Verdict.sampled_ok(max(n, Verdict.combine(sub).n_points))


def _has_range(f) -> bool:
    return isinstance(f, FunValue) and f.range_on is not None


def argument_triples(ty: S.Type, cfg: SamplerConfig, rng=None) -> list:
    """Sampled triples in the metric of ``ty`` used to probe arrow membership.

    In definable mode, arrow-typed arguments are drawn from closed corpus
    terms paired with their own derivatives, which lie in the relation by the
    fundamental lemma.
    """
    rng = rng if rng is not None else cfg.rng(23)
    out = []
    for _ in range(cfg.points_per_domain):
        if supports_triples(ty) and not (cfg.carrier_mode == DEFINABLE and isinstance(ty, S.Arrow)):
            out.append(draw_triple(ty, rng, cfg))
        else:
            out.append(definable_triple(ty, rng, cfg))
    return out


def definable_triple(ty: S.Type, rng, cfg: SamplerConfig):
    from qqm.corpus import closed_terms_of_type

    terms = closed_terms_of_type(ty)
    if not terms:
        raise NotImplementedError(f"no closed corpus terms of type {ty}")
    t = terms[int(rng.integers(0, len(terms)))]
    v = evaluate(t)
    return v, derive(t), v


# ---------------------------------------------------------------- distances


@dataclass
class Distance:
    value: Any
    mode: str
    resolution: int = 0
    converged: bool = True

    def to_json(self) -> dict:
        from qqm.verdict import jsonable

        return {"value": jsonable(self.value), "mode": self.mode, "resolution": self.resolution,
                "converged": self.converged}


def ball_grid(x: float, a: float, n: int, inf_radius: float = 1e3) -> np.ndarray:
    r = min(a, inf_radius)
    return np.unique(np.concatenate([np.linspace(x - r, x + r, n), [x]]))


def rho_hat_arrow(f, g, x, a, ty: S.Type = RR, tol: float = 1e-3, grid: int = 2048, cap: int = 1 << 18,
                  exact: bool = True) -> Distance:
    """Best radius ``rho_hat(f, g)(x, a)`` at an arrow type with ground domain.

    Exact when both functions carry ranges and ``exact`` is set; otherwise the
    supremum over the ball is taken on grids of ``grid`` points, doubled until
    successive estimates differ by less than ``tol / 2`` or ``cap`` is hit.
    Grid values never exceed the true supremum.
    """
    if ty == RR and exact and _has_range(f) and _has_range(g):
        return Distance(float(exact_rho_hat_rr(f, g)(x, a)), "exact")
    if not isinstance(ty, S.Arrow):
        raise TypeError("rho_hat_arrow needs an arrow type")
    if a == 0:
        return Distance(rho_hat(ty.cod, f(x), g(x), tol=tol, grid=grid), "exact")
    if not isinstance(ty.dom, S.RealT):
        raise NotImplementedError("grid distances need a Real domain")
    n = grid
    prev = None
    while True:
        ys = ball_grid(x, a, n)
        fx = f(x)
        vals = [max(_as_float(rho_hat(ty.cod, fx, g(float(y)), tol, grid)),
                    _as_float(rho_hat(ty.cod, fx, f(float(y)), tol, grid))) for y in ys]
        est = max(vals)
        if prev is not None and abs(est - prev) < tol / 2:
            return Distance(float(est), "grid", resolution=n)
        if n * 2 > cap:
            return Distance(float(est), "grid", resolution=n, converged=False)
        prev = est
        n *= 2


def _as_float(v):
    if isinstance(v, Distance):
        return v.value
    if isinstance(v, tuple):
        raise NotImplementedError("product codomains are handled componentwise by rho_hat")
    return v


def rho_hat(ty: S.Type, x, y, tol: float = 1e-3, grid: int = 2048):
    """Best radius between two values: a scalar, a pair, or an error function."""
    if isinstance(ty, S.RealT):
        if math.isinf(x) and x == y:
            return 0.0
        return abs(x - y)
    if isinstance(ty, S.Prod):
        return (rho_hat(ty.left, x[0], y[0], tol, grid), rho_hat(ty.right, x[1], y[1], tol, grid))
    if isinstance(ty, S.Arrow):
        if isinstance(ty.cod, S.RealT) and isinstance(ty.dom, S.RealT):
            return ErrFun(lambda u, b: rho_hat_arrow(x, y, u, b, ty, tol, grid).value, label="rho_hat")
        if isinstance(ty.dom, S.RealT):
            return ErrFun(lambda u, b: _meet_over_ball(ty, x, y, u, b, tol, grid), label="rho_hat")
        raise NotImplementedError(f"distances at {ty} are only checked on probes")
    raise TypeError(f"not a type: {ty!r}")


def _meet_over_ball(ty, f, g, u, b, tol, grid):
    ys = ball_grid(u, b, max(grid // 16, 33))
    fu = f(u)
    vals = []
    for y in ys:
        vals.append(rho_hat(ty.cod, fu, g(float(y)), tol, grid))
        vals.append(rho_hat(ty.cod, fu, f(float(y)), tol, grid))
    from qqm.semantics import quantale_of_type

    return quantale_of_type(ty.cod).meet(vals)


def self_distance(ty: S.Type, x, tol: float = 1e-3, grid: int = 2048):
    """Largest radius relating ``x`` to itself: 0 at Real, the oscillation at arrows."""
    if isinstance(ty, S.RealT):
        return 0.0
    if isinstance(ty, S.Prod):
        return (self_distance(ty.left, x[0], tol, grid), self_distance(ty.right, x[1], tol, grid))
    if ty == RR and _has_range(x):
        return exact_rho_hat_rr(x, x)
    return rho_hat(ty, x, x, tol, grid)


# ---------------------------------------------------------------- bounds from terms


def two_term_bound(t: S.Term, s: S.Term, x, a, prims: PrimitiveTable | None = None) -> float:
    """``max(|[t]x - [s]x| + [s]'(x, a), [t]'(x, a))`` for closed ``t, s : A -> Real``."""
    return two_term_errfun(t, s, prims)(x, a)


def two_term_errfun(t: S.Term, s: S.Term, prims: PrimitiveTable | None = None) -> ErrFun:
    prims = prims or default_table()
    tv, sv = evaluate(t, prims=prims), evaluate(s, prims=prims)
    td, sd = derive(t, prims=prims), derive(s, prims=prims)

    def d(x, a):
        return max(abs(tv(x) - sv(x)) + sd(x, a), td(x, a))

    return ErrFun(d, label="two-term")


def difference_quotient_term(eps: float) -> S.Term:
    """Closed ``\\f. \\x. let y be add(x) in diff(f y, f x)`` for step ``eps``."""
    body = S.parse(f"let y be add[{eps!r}](x) in diff[{eps!r}](f y, f x)")
    return S.Lam("f", RR, S.Lam("x", S.REAL, body))


def difference_quotient_body(eps: float) -> S.Term:
    return S.parse(f"let y be add[{eps!r}](x) in diff[{eps!r}](f y, f x)")


def example_bound_replay(eps: float, a: float, grid: int = 4097, prims: PrimitiveTable | None = None) -> dict:
    """Error bound for the difference quotient of ``id`` at 0 versus ``sin`` at ``a``.

    ``bound`` is ``max(a/eps, sup_{|y|<=a} |1 - (sin(y+eps) - sin y)/eps|)``
    with the supremum taken on a grid; ``derived`` is the derivative of the
    term evaluated at ``((id, 0), (rho_hat(id, sin), a))``; ``actual`` is the
    realized gap.
    """
    if eps <= 0 or a < 0:
        raise ValueError("need eps > 0 and a >= 0")
    from qqm.sampling import SIN

    prims = prims or default_table()
    body = difference_quotient_body(eps)
    F = lambda f, x: evaluate(body, {"f": f, "x": x}, prims)  # noqa: E731
    actual = abs(F(IDENTITY, 0.0) - F(SIN, a))
    ys = np.linspace(-a, a, grid) if a > 0 else np.array([0.0])
    inner = float(np.max(np.abs(1.0 - (np.sin(ys + eps) - np.sin(ys)) / eps)))
    bound = max(a / eps, inner)
    d = exact_rho_hat_rr(IDENTITY, SIN)
    derived = derive(body, {"f": IDENTITY, "x": 0.0}, {"f": d, "x": a}, prims)
    return {"eps": eps, "a": a, "bound": bound, "derived": float(derived), "actual": actual,
            "sound": bool(lw_leq(bound, actual) and lw_leq(derived, actual)), "grid": grid}


# ---------------------------------------------------------------- no greatest relation replay

NO_GREATEST_TERMS = {
    "O": "\\f:Real->Real. 0.0",
    "Z": "\\f:Real->Real. f 0.0",
    "J": "\\F:(Real->Real)->Real. F (\\x:Real. 1.0)",
}


def replay_no_greatest(prims: PrimitiveTable | None = None,
                       constants: tuple[float, ...] = (-3.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 4.0),
                       probes: tuple[float, ...] = (-2.0, -0.5, 0.0, 0.5, 3.0),
                       radii: tuple[float, ...] = (0.0, 0.1, 1.0, 5.0)) -> dict:
    """Replay the argument that definable-observation distances admit no greatest relation.

    Requires an empty primitive table.  Closed terms of type Real -> Real then
    denote constants or the identity; that classification is assumed, and the
    definable carrier is represented by the identity and constants from
    ``constants``.  Memberships at Real -> Real are decided exactly on the
    ``probes x radii`` grid using function ranges.
    """
    from qqm.prims import empty_table

    prims = empty_table() if prims is None else prims
    if len(prims):
        raise ValueError("the replay requires an empty primitive table")

    terms = {k: S.parse(v, prims.arities()) for k, v in NO_GREATEST_TERMS.items()}
    O, Z, J = (evaluate(terms[k], prims=prims) for k in ("O", "Z", "J"))
    k_one = const_fun(1.0)

    definable = [IDENTITY] + [const_fun(c) for c in constants]
    two_x = FunValue(lambda x: 2 * x, "2x", lambda lo, hi: (2 * lo, 2 * hi))
    outsiders = [two_x, FunValue(lambda x: x + 1.0, "x+1", lambda lo, hi: (lo + 1.0, hi + 1.0))]

    def is_definable(f) -> bool:
        return any(f is g for g in definable)

    def in_rr(f, d, g) -> bool:
        return all(lw_leq(d(u, b), exact_rho_hat_rr(f, g)(u, b)) for u in probes for b in radii)

    def D(f, d) -> float:
        """Meet over definable g with (f, d, g) related of |g(0)|; empty meet is 0."""
        if not is_definable(f):
            return 0.0
        vals = [abs(g(0.0)) for g in definable if in_rr(f, d, g)]
        return max(vals, default=0.0)

    # argument triples at Real -> Real, including non-definable functions
    pool = definable[:4] + outsiders
    arg_triples = [(f, exact_rho_hat_rr(f, g), g) for f in pool for g in pool]

    def related_to_O(F) -> tuple[bool, Any]:
        for f, d, g in arg_triples:
            r = D(f, d)
            for other in (F(g), O(g)):
                if not lw_leq(r, abs(O(f) - other)):
                    return False, {"f": f.label, "g": g.label, "radius": r, "value": other}
        return True, None

    candidates = {
        "O": O,
        "Z": Z,
        "f(1)": FunValue(lambda f: f(1.0), "f(1)"),
        "const 0.5": FunValue(lambda f: 0.5, "const 0.5"),
        "f(0)-f(0)": FunValue(lambda f: f(0.0) - f(0.0), "f(0)-f(0)"),
    }
    lemma = {}
    survivors = []
    for name, F in candidates.items():
        ok, witness = related_to_O(F)
        lemma[name] = {"related": ok, "witness": witness}
        if ok:
            survivors.append(F)
    forced_zero = {g.label: D(two_x, exact_rho_hat_rr(two_x, g)) for g in pool}

    # sigma_J(O, D) = meet over surviving F of |J O - J F|
    sigma = max((abs(J(O) - J(F)) for F in survivors), default=0.0)
    JO, JZ = J(O), J(Z)
    OZ_ok = all(lw_leq(D(f, d), abs(O(f) - Z(g))) and lw_leq(D(f, d), abs(O(f) - O(g)))
                for f, d, g in arg_triples if is_definable(f) and is_definable(g))
    violation = member(S.REAL, JO, sigma, JZ)
    return {
        "prims": prims.label,
        "terms": NO_GREATEST_TERMS,
        "definable_rr": [f.label for f in definable],
        "D_self": {f.label: D(f, exact_rho_hat_rr(f, f)) for f in definable},
        "D_at_2x": forced_zero,
        "lemma_candidates": lemma,
        "O_D_Z_related_on_definable": OZ_ok,
        "k0": k_one(0.0),
        "JO": JO,
        "JZ": JZ,
        "sigma_J_O_D": sigma,
        "membership": {"left": JO, "radius": sigma, "right": JZ, "verdict": violation.to_json()},
        "violation_flagged": violation.refuted,
    }
