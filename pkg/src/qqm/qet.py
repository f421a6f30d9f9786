"""Checker for derivations of quantitative equations between terms.

A judgment ``Γ ⊢ (t, a, s) : A`` says that ``a`` bounds the distance from
``t`` to ``s``; ``a`` is a :class:`DistExpr`, a small expression language for
functions from (values, radii) of ``Γ`` to the radius quantale of ``A``.
Derivations are explicit proof trees over thirteen rules:

    lit var prim lam app pair fst snd sem-replace weaken join trans qrefl

``check_derivation`` validates every node against its rule schema and checks
the side conditions, exactly where possible and on samples otherwise.  The
result is Proved only if no check needed sampling.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from qqm import syntax as S
from qqm.normalize import beta_eta_equal
from qqm.prims import PrimitiveTable, default_table
from qqm.quantale import ErrFun
from qqm.sampling import SamplerConfig, draw_radius, draw_triple, draw_value, supports_triples
from qqm.semantics import _extend, derive, evaluate, value_close
from qqm.verdict import Verdict, jsonable

INF = math.inf

RULES = ("lit", "var", "prim", "lam", "app", "pair", "fst", "snd", "sem-replace", "weaken", "join", "trans",
         "qrefl")


class DerivationError(ValueError):
    """Malformed derivation input (unknown rule, unparsable node, bad context)."""


# ---------------------------------------------------------------- distance expressions


class DistExpr:
    def __str__(self):
        return show(self)


@dataclass(frozen=True)
class Lit(DistExpr):
    value: Any  # float, or nested pairs of floats


@dataclass(frozen=True)
class Radius(DistExpr):
    name: str


@dataclass(frozen=True)
class PrimMod(DistExpr):
    prim: str
    param: float | None
    args: tuple  # terms
    dists: tuple  # DistExprs


@dataclass(frozen=True)
class Apply(DistExpr):
    fn: DistExpr
    arg: S.Term
    dist: DistExpr


@dataclass(frozen=True)
class Abs(DistExpr):
    binder: str
    body: DistExpr


@dataclass(frozen=True)
class PairD(DistExpr):
    left: DistExpr
    right: DistExpr


@dataclass(frozen=True)
class FstD(DistExpr):
    expr: DistExpr


@dataclass(frozen=True)
class SndD(DistExpr):
    expr: DistExpr


@dataclass(frozen=True)
class Tensor(DistExpr):
    left: DistExpr
    right: DistExpr


@dataclass(frozen=True)
class Join(DistExpr):
    items: tuple
    type: S.Type | None = None  # needed only for the empty join


@dataclass(frozen=True)
class Meet(DistExpr):
    items: tuple
    type: S.Type | None = None


@dataclass(frozen=True)
class Deriv(DistExpr):
    """The error derivative of a term, evaluated at the current (γ, ξ)."""

    term: S.Term


@dataclass(frozen=True)
class Subst(DistExpr):
    """``body`` evaluated with ``var`` bound to ``⟦term⟧`` and radius ``dist``."""

    body: DistExpr
    var: str
    term: S.Term
    dist: DistExpr


def show(e: DistExpr) -> str:
    if isinstance(e, Lit):
        return _show_value(e.value)
    if isinstance(e, Radius):
        return f"ξ.{e.name}"
    if isinstance(e, PrimMod):
        head = e.prim if e.param is None else f"{e.prim}[{e.param!r}]"
        args = ", ".join(S.pretty(a) for a in e.args)
        dists = ", ".join(show(d) for d in e.dists)
        return f"{head}•({args}; {dists})"
    if isinstance(e, Apply):
        return f"{show(e.fn)}({S.pretty(e.arg)}, {show(e.dist)})"
    if isinstance(e, Abs):
        return f"Λ{e.binder}. {show(e.body)}"
    if isinstance(e, PairD):
        return f"⟨{show(e.left)}, {show(e.right)}⟩"
    if isinstance(e, FstD):
        return f"π1({show(e.expr)})"
    if isinstance(e, SndD):
        return f"π2({show(e.expr)})"
    if isinstance(e, Tensor):
        return f"({show(e.left)} ⊗ {show(e.right)})"
    if isinstance(e, Join):
        return "⊔{" + ", ".join(show(d) for d in e.items) + "}"
    if isinstance(e, Meet):
        return "⊓{" + ", ".join(show(d) for d in e.items) + "}"
    if isinstance(e, Deriv):
        return f"⟦{S.pretty(e.term)}⟧•"
    if isinstance(e, Subst):
        return f"{show(e.body)}[{S.pretty(e.term)}, {show(e.dist)} / {e.var}]"
    raise TypeError(f"not a distance expression: {e!r}")


def _show_value(v) -> str:
    if isinstance(v, tuple):
        return "⟨" + ", ".join(_show_value(x) for x in v) + "⟩"
    return "∞" if v == INF else repr(float(v))


# ---------------------------------------------------------------- radius values by shape


def _tensor(u, v):
    if isinstance(u, ErrFun):
        return ErrFun(lambda x, a: _tensor(u(x, a), v(x, a)), "tensor")
    if isinstance(u, tuple):
        return tuple(_tensor(p, q) for p, q in zip(u, v))
    return float(u) + float(v)


def _fold(vals: list, pick):
    first = vals[0]
    if isinstance(first, ErrFun):
        return ErrFun(lambda x, a: _fold([f(x, a) for f in vals], pick), "fold")
    if isinstance(first, tuple):
        return tuple(_fold([v[i] for v in vals], pick) for i in range(len(first)))
    return float(pick(float(v) for v in vals))


def constant_radius(ty: S.Type, value: float):
    """The radius of shape ``ty`` equal to ``value`` everywhere."""
    if isinstance(ty, S.RealT):
        return value
    if isinstance(ty, S.Prod):
        return (constant_radius(ty.left, value), constant_radius(ty.right, value))
    if isinstance(ty, S.Arrow):
        inner = constant_radius(ty.cod, value)
        return ErrFun(lambda x, a: inner, f"const({value})")
    raise TypeError(f"not a type: {ty!r}")


def evaluate_dist(e: DistExpr, env: dict, xi: dict, prims: PrimitiveTable | None = None):
    prims = default_table() if prims is None else prims
    return _ev(e, env, xi, prims)


def _ev(e, env, xi, prims):
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Radius):
        try:
            return xi[e.name]
        except KeyError:
            raise DerivationError(f"no radius for {e.name}") from None
    if isinstance(e, PrimMod):
        xs = [evaluate(a, env, prims) for a in e.args]
        return prims.modulus(e.prim, e.param, xs, [_ev(d, env, xi, prims) for d in e.dists])
    if isinstance(e, Apply):
        return _ev(e.fn, env, xi, prims)(evaluate(e.arg, env, prims), _ev(e.dist, env, xi, prims))
    if isinstance(e, Abs):
        name, body = e.binder, e.body
        return ErrFun(lambda v, a: _ev(body, _extend(env, name, v), _extend(xi, name, a), prims), f"Λ{name}")
    if isinstance(e, PairD):
        return (_ev(e.left, env, xi, prims), _ev(e.right, env, xi, prims))
    if isinstance(e, FstD):
        return _ev(e.expr, env, xi, prims)[0]
    if isinstance(e, SndD):
        return _ev(e.expr, env, xi, prims)[1]
    if isinstance(e, Tensor):
        return _tensor(_ev(e.left, env, xi, prims), _ev(e.right, env, xi, prims))
    if isinstance(e, (Join, Meet)):
        vals = [_ev(d, env, xi, prims) for d in e.items]
        if not vals:
            if e.type is None:
                raise DerivationError("an empty join or meet needs its type")
            return constant_radius(e.type, INF if isinstance(e, Join) else 0.0)
        return _fold(vals, min if isinstance(e, Join) else max)
    if isinstance(e, Deriv):
        return derive(e.term, env, xi, prims)
    if isinstance(e, Subst):
        v = evaluate(e.term, env, prims)
        a = _ev(e.dist, env, xi, prims)
        return _ev(e.body, _extend(env, e.var, v), _extend(xi, e.var, a), prims)
    raise TypeError(f"not a distance expression: {e!r}")


def draw_radius_value(ty: S.Type, rng: np.random.Generator, cfg: SamplerConfig):
    """An arbitrary monotone radius of shape ``ty`` (not tied to any pair of values)."""
    if isinstance(ty, S.RealT):
        return draw_radius(rng, cfg)
    if isinstance(ty, S.Prod):
        return (draw_radius_value(ty.left, rng, cfg), draw_radius_value(ty.right, rng, cfg))
    if isinstance(ty, S.Arrow):
        if ty.dom == S.REAL and ty.cod == S.REAL and rng.random() < 0.5:
            c, k = float(rng.exponential(0.5)), float(rng.choice([0.5, 1.0, 2.0]))
            return ErrFun(lambda x, a: c + k * a, f"{c:.3g}+{k}a")
        inner = draw_radius_value(ty.cod, rng, cfg)
        return ErrFun(lambda x, a: inner, "const")
    raise TypeError(f"not a type: {ty!r}")


def sample_context(ctx, rng: np.random.Generator, cfg: SamplerConfig) -> tuple[dict, dict]:
    env: dict = {}
    xi: dict = {}
    for name, ty in ctx:
        if supports_triples(ty):
            x, a, _ = draw_triple(ty, rng, cfg)
        else:
            x, a = draw_value(ty, rng, cfg.box), draw_radius_value(ty, rng, cfg)
        env = _extend(env, name, x)
        xi = _extend(xi, name, a)
    return env, xi


def _close(u: float, v: float, tol: float) -> bool:
    if math.isinf(u) or math.isinf(v):
        return u == v
    return abs(u - v) <= tol * max(1.0, abs(u), abs(v))


def compare_radii(ty: S.Type, u, v, relation: str, rng: np.random.Generator, cfg: SamplerConfig,
                  tol: float = 1e-9, probes: int = 6):
    """None when ``u relation v`` holds at all probes, else a witness dict.

    ``relation`` is ``"eq"`` or ``"leq"`` (the reversed order: ``u ⊑ v`` iff
    ``u >= v`` componentwise).
    """
    if isinstance(ty, S.RealT):
        u, v = float(u), float(v)
        ok = _close(u, v, tol) if relation == "eq" else (u >= v or _close(u, v, tol))
        return None if ok else {"left": u, "right": v}
    if isinstance(ty, S.Prod):
        for i, part in enumerate((ty.left, ty.right)):
            w = compare_radii(part, u[i], v[i], relation, rng, cfg, tol, probes)
            if w is not None:
                return {"component": i, **w}
        return None
    if isinstance(ty, S.Arrow):
        for _ in range(probes):
            x = draw_value(ty.dom, rng, cfg.box)
            a = draw_radius_value(ty.dom, rng, cfg)
            w = compare_radii(ty.cod, u(x, a), v(x, a), relation, rng, cfg, tol, max(2, probes // 2))
            if w is not None:
                return {"at": repr(x), "radius": repr(a), **w}
        return None
    raise TypeError(f"not a type: {ty!r}")


# ---------------------------------------------------------------- judgments and derivations


@dataclass(frozen=True)
class Judgment:
    context: tuple  # ((name, Type), ...)
    left: S.Term
    dist: DistExpr
    right: S.Term
    type: S.Type

    def __str__(self):
        ctx = ", ".join(f"{n}:{t}" for n, t in self.context)
        return f"{ctx} ⊢ ({S.pretty(self.left)}, {show(self.dist)}, {S.pretty(self.right)}) : {self.type}"


@dataclass(frozen=True)
class Derivation:
    rule: str
    premises: tuple
    conclusion: Judgment
    note: str = field(default="", compare=False)

    def __post_init__(self):
        if self.rule not in RULES:
            raise DerivationError(f"unknown rule {self.rule!r}; rules are {', '.join(RULES)}")

    def size(self) -> int:
        return 1 + sum(p.size() for p in self.premises)


def judge(ctx, left, dist, right, ty) -> Judgment:
    return Judgment(tuple(ctx), left, dist, right, ty)


# ---------------------------------------------------------------- checking


_ARITY = {"lit": 0, "var": 0, "lam": 1, "app": 2, "pair": 2, "fst": 1, "snd": 1, "sem-replace": 1,
          "weaken": 1, "trans": 2, "qrefl": 1}


@dataclass
class CheckReport:
    verdict: Verdict
    nodes: list

    def to_json(self) -> dict:
        return {"verdict": self.verdict.to_json(), "nodes": self.nodes}


class _Checker:
    def __init__(self, cfg: SamplerConfig, prims: PrimitiveTable, samples: int, tol: float):
        self.cfg = cfg
        self.prims = prims
        self.samples = samples
        self.tol = tol

    def run(self, d: Derivation) -> CheckReport:
        nodes: list = []
        self._node(d, "root", nodes)
        verdict = Verdict.combine(_verdict_of(c) for n in nodes for c in n["checks"])
        if verdict.refuted:
            bad = next(n for n in nodes if n["status"] == "refuted")
            check = next(c for c in bad["checks"] if c["status"] == "refuted")
            verdict = Verdict.refute({"node": bad["path"], "rule": bad["rule"], "check": check["check"],
                                      "judgment": bad["judgment"], "evidence": check.get("witness")},
                                     note=check.get("reason", ""))
        return CheckReport(verdict, nodes)

    def _node(self, d: Derivation, path: str, nodes: list) -> None:
        checks: list = []
        self._checks = checks
        self._rng = self.cfg.rng(zlib.crc32(path.encode()))
        self._judgment = d.conclusion
        try:
            self._check_rule(d)
        except (S.LambdaTypeError, DerivationError, TypeError, ValueError, IndexError, KeyError) as err:
            self._refute("evaluation", {"error": f"{type(err).__name__}: {err}"}, "could not evaluate the node")
        status = Verdict.combine(_verdict_of(c) for c in checks).status
        nodes.append({"path": path, "rule": d.rule, "judgment": str(d.conclusion), "status": status,
                      "checks": checks})
        for i, p in enumerate(d.premises):
            self._node(p, f"{path}/{i}", nodes)

    # recording ------------------------------------------------------------

    def _record(self, check: str, verdict: Verdict, via: str, reason: str = "") -> None:
        entry = {"check": check, "status": verdict.status, "via": via}
        if verdict.n_points:
            entry["samples"] = verdict.n_points
        if verdict.witness is not None:
            entry["witness"] = jsonable(verdict.witness)
        if reason:
            entry["reason"] = reason
        self._checks.append(entry)

    def _ok(self, check: str, via: str = "structural") -> None:
        self._record(check, Verdict.proof(), via)

    def _refute(self, check: str, witness, reason: str) -> None:
        self._record(check, Verdict.refute(witness), "structural", reason)

    def _schema(self, ok: bool, check: str, reason: str, **witness) -> bool:
        if ok:
            self._ok(check)
        else:
            self._refute(check, witness or None, reason)
        return ok

    # helpers --------------------------------------------------------------

    def _types(self, j: Judgment) -> None:
        for side, t in (("left", j.left), ("right", j.right)):
            try:
                ty = S.typecheck(j.context, t, self.prims)
            except S.LambdaTypeError as err:
                self._refute(f"typing:{side}", {"error": str(err)}, "term does not typecheck")
                continue
            self._schema(ty == j.type, f"typing:{side}", f"term has type {ty}, judgment says {j.type}",
                         found=str(ty), expected=str(j.type))

    def _dist_relation(self, check: str, ctx, ty, lhs: DistExpr, rhs: DistExpr, relation: str) -> None:
        """Check ``lhs = rhs`` (or ``lhs ⊑ rhs``) at (γ, ξ) samples of ``ctx``."""
        if lhs == rhs:
            self._ok(check)
            return
        if isinstance(lhs, Lit) and isinstance(rhs, Lit):
            w = compare_radii(ty, lhs.value, rhs.value, relation, self._rng, self.cfg, self.tol)
            if w is None:
                self._ok(check, "exact")
            else:
                self._record(check, Verdict.refute(w), "exact",
                             f"{show(lhs)} {'=' if relation == 'eq' else '⊑'} {show(rhs)} fails")
            return
        for k in range(self.samples):
            env, xi = sample_context(ctx, self._rng, self.cfg)
            u = evaluate_dist(lhs, env, xi, self.prims)
            v = evaluate_dist(rhs, env, xi, self.prims)
            w = compare_radii(ty, u, v, relation, self._rng, self.cfg, self.tol)
            if w is not None:
                witness = {"sample": k, "env": {n: repr(x) for n, x in env.items()},
                           "xi": {n: repr(x) for n, x in xi.items()}, **w}
                self._record(check, Verdict.refute(witness), "sampled",
                             f"{show(lhs)} {'=' if relation == 'eq' else '⊑'} {show(rhs)} fails")
                return
        self._record(check, Verdict.sampled_ok(self.samples), "sampled")

    def _same_denotation(self, check: str, ctx, t: S.Term, p: S.Term) -> None:
        if t == p:
            self._ok(check)
            return
        if beta_eta_equal(ctx, t, p, self.prims):
            self._ok(check, "beta-eta")
            return
        ty = S.typecheck(ctx, t, self.prims)
        for k in range(self.samples):
            env, _ = sample_context(ctx, self._rng, self.cfg)
            u, v = evaluate(t, env, self.prims), evaluate(p, env, self.prims)
            if not value_close(ty, u, v, self.tol):
                self._record(check, Verdict.refute({"sample": k, "env": {n: repr(x) for n, x in env.items()},
                                                    "left": repr(u), "right": repr(v)}),
                             "sampled", "denotations differ")
                return
        self._record(check, Verdict.sampled_ok(self.samples), "sampled")

    # rules ----------------------------------------------------------------

    def _check_rule(self, d: Derivation) -> None:
        j = d.conclusion
        want = _ARITY.get(d.rule)
        if want is not None and not self._schema(len(d.premises) == want, "arity",
                                                 f"rule {d.rule} takes {want} premises",
                                                 premises=len(d.premises)):
            return
        self._types(j)
        getattr(self, "_rule_" + d.rule.replace("-", "_"))(d, j, [p.conclusion for p in d.premises])

    def _same_context(self, j: Judgment, prem: list) -> bool:
        return self._schema(all(p.context == j.context for p in prem), "context",
                            "premises must share the conclusion's context")

    def _rule_lit(self, d, j, prem):
        if not self._schema(isinstance(j.left, S.Const) and isinstance(j.right, S.Const) and j.type == S.REAL,
                            "schema", "lit concludes (x, a, y) : Real for literals x and y"):
            return
        gap = abs(float(j.left.value) - float(j.right.value))
        self._dist_relation("a = |x - y|", j.context, S.REAL, j.dist, Lit(gap), "eq")

    def _rule_var(self, d, j, prem):
        ok = isinstance(j.left, S.Var) and j.left == j.right and any(n == j.left.name for n, _ in j.context)
        if self._schema(ok, "schema", "var concludes (x, a, x) for a context variable x"):
            self._dist_relation("a = ξ|x", j.context, j.type, j.dist, Radius(j.left.name), "eq")

    def _rule_prim(self, d, j, prem):
        ok = (isinstance(j.left, S.PrimApp) and isinstance(j.right, S.PrimApp) and j.left.prim == j.right.prim
              and j.left.param == j.right.param and len(j.left.args) == len(j.right.args) == len(prem))
        if not self._schema(ok, "schema", "prim concludes (α(t..), b, α(s..)) from one premise per argument"):
            return
        if not self._same_context(j, prem):
            return
        fits = all(p.left == t and p.right == s and p.type == S.REAL
                   for p, t, s in zip(prem, j.left.args, j.right.args))
        if not self._schema(fits, "premises", "premise i must relate argument i on both sides at Real"):
            return
        expected = PrimMod(j.left.prim, j.left.param, j.left.args, tuple(p.dist for p in prem))
        self._dist_relation("b = α•(..)", j.context, S.REAL, j.dist, expected, "eq")

    def _rule_lam(self, d, j, prem):
        (p,) = prem
        ok = (isinstance(j.left, S.Lam) and isinstance(j.right, S.Lam) and j.left.binder == j.right.binder
              and j.left.annot == j.right.annot and j.left.annot is not None)
        if not self._schema(ok, "schema", "lam concludes (λx:A.t, b, λx:A.s) with one binder and annotation"):
            return
        x, a_ty = j.left.binder, j.left.annot
        fits = (p.context == j.context + ((x, a_ty),) and p.left == j.left.body and p.right == j.right.body
                and isinstance(j.type, S.Arrow) and p.type == j.type.cod)
        if self._schema(fits, "premises", "premise must be the bodies in the context extended by the binder"):
            self._dist_relation("b(γ,ξ)(x,a') = a(γ::x, ξ::a')", j.context, j.type, j.dist, Abs(x, p.dist), "eq")

    def _rule_app(self, d, j, prem):
        f, a = prem
        ok = isinstance(j.left, S.App) and isinstance(j.right, S.App)
        if not self._schema(ok, "schema", "app concludes (t p, c, s q)") or not self._same_context(j, prem):
            return
        fits = (f.left == j.left.fn and f.right == j.right.fn and a.left == j.left.arg and a.right == j.right.arg
                and f.type == S.Arrow(a.type, j.type))
        if self._schema(fits, "premises", "premises must relate the functions and the arguments"):
            self._dist_relation("c = a(γ,ξ)(⟦p⟧γ, b(γ,ξ))", j.context, j.type, j.dist,
                                Apply(f.dist, a.left, a.dist), "eq")

    def _rule_pair(self, d, j, prem):
        l, r = prem
        ok = isinstance(j.left, S.Pair) and isinstance(j.right, S.Pair)
        if not self._schema(ok, "schema", "pair concludes (⟨t,p⟩, ⟨a,b⟩, ⟨s,q⟩)") or not self._same_context(j, prem):
            return
        fits = (l.left == j.left.left and l.right == j.right.left and r.left == j.left.right
                and r.right == j.right.right and j.type == S.Prod(l.type, r.type))
        if self._schema(fits, "premises", "premises must relate the components"):
            self._dist_relation("c = ⟨a, b⟩", j.context, j.type, j.dist, PairD(l.dist, r.dist), "eq")

    def _projection(self, j, prem, cls, proj, idx):
        (p,) = prem
        ok = isinstance(j.left, cls) and isinstance(j.right, cls)
        name = "fst" if idx == 0 else "snd"
        if not self._schema(ok, "schema", f"{name} concludes ({name} t, a, {name} s)") \
                or not self._same_context(j, prem):
            return
        fits = (p.left == j.left.term and p.right == j.right.term and isinstance(p.type, S.Prod)
                and (p.type.left, p.type.right)[idx] == j.type)
        if not self._schema(fits, "premises", "premise must relate the projected pairs"):
            return
        if j.dist == proj(p.dist):
            self._ok(f"a = π{idx + 1}(premise)")
            return
        expected = (p.dist.left, p.dist.right)[idx] if isinstance(p.dist, PairD) else proj(p.dist)
        self._dist_relation(f"a = π{idx + 1}(premise)", j.context, j.type, j.dist, expected, "eq")

    def _rule_fst(self, d, j, prem):
        self._projection(j, prem, S.Fst, FstD, 0)

    def _rule_snd(self, d, j, prem):
        self._projection(j, prem, S.Snd, SndD, 1)

    def _rule_sem_replace(self, d, j, prem):
        (p,) = prem
        if not self._same_context(j, prem):
            return
        if not self._schema(p.dist == j.dist and p.type == j.type, "schema",
                            "sem-replace keeps the distance and the type"):
            return
        self._same_denotation("⟦t⟧ = ⟦p⟧", j.context, p.left, j.left)
        self._same_denotation("⟦s⟧ = ⟦q⟧", j.context, p.right, j.right)

    def _rule_weaken(self, d, j, prem):
        (p,) = prem
        if not self._same_context(j, prem):
            return
        if self._schema(p.left == j.left and p.right == j.right and p.type == j.type, "schema",
                        "weaken keeps both terms and the type"):
            self._dist_relation("b ⊑ a", j.context, j.type, j.dist, p.dist, "leq")

    def _rule_join(self, d, j, prem):
        if not self._same_context(j, prem):
            return
        fits = all(p.left == j.left and p.right == j.right and p.type == j.type for p in prem)
        if self._schema(fits, "schema", "join premises relate the same terms as the conclusion"):
            self._dist_relation("a = ⊔ a_i", j.context, j.type, j.dist,
                                Join(tuple(p.dist for p in prem), j.type), "eq")

    def _rule_trans(self, d, j, prem):
        p, q = prem
        if not self._same_context(j, prem):
            return
        fits = (p.left == j.left and p.right == q.left and q.right == j.right and p.type == q.type == j.type)
        if self._schema(fits, "schema", "trans chains (t, a, s) and (s, b, u) into (t, a ⊗ b, u)"):
            self._dist_relation("c = a ⊗ b", j.context, j.type, j.dist, Tensor(p.dist, q.dist), "eq")

    def _rule_qrefl(self, d, j, prem):
        (p,) = prem
        if not self._same_context(j, prem):
            return
        self._schema(p.left == j.left == j.right and p.dist == j.dist and p.type == j.type, "schema",
                     "qrefl turns (t, a, s) into (t, a, t)")


def _verdict_of(check: dict) -> Verdict:
    if check["status"] == "refuted":
        return Verdict.refute(check.get("witness"))
    if check["status"] == "sampled_ok":
        return Verdict.sampled_ok(check.get("samples", 0))
    return Verdict.proof()


def check_derivation(d: Derivation, cfg: SamplerConfig | None = None, prims: PrimitiveTable | None = None,
                     samples: int = 16, tol: float = 1e-9) -> CheckReport:
    """Validate every node of ``d``; the report lists each side-condition check."""
    return _Checker(cfg or SamplerConfig(), prims or default_table(), samples, tol).run(d)


# ---------------------------------------------------------------- derivation builders


def reflexivity_derivation(ctx, t: S.Term, prims: PrimitiveTable | None = None) -> Derivation:
    """A derivation of ``Γ ⊢ (t, a, t) : A`` whose ``a`` evaluates to ``⟦t⟧•``."""
    prims = prims or default_table()
    ctx = tuple(ctx)
    return _refl(ctx, S.elaborate(ctx, t, prims), prims)


def _refl(ctx, t, prims) -> Derivation:
    ty = S.typecheck(ctx, t, prims)
    if isinstance(t, S.Var):
        return Derivation("var", (), judge(ctx, t, Radius(t.name), t, ty))
    if isinstance(t, S.Const):
        return Derivation("lit", (), judge(ctx, t, Lit(0.0), t, ty))
    if isinstance(t, S.PrimApp):
        prem = tuple(_refl(ctx, a, prims) for a in t.args)
        dist = PrimMod(t.prim, t.param, t.args, tuple(p.conclusion.dist for p in prem))
        return Derivation("prim", prem, judge(ctx, t, dist, t, ty))
    if isinstance(t, S.Lam):
        body = _refl(ctx + ((t.binder, t.annot),), t.body, prims)
        return Derivation("lam", (body,), judge(ctx, t, Abs(t.binder, body.conclusion.dist), t, ty))
    if isinstance(t, S.App):
        f, a = _refl(ctx, t.fn, prims), _refl(ctx, t.arg, prims)
        return Derivation("app", (f, a), judge(ctx, t, Apply(f.conclusion.dist, t.arg, a.conclusion.dist), t, ty))
    if isinstance(t, S.Pair):
        l, r = _refl(ctx, t.left, prims), _refl(ctx, t.right, prims)
        return Derivation("pair", (l, r), judge(ctx, t, PairD(l.conclusion.dist, r.conclusion.dist), t, ty))
    if isinstance(t, (S.Fst, S.Snd)):
        p = _refl(ctx, t.term, prims)
        proj = FstD if isinstance(t, S.Fst) else SndD
        return Derivation("fst" if isinstance(t, S.Fst) else "snd", (p,), judge(ctx, t, proj(p.conclusion.dist), t, ty))
    raise TypeError(f"not a term: {t!r}")


def push_subst(e: DistExpr, x: str, p: S.Term, b: DistExpr) -> DistExpr:
    """``e`` with the variable ``x`` bound to the value of ``p`` and the radius ``b``.

    Radius projections and term arguments are rewritten in place; only
    derivative references that mention ``x`` keep an explicit :class:`Subst`.
    """

    def go(e):
        if isinstance(e, Lit):
            return e
        if isinstance(e, Radius):
            return b if e.name == x else e
        if isinstance(e, PrimMod):
            return PrimMod(e.prim, e.param, tuple(S.substitute(a, x, p) for a in e.args),
                           tuple(go(d) for d in e.dists))
        if isinstance(e, Apply):
            return Apply(go(e.fn), S.substitute(e.arg, x, p), go(e.dist))
        if isinstance(e, Abs):
            return e if e.binder == x else Abs(e.binder, go(e.body))
        if isinstance(e, PairD):
            return PairD(go(e.left), go(e.right))
        if isinstance(e, FstD):
            return FstD(go(e.expr))
        if isinstance(e, SndD):
            return SndD(go(e.expr))
        if isinstance(e, Tensor):
            return Tensor(go(e.left), go(e.right))
        if isinstance(e, Join):
            return Join(tuple(go(d) for d in e.items), e.type)
        if isinstance(e, Meet):
            return Meet(tuple(go(d) for d in e.items), e.type)
        if isinstance(e, Deriv):
            return e if x not in S.free_vars(e.term) else Subst(e, x, p, b)
        if isinstance(e, Subst):
            return Subst(e, x, p, b)
        raise TypeError(f"not a distance expression: {e!r}")

    return go(e)


def substitution_derivation(d1: Derivation, x: str, d2: Derivation) -> tuple[Derivation, Derivation]:
    """From ``Γ, x:A, Δ ⊢ (t, a, s) : B`` and ``⊢ (p, b, q) : A`` build derivations of
    ``(t[p/x], c, s[q/x])`` and ``(t[p/x], c, t[q/x])`` in ``Γ, Δ``, where
    ``c(γ, ξ) = a((γ, ⟦p⟧), (ξ, b))``.
    """
    ctx = d1.conclusion.context
    slots = [i for i, (n, _) in enumerate(ctx) if n == x]
    if len(slots) != 1:
        raise DerivationError(f"{x} must occur exactly once in the context of the first derivation")
    if d2.conclusion.context:
        raise DerivationError("the substituted derivation must be closed")
    if d2.conclusion.type != ctx[slots[0]][1]:
        raise DerivationError(f"{x} has type {ctx[slots[0]][1]}, the substituted derivation has type "
                              f"{d2.conclusion.type}")
    _no_rebinding(d1, x)
    return _subst(d1, slots[0], x, d2)


def _no_rebinding(d: Derivation, x: str) -> None:
    if d.rule == "lam" and d.conclusion.left.binder == x:
        raise DerivationError(f"a lambda in the derivation rebinds {x}")
    for p in d.premises:
        _no_rebinding(p, x)


def recontext(d: Derivation, prefix: tuple) -> Derivation:
    """Weaken a derivation by prepending ``prefix`` to every context."""
    j = d.conclusion
    return Derivation(d.rule, tuple(recontext(p, prefix) for p in d.premises),
                      judge(prefix + j.context, j.left, j.dist, j.right, j.type), d.note)


def _subst(d: Derivation, k: int, x: str, d2: Derivation) -> tuple[Derivation, Derivation]:
    j = d.conclusion
    p, b, q = d2.conclusion.left, d2.conclusion.dist, d2.conclusion.right
    ctx = j.context[:k] + j.context[k + 1:]
    c = push_subst(j.dist, x, p, b)

    def node(rule, premises, left, right, dist=c):
        return Derivation(rule, tuple(premises), judge(ctx, left, dist, right, j.type))

    tp = S.substitute(j.left, x, p)
    sq = S.substitute(j.right, x, q)
    tq = S.substitute(j.left, x, q)

    if d.rule == "var":
        if j.left.name == x:
            moved = recontext(d2, ctx)
            return moved, moved
        same = node("var", (), j.left, j.right)
        return same, same
    if d.rule == "lit":
        first = node("lit", (), j.left, j.right)
        return first, node("qrefl", (first,), j.left, j.left)
    if d.rule == "trans":
        left_prem, right_prem = d.premises
        p_refl = Derivation("qrefl", (d2,), judge((), p, b, p, d2.conclusion.type))
        first_left, _ = _subst(left_prem, k, x, p_refl)
        first_right, _ = _subst(right_prem, k, x, d2)
        _, second_left = _subst(left_prem, k, x, d2)
        return (node("trans", (first_left, first_right), tp, sq),
                node("weaken", (second_left,), tp, tq))
    if d.rule == "qrefl":
        _, second = _subst(d.premises[0], k, x, d2)
        return second, second
    pairs = [_subst(prem, k, x, d2) for prem in d.premises]
    firsts = [a for a, _ in pairs]
    seconds = [s for _, s in pairs]
    return node(d.rule, firsts, tp, sq), node(d.rule, seconds, tp, tq)


# ---------------------------------------------------------------- JSON


def dist_to_json(e: DistExpr):
    if isinstance(e, Lit):
        return {"lit": jsonable(e.value)}
    if isinstance(e, Radius):
        return {"radius": e.name}
    if isinstance(e, PrimMod):
        return {"primmod": e.prim, "param": e.param, "args": [S.pretty(a) for a in e.args],
                "dists": [dist_to_json(d) for d in e.dists]}
    if isinstance(e, Apply):
        return {"apply": dist_to_json(e.fn), "arg": S.pretty(e.arg), "dist": dist_to_json(e.dist)}
    if isinstance(e, Abs):
        return {"abs": e.binder, "body": dist_to_json(e.body)}
    if isinstance(e, PairD):
        return {"pair": [dist_to_json(e.left), dist_to_json(e.right)]}
    if isinstance(e, FstD):
        return {"fst": dist_to_json(e.expr)}
    if isinstance(e, SndD):
        return {"snd": dist_to_json(e.expr)}
    if isinstance(e, Tensor):
        return {"tensor": [dist_to_json(e.left), dist_to_json(e.right)]}
    if isinstance(e, (Join, Meet)):
        out = {"join" if isinstance(e, Join) else "meet": [dist_to_json(d) for d in e.items]}
        if e.type is not None:
            out["type"] = str(e.type)
        return out
    if isinstance(e, Deriv):
        return {"deriv": S.pretty(e.term)}
    if isinstance(e, Subst):
        return {"subst": dist_to_json(e.body), "var": e.var, "term": S.pretty(e.term), "dist": dist_to_json(e.dist)}
    raise TypeError(f"not a distance expression: {e!r}")


def _num(v):
    if isinstance(v, list):
        return tuple(_num(x) for x in v)
    if isinstance(v, str):
        return float(v)  # "inf"
    return float(v)


def dist_from_json(obj, prims: PrimitiveTable | None = None) -> DistExpr:
    arities = (prims or default_table()).arities()

    def term(src):
        return S.parse(src, arities)

    def go(o):
        if isinstance(o, (int, float, str, list)) and not isinstance(o, bool):
            return Lit(_num(o))
        if not isinstance(o, dict):
            raise DerivationError(f"cannot read a distance expression from {o!r}")
        if "lit" in o:
            return Lit(_num(o["lit"]))
        if "radius" in o:
            return Radius(o["radius"])
        if "primmod" in o:
            return PrimMod(o["primmod"], o.get("param"), tuple(term(a) for a in o["args"]),
                           tuple(go(d) for d in o["dists"]))
        if "apply" in o:
            return Apply(go(o["apply"]), term(o["arg"]), go(o["dist"]))
        if "abs" in o:
            return Abs(o["abs"], go(o["body"]))
        if "pair" in o:
            return PairD(go(o["pair"][0]), go(o["pair"][1]))
        if "fst" in o:
            return FstD(go(o["fst"]))
        if "snd" in o:
            return SndD(go(o["snd"]))
        if "tensor" in o:
            return Tensor(go(o["tensor"][0]), go(o["tensor"][1]))
        for key, cls in (("join", Join), ("meet", Meet)):
            if key in o:
                ty = S.parse_type(o["type"]) if "type" in o else None
                return cls(tuple(go(d) for d in o[key]), ty)
        if "deriv" in o:
            return Deriv(term(o["deriv"]))
        if "subst" in o:
            return Subst(go(o["subst"]), o["var"], term(o["term"]), go(o["dist"]))
        raise DerivationError(f"unknown distance expression {sorted(o)}")

    return go(obj)


def to_json(d: Derivation) -> dict:
    j = d.conclusion
    out = {"rule": d.rule, "context": [[n, str(t)] for n, t in j.context], "left": S.pretty(j.left),
           "dist": dist_to_json(j.dist), "right": S.pretty(j.right), "type": str(j.type)}
    if d.note:
        out["note"] = d.note
    if d.premises:
        out["premises"] = [to_json(p) for p in d.premises]
    return out


def from_json(obj, prims: PrimitiveTable | None = None, context: tuple | None = None) -> Derivation:
    """Read a derivation tree.

    A node without ``"context"`` inherits its parent's; under ``lam`` the
    inherited context is extended by the binder.
    """
    if isinstance(obj, (str, Path)):
        obj = json.loads(Path(obj).read_text())
    prims = prims or default_table()
    arities = prims.arities()
    try:
        rule = obj["rule"]
        if "context" in obj:
            ctx = tuple((n, S.parse_type(t)) for n, t in obj["context"])
        elif context is not None:
            ctx = context
        else:
            ctx = ()
        left = S.parse(obj["left"], arities)
        right = S.parse(obj["right"], arities)
        ty = S.parse_type(obj["type"])
        dist = dist_from_json(obj["dist"], prims)
    except KeyError as err:
        raise DerivationError(f"derivation node is missing {err}") from None
    except (S.LambdaSyntaxError, TypeError) as err:
        raise DerivationError(f"cannot read derivation node: {err}") from None
    inherited = ctx
    if rule == "lam" and isinstance(left, S.Lam):
        inherited = ctx + ((left.binder, left.annot),)
    premises = tuple(from_json(p, prims, inherited) for p in obj.get("premises", ()))
    return Derivation(rule, premises, Judgment(ctx, left, dist, right, ty), obj.get("note", ""))


def save(d: Derivation, path) -> None:
    Path(path).write_text(json.dumps(to_json(d), indent=2, ensure_ascii=False) + "\n")


# ---------------------------------------------------------------- examples and random trees


def literal(x: float, y: float, dist: float | None = None) -> Derivation:
    """``⊢ (x, dist, y) : Real`` by the literal rule; ``dist`` defaults to ``|x - y|``."""
    d = abs(x - y) if dist is None else dist
    return Derivation("lit", (), judge((), S.Const(x), Lit(d), S.Const(y), S.REAL))


def weakened(d: Derivation, dist: DistExpr) -> Derivation:
    j = d.conclusion
    return Derivation("weaken", (d,), judge(j.context, j.left, dist, j.right, j.type))


def broken_weakening() -> Derivation:
    """Weakening ``(2, 1, 3)`` to radius 0.5, which must be rejected."""
    return weakened(literal(2.0, 3.0), Lit(0.5))


_UNARY = ("sin", "cos", "neg", "abs")
_BINARY = ("add2", "mul")
_FUNCTIONS = ("\\z:Real. sin z", "\\z:Real. mul(z, z)", "\\z:Real. add2(z, 1.0)", "\\z:Real. abs (neg z)")


def random_ground_derivation(rng: np.random.Generator, depth: int = 3, sloppy: float = 0.15,
                             prims: PrimitiveTable | None = None) -> Derivation:
    """A random closed derivation at Real.

    With probability ``sloppy`` per node a weakening or literal radius is
    chosen too small, so some trees are rightly rejected by the checker.
    """
    prims = prims or default_table()
    arities = prims.arities()

    def lit_value():
        return float(np.round(rng.uniform(-3, 3), 2))

    def dist_value(dr: Derivation) -> float:
        return float(evaluate_dist(dr.conclusion.dist, {}, {}, prims))

    def go(depth) -> Derivation:
        k = int(rng.integers(0, 9)) if depth > 0 else 0
        if k == 0:
            x, y = lit_value(), lit_value()
            if rng.random() < sloppy:
                return literal(x, y, abs(x - y) * float(rng.uniform(0, 1)))
            return literal(x, y)
        if k == 1:
            sub = go(depth - 1)
            name = _UNARY[int(rng.integers(0, len(_UNARY)))]
            j = sub.conclusion
            t, s = S.PrimApp(name, (j.left,)), S.PrimApp(name, (j.right,))
            return Derivation("prim", (sub,), judge((), t, PrimMod(name, None, (j.left,), (j.dist,)), s, S.REAL))
        if k == 2:
            a, b = go(depth - 1), go(depth - 1)
            name = _BINARY[int(rng.integers(0, len(_BINARY)))]
            ja, jb = a.conclusion, b.conclusion
            t = S.PrimApp(name, (ja.left, jb.left))
            s = S.PrimApp(name, (ja.right, jb.right))
            return Derivation("prim", (a, b), judge((), t, PrimMod(name, None, t.args, (ja.dist, jb.dist)), s,
                                                    S.REAL))
        if k == 3:
            sub = go(depth - 1)
            v = dist_value(sub)
            bump = float(rng.exponential(0.5))
            new = v - bump if rng.random() < sloppy and math.isfinite(v) else v + bump
            return weakened(sub, Lit(max(new, 0.0)))
        if k == 4:
            first = go(depth - 1)
            j = first.conclusion
            if isinstance(j.right, S.Const) and rng.random() < 0.5:
                second = literal(float(j.right.value), lit_value())
            else:
                second = reflexivity_derivation((), j.right, prims)
            jj = second.conclusion
            return Derivation("trans", (first, second), judge((), j.left, Tensor(j.dist, jj.dist), jj.right, S.REAL))
        if k == 5:
            sub = go(depth - 1)
            j = sub.conclusion
            other = weakened(sub, Lit(dist_value(sub) + float(rng.exponential(1.0))))
            return Derivation("join", (sub, other), judge((), j.left, Join((j.dist, other.conclusion.dist)),
                                                          j.right, S.REAL))
        if k == 6:
            sub = go(depth - 1)
            j = sub.conclusion
            return Derivation("qrefl", (sub,), judge((), j.left, j.dist, j.left, S.REAL))
        if k == 7:
            sub = go(depth - 1)
            j = sub.conclusion
            fn = S.parse(_FUNCTIONS[int(rng.integers(0, len(_FUNCTIONS)))], arities)
            f = reflexivity_derivation((), fn, prims)
            dist = Apply(f.conclusion.dist, j.left, j.dist)
            return Derivation("app", (f, sub), judge((), S.App(fn, j.left), dist, S.App(fn, j.right), S.REAL))
        sub = go(depth - 1)
        j = sub.conclusion
        wrap = S.App(S.Lam("w", S.REAL, S.Var("w")), j.left)
        return Derivation("sem-replace", (sub,), judge((), wrap, j.dist, j.right, S.REAL))

    return go(depth)


def ground_soundness(d: Derivation, prims: PrimitiveTable | None = None, tol: float = 1e-9) -> dict:
    """Compare ``|⟦t⟧ - ⟦s⟧|`` with the value of ``a`` for a closed judgment at Real."""
    prims = prims or default_table()
    j = d.conclusion
    if j.context or j.type != S.REAL:
        raise DerivationError("soundness is checked for closed judgments at Real")
    gap = abs(evaluate(j.left, {}, prims) - evaluate(j.right, {}, prims))
    bound = float(evaluate_dist(j.dist, {}, {}, prims))
    return {"gap": gap, "bound": bound, "holds": gap <= bound + tol * max(1.0, bound if math.isfinite(bound) else 1.0)}
