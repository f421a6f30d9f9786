"""Command-line entry point ``qqm``.

Every subcommand prints one JSON report.  Exit status is 0 when the report's
verdict is proved or sampled, 1 when something was refuted (the report holds
the witness), and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import ast
import math
import operator
import re
import sys
from dataclasses import replace

import numpy as np

from qqm import corpus as C
from qqm import harness as H
from qqm import metrics as M
from qqm import qet
from qqm import syntax as S
from qqm import workbench as W
from qqm.finite import quantale_by_name
from qqm.quantale import const_errfun
from qqm.sampling import exact_rho_hat_rr, function_by_name
from qqm.semantics import derive, evaluate
from qqm.verdict import Verdict


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- argument values

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv,
        ast.USub: operator.neg, ast.UAdd: operator.pos}


def parse_real(text: str) -> float:
    """A number, ``inf``, or arithmetic over numbers and ``pi`` such as ``2pi`` or ``-pi/2``."""
    src = re.sub(r"(\d)\s*(pi)\b", r"\1*\2", text.strip())

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in ("pi", "inf"):
            return math.pi if node.id == "pi" else math.inf
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise UsageError(f"cannot read a number from {text!r}")

    try:
        return ev(ast.parse(src, mode="eval"))
    except SyntaxError:
        raise UsageError(f"cannot read a number from {text!r}") from None


def split_top(text: str, sep: str = ",") -> list[str]:
    """Split on ``sep`` outside of brackets."""
    out, depth, cur = [], 0, []
    for ch in text:
        if ch in "([<":
            depth += 1
        elif ch in ")]>" and not (ch == ">" and cur and cur[-1] == "-"):
            depth -= 1
        if ch == sep and depth == 0:
            out.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    if "".join(cur).strip():
        out.append("".join(cur).strip())
    return out


def _pair_parts(text: str) -> list[str] | None:
    t = text.strip()
    if (t.startswith("<") and t.endswith(">")) or (t.startswith("(") and t.endswith(")")):
        parts = split_top(t[1:-1])
        if len(parts) == 2:
            return parts
    return None


def parse_value(text: str, ty: S.Type, prims):
    """A value of type ``ty``: numbers, ``<u, v>`` pairs, pool function names, or ``term:SRC``."""
    text = text.strip()
    if text.startswith("term:") or text.startswith("corpus:"):
        t, ctx, _ = resolve_term(text, None, prims)
        if ctx:
            raise UsageError(f"{text} is not closed")
        return evaluate(t, {}, prims)
    if isinstance(ty, S.RealT):
        return parse_real(text)
    if isinstance(ty, S.Prod):
        parts = _pair_parts(text)
        if parts is None:
            raise UsageError(f"expected a pair <u, v> for type {ty}, got {text!r}")
        return (parse_value(parts[0], ty.left, prims), parse_value(parts[1], ty.right, prims))
    if ty == M.RR:
        try:
            return function_by_name(text)
        except KeyError as err:
            raise UsageError(str(err)) from None
    raise UsageError(f"give values of type {ty} as term:<closed term>")


def parse_radius(text: str, ty: S.Type, value, prims):
    """A radius of type ``ty``: numbers, pairs, ``self``, ``self(f)``, ``rho(f,g)`` or ``const:c``."""
    text = text.strip()
    if isinstance(ty, S.RealT):
        return parse_real(text)
    if isinstance(ty, S.Prod):
        parts = _pair_parts(text)
        if parts is None:
            raise UsageError(f"expected a pair radius for type {ty}, got {text!r}")
        vs = value if value is not None else (None, None)
        return (parse_radius(parts[0], ty.left, vs[0], prims), parse_radius(parts[1], ty.right, vs[1], prims))
    if text.startswith("const:"):
        return const_errfun(parse_real(text[6:]))
    if ty == M.RR:
        if text == "self":
            if value is None:
                raise UsageError("'self' needs a point value for the same variable")
            return exact_rho_hat_rr(value, value)
        m = re.fullmatch(r"self\((.+)\)", text)
        if m:
            f = parse_value(m.group(1), ty, prims)
            return exact_rho_hat_rr(f, f)
        m = re.fullmatch(r"rho\((.+)\)", text)
        if m:
            parts = split_top(m.group(1))
            if len(parts) != 2:
                raise UsageError("rho(f, g) takes two functions")
            return exact_rho_hat_rr(parse_value(parts[0], ty, prims), parse_value(parts[1], ty, prims))
    raise UsageError(f"cannot read a radius of type {ty} from {text!r}")


def parse_context(text: str | None) -> list[tuple[str, S.Type]]:
    if not text:
        return []
    out = []
    for item in split_top(text):
        name, _, ty = item.partition(":")
        if not ty:
            raise UsageError(f"context entries look like x:Real, got {item!r}")
        out.append((name.strip(), S.parse_type(ty)))
    return out


def resolve_term(text: str, context: str | None, prims):
    """``corpus:NAME`` or source text; returns (term, context, corpus entry or None)."""
    if text.startswith("corpus:"):
        try:
            e = C.entry(text[7:])
        except KeyError as err:
            raise UsageError(str(err)) from None
        return e.term(prims), e.ctx(), e
    src = text[5:] if text.startswith("term:") else text
    return S.parse(src, prims.arities()), parse_context(context), None


def parse_bindings(text: str | None) -> list[tuple[str, str]]:
    if not text:
        return []
    out = []
    for item in split_top(text):
        key, eq, val = item.partition("=")
        if not eq:
            raise UsageError(f"bindings look like name=value, got {item!r}")
        out.append((key.strip(), val.strip()))
    return out


def bind_point(ctx, text, prims) -> dict:
    env = {}
    given = dict(parse_bindings(text))
    for name, ty in ctx:
        if name not in given:
            raise UsageError(f"no value for {name}")
        env[name] = parse_value(given[name], ty, prims)
    return env


def bind_radius(ctx, text, env, prims) -> dict:
    """Radii by variable name, or positionally in context order when the names differ."""
    pairs = parse_bindings(text)
    names = [n for n, _ in ctx]
    if all(k in names for k, _ in pairs):
        given = dict(pairs)
    elif len(pairs) == len(ctx):
        given = {n: v for n, (_, v) in zip(names, pairs)}
    else:
        raise UsageError("radius bindings must name context variables or list one radius per variable")
    xi = {}
    for name, ty in ctx:
        if name not in given:
            raise UsageError(f"no radius for {name}")
        xi[name] = parse_radius(given[name], ty, env.get(name), prims)
    return xi


# ---------------------------------------------------------------- subcommands


def cmd_typecheck(args, cfg):
    prims = cfg.table()
    t, ctx, _ = resolve_term(args.term, args.context, prims)
    try:
        ty = S.typecheck(ctx, t, prims)
    except S.LambdaTypeError as err:
        return H.make_report("typecheck", cfg, Verdict.refute({"error": str(err)}), term=S.pretty(t))
    return H.make_report("typecheck", cfg, Verdict.proof(), term=S.pretty(t), type=str(ty),
                         context=[[n, str(t_)] for n, t_ in ctx])


def cmd_eval(args, cfg):
    prims = cfg.table()
    t, ctx, _ = resolve_term(args.term, args.context, prims)
    S.typecheck(ctx, t, prims)
    env = bind_point(ctx, args.point, prims)
    return H.make_report("eval", cfg, Verdict.proof(), term=S.pretty(t), point=args.point or "",
                         value=evaluate(t, env, prims))


def cmd_derive(args, cfg):
    prims = cfg.table()
    t, ctx, _ = resolve_term(args.term, args.context, prims)
    S.typecheck(ctx, t, prims)
    env = bind_point(ctx, args.point, prims)
    xi = bind_radius(ctx, args.radius, env, prims)
    bound = derive(t, env, xi, prims, mode=args.mode)
    return H.make_report("derive", cfg, Verdict.proof() if args.mode == "analytic" else Verdict.sampled_ok(1),
                         term=S.pretty(t), point=args.point or "", radius=args.radius or "", bound=bound,
                         mode=args.mode, samples=0 if args.mode == "analytic" else 1)


def cmd_distance(args, cfg):
    prims = cfg.table()
    f = parse_value(args.left, M.RR, prims)
    g = parse_value(args.right, M.RR, prims)
    x, a = parse_real(args.point), parse_real(args.radius)
    d = M.rho_hat_arrow(f, g, x, a, tol=cfg.grid_tol, grid=cfg.grid, exact=args.exact)
    verdict = Verdict.proof() if d.mode == "exact" else Verdict.sampled_ok(d.resolution)
    return H.make_report("distance", cfg, verdict, left=args.left, right=args.right, point=x, radius=a,
                         distance=d)


def cmd_member(args, cfg):
    prims = cfg.table()
    ty = S.parse_type(args.type)
    x = parse_value(args.left, ty, prims)
    y = parse_value(args.right, ty, prims)
    a = parse_radius(args.radius, ty, x, prims)
    v = M.member(ty, x, a, y, cfg.sampler(), tol=cfg.exact_tol)
    return H.make_report("member", cfg, v, type=str(ty), left=args.left, radius=args.radius, right=args.right)


def cmd_selfdist(args, cfg):
    prims = cfg.table()
    ty = S.parse_type(args.type)
    x = parse_value(args.value, ty, prims)
    sigma = M.self_distance(ty, x, tol=cfg.grid_tol, grid=cfg.grid)
    probes = [tuple(parse_real(v) for v in split_top(p, ":")) for p in split_top(args.at or "")]
    table = []
    for probe in probes:
        if len(probe) != 2 or not callable(sigma):
            raise UsageError("--at takes x:a probes and needs a function type")
        table.append({"x": probe[0], "a": probe[1], "sigma": sigma(*probe)})
    return H.make_report("selfdist", cfg, Verdict.proof(), type=str(ty), value=args.value,
                         sigma=sigma if not callable(sigma) else None, probes=table)


def cmd_bound2(args, cfg):
    prims = cfg.table()
    t = S.parse(args.t, prims.arities())
    s = S.parse(args.s, prims.arities())
    for term in (t, s):
        ty = S.typecheck([], term, prims)
        if not (isinstance(ty, S.Arrow) and ty.cod == S.REAL):
            raise UsageError(f"{S.pretty(term)} must be a closed term of type A -> Real")
    x, a = parse_real(args.point), parse_real(args.radius)
    return H.make_report("bound2", cfg, Verdict.proof(), t=args.t, s=args.s, point=x, radius=a,
                         bound=M.two_term_bound(t, s, x, a, prims))


def cmd_check_fundamental(args, cfg):
    if args.sample_index is not None:
        if not args.term:
            raise UsageError("--sample-index needs --term")
        rec = H.replay_fundamental(cfg, args.term[0], args.sample_index)
        v = Verdict.sampled_ok(1) if rec["holds"] else Verdict.refute(rec)
        return H.make_report("check-fundamental", cfg, v, replay=rec)
    return H.fundamental_suite(cfg, args.term)


def _load_space(path):
    try:
        return W.FiniteQqmSpace.from_json(path)
    except (OSError, KeyError, ValueError) as err:
        raise UsageError(f"cannot load space {path}: {err}") from None


def cmd_workbench(args, cfg):
    if args.suite:
        return H.workbench_suite(cfg, args.suite)
    if args.mine:
        return _workbench_mine(args, cfg)
    if not args.space:
        raise UsageError("workbench needs --space, --mine or --suite")
    space = _load_space(args.space)
    payload = {"space": space.to_json()}
    verdicts = []
    if args.axioms:
        names = [a.strip() for a in args.axioms.split(",") if a.strip()]
        unknown = [a for a in names if a not in W.AXIOMS]
        if unknown:
            raise UsageError(f"unknown axioms {unknown}; known: {', '.join(W.AXIOMS)}")
        results = W.check_axioms(space, names, cfg.caps)
        payload["axioms"] = results
        verdicts += results.values()
    if args.construct:
        other = _load_space(args.with_space) if args.with_space else space
        built, extra = _construct(args.construct, space, other, cfg)
        if built is not None:
            payload["construction"] = built.to_json()
            if args.save:
                built.save(args.save)
        payload.update(extra)
        verdicts += [v for v in extra.values() if isinstance(v, Verdict)]
    if not (args.axioms or args.construct):
        verdicts.append(W.check_axiom(space, W.QUASI_REFLEXIVE))
    return H.make_report("workbench", cfg, Verdict.combine(verdicts), **payload)


def _construct(kind, a, b, cfg):
    if kind == "product":
        return W.product(a, b), {}
    if kind == "exponential":
        e = W.exponential(a, b, cfg.caps)
        return e, {"checks": W.check_axioms(e, (W.QUASI_REFLEXIVE, W.TRANSITIVE), cfg.caps)}
    if kind == "terminal":
        return W.terminal(), {}
    if kind in ("observational-left", "observational-right"):
        phi = W.observational(a, kind.split("-")[1])
        return W.relation_space(a, phi, kind), {"lst_identities": W.lst_identity_report(a)}
    if kind == "weak-coproduct":
        targets = [W.random_space(quantale_by_name("bool"), 2, np.random.default_rng(cfg.seed))]
        rep = W.weak_coproduct_report(a, b, targets, cfg.caps)
        return W.weak_coproduct(a, b).space, {k: v for k, v in rep.items()}
    if kind == "closure-suite":
        rep = W.closure_theorem_suite(a, b, cfg.caps)
        verdict = Verdict.exact(rep.get("holds", False), None) if rep["applicable"] else \
            Verdict.refute({"hypotheses": rep["hypotheses"]}, "hypotheses do not hold")
        return None, {"closure": rep, "closure_verdict": verdict}
    if kind == "laws":
        homs = W.enumerate_morphisms(a, b, cfg.caps)
        ends = W.enumerate_morphisms(b, b, cfg.caps)[:8]
        laws = W.category_laws(homs[:8] + ends)
        return None, {"laws": laws}
    raise UsageError(f"unknown construction {kind!r}")


def _workbench_mine(args, cfg):
    want, avoid = [], []
    for item in args.mine.split(";"):
        key, _, vals = item.partition("=")
        names = [v.strip() for v in vals.split(",") if v.strip()]
        if key.strip() == "want":
            want = names
        elif key.strip() == "avoid":
            avoid = names
        else:
            raise UsageError("--mine takes 'want=A,B;avoid=C'")
    q = quantale_by_name(args.quantale)
    rng = np.random.default_rng(cfg.seed)
    found = W.mine(q, args.size, want, avoid, rng, trials=args.trials, kind=args.kind)
    if found is None:
        return H.make_report("workbench", cfg, Verdict.refute({"want": want, "avoid": avoid}, "no space found"),
                             mined=None)
    if args.save:
        found.save(args.save)
    return H.make_report("workbench", cfg, Verdict.proof(), mined=found.to_json(),
                         axioms=W.check_axioms(found, want + avoid, cfg.caps))


def cmd_prove(args, cfg):
    prims = cfg.table()
    try:
        d = qet.from_json(args.file, prims)
    except (OSError, ValueError) as err:
        raise UsageError(f"cannot read derivation {args.file}: {err}") from None
    rep = qet.check_derivation(d, cfg.sampler(), prims, samples=args.checks, tol=cfg.exact_tol)
    return H.make_report("prove", cfg, rep.verdict, conclusion=str(d.conclusion), nodes=rep.nodes)


def cmd_demo_no_greatest(args, cfg):
    rep = M.replay_no_greatest()
    ok = rep["JO"] == 0 and rep["JZ"] == 1 and rep["sigma_J_O_D"] == 0 and rep["violation_flagged"]
    return H.make_report("demo-no-greatest", cfg, Verdict.exact(ok, rep["membership"]), replay=rep)


def cmd_demo_bound_sweep(args, cfg):
    eps = [parse_real(v) for v in split_top(args.eps)]
    rep = H.bound_sweep(eps, grid=args.grid_points, prims=cfg.table())
    return H.make_report("demo-bound-sweep", cfg, Verdict.exact(rep["holds"], rep["rows"]), **rep)


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run configuration (QQM_* environment variables give defaults)")
    g.add_argument("--seed", type=int)
    g.add_argument("--tol", type=float, dest="exact_tol", help="tolerance of exact comparisons")
    g.add_argument("--grid-tol", type=float)
    g.add_argument("--grid", type=int, help="grid points per disk")
    g.add_argument("--caps", help="enumeration caps, e.g. carrier=4,quantale=5")
    g.add_argument("--prims", help="default, empty, or a primitive manifest file")
    g.add_argument("--corpus")
    g.add_argument("--carrier", choices=["full", "definable"])
    g.add_argument("--samples", type=int)
    g.add_argument("--workers", type=int)
    g.add_argument("--out", help="also write the report to this file")

    p = argparse.ArgumentParser(prog="qqm", description="Quasi-quasi-metric semantics toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(fn=fn)
        return sp

    sp = add("typecheck", cmd_typecheck, "type of a term")
    sp.add_argument("--term", required=True, help="source text or corpus:NAME")
    sp.add_argument("--context", help="x:Real,f:Real -> Real")

    sp = add("eval", cmd_eval, "value of a term at a point")
    sp.add_argument("--term", required=True)
    sp.add_argument("--context")
    sp.add_argument("--point", help="x=0.5,f=sin")

    sp = add("derive", cmd_derive, "error bound of a term at a point and radius")
    sp.add_argument("--term", required=True)
    sp.add_argument("--context")
    sp.add_argument("--point")
    sp.add_argument("--radius", help="x=0.1,f=self(sin); names may also be positional")
    sp.add_argument("--mode", choices=["analytic", "grid"], default="analytic")

    sp = add("distance", cmd_distance, "best radius between two real functions at (x, a)")
    sp.add_argument("--left", required=True)
    sp.add_argument("--right", required=True)
    sp.add_argument("--point", required=True)
    sp.add_argument("--radius", required=True)
    sp.add_argument("--exact", action="store_true", help="use function ranges instead of the grid")

    sp = add("member", cmd_member, "is (x, a, y) in the metric of a type")
    sp.add_argument("--type", required=True)
    sp.add_argument("--left", required=True)
    sp.add_argument("--radius", required=True)
    sp.add_argument("--right", required=True)

    sp = add("selfdist", cmd_selfdist, "self-distance of a value")
    sp.add_argument("--type", required=True)
    sp.add_argument("--value", required=True)
    sp.add_argument("--at", help="probes x:a,x:a for function types")

    sp = add("bound2", cmd_bound2, "two-term bound for closed t, s : A -> Real")
    sp.add_argument("--t", required=True)
    sp.add_argument("--s", required=True)
    sp.add_argument("--point", required=True)
    sp.add_argument("--radius", required=True)

    sp = add("check-fundamental", cmd_check_fundamental, "sampled fundamental-lemma suite")
    sp.add_argument("--term", action="append", help="restrict to corpus terms (repeatable)")
    sp.add_argument("--sample-index", type=int, help="replay one sample of one term")

    sp = add("workbench", cmd_workbench, "finite spaces: axioms, constructions, mining, theorem suite")
    sp.add_argument("--space", help="space JSON file")
    sp.add_argument("--axioms", help=f"comma-separated from {', '.join(W.AXIOMS)}")
    sp.add_argument("--construct", choices=["product", "exponential", "terminal", "observational-left",
                                            "observational-right", "weak-coproduct", "closure-suite", "laws"])
    sp.add_argument("--with", dest="with_space", help="second space for binary constructions")
    sp.add_argument("--mine", help="want=ST4;avoid=ST1")
    sp.add_argument("--quantale", default="lawvere<=3")
    sp.add_argument("--size", type=int, default=3)
    sp.add_argument("--trials", type=int, default=2000)
    sp.add_argument("--kind", default="qqm")
    sp.add_argument("--suite", type=int, help="run the random theorem suite on this many pairs")
    sp.add_argument("--save", help="write the constructed or mined space here")

    sp = add("prove", cmd_prove, "check a derivation file")
    sp.add_argument("file")
    sp.add_argument("--checks", type=int, default=16, help="samples per sampled side condition")

    add("demo-no-greatest", cmd_demo_no_greatest, "replay the no-greatest-relation argument")

    sp = add("demo-bound-sweep", cmd_demo_bound_sweep, "difference-quotient bounds as eps shrinks")
    sp.add_argument("--eps", default="0.1,0.01,0.001")
    sp.add_argument("--grid-points", type=int, default=4097)
    return p


_CONFIG_FLAGS = ("seed", "exact_tol", "grid_tol", "grid", "prims", "corpus", "carrier", "samples", "workers", "out")


def config_from_args(args) -> H.RunConfig:
    cfg = H.config_from_env()
    changes = {k: getattr(args, k) for k in _CONFIG_FLAGS if getattr(args, k, None) is not None}
    if args.caps:
        changes["caps"] = H.parse_caps(args.caps, cfg.caps)
    return replace(cfg, **changes)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        report = args.fn(args, cfg)
    except (UsageError, S.LambdaSyntaxError, S.LambdaTypeError, KeyError, ValueError) as err:
        print(f"qqm {args.command}: {err}", file=sys.stderr)
        return 2
    sys.stdout.write(H.write_report(report, cfg.out))
    return 1 if report["verdict"]["status"] == "refuted" else 0


if __name__ == "__main__":
    sys.exit(main())
