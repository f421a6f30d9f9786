"""Run configuration, the sampled suites, and JSON reports.

Every report echoes the full configuration and carries a schema version.
Reports contain no timestamps or timings, so the same configuration and seed
produce byte-identical output.
"""

from __future__ import annotations

import json
import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from qqm import corpus as C
from qqm import qet
from qqm import workbench as W
from qqm.finite import quantale_by_name
from qqm.metrics import definable_triple, example_bound_replay
from qqm.prims import PrimitiveTable, select_table
from qqm.sampling import DEFINABLE, FULL, SamplerConfig, draw_triple
from qqm.semantics import derive, evaluate, is_ground
from qqm.verdict import Verdict, jsonable

SCHEMA_VERSION = 1

ENV_PREFIX = "QQM_"


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    exact_tol: float = 1e-9
    grid_tol: float = 1e-3
    grid: int = 2048
    caps: W.Caps = field(default_factory=W.Caps)
    prims: str = "default"
    corpus: str = "default"
    carrier: str = FULL
    samples: int = 1000
    workers: int = 1
    out: str | None = None

    def __post_init__(self):
        if not (self.exact_tol > 0 and self.grid_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.samples < 1 or self.workers < 1 or self.grid < 2:
            raise ValueError("samples, workers and grid must be positive")

    def table(self) -> PrimitiveTable:
        return select_table(self.prims)

    def sampler(self) -> SamplerConfig:
        return SamplerConfig(seed=self.seed, carrier_mode=self.carrier, corpus_id=self.corpus)

    def to_json(self) -> dict:
        out = asdict(self)
        out["caps"] = self.caps.to_json()
        return out


def parse_caps(text: str, base: W.Caps | None = None) -> W.Caps:
    """``"carrier=4,quantale=5"`` style overrides of the enumeration caps."""
    base = base or W.Caps()
    values = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        key, _, val = item.partition("=")
        if key not in base.__dict__:
            raise ValueError(f"unknown cap {key!r}; known: {', '.join(base.__dict__)}")
        values[key] = int(val)
    return replace(base, **values)


_CASTS = {"seed": int, "exact_tol": float, "grid_tol": float, "grid": int, "prims": str, "corpus": str,
          "carrier": str, "samples": int, "workers": int, "out": str}


def config_from_env(base: RunConfig | None = None, environ=None) -> RunConfig:
    """Apply ``QQM_SEED``, ``QQM_EXACT_TOL``, ``QQM_CAPS`` and the other overrides."""
    environ = os.environ if environ is None else environ
    cfg = base or RunConfig()
    changes = {}
    for name, cast in _CASTS.items():
        key = ENV_PREFIX + name.upper()
        if key in environ:
            changes[name] = cast(environ[key])
    if ENV_PREFIX + "CAPS" in environ:
        changes["caps"] = parse_caps(environ[ENV_PREFIX + "CAPS"], cfg.caps)
    return replace(cfg, **changes)


def make_report(command: str, cfg: RunConfig, verdict: Verdict, **payload) -> dict:
    return {"schema": SCHEMA_VERSION, "command": command, "config": cfg.to_json(), "verdict": verdict.to_json(),
            **jsonable(payload)}


def dumps(report: dict) -> str:
    return json.dumps(jsonable(report), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_report(report: dict, out: str | None) -> str:
    text = dumps(report)
    if out:
        Path(out).write_text(text)
    return text


# ---------------------------------------------------------------- fundamental lemma


def _draw_context(entry: C.CorpusEntry, rng, scfg: SamplerConfig):
    env, xi, eps = {}, {}, {}
    for name, ty in entry.ctx():
        if scfg.carrier_mode == DEFINABLE and not is_ground(ty):
            x, a, y = definable_triple(ty, rng, scfg)
        else:
            x, a, y = draw_triple(ty, rng, scfg)
        env[name], xi[name], eps[name] = x, a, y
    return env, xi, eps


def fundamental_samples(entry: C.CorpusEntry, cfg: RunConfig):
    """Yield ``(index, env, xi, eps)`` for one corpus term; the stream depends only on seed and name."""
    scfg = cfg.sampler()
    rng = scfg.rng(zlib.crc32(entry.name.encode()))
    for i in range(cfg.samples):
        env, xi, eps = _draw_context(entry, rng, scfg)
        yield i, env, xi, eps


def _sample_record(entry, cfg, i, env, xi, eps, gap, bound) -> dict:
    return {"term": entry.name, "sample_index": i, "seed": cfg.seed, "gamma": {k: repr(v) for k, v in env.items()},
            "xi": {k: repr(v) for k, v in xi.items()}, "epsilon": {k: repr(v) for k, v in eps.items()},
            "gap": gap, "bound": bound,
            "replay": f"qqm check-fundamental --corpus {cfg.corpus} --term {entry.name} --seed {cfg.seed} "
                      f"--samples {i + 1} --sample-index {i}"}


def fundamental_term(entry: C.CorpusEntry, cfg: RunConfig) -> dict:
    """Check ``|[t]γ - [t]ε| <= [t]•(γ, ξ) + tol`` on sampled related contexts of one term."""
    prims = cfg.table()
    t = entry.term(prims)
    violations = []
    min_slack, max_slack, infinite = math.inf, -math.inf, 0
    for i, env, xi, eps in fundamental_samples(entry, cfg):
        gap = abs(evaluate(t, env, prims) - evaluate(t, eps, prims))
        bound = float(derive(t, env, xi, prims))
        if math.isinf(bound):
            infinite += 1
            continue
        slack = bound - gap
        min_slack = min(min_slack, slack)
        max_slack = max(max_slack, slack)
        if gap > bound + cfg.exact_tol:
            violations.append(_sample_record(entry, cfg, i, env, xi, eps, gap, bound))
    return {"term": entry.name, "source": entry.source, "samples": cfg.samples, "violations": len(violations),
            "witnesses": violations[:5], "min_slack": min_slack if min_slack < math.inf else None,
            "max_slack": max_slack if max_slack > -math.inf else None, "infinite_bounds": infinite}


def _fundamental_worker(args) -> dict:
    name, cfg = args
    return fundamental_term(C.entry(name, cfg.corpus), cfg)


def fundamental_suite(cfg: RunConfig, terms: list[str] | None = None) -> dict:
    entries = C.ground_entries(cfg.corpus)
    if terms:
        entries = [C.entry(n, cfg.corpus) for n in terms]
    jobs = [(e.name, cfg) for e in entries]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(_fundamental_worker, jobs))
    else:
        rows = [_fundamental_worker(j) for j in jobs]
    rows.sort(key=lambda r: r["term"])
    total = sum(r["violations"] for r in rows)
    if total:
        first = next(r for r in rows if r["violations"])
        verdict = Verdict.refute(first["witnesses"][0])
    else:
        verdict = Verdict.sampled_ok(sum(r["samples"] for r in rows))
    return make_report("check-fundamental", cfg, verdict, terms=rows, violations=total,
                       sampler=cfg.sampler().to_json())


def replay_fundamental(cfg: RunConfig, term: str, index: int) -> dict:
    """Regenerate sample ``index`` of ``term`` and recompute both sides."""
    entry = C.entry(term, cfg.corpus)
    prims = cfg.table()
    t = entry.term(prims)
    for i, env, xi, eps in fundamental_samples(entry, replace(cfg, samples=index + 1)):
        if i == index:
            gap = abs(evaluate(t, env, prims) - evaluate(t, eps, prims))
            bound = float(derive(t, env, xi, prims))
            return {**_sample_record(entry, cfg, i, env, xi, eps, gap, bound),
                    "holds": gap <= bound + cfg.exact_tol}
    raise IndexError(index)


# ---------------------------------------------------------------- difference-quotient sweep


def bound_sweep(epsilons=(0.1, 0.01, 0.001), grid: int = 4097, prims: PrimitiveTable | None = None) -> dict:
    """Bounds for the difference quotient with ``a = eps**2`` as ``eps`` shrinks."""
    rows = [example_bound_replay(e, e * e, grid, prims) for e in epsilons]
    bounds = [r["bound"] for r in rows]
    decreasing = all(b2 < b1 for b1, b2 in zip(bounds, bounds[1:]))
    sound = all(r["sound"] for r in rows)
    return {"rows": rows, "sound": sound, "decreasing": decreasing, "final_bound": bounds[-1],
            "holds": sound and decreasing and bounds[-1] < 0.01}


# ---------------------------------------------------------------- workbench theorem shadows

SUITE_QUANTALES = ("bool", "godel3", "luk3", "lawvere<=2", "boolxbool", "godel4", "lawvere<=3")
CHAIN = ((W.ST3, W.ST2), (W.ST2, W.ST1), (W.ST1, W.ST4), (W.ST4, W.LST), (W.LST, W.ST4), (W.LST, W.TRANSITIVE))


def _chain_check(phi: np.ndarray) -> dict:
    v = {ax: bool(W.check_lawvere_relation(phi, ax))
         for ax in (W.RIGHT_QUASI_REFLEXIVE, W.TRANSITIVE, W.ST1, W.ST2, W.ST3, W.ST4, W.LST)}
    broken = [f"{a}=>{b}" for a, b in CHAIN if v[a] and not v[b]]
    if v[W.RIGHT_QUASI_REFLEXIVE] and len({v[W.ST1], v[W.ST2], v[W.ST4], v[W.LST]}) > 1:
        broken.append("both-sided equivalence")
    return {"verdicts": v, "broken": broken}


def workbench_trial(i: int, cfg: RunConfig) -> dict:
    """One random pair of finite spaces, checked against all five theorem shadows."""
    rng = np.random.default_rng([cfg.seed, 4, i])
    qa = quantale_by_name(SUITE_QUANTALES[i % len(SUITE_QUANTALES)])
    qb = quantale_by_name(SUITE_QUANTALES[(3 * i + 1) % len(SUITE_QUANTALES)])
    out: dict = {"trial": i, "quantales": [qa.name, qb.name]}

    # (a) exponentials of quasi-quasi-metric spaces
    A = W.random_space(qa, int(rng.integers(1, 3)), rng)
    B = W.random_space(qb, int(rng.integers(1, 4)), rng)
    try:
        E = W.exponential(A, B, cfg.caps)
        out["exponential"] = Verdict.combine([W.check_axiom(E, W.QUASI_REFLEXIVE), W.check_axiom(E, W.TRANSITIVE)])
    except W.SizeCapExceeded:
        out["exponential"] = None

    # (b) closure of the three strong properties
    SA = W.random_strong_space(qa, int(rng.integers(1, 3)), rng)
    SB = W.random_strong_space(qb, int(rng.integers(1, 4)), rng)
    try:
        rep = W.closure_theorem_suite(SA, SB, cfg.caps)
        out["closure"] = None if not rep["applicable"] else Verdict.exact(
            rep["holds"], {k: v.to_json() for k, v in rep["conclusions"].items() if not v})
    except W.SizeCapExceeded:
        out["closure"] = None

    # (c) implication chain on exact [0, inf] relations
    phi = W.random_lawvere_relation(int(rng.integers(2, 6)), rng, both_sides=bool(i % 2),
                                    p_inf=0.0 if i % 4 == 0 else 0.2)
    chain = _chain_check(phi)
    out["chain"] = Verdict.exact(not chain["broken"], {"relation": phi.tolist(), "broken": chain["broken"]})

    # (d) relation / predicate round trips
    raw = rng.integers(0, qa.size, size=(A.n, A.n))
    round_trip = np.array_equal(W.hat(qa, W.predicate_of(qa, raw)), raw) and \
        np.array_equal(W.predicate_of(A.quantale, W.hat(A.quantale, A.pred)), A.pred)
    out["round_trip"] = Verdict.exact(round_trip, {"relation": raw.tolist()})

    # (e) weak coproduct retraction after section, into a 2-point boolean target
    small = [quantale_by_name(n) for n in ("bool", "godel3", "luk3")]
    CA = W.random_space(small[i % 3], 1 + i % 2, rng)
    CB = W.random_space(small[(i + 1) % 3], 1 + (i // 2) % 2, rng)
    target = W.random_space(quantale_by_name("bool"), 2, rng)
    wc = W.weak_coproduct_report(CA, CB, [target], cfg.caps)
    out["coproduct"] = Verdict.combine([wc["section_is_morphism"], wc["retraction_after_section"],
                                        wc["naturality"]])
    out["coproduct_pairs"] = wc["pairs"]
    return out


SHADOWS = ("exponential", "closure", "chain", "round_trip", "coproduct")


def workbench_suite(cfg: RunConfig, pairs: int = 100) -> dict:
    trials = [workbench_trial(i, cfg) for i in range(pairs)]
    summary = {}
    for key in SHADOWS:
        checked = [t[key] for t in trials if t[key] is not None]
        failed = [t["trial"] for t in trials if t[key] is not None and t[key].refuted]
        summary[key] = {"checked": len(checked), "failed": len(failed), "first_failure": failed[0] if failed else None,
                        "verdict": Verdict.combine(checked).to_json()}
    verdict = Verdict.combine(t[k] for t in trials for k in SHADOWS if t[k] is not None)
    return make_report("workbench-suite", cfg, verdict, pairs=pairs, summary=summary,
                       coproduct_pairs=sum(t["coproduct_pairs"] for t in trials),
                       failures=[t for t in trials if any(t[k] is not None and t[k].refuted for k in SHADOWS)])


# ---------------------------------------------------------------- derivation checker suite


def qet_suite(cfg: RunConfig, derivations: int = 1000, depth: int = 3) -> dict:
    """Reflexivity derivations for the corpus, soundness of random accepted trees, and the broken example."""
    prims = cfg.table()
    scfg = cfg.sampler()
    refl = {}
    for e in C.get_corpus(cfg.corpus):
        d = qet.reflexivity_derivation(e.ctx(), e.term(prims), prims)
        refl[e.name] = qet.check_derivation(d, scfg, prims, tol=cfg.exact_tol).verdict
    rng = np.random.default_rng([cfg.seed, 6])
    accepted = rejected = 0
    violations = []
    for k in range(derivations):
        d = qet.random_ground_derivation(rng, depth, prims=prims)
        if qet.check_derivation(d, scfg, prims, tol=cfg.exact_tol).verdict.refuted:
            rejected += 1
            continue
        accepted += 1
        s = qet.ground_soundness(d, prims, cfg.exact_tol)
        if not s["holds"]:
            violations.append({"index": k, "judgment": str(d.conclusion), **s})
    broken = qet.check_derivation(qet.broken_weakening(), scfg, prims).verdict
    verdict = Verdict.combine(list(refl.values()) + [Verdict.exact(not violations, violations[:3]),
                                                     Verdict.exact(broken.refuted, "broken weakening accepted")])
    return make_report("qet-suite", cfg, verdict, reflexivity=refl, derivations=derivations, accepted=accepted,
                       rejected=rejected, violations=violations, broken_weakening=broken)
