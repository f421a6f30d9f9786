"""Named, typed terms used by the suites, the CLI and the tests.

Each entry records its typing context and expected type; ``check_corpus``
confirms every entry typechecks.  Ground entries (type Real) feed the
fundamental-lemma suite; closed entries of any type feed the definable
carrier and the derivation checker.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from qqm import syntax as S
from qqm.prims import PrimitiveTable, default_table


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    source: str
    context: tuple[tuple[str, str], ...] = ()
    expected: str = "Real"
    family: str = "arith"

    def term(self, prims: PrimitiveTable | None = None) -> S.Term:
        prims = prims or default_table()
        return S.parse(self.source, prims.arities())

    def ctx(self) -> list[tuple[str, S.Type]]:
        return [(x, S.parse_type(t)) for x, t in self.context]

    def type(self) -> S.Type:
        return S.parse_type(self.expected)

    @property
    def closed(self) -> bool:
        return not self.context


R = (("x", "Real"),)
RY = (("x", "Real"), ("y", "Real"))
P = (("p", "Real * Real"),)
FX = (("f", "Real -> Real"), ("x", "Real"))
FXY = (("f", "Real -> Real"), ("x", "Real"), ("y", "Real"))


DEFAULT = (
    # ground terms over real variables
    CorpusEntry("lit", "2.5"),
    CorpusEntry("var", "x", R),
    CorpusEntry("neg", "neg x", R),
    CorpusEntry("abs", "abs x", R),
    CorpusEntry("sin", "sin x", R),
    CorpusEntry("cos-sin", "cos (sin x)", R),
    CorpusEntry("add2", "add2(x, y)", RY),
    CorpusEntry("mul", "mul(x, y)", RY),
    CorpusEntry("square", "mul(x, x)", R),
    CorpusEntry("poly", "add2(mul(x, x), neg (add[1.0](y)))", RY),
    CorpusEntry("const-prim", "const[3.0](x)", R),
    CorpusEntry("shift-sin", "diff[0.01](sin (add[0.01](x)), sin x)", R),
    CorpusEntry("id-prim", "id(abs (neg x))", R),
    # pairs and projections
    CorpusEntry("fst-pair", "fst(<x, y>)", RY, family="pairs"),
    CorpusEntry("snd-var", "snd(p)", P, family="pairs"),
    CorpusEntry("mul-proj", "mul(fst(p), snd(p))", P, family="pairs"),
    CorpusEntry("proj-lam", "fst((\\z:Real. <sin z, z>) x)", R, family="pairs"),
    # binders and application
    CorpusEntry("beta", "(\\z:Real. mul(z, z)) (sin x)", R, family="lambda"),
    CorpusEntry("let", "let u be sin x in add2(u, u)", R, family="lambda"),
    CorpusEntry("curried", "(\\a:Real. \\b:Real. add2(a, neg b)) x y", RY, family="lambda"),
    CorpusEntry("ignore-arg", "(\\z:Real. 1.0) (sin x)", R, family="lambda"),
    CorpusEntry("local-twice", "(\\g:Real -> Real. g (g x)) (\\z:Real. sin z)", R, family="lambda"),
    # function-typed variables
    CorpusEntry("apply", "f x", FX, family="higher"),
    CorpusEntry("twice", "f (f x)", FX, family="higher"),
    CorpusEntry("ex412", "let y be add[0.1](x) in diff[0.1](f y, f x)", FX, family="higher"),
    CorpusEntry("compose", "(\\g:Real -> Real. \\h:Real -> Real. g (h x)) f (\\z:Real. mul(z, z))", FX,
                family="higher"),
    CorpusEntry("f-sum", "add2(f x, f y)", FXY, family="higher"),
    CorpusEntry("f-of-pair", "f (add2(fst(p), snd(p)))", (("f", "Real -> Real"),) + P, family="higher"),
    CorpusEntry("apply-const", "(\\F:(Real -> Real) -> Real. F (\\x:Real. 1.0)) (\\k:Real -> Real. k 0.0)",
                family="higher"),
    # closed terms of higher type
    CorpusEntry("I", "\\x:Real. x", expected="Real -> Real", family="combinator"),
    CorpusEntry("K", "\\x:Real. \\y:Real. x", expected="Real -> Real -> Real", family="combinator"),
    CorpusEntry("S", "\\f:Real -> Real -> Real. \\g:Real -> Real. \\x:Real. f x (g x)",
                expected="(Real -> Real -> Real) -> (Real -> Real) -> Real -> Real", family="combinator"),
    CorpusEntry("B", "\\f:Real -> Real. \\g:Real -> Real. \\x:Real. f (g x)",
                expected="(Real -> Real) -> (Real -> Real) -> Real -> Real", family="combinator"),
    CorpusEntry("swap", "\\p:Real * Real. <snd(p), fst(p)>", expected="Real * Real -> Real * Real",
                family="combinator"),
    CorpusEntry("sin-fun", "\\x:Real. sin x", expected="Real -> Real", family="combinator"),
    CorpusEntry("square-fun", "\\x:Real. mul(x, x)", expected="Real -> Real", family="combinator"),
    CorpusEntry("const-fun", "\\x:Real. 1.0", expected="Real -> Real", family="combinator"),
    CorpusEntry("diff-quotient", "\\f:Real -> Real. \\x:Real. let y be add[0.1](x) in diff[0.1](f y, f x)",
                expected="(Real -> Real) -> Real -> Real", family="higher"),
    CorpusEntry("at-one", "\\f:(Real -> Real) -> Real. f (\\x:Real. 1.0)",
                expected="((Real -> Real) -> Real) -> Real", family="higher"),
    CorpusEntry("eval-zero", "\\k:Real -> Real. k 0.0", expected="(Real -> Real) -> Real", family="higher"),
    CorpusEntry("zero-fun", "\\k:Real -> Real. 0.0", expected="(Real -> Real) -> Real", family="higher"),
)

CORPORA = {"default": DEFAULT}


def get_corpus(corpus_id: str = "default") -> tuple[CorpusEntry, ...]:
    try:
        return CORPORA[corpus_id]
    except KeyError:
        raise KeyError(f"unknown corpus {corpus_id!r}; known: {', '.join(sorted(CORPORA))}") from None


def entry(name: str, corpus_id: str = "default") -> CorpusEntry:
    for e in get_corpus(corpus_id):
        if e.name == name:
            return e
    raise KeyError(f"no corpus entry named {name!r}")


def ground_entries(corpus_id: str = "default") -> list[CorpusEntry]:
    return [e for e in get_corpus(corpus_id) if e.expected == "Real"]


def check_corpus(corpus_id: str = "default", prims: PrimitiveTable | None = None) -> dict:
    """Entry name -> None when it typechecks at its expected type, else the error text."""
    prims = prims or default_table()
    out = {}
    for e in get_corpus(corpus_id):
        try:
            ty = S.typecheck(e.ctx(), e.term(prims), prims)
            out[e.name] = None if ty == e.type() else f"expected {e.expected}, got {ty}"
        except (S.LambdaSyntaxError, S.LambdaTypeError) as err:
            out[e.name] = str(err)
    return out


@lru_cache(maxsize=None)
def _closed_by_type(corpus_id: str) -> dict:
    prims = default_table()
    out: dict = {}
    for e in get_corpus(corpus_id):
        if e.closed:
            out.setdefault(e.type(), []).append(e.term(prims))
    return out


def closed_terms_of_type(ty: S.Type, corpus_id: str = "default") -> list[S.Term]:
    return list(_closed_by_type(corpus_id).get(ty, []))
