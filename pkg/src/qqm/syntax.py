"""Types, terms, concrete syntax and type checking for the real-valued lambda calculus.

Concrete grammar::

    type  ::= Real | type * type | type -> type | ( type )       (* binds tighter)
    term  ::= \\x:type. term | λx:type. term
            | let x (: type)? be term in term
            | app
    app   ::= atom atom*
    atom  ::= ident | number | ( term ) | < term , term >
            | fst ( term ) | snd ( term )
            | prim [ param ]? ( term , ... )    explicit argument list
            | prim [ param ]? atom ... atom     exactly arity-many atoms

``let y be t in s`` is sugar for ``(\\y:A. s) t``; the annotation may be left
out and is then inferred from ``t`` by the type checker.  An identifier is a
primitive only if it names an entry of the primitive table and is not bound
by an enclosing binder.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping


class LambdaSyntaxError(ValueError):
    def __init__(self, msg: str, pos: int | None = None, source: str = ""):
        if pos is not None:
            line = source.count("\n", 0, pos) + 1
            col = pos - (source.rfind("\n", 0, pos) + 1) + 1
            msg = f"{msg} at line {line}, column {col}"
        super().__init__(msg)
        self.pos = pos


class LambdaTypeError(TypeError):
    pass


@dataclass(frozen=True)
class Span:
    start: int
    end: int


# ---------------------------------------------------------------- types


class Type:
    pass


@dataclass(frozen=True)
class RealT(Type):
    def __str__(self):
        return "Real"


@dataclass(frozen=True)
class Prod(Type):
    left: Type
    right: Type

    def __str__(self):
        def wrap(t):
            return f"({t})" if isinstance(t, Arrow) else str(t)

        r = f"({self.right})" if isinstance(self.right, (Arrow, Prod)) else str(self.right)
        return f"{wrap(self.left)} * {r}"


@dataclass(frozen=True)
class Arrow(Type):
    dom: Type
    cod: Type

    def __str__(self):
        d = f"({self.dom})" if isinstance(self.dom, Arrow) else str(self.dom)
        return f"{d} -> {self.cod}"


REAL = RealT()


# ---------------------------------------------------------------- terms


class Term:
    pass


def _span():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Var(Term):
    name: str
    span: Span | None = _span()


@dataclass(frozen=True)
class Const(Term):
    value: float
    span: Span | None = _span()


@dataclass(frozen=True)
class PrimApp(Term):
    prim: str
    args: tuple
    param: float | None = None
    span: Span | None = _span()

    @property
    def ref(self) -> str:
        return self.prim if self.param is None else f"{self.prim}[{self.param!r}]"


@dataclass(frozen=True)
class App(Term):
    fn: Term
    arg: Term
    span: Span | None = _span()


@dataclass(frozen=True)
class Lam(Term):
    binder: str
    annot: Type | None
    body: Term
    span: Span | None = _span()


@dataclass(frozen=True)
class Pair(Term):
    left: Term
    right: Term
    span: Span | None = _span()


@dataclass(frozen=True)
class Fst(Term):
    term: Term
    span: Span | None = _span()


@dataclass(frozen=True)
class Snd(Term):
    term: Term
    span: Span | None = _span()


def let(name: str, bound: Term, body: Term, annot: Type | None = None) -> Term:
    return App(Lam(name, annot, body), bound)


# ---------------------------------------------------------------- lexer

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<num>-?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
  | (?P<arrow>->|⇒|→)
  | (?P<lam>\\|λ)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>[()<>,.:\[\]*×⟨⟩])
    """,
    re.VERBOSE,
)

KEYWORDS = {"let", "be", "in", "fst", "snd", "Real"}


def tokenize(src: str) -> list[tuple[str, str, int]]:
    out = []
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if not m:
            raise LambdaSyntaxError(f"unexpected character {src[pos]!r}", pos, src)
        kind = m.lastgroup
        text = m.group()
        if kind != "ws":
            if kind == "sym":
                text = {"×": "*", "⟨": "<", "⟩": ">"}.get(text, text)
            if kind == "arrow":
                text = "->"
            if kind == "ident" and text in KEYWORDS:
                kind = "kw"
            out.append((kind, text, pos))
        pos = m.end()
    out.append(("eof", "", len(src)))
    return out


# ---------------------------------------------------------------- parser


class _Parser:
    def __init__(self, src: str, prims: Mapping[str, int]):
        self.src = src
        self.toks = tokenize(src)
        self.i = 0
        self.prims = prims

    def peek(self, k: int = 0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def error(self, msg: str, tok=None):
        tok = tok or self.peek()
        raise LambdaSyntaxError(msg, tok[2], self.src)

    def expect(self, text: str):
        tok = self.next()
        if tok[1] != text or tok[0] in ("ident", "num"):
            self.error(f"expected {text!r}, found {tok[1] or 'end of input'!r}", tok)
        return tok

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok[1] == text and tok[0] in ("sym", "kw", "arrow", "lam")

    # types
    def type_(self) -> Type:
        left = self.prod_type()
        if self.at("->"):
            self.next()
            return Arrow(left, self.type_())
        return left

    def prod_type(self) -> Type:
        t = self.atom_type()
        while self.at("*"):
            self.next()
            t = Prod(t, self.atom_type())
        return t

    def atom_type(self) -> Type:
        if self.at("Real"):
            self.next()
            return REAL
        if self.at("("):
            self.next()
            t = self.type_()
            self.expect(")")
            return t
        self.error("expected a type")

    # terms
    def term(self, bound: frozenset) -> Term:
        tok = self.peek()
        if tok[0] == "lam":
            self.next()
            name = self.ident()
            self.expect(":")
            annot = self.type_()
            self.expect(".")
            body = self.term(bound | {name})
            return Lam(name, annot, body, span=Span(tok[2], self.peek()[2]))
        if self.at("let"):
            self.next()
            name = self.ident()
            annot = None
            if self.at(":"):
                self.next()
                annot = self.type_()
            self.expect("be")
            bound_term = self.term(bound)
            self.expect("in")
            body = self.term(bound | {name})
            return App(Lam(name, annot, body), bound_term, span=Span(tok[2], self.peek()[2]))
        return self.app(bound)

    def ident(self) -> str:
        tok = self.next()
        if tok[0] != "ident":
            self.error(f"expected an identifier, found {tok[1] or 'end of input'!r}", tok)
        return tok[1]

    def starts_atom(self) -> bool:
        kind, text, _ = self.peek()
        return kind in ("ident", "num") or (kind in ("sym", "kw") and text in ("(", "<", "fst", "snd"))

    def app(self, bound) -> Term:
        start = self.peek()[2]
        t = self.atom(bound)
        while self.starts_atom():
            t = App(t, self.atom(bound), span=Span(start, self.peek()[2]))
        return t

    def atom(self, bound) -> Term:
        tok = self.peek()
        kind, text, pos = tok
        if kind == "num":
            self.next()
            return Const(float(text), span=Span(pos, pos + len(text)))
        if kind == "ident":
            self.next()
            if text in self.prims and text not in bound:
                return self.prim_rest(text, pos, bound)
            return Var(text, span=Span(pos, pos + len(text)))
        if self.at("("):
            self.next()
            t = self.term(bound)
            self.expect(")")
            return t
        if self.at("<"):
            self.next()
            left = self.term(bound)
            self.expect(",")
            right = self.term(bound)
            self.expect(">")
            return Pair(left, right, span=Span(pos, self.peek()[2]))
        if self.at("fst") or self.at("snd"):
            self.next()
            if not self.at("("):
                self.error(f"{text} needs a parenthesized argument")
            self.next()
            inner = self.term(bound)
            self.expect(")")
            cls = Fst if text == "fst" else Snd
            return cls(inner, span=Span(pos, self.peek()[2]))
        self.error(f"unexpected {text or 'end of input'!r}")

    def prim_rest(self, name: str, pos: int, bound) -> Term:
        arity = self.prims[name]
        param = None
        if self.at("["):
            self.next()
            tok = self.next()
            if tok[0] != "num":
                self.error("expected a numeric primitive parameter", tok)
            param = float(tok[1])
            self.expect("]")
        if self.at("("):
            self.next()
            args = []
            if not self.at(")"):
                args.append(self.term(bound))
                while self.at(","):
                    self.next()
                    args.append(self.term(bound))
            self.expect(")")
        else:
            args = [self.atom(bound) for _ in range(arity)]
        return PrimApp(name, tuple(args), param, span=Span(pos, self.peek()[2]))


def parse(source: str, prims: Mapping[str, int] | None = None) -> Term:
    """Parse a term; ``prims`` maps primitive names to arities."""
    if prims is None:
        from qqm.prims import default_table

        prims = default_table().arities()
    p = _Parser(source, prims)
    t = p.term(frozenset())
    if p.peek()[0] != "eof":
        p.error(f"unexpected trailing input {p.peek()[1]!r}")
    return t


def parse_type(source: str) -> Type:
    p = _Parser(source, {})
    t = p.type_()
    if p.peek()[0] != "eof":
        p.error(f"unexpected trailing input {p.peek()[1]!r}")
    return t


# ---------------------------------------------------------------- printer


def _num(v: float) -> str:
    return repr(float(v))


def pretty(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Const):
        return _num(t.value)
    if isinstance(t, PrimApp):
        head = t.prim if t.param is None else f"{t.prim}[{_num(t.param)}]"
        return f"{head}({', '.join(pretty(a) for a in t.args)})"
    if isinstance(t, Lam):
        annot = "?" if t.annot is None else str(t.annot)
        return f"\\{t.binder}:{annot}. {pretty(t.body)}"
    if isinstance(t, App):
        if isinstance(t.fn, Lam) and t.fn.annot is None:
            return f"let {t.fn.binder} be {pretty(t.arg)} in {pretty(t.fn.body)}"
        fn = pretty(t.fn)
        if isinstance(t.fn, Lam) or (isinstance(t.fn, App) and isinstance(t.fn.fn, Lam) and t.fn.fn.annot is None):
            fn = f"({fn})"
        arg = pretty(t.arg)
        if isinstance(t.arg, (App, Lam)):
            arg = f"({arg})"
        return f"{fn} {arg}"
    if isinstance(t, Pair):
        return f"<{pretty(t.left)}, {pretty(t.right)}>"
    if isinstance(t, Fst):
        return f"fst({pretty(t.term)})"
    if isinstance(t, Snd):
        return f"snd({pretty(t.term)})"
    raise TypeError(f"not a term: {t!r}")


# ---------------------------------------------------------------- typing

Context = list  # ordered (name, Type) pairs


def lookup(ctx: Iterable[tuple[str, Type]], name: str) -> Type:
    found = None
    for n, ty in ctx:
        if n == name:
            found = ty
    if found is None:
        raise LambdaTypeError(f"unbound variable {name}")
    return found


def typecheck(ctx, t: Term, prims: Mapping[str, int] | None = None) -> Type:
    """Return the type of ``t`` in ``ctx`` or raise :class:`LambdaTypeError`."""
    return _infer(list(ctx), t, _arities(prims))


def _arities(prims) -> Mapping[str, int]:
    if prims is None:
        from qqm.prims import default_table

        return default_table().arities()
    if hasattr(prims, "arities"):
        return prims.arities()
    return prims


def _infer(ctx, t: Term, prims) -> Type:
    if isinstance(t, Var):
        return lookup(ctx, t.name)
    if isinstance(t, Const):
        return REAL
    if isinstance(t, PrimApp):
        if t.prim not in prims:
            raise LambdaTypeError(f"unknown primitive {t.prim}")
        if len(t.args) != prims[t.prim]:
            raise LambdaTypeError(f"primitive {t.prim} has arity {prims[t.prim]}, applied to {len(t.args)} arguments")
        for a in t.args:
            ty = _infer(ctx, a, prims)
            if ty != REAL:
                raise LambdaTypeError(f"primitive {t.prim} expects Real arguments, got {ty}")
        return REAL
    if isinstance(t, Lam):
        if t.annot is None:
            raise LambdaTypeError(f"binder {t.binder} has no annotation outside a let")
        return Arrow(t.annot, _infer(ctx + [(t.binder, t.annot)], t.body, prims))
    if isinstance(t, App):
        if isinstance(t.fn, Lam) and t.fn.annot is None:
            arg_ty = _infer(ctx, t.arg, prims)
            return _infer(ctx + [(t.fn.binder, arg_ty)], t.fn.body, prims)
        fn_ty = _infer(ctx, t.fn, prims)
        if not isinstance(fn_ty, Arrow):
            raise LambdaTypeError(f"applying a non-function of type {fn_ty}")
        arg_ty = _infer(ctx, t.arg, prims)
        if arg_ty != fn_ty.dom:
            raise LambdaTypeError(f"argument of type {arg_ty} where {fn_ty.dom} was expected")
        return fn_ty.cod
    if isinstance(t, Pair):
        return Prod(_infer(ctx, t.left, prims), _infer(ctx, t.right, prims))
    if isinstance(t, (Fst, Snd)):
        ty = _infer(ctx, t.term, prims)
        if not isinstance(ty, Prod):
            raise LambdaTypeError(f"projection from a non-product of type {ty}")
        return ty.left if isinstance(t, Fst) else ty.right
    raise LambdaTypeError(f"not a term: {t!r}")


def elaborate(ctx, t: Term, prims=None) -> Term:
    """Fill in inferred let annotations so every binder is annotated."""
    prims = _arities(prims)
    ctx = list(ctx)

    def go(ctx, t):
        if isinstance(t, (Var, Const)):
            return t
        if isinstance(t, PrimApp):
            return PrimApp(t.prim, tuple(go(ctx, a) for a in t.args), t.param, span=t.span)
        if isinstance(t, Lam):
            return Lam(t.binder, t.annot, go(ctx + [(t.binder, t.annot)], t.body), span=t.span)
        if isinstance(t, App):
            if isinstance(t.fn, Lam) and t.fn.annot is None:
                ty = _infer(ctx, t.arg, prims)
                fn = Lam(t.fn.binder, ty, go(ctx + [(t.fn.binder, ty)], t.fn.body), span=t.fn.span)
                return App(fn, go(ctx, t.arg), span=t.span)
            return App(go(ctx, t.fn), go(ctx, t.arg), span=t.span)
        if isinstance(t, Pair):
            return Pair(go(ctx, t.left), go(ctx, t.right), span=t.span)
        if isinstance(t, Fst):
            return Fst(go(ctx, t.term), span=t.span)
        if isinstance(t, Snd):
            return Snd(go(ctx, t.term), span=t.span)
        raise LambdaTypeError(f"not a term: {t!r}")

    _infer(ctx, t, prims)
    return go(ctx, t)


# ---------------------------------------------------------------- binding


def free_vars(t: Term) -> set[str]:
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, Const):
        return set()
    if isinstance(t, PrimApp):
        return set().union(*(free_vars(a) for a in t.args)) if t.args else set()
    if isinstance(t, Lam):
        return free_vars(t.body) - {t.binder}
    if isinstance(t, App):
        return free_vars(t.fn) | free_vars(t.arg)
    if isinstance(t, Pair):
        return free_vars(t.left) | free_vars(t.right)
    if isinstance(t, (Fst, Snd)):
        return free_vars(t.term)
    raise TypeError(f"not a term: {t!r}")


def fresh(base: str, avoid: set[str]) -> str:
    n = 1
    while f"{base}{n}" in avoid:
        n += 1
    return f"{base}{n}"


def substitute(t: Term, name: str, p: Term) -> Term:
    """Capture-avoiding ``t[p/name]``."""
    if isinstance(t, Var):
        return p if t.name == name else t
    if isinstance(t, Const):
        return t
    if isinstance(t, PrimApp):
        return PrimApp(t.prim, tuple(substitute(a, name, p) for a in t.args), t.param)
    if isinstance(t, Lam):
        if t.binder == name:
            return t
        fv = free_vars(p)
        if t.binder in fv and name in free_vars(t.body):
            new = fresh(t.binder, fv | free_vars(t.body) | {name})
            body = substitute(t.body, t.binder, Var(new))
            return Lam(new, t.annot, substitute(body, name, p))
        return Lam(t.binder, t.annot, substitute(t.body, name, p))
    if isinstance(t, App):
        return App(substitute(t.fn, name, p), substitute(t.arg, name, p))
    if isinstance(t, Pair):
        return Pair(substitute(t.left, name, p), substitute(t.right, name, p))
    if isinstance(t, Fst):
        return Fst(substitute(t.term, name, p))
    if isinstance(t, Snd):
        return Snd(substitute(t.term, name, p))
    raise TypeError(f"not a term: {t!r}")


def size(t: Term) -> int:
    if isinstance(t, (Var, Const)):
        return 1
    if isinstance(t, PrimApp):
        return 1 + sum(size(a) for a in t.args)
    if isinstance(t, Lam):
        return 1 + size(t.body)
    if isinstance(t, App):
        return 1 + size(t.fn) + size(t.arg)
    if isinstance(t, Pair):
        return 1 + size(t.left) + size(t.right)
    return 1 + size(t.term)
