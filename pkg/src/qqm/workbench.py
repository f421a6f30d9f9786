"""Finite quasi-quasi-metric spaces: axiom checks and categorical constructions.

A space is a carrier of labels, a :class:`FiniteQuantale`, and a boolean
predicate table ``pred[x, a, y]`` saying whether ``(x, a, y)`` is in the
relation.  Closed predicates correspond one-to-one with relation tables
``phi[x, y]`` of quantale indices; :func:`hat` and :func:`predicate_of`
translate between the two.

Everything here is exhaustive, so every verdict is either proved or refuted
with a concrete witness.  Sizes are guarded by :class:`Caps`.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from qqm.finite import (FiniteQuantale, FunctionSpaceQuantale, function_space, lifted, monotone_maps,
                        product as product_quantale, quantale_by_name, trivial, truncated_lawvere)
from qqm.verdict import Verdict

REFLEXIVE = "Reflexive"
QUASI_REFLEXIVE = "QuasiReflexive"
RIGHT_QUASI_REFLEXIVE = "RightQuasiReflexive"
TRANSITIVE = "Transitive"
LST = "LST"
ST1, ST2, ST3, ST4 = "ST1", "ST2", "ST3", "ST4"
SELF_INDISTANCY = "SelfIndistancy"
WEAK_SYMMETRY = "WeakSymmetry"
DIAGONAL_SYMMETRY = "DiagonalSymmetry"
RIGHT_INDISTANCY = "RightIndistancy"

AXIOMS = (REFLEXIVE, QUASI_REFLEXIVE, RIGHT_QUASI_REFLEXIVE, TRANSITIVE, LST, ST1, ST2, ST3, ST4,
          SELF_INDISTANCY, WEAK_SYMMETRY, DIAGONAL_SYMMETRY, RIGHT_INDISTANCY)
STRONG = (SELF_INDISTANCY, LST, WEAK_SYMMETRY)


class SpaceError(ValueError):
    pass


class SizeCapExceeded(ValueError):
    pass


@dataclass(frozen=True)
class Caps:
    """Enumeration limits; the defaults keep every exhaustive scan well under a second."""

    carrier: int = 4
    quantale: int = 5
    exp_quantale: int = 1500
    homs: int = 400_000
    lst_predicate_cells: int = 5_000_000

    def to_json(self) -> dict:
        return dict(self.__dict__)


DEFAULT_CAPS = Caps()


# ---------------------------------------------------------------- relations and predicates


def predicate_of(q: FiniteQuantale, phi: np.ndarray) -> np.ndarray:
    """``pred[x, a, y] = a below phi[x, y]``."""
    return np.transpose(q.leq_table[:, np.asarray(phi)], (1, 0, 2)).copy()


def hat(q: FiniteQuantale, pred: np.ndarray) -> np.ndarray:
    """Join of the admissible radii for every pair."""
    n, k, _ = pred.shape
    acc = np.full((n, n), q.bottom, dtype=np.int64)
    J = q.join_table
    for a in range(k):
        acc = np.where(pred[:, a, :], J[acc, a], acc)
    return acc


def closure_report(q: FiniteQuantale, pred: np.ndarray, labels: Sequence[str] | None = None) -> Verdict:
    """Proved iff ``pred`` is down-closed and closed under joins of radius families.

    ``pred`` always sits inside the predicate of its hat; a surplus triple
    ``(x, b, y)`` means either the join ``hat(x, y)`` itself is missing (join
    closure fails) or some radius below an admissible one is missing
    (down-closure fails).
    """
    phi = hat(q, pred)
    extra = predicate_of(q, phi) & ~pred
    hit = np.argwhere(extra)
    if len(hit) == 0:
        return Verdict.proof()
    x, b, y = (int(v) for v in hit[0])
    name = labels or [str(i) for i in range(pred.shape[0])]
    top_in = bool(pred[x, phi[x, y], y])
    return Verdict.refute({
        "closure": "down" if top_in else "join",
        "x": name[x], "y": name[y], "missing_radius": q.name_of(b), "join": q.name_of(phi[x, y]),
    })


class FiniteQqmSpace:
    """Carrier labels, a finite quantale, and a predicate table ``pred[x, a, y]``.

    The predicate must be closed and, unless ``raw`` is set, quasi-reflexive
    and transitive.  ``raw`` spaces skip every check so that arbitrary data
    can be mined for counterexamples.
    """

    def __init__(self, labels: Sequence, quantale: FiniteQuantale, pred: np.ndarray, raw: bool = False,
                 name: str = "space", meta: dict | None = None):
        self.labels = [str(v) for v in labels]
        self.quantale = quantale
        self.pred = np.asarray(pred, dtype=bool)
        self.raw = raw
        self.name = name
        self.meta = dict(meta or {})
        n, k = len(self.labels), quantale.size
        if self.pred.shape != (n, k, n):
            raise SpaceError(f"predicate shape {self.pred.shape} does not match ({n}, {k}, {n})")
        if len(set(self.labels)) != n:
            raise SpaceError("carrier labels must be distinct")
        self.relation = hat(quantale, self.pred)
        if not raw:
            closed = closure_report(quantale, self.pred, self.labels)
            if closed.refuted:
                raise SpaceError(f"predicate is not closed: {closed.witness}")
            for axiom in (QUASI_REFLEXIVE, TRANSITIVE):
                v = check_axiom(self, axiom)
                if v.refuted:
                    raise SpaceError(f"{axiom} fails: {v.witness}")

    @classmethod
    def from_relation(cls, labels: Sequence, q: FiniteQuantale, phi, raw: bool = False, name: str = "space",
                      meta: dict | None = None) -> "FiniteQqmSpace":
        phi = np.asarray(phi, dtype=np.int64)
        return cls(labels, q, predicate_of(q, phi), raw=raw, name=name, meta=meta)

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def sigma(self) -> np.ndarray:
        """Self-distances ``hat(x, x)``."""
        return np.diag(self.relation).copy()

    def index(self, label) -> int:
        return self.labels.index(str(label))

    def phi(self, x, y) -> str:
        return self.quantale.name_of(self.relation[self.index(x), self.index(y)])

    def triples(self) -> np.ndarray:
        return np.argwhere(self.pred)

    def __repr__(self):
        return f"FiniteQqmSpace({self.name!r}, n={self.n}, q={self.quantale.name})"

    # -- serialization
    def to_json(self) -> dict:
        q = self.quantale
        qdesc = q.name if _is_named(q) else q.to_json()
        return {
            "name": self.name,
            "carrier": self.labels,
            "quantale": qdesc,
            "relation": [[q.name_of(v) for v in row] for row in self.relation],
            "raw": self.raw,
        }

    @classmethod
    def from_json(cls, data) -> "FiniteQqmSpace":
        """Load from a dict or a path.

        ``quantale`` is a builtin name (``lawvere<=8``, ``godel3``, ...) or a
        finite-quantale object.  The space is given either by ``relation``,
        a matrix of element names, or by ``predicate``, an explicit list of
        ``[x, a, y]`` triples.
        """
        if isinstance(data, (str, Path)):
            data = json.loads(Path(data).read_text())
        qd = data["quantale"]
        q = quantale_by_name(qd) if isinstance(qd, str) else FiniteQuantale.from_json(qd)
        labels = [str(v) for v in data["carrier"]]
        raw = bool(data.get("raw", False))
        name = data.get("name", "space")
        if "relation" in data:
            phi = [[q.index(v) for v in row] for row in data["relation"]]
            return cls.from_relation(labels, q, phi, raw=raw, name=name)
        pos = {v: i for i, v in enumerate(labels)}
        pred = np.zeros((len(labels), q.size, len(labels)), dtype=bool)
        for x, a, y in data["predicate"]:
            pred[pos[str(x)], q.index(a), pos[str(y)]] = True
        return cls(labels, q, pred, raw=raw, name=name)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")


def _is_named(q: FiniteQuantale) -> bool:
    try:
        other = quantale_by_name(q.name)
    except (KeyError, ValueError):
        return False
    return other.names == q.names and np.array_equal(other.tensor_table, q.tensor_table) \
        and np.array_equal(other.leq_table, q.leq_table)


def load_space(path) -> FiniteQqmSpace:
    return FiniteQqmSpace.from_json(path)


# ---------------------------------------------------------------- axiom checks


def _residual_fn(q: FiniteQuantale):
    if isinstance(q, FunctionSpaceQuantale) or q.size > 256:
        return q.residual_v
    table = q.residual_table
    return lambda a, b: table[a, b]


def _relation_sides(q: FiniteQuantale, phi: np.ndarray, axiom: str):
    """Left and right sides, indexed ``[x, y, z]``, of the relation-form inequality."""
    T = q.tensor_table
    R = _residual_fn(q)
    n = phi.shape[0]
    xy = np.broadcast_to(phi[:, :, None], (n, n, n))
    yz = np.broadcast_to(phi[None, :, :], (n, n, n))
    xz = np.broadcast_to(phi[:, None, :], (n, n, n))
    yy = np.broadcast_to(np.diag(phi)[None, :, None], (n, n, n))
    if axiom == TRANSITIVE:
        return T[xy, yz], xz
    if axiom == ST1:
        return T[xy, yz], T[xz, yy]
    if axiom == ST2:
        return T[xy, R(yy, yz)], xz
    if axiom == ST3:
        return R(yy, T[xy, yz]), xz
    if axiom == ST4:
        return T[T[R(yy, xy), yy], R(yy, yz)], xz
    if axiom == LST:
        return T[R(yy, xy), yz], xz
    raise KeyError(axiom)


def _triple_verdict(space: FiniteQqmSpace, axiom: str) -> Verdict:
    q, phi = space.quantale, space.relation
    lhs, rhs = _relation_sides(q, phi, axiom)
    bad = ~q.leq_table[lhs, rhs]
    hit = np.argwhere(bad)
    if len(hit) == 0:
        return Verdict.proof()
    x, y, z = (int(v) for v in hit[0])
    L, nm = space.labels, q.name_of
    return Verdict.refute({
        "x": L[x], "y": L[y], "z": L[z],
        "phi_xy": nm(phi[x, y]), "phi_yz": nm(phi[y, z]), "phi_xz": nm(phi[x, z]), "phi_yy": nm(phi[y, y]),
        "lhs": nm(lhs[x, y, z]), "rhs": nm(rhs[x, y, z]), "violations": int(bad.sum()),
    })


def _lst_predicate(space: FiniteQqmSpace) -> Verdict:
    """From ``(x, a (x) sigma_y, y)`` and ``(y, b, z)`` conclude ``(x, a (x) b, z)``."""
    q, P, s = space.quantale, space.pred, space.sigma
    T = q.tensor_table
    n, k = space.n, q.size
    xs = np.arange(n)
    ks = np.arange(k)
    first = P[xs[:, None, None], T[ks[None, None, :], s[None, :, None]], xs[None, :, None]]  # [x, y, a]
    concl = np.transpose(P[:, T, :], (0, 3, 1, 2))  # [x, z, a, b]
    for y in range(n):
        second = P[y].T  # [z, b]
        bad = first[:, y, :][:, None, :, None] & second[None, :, None, :] & ~concl
        hit = np.argwhere(bad)
        if len(hit):
            x, z, a, b = (int(v) for v in hit[0])
            return Verdict.refute({"x": space.labels[x], "y": space.labels[y], "z": space.labels[z],
                                   "a": q.name_of(a), "b": q.name_of(b), "sigma_y": q.name_of(s[y])})
    return Verdict.proof()


def _self_indistancy(space: FiniteQqmSpace) -> Verdict:
    s = space.sigma
    n = space.n
    related = space.pred[np.arange(n), s, :]  # [x, y]: (x, sigma_x, y)
    np.fill_diagonal(related, False)
    hit = np.argwhere(related)
    if len(hit) == 0:
        return Verdict.proof()
    x, y = (int(v) for v in hit[0])
    return Verdict.refute({"x": space.labels[x], "y": space.labels[y], "sigma_x": space.quantale.name_of(s[x])})


def _right_indistancy(space: FiniteQqmSpace) -> Verdict:
    s = space.sigma
    n = space.n
    xs = np.arange(n)
    related = space.pred[xs[:, None], s[None, :], xs[None, :]]  # [x, y]: (x, sigma_y, y)
    np.fill_diagonal(related, False)
    hit = np.argwhere(related)
    if len(hit) == 0:
        return Verdict.proof()
    x, y = (int(v) for v in hit[0])
    return Verdict.refute({"x": space.labels[x], "y": space.labels[y], "sigma_y": space.quantale.name_of(s[y])})


def _weak_symmetry(space: FiniteQqmSpace) -> Verdict:
    """``(x, a (x) sigma_w, y)``, ``(x, b, z)``, ``a (x) b below sigma_y`` give ``(y, a (x) b, z)``."""
    q, P, s = space.quantale, space.pred, space.sigma
    T, L = q.tensor_table, q.leq_table
    n = space.n
    # W[x, a, y]: some w has (x, a (x) sigma_w, y)
    W = P[:, T[:, s], :].any(axis=2)
    k = q.size
    for y in range(n):
        # S[a, b, z]: the side condition holds but the conclusion fails
        S = L[T, s[y]][:, :, None] & ~P[y][T]
        # reach[x, b, z]: some a with W[x, a, y] and S[a, b, z]; a float matmul counts the witnesses
        reach = (W[:, :, y].astype(np.float32) @ S.reshape(k, -1).astype(np.float32)).reshape(n, k, n) > 0
        bad = reach & P
        hit = np.argwhere(bad)
        if len(hit):
            x, b, z = (int(v) for v in hit[0])
            a = int(np.flatnonzero(W[x, :, y] & S[:, b, z])[0])
            ab = T[a, b]
            return Verdict.refute({"x": space.labels[x], "y": space.labels[y], "z": space.labels[z],
                                   "a": q.name_of(a), "b": q.name_of(b), "a_tensor_b": q.name_of(ab),
                                   "sigma_y": q.name_of(s[y])})
    return Verdict.proof()


def _diagonal_symmetry(space: FiniteQqmSpace) -> Verdict:
    """``(x, a (x) sigma_z, y)`` and ``a (x) sigma_x below sigma_y`` give ``(y, a (x) sigma_x, x)``."""
    q, P, s = space.quantale, space.pred, space.sigma
    T, L = q.tensor_table, q.leq_table
    n, k = space.n, q.size
    xs, ks = np.arange(n), np.arange(k)
    hyp = P[:, T[:, s], :].any(axis=2)  # [x, a, y]
    ax = T[ks[None, :], s[:, None]]  # [x, a] = a (x) sigma_x
    small = L[ax[:, :, None], s[None, None, :]]  # [x, a, y]
    concl = P[xs[None, None, :], ax[:, :, None], xs[:, None, None]]  # [x, a, y]: (y, a (x) sigma_x, x)
    bad = hyp & small & ~concl
    hit = np.argwhere(bad)
    if len(hit) == 0:
        return Verdict.proof()
    x, a, y = (int(v) for v in hit[0])
    return Verdict.refute({"x": space.labels[x], "y": space.labels[y], "a": q.name_of(a)})


def _pointwise_verdict(bad: np.ndarray, space: FiniteQqmSpace, extra) -> Verdict:
    hit = np.argwhere(bad)
    if len(hit) == 0:
        return Verdict.proof()
    return Verdict.refute(extra(*(int(v) for v in hit[0])))


def check_axiom(space: FiniteQqmSpace, axiom: str, lst_form: str = "auto", caps: Caps = DEFAULT_CAPS) -> Verdict:
    """Exhaustive check of one axiom; refutations carry the failing tuple."""
    q, phi = space.quantale, space.relation
    nm, L = q.name_of, space.labels
    d = np.diag(phi)
    if axiom == REFLEXIVE:
        return _pointwise_verdict(d[:, None] != q.unit, space, lambda x, _: {"x": L[x], "phi_xx": nm(d[x])})
    if axiom == QUASI_REFLEXIVE:
        bad = ~q.leq_table[phi, d[:, None]]
        return _pointwise_verdict(bad, space, lambda x, y: {"x": L[x], "y": L[y], "phi_xy": nm(phi[x, y]),
                                                            "phi_xx": nm(d[x])})
    if axiom == RIGHT_QUASI_REFLEXIVE:
        bad = ~q.leq_table[phi, d[None, :]]
        return _pointwise_verdict(bad, space, lambda x, y: {"x": L[x], "y": L[y], "phi_xy": nm(phi[x, y]),
                                                            "phi_yy": nm(d[y])})
    if axiom in (TRANSITIVE, ST1, ST2, ST3, ST4):
        return _triple_verdict(space, axiom)
    if axiom == LST:
        if lst_form == "auto":
            cells = space.n ** 2 * q.size ** 2
            lst_form = "predicate" if cells * space.n <= caps.lst_predicate_cells else "relation"
        return _lst_predicate(space) if lst_form == "predicate" else _triple_verdict(space, LST)
    if axiom == SELF_INDISTANCY:
        return _self_indistancy(space)
    if axiom == RIGHT_INDISTANCY:
        return _right_indistancy(space)
    if axiom == WEAK_SYMMETRY:
        return _weak_symmetry(space)
    if axiom == DIAGONAL_SYMMETRY:
        return _diagonal_symmetry(space)
    raise KeyError(f"unknown axiom {axiom!r}; expected one of {', '.join(AXIOMS)}")


def check_axioms(space: FiniteQqmSpace, which: Iterable[str] = AXIOMS, caps: Caps = DEFAULT_CAPS) -> dict:
    return {axiom: check_axiom(space, axiom, caps=caps) for axiom in which}


def st_values(space: FiniteQqmSpace, x, y, z) -> dict:
    """The relation entries that enter the strong-transitivity variants at one triple."""
    i, j, l = space.index(x), space.index(y), space.index(z)
    phi, nm = space.relation, space.quantale.name_of
    return {"phi_xy": nm(phi[i, j]), "phi_yz": nm(phi[j, l]), "phi_xz": nm(phi[i, l]), "phi_yy": nm(phi[j, j])}


# ---------------------------------------------------------------- observational quasi-metrics


def observational(space: FiniteQqmSpace, side: str = "left") -> np.ndarray:
    """``phi^l(x, y) = meet_z phi(y, z) -o phi(x, z)``; ``phi^r(x, y) = meet_z phi(z, x) -o phi(z, y)``."""
    q, phi = space.quantale, space.relation
    R = _residual_fn(q)
    if side == "left":
        arr = R(phi[None, :, :], phi[:, None, :])
    elif side == "right":
        arr = R(phi.T[:, None, :], phi.T[None, :, :])
    else:
        raise ValueError("side must be 'left' or 'right'")
    acc = np.full(phi.shape, q.top, dtype=np.int64)
    for z in range(space.n):
        acc = q.meet_table[acc, arr[:, :, z]]
    return acc


def relation_space(space: FiniteQqmSpace, phi: np.ndarray, name: str) -> FiniteQqmSpace:
    return FiniteQqmSpace.from_relation(space.labels, space.quantale, phi, raw=True, name=name)


def lst_identity_report(space: FiniteQqmSpace) -> dict:
    """Which of the two candidate identities for ``phi^l`` hold on this space.

    ``with_sigma_y`` tests ``phi^l(x, y) = phi(y, y) -o phi(x, y)`` and
    ``with_sigma_x`` tests ``phi^l(x, y) = phi(x, x) -o phi(x, y)``.
    """
    q, phi = space.quantale, space.relation
    R = _residual_fn(q)
    left = observational(space, "left")
    d = np.diag(phi)
    via_y = R(np.broadcast_to(d[None, :], phi.shape), phi)
    via_x = R(np.broadcast_to(d[:, None], phi.shape), phi)
    return {"with_sigma_y": bool(np.array_equal(left, via_y)), "with_sigma_x": bool(np.array_equal(left, via_x))}


# ---------------------------------------------------------------- constructions


def terminal() -> FiniteQqmSpace:
    q = trivial()
    return FiniteQqmSpace(["*"], q, np.ones((1, 1, 1), dtype=bool), name="terminal")


def product(a: FiniteQqmSpace, b: FiniteQqmSpace) -> FiniteQqmSpace:
    """Componentwise carrier, quantale and predicate."""
    q = product_quantale(a.quantale, b.quantale)
    na, nb = a.n, b.n
    pred = (a.pred[:, None, :, None, :, None] & b.pred[None, :, None, :, None, :])  # [x, x', a, b, y, y']
    pred = pred.reshape(na * nb, q.size, na * nb)
    labels = [f"({u},{v})" for u in a.labels for v in b.labels]
    return FiniteQqmSpace(labels, q, pred, name=f"{a.name}*{b.name}")


def exponential(a: FiniteQqmSpace, b: FiniteQqmSpace, caps: Caps = DEFAULT_CAPS) -> FiniteQqmSpace:
    """All carrier maps, monotone error maps, and the two-clause predicate.

    ``meta["functions"]`` holds the carrier maps as rows of B-indices in the
    order of the carrier labels.
    """
    if a.n > caps.carrier or b.n > caps.carrier:
        raise SizeCapExceeded(f"carriers {a.n}, {b.n} exceed the cap {caps.carrier}")
    if a.quantale.size > caps.quantale or b.quantale.size > caps.quantale:
        raise SizeCapExceeded(f"quantales {a.quantale.size}, {b.quantale.size} exceed the cap {caps.quantale}")
    try:
        qe = function_space(a.n, a.quantale, b.quantale, cap=caps.exp_quantale)
    except ValueError as e:
        raise SizeCapExceeded(str(e)) from None
    F = np.array(list(itertools.product(range(b.n), repeat=a.n)), dtype=np.int64).reshape(-1, a.n)
    ka = a.quantale.size
    pred = np.ones((len(F), qe.size, len(F)), dtype=bool)
    for x, r, y in a.triples():
        err = qe.E[:, x * ka + r]  # [e]
        fx = F[:, x]
        pred &= b.pred[fx[:, None, None], err[None, :, None], F[:, y][None, None, :]]
        pred &= b.pred[fx[:, None], err[None, :], F[:, y][:, None]][:, :, None]
    labels = ["[" + ",".join(b.labels[v] for v in row) + "]" for row in F]
    return FiniteQqmSpace(labels, qe, pred, name=f"{a.name}=>{b.name}", meta={"functions": F})


@dataclass
class FiniteMorphism:
    """``(f, d, g)`` with ``d[x, a]`` an index into the target quantale."""

    source: FiniteQqmSpace
    target: FiniteQqmSpace
    f: np.ndarray
    d: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=np.int64)
        self.g = np.asarray(self.g, dtype=np.int64)
        self.d = np.asarray(self.d, dtype=np.int64).reshape(self.source.n, self.source.quantale.size)

    def same(self, other: "FiniteMorphism") -> bool:
        return (np.array_equal(self.f, other.f) and np.array_equal(self.g, other.g)
                and np.array_equal(self.d, other.d))

    def validate(self) -> Verdict:
        S, T = self.source, self.target
        qs, qt = S.quantale, T.quantale
        i, j = np.nonzero(qs.leq_table)
        mono = qt.leq_table[self.d[:, i], self.d[:, j]]
        if not mono.all():
            x, p = np.argwhere(~mono)[0]
            return Verdict.refute({"monotone": False, "x": S.labels[x], "a": qs.name_of(i[p]), "b": qs.name_of(j[p])})
        tr = S.triples()
        if len(tr) == 0:
            return Verdict.proof()
        xs, rs, ys = tr.T
        err = self.d[xs, rs]
        ok1 = T.pred[self.f[xs], err, self.g[ys]]
        ok2 = T.pred[self.f[xs], err, self.f[ys]]
        bad = ~(ok1 & ok2)
        if bad.any():
            t = int(np.flatnonzero(bad)[0])
            return Verdict.refute({"x": S.labels[xs[t]], "a": qs.name_of(rs[t]), "y": S.labels[ys[t]],
                                   "error": qt.name_of(err[t]), "clause": "fx,gy" if not ok1[t] else "fx,fy"})
        return Verdict.proof()

    def to_json(self) -> dict:
        T = self.target
        return {
            "f": [T.labels[v] for v in self.f],
            "g": [T.labels[v] for v in self.g],
            "d": [[T.quantale.name_of(v) for v in row] for row in self.d],
        }


def identity(space: FiniteQqmSpace) -> FiniteMorphism:
    k = space.quantale.size
    idx = np.arange(space.n)
    return FiniteMorphism(space, space, idx, np.tile(np.arange(k), (space.n, 1)), idx)


def compose(second: FiniteMorphism, first: FiniteMorphism) -> FiniteMorphism:
    """``second . first``: error table ``c(x, a) = e(f x, d(x, a))``."""
    if first.target is not second.source:
        raise SpaceError("morphisms are not composable")
    c = second.d[first.f[:, None], first.d]
    return FiniteMorphism(first.source, second.target, second.f[first.f], c, second.g[first.g])


def enumerate_morphisms(source: FiniteQqmSpace, target: FiniteQqmSpace, caps: Caps = DEFAULT_CAPS) -> list:
    """Every morphism ``source -> target`` in a deterministic order."""
    mono = monotone_maps(source.quantale, target.quantale)
    n = source.n
    total = target.n ** (2 * n) * len(mono) ** n
    if total > caps.homs:
        raise SizeCapExceeded(f"{total} candidate morphisms exceed the cap {caps.homs}")
    choice = np.array(list(itertools.product(range(len(mono)), repeat=n)), dtype=np.int64).reshape(-1, n)
    D = mono[choice]  # [m, x, a]
    funcs = np.array(list(itertools.product(range(target.n), repeat=n)), dtype=np.int64).reshape(-1, n)
    tr = source.triples()
    xs, rs, ys = tr.T if len(tr) else (np.zeros(0, int),) * 3
    err = D[:, xs, rs]  # [m, t]
    out = []
    for f in funcs:
        keep_f = target.pred[f[xs][None, :], err, f[ys][None, :]].all(axis=1)
        for g in funcs:
            ok = keep_f & target.pred[f[xs][None, :], err, g[ys][None, :]].all(axis=1)
            for m in np.flatnonzero(ok):
                out.append(FiniteMorphism(source, target, f, D[m], g))
    return out


def category_laws(morphisms: Sequence[FiniteMorphism]) -> dict:
    """Identity and associativity laws over the given morphisms, plus closure under composition."""
    ids, assoc, closed = [], [], []
    for m in morphisms:
        left = compose(identity(m.target), m)
        right = compose(m, identity(m.source))
        ids.append(Verdict.exact(left.same(m) and right.same(m), witness=m.to_json()))
    for m1, m2 in itertools.product(morphisms, repeat=2):
        if m1.target is not m2.source:
            continue
        c = compose(m2, m1)
        closed.append(c.validate())
        for m3 in morphisms:
            if m2.target is not m3.source:
                continue
            a = compose(m3, compose(m2, m1))
            b = compose(compose(m3, m2), m1)
            assoc.append(Verdict.exact(a.same(b), witness={"m1": m1.to_json(), "m2": m2.to_json(), "m3": m3.to_json()}))
    return {"identity": Verdict.combine(ids), "associativity": Verdict.combine(assoc),
            "composites_are_morphisms": Verdict.combine(closed),
            "counts": {"morphisms": len(morphisms), "associativity_triples": len(assoc)}}


# ---------------------------------------------------------------- weak coproducts


@dataclass
class WeakCoproduct:
    """Tagged union carrier over the quantale ``LQ_A x LQ_B``.

    Quantale index ``alpha * (|Q_B| + 1) + beta`` where 0 encodes the empty
    set and ``i + 1`` the singleton ``{i}``.
    """

    a: FiniteQqmSpace
    b: FiniteQqmSpace
    space: FiniteQqmSpace

    def _width(self) -> int:
        return self.b.quantale.size + 1

    def left_radius(self, r: int) -> int:
        return (r + 1) * self._width()

    def right_radius(self, r: int) -> int:
        return r + 1

    def section(self, m1: FiniteMorphism, m2: FiniteMorphism) -> FiniteMorphism:
        C = m1.target
        if m2.target is not C:
            raise SpaceError("section needs two morphisms into the same space")
        na, ka, kb = self.a.n, self.a.quantale.size, self.b.quantale.size
        k = self.space.quantale.size
        D = np.full((self.space.n, k), C.quantale.bottom, dtype=np.int64)
        for alpha in range(ka):
            for beta in range(kb + 1):
                D[:na, (alpha + 1) * (kb + 1) + beta] = m1.d[:, alpha]
        for alpha in range(ka + 1):
            for beta in range(kb):
                D[na:, alpha * (kb + 1) + beta + 1] = m2.d[:, beta]
        return FiniteMorphism(self.space, C, np.concatenate([m1.f, m2.f]), D, np.concatenate([m1.g, m2.g]))

    def retraction(self, m: FiniteMorphism) -> tuple[FiniteMorphism, FiniteMorphism]:
        na, ka, kb = self.a.n, self.a.quantale.size, self.b.quantale.size
        d1 = m.d[:na][:, [self.left_radius(r) for r in range(ka)]]
        d2 = m.d[na:][:, [self.right_radius(r) for r in range(kb)]]
        return (FiniteMorphism(self.a, m.target, m.f[:na], d1, m.g[:na]),
                FiniteMorphism(self.b, m.target, m.f[na:], d2, m.g[na:]))


def weak_coproduct(a: FiniteQqmSpace, b: FiniteQqmSpace) -> WeakCoproduct:
    q = product_quantale(lifted(a.quantale), lifted(b.quantale))
    n = a.n + b.n
    w = b.quantale.size + 1
    pred = np.zeros((n, q.size, n), dtype=bool)
    pred[:, 0, :] = True
    for x, r, y in a.triples():
        pred[x, (r + 1) * w, y] = True
    for x, r, y in b.triples():
        pred[a.n + x, r + 1, a.n + y] = True
    labels = [f"0:{v}" for v in a.labels] + [f"1:{v}" for v in b.labels]
    return WeakCoproduct(a, b, FiniteQqmSpace(labels, q, pred, name=f"{a.name}+{b.name}"))


def weak_coproduct_report(a: FiniteQqmSpace, b: FiniteQqmSpace, targets: Sequence[FiniteQqmSpace],
                          caps: Caps = DEFAULT_CAPS, max_pairs: int | None = None) -> dict:
    """Section validity and retraction-after-section on enumerated hom-pairs, plus naturality."""
    wc = weak_coproduct(a, b)
    section_ok, left_inverse, natural = [], [], []
    pairs = 0
    for C in targets:
        homs_a = enumerate_morphisms(a, C, caps)
        homs_b = enumerate_morphisms(b, C, caps)
        for m1, m2 in itertools.product(homs_a, homs_b):
            if max_pairs is not None and pairs >= max_pairs:
                break
            pairs += 1
            s = wc.section(m1, m2)
            section_ok.append(s.validate())
            r1, r2 = wc.retraction(s)
            left_inverse.append(Verdict.exact(r1.same(m1) and r2.same(m2),
                                              witness={"m1": m1.to_json(), "m2": m2.to_json()}))
        # naturality of the retraction along every endomorphism of C
        ends = enumerate_morphisms(C, C, caps)
        sample = [wc.section(m1, m2) for m1, m2 in itertools.islice(itertools.product(homs_a, homs_b), 16)]
        for M in sample:
            r1, r2 = wc.retraction(M)
            for e in ends[:16]:
                t1, t2 = wc.retraction(compose(e, M))
                natural.append(Verdict.exact(t1.same(compose(e, r1)) and t2.same(compose(e, r2)),
                                             witness={"endo": e.to_json()}))
    return {"section_is_morphism": Verdict.combine(section_ok), "retraction_after_section": Verdict.combine(left_inverse),
            "naturality": Verdict.combine(natural), "pairs": pairs}


# ---------------------------------------------------------------- closure suite


def pointwise_self_distance(a: FiniteQqmSpace, e: FiniteQqmSpace) -> Verdict:
    """On an exponential ``e = a => b``: ``sigma_f(x, sigma_x) = sigma_(f x)`` for every f and x."""
    qe = e.quantale
    F = e.meta["functions"]
    b_sigma = e.meta["target_sigma"]
    sa, se = a.sigma, e.sigma
    for fi in range(e.n):
        for x in range(a.n):
            got = int(qe.apply(se[fi], x, sa[x]))
            want = int(b_sigma[F[fi, x]])
            if got != want:
                return Verdict.refute({"f": e.labels[fi], "x": a.labels[x], "got": qe.outer.name_of(got),
                                       "expected": qe.outer.name_of(want)})
    return Verdict.proof()


def closure_theorem_suite(a: FiniteQqmSpace, b: FiniteQqmSpace, caps: Caps = DEFAULT_CAPS) -> dict:
    """Check that the three strong properties pass from ``a`` and ``b`` to ``a => b``.

    Hypotheses are re-checked first (closure included); when they fail the
    report says so and ``applicable`` is False.
    """
    hyp = {}
    for side, s in (("a", a), ("b", b)):
        hyp[side] = {"closed": closure_report(s.quantale, s.pred, s.labels)}
        hyp[side].update(check_axioms(s, (QUASI_REFLEXIVE, TRANSITIVE) + STRONG, caps))
    applicable = all(bool(v) for h in hyp.values() for v in h.values())
    report = {"applicable": applicable, "hypotheses": hyp}
    if not applicable:
        return report
    e = exponential(a, b, caps)
    e.meta["target_sigma"] = b.sigma
    concl = check_axioms(e, (QUASI_REFLEXIVE, TRANSITIVE) + STRONG + (DIAGONAL_SYMMETRY, RIGHT_INDISTANCY), caps)
    concl["pointwise_self_distance"] = pointwise_self_distance(a, e)
    report["exponential"] = {"carrier": e.n, "quantale": e.quantale.size}
    report["conclusions"] = concl
    report["holds"] = all(bool(v) for v in concl.values())
    return report


# ---------------------------------------------------------------- random spaces


def compose_relations(q: FiniteQuantale, phi: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """``(phi ; psi)(x, z) = join_y phi(x, y) (x) psi(y, z)``."""
    T, J = q.tensor_table, q.join_table
    prod = T[phi[:, :, None], psi[None, :, :]]  # [x, y, z]
    acc = np.full((phi.shape[0], psi.shape[1]), q.bottom, dtype=np.int64)
    for y in range(phi.shape[1]):
        acc = J[acc, prod[:, y, :]]
    return acc


def transitive_closure(q: FiniteQuantale, phi: np.ndarray) -> np.ndarray:
    phi = np.asarray(phi, dtype=np.int64)
    while True:
        new = q.join_table[phi, compose_relations(q, phi, phi)]
        if np.array_equal(new, phi):
            return phi
        phi = new


def qqm_closure(q: FiniteQuantale, phi: np.ndarray) -> np.ndarray:
    """Smallest raise of ``phi`` that is transitive and left quasi-reflexive."""
    phi = np.asarray(phi, dtype=np.int64).copy()
    n = phi.shape[0]
    while True:
        phi = transitive_closure(q, phi)
        d = phi[np.arange(n), np.arange(n)].copy()
        for y in range(n):
            d = q.join_table[d, phi[:, y]]
        if np.array_equal(d, np.diag(phi)):
            return phi
        phi[np.arange(n), np.arange(n)] = d


def _sparse_random(q: FiniteQuantale, n: int, rng: np.random.Generator, p_bottom: float) -> np.ndarray:
    phi = rng.integers(0, q.size, size=(n, n))
    return np.where(rng.random((n, n)) < p_bottom, q.bottom, phi).astype(np.int64)


def random_qqm(q: FiniteQuantale, n: int, rng: np.random.Generator, p_bottom: float = 0.5) -> np.ndarray:
    return qqm_closure(q, _sparse_random(q, n, rng, p_bottom))


def random_quasi_metric(q: FiniteQuantale, n: int, rng: np.random.Generator, p_bottom: float = 0.5) -> np.ndarray:
    phi = _sparse_random(q, n, rng, p_bottom)
    np.fill_diagonal(phi, q.unit)
    return transitive_closure(q, phi)


def random_metric(q: FiniteQuantale, n: int, rng: np.random.Generator, p_bottom: float = 0.3,
                  tries: int = 50) -> np.ndarray:
    """Symmetric, reflexive, transitive and separated; falls back to the discrete metric."""
    for _ in range(tries):
        phi = _sparse_random(q, n, rng, p_bottom)
        iu = np.triu_indices(n, 1)
        sym = np.full((n, n), q.bottom, dtype=np.int64)
        sym[iu] = phi[iu]
        sym.T[iu] = phi[iu]
        np.fill_diagonal(sym, q.unit)
        sym = transitive_closure(q, sym)
        off = ~np.eye(n, dtype=bool)
        if not np.any(sym[off] == q.unit):
            return sym
    return discrete_metric(q, n)


def discrete_metric(q: FiniteQuantale, n: int) -> np.ndarray:
    phi = np.full((n, n), q.bottom, dtype=np.int64)
    np.fill_diagonal(phi, q.unit)
    return phi


def weighted(q: FiniteQuantale, phi: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """``psi(x, y) = omega(x) (x) phi(x, y)``."""
    return q.tensor_table[np.asarray(omega)[:, None], phi]


def random_space(q: FiniteQuantale, n: int, rng: np.random.Generator, kind: str = "qqm",
                 name: str | None = None) -> FiniteQqmSpace:
    """``kind`` is ``qqm``, ``quasi_metric``, ``metric``, ``weighted`` or ``discrete``."""
    if kind == "qqm":
        phi = random_qqm(q, n, rng)
    elif kind == "quasi_metric":
        phi = random_quasi_metric(q, n, rng)
    elif kind == "metric":
        phi = random_metric(q, n, rng)
    elif kind == "weighted":
        phi = weighted(q, random_quasi_metric(q, n, rng), rng.integers(0, q.size, size=n))
    elif kind == "weighted_metric":
        phi = weighted(q, random_metric(q, n, rng), rng.integers(0, q.size, size=n))
    elif kind == "discrete":
        phi = discrete_metric(q, n)
    else:
        raise ValueError(f"unknown space kind {kind!r}")
    labels = [f"p{i}" for i in range(n)]
    return FiniteQqmSpace.from_relation(labels, q, phi, name=name or f"{kind}{n}/{q.name}")


def random_strong_space(q: FiniteQuantale, n: int, rng: np.random.Generator, tries: int = 40) -> FiniteQqmSpace:
    """A random space satisfying self-indistancy, LST and weak symmetry.

    Candidates of several kinds are drawn and filtered; the discrete metric
    is the fallback, which always qualifies when ``q`` has two or more elements.
    """
    kinds = ("weighted_metric", "qqm", "weighted", "metric")
    for t in range(tries):
        s = random_space(q, n, rng, kinds[t % len(kinds)])
        if all(bool(check_axiom(s, ax)) for ax in STRONG):
            return s
    return random_space(q, n, rng, "discrete")


def mine(q: FiniteQuantale, n: int, want: Sequence[str], avoid: Sequence[str], rng: np.random.Generator,
         trials: int = 1000, kind: str = "qqm") -> FiniteQqmSpace | None:
    """Search random spaces for one where every ``want`` axiom holds and every ``avoid`` axiom fails."""
    for _ in range(trials):
        s = random_space(q, n, rng, kind)
        if all(bool(check_axiom(s, ax)) for ax in want) and not any(bool(check_axiom(s, ax)) for ax in avoid):
            return s
    return None


# ---------------------------------------------------------------- real functions on one probe


def probe_space(functions: dict, x: float, a: float, ceiling: int = 8, name: str = "probe") -> FiniteQqmSpace:
    """Evaluate the arrow distances between real functions at one probe ``(x, a)``.

    The values must be whole numbers not above ``ceiling`` so that they embed
    exactly in the truncated Lawvere quantale; the space is raw because a
    single probe does not carry the axioms of the full function space.
    """
    from qqm.sampling import exact_rho_hat_rr

    q = truncated_lawvere(ceiling)
    labels = list(functions)
    phi = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for i, u in enumerate(labels):
        for j, v in enumerate(labels):
            val = exact_rho_hat_rr(functions[u], functions[v])(x, a)
            if val != round(val) or val > ceiling:
                raise SpaceError(f"distance {val} does not embed in {q.name}")
            phi[i, j] = int(round(val))
    return FiniteQqmSpace.from_relation(labels, q, phi, raw=True, name=name)


def st_counterexample_space() -> FiniteQqmSpace:
    """Constant one, absolute value and identity at the probe ``(0, 2)``."""
    from qqm.sampling import ABS, IDENTITY, const_fun

    return probe_space({"f": const_fun(1.0), "g": ABS, "h": IDENTITY}, 0.0, 2.0, name="st-failures")


# ---------------------------------------------------------------- exact Lawvere relations


def lawvere_residual(a, b):
    """``a -o b`` in [0, inf]: ``b - a`` truncated at 0, and 0 when ``a`` is infinite."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    with np.errstate(invalid="ignore"):
        out = np.maximum(b - a, 0.0)
    return np.where(np.isinf(a), 0.0, out)


def lawvere_relation_sides(phi: np.ndarray, axiom: str):
    """Numeric sides ``(lhs, rhs)`` over ``[x, y, z]``; the axiom holds where ``lhs >= rhs``."""
    phi = np.asarray(phi, dtype=float)
    n = phi.shape[0]
    R = lawvere_residual
    xy = np.broadcast_to(phi[:, :, None], (n, n, n))
    yz = np.broadcast_to(phi[None, :, :], (n, n, n))
    xz = np.broadcast_to(phi[:, None, :], (n, n, n))
    yy = np.broadcast_to(np.diag(phi)[None, :, None], (n, n, n))
    sides = {
        TRANSITIVE: lambda: (xy + yz, xz),
        ST1: lambda: (xy + yz, xz + yy),
        ST2: lambda: (xy + R(yy, yz), xz),
        ST3: lambda: (R(yy, xy + yz), xz),
        ST4: lambda: (R(yy, xy) + yy + R(yy, yz), xz),
        LST: lambda: (R(yy, xy) + yz, xz),
    }
    return sides[axiom]()


def check_lawvere_relation(phi: np.ndarray, axiom: str) -> Verdict:
    """Exhaustive check of a [0, inf]-valued relation on a finite carrier, in exact float arithmetic.

    Entries should be small integers or infinity so that sums are exact.
    """
    phi = np.asarray(phi, dtype=float)
    d = np.diag(phi)
    if axiom == QUASI_REFLEXIVE:
        bad = phi < d[:, None]
    elif axiom == RIGHT_QUASI_REFLEXIVE:
        bad = phi < d[None, :]
    elif axiom == REFLEXIVE:
        bad = (d != 0)[:, None]
    else:
        lhs, rhs = lawvere_relation_sides(phi, axiom)
        bad = lhs < rhs
    hit = np.argwhere(bad)
    if len(hit) == 0:
        return Verdict.proof()
    return Verdict.refute({"index": [int(v) for v in hit[0]], "violations": int(bad.sum())})


def random_lawvere_relation(n: int, rng: np.random.Generator, top: int = 4, p_inf: float = 0.2,
                            both_sides: bool = False) -> np.ndarray:
    """Random integer-or-infinite relation that is transitive and left quasi-reflexive.

    With ``both_sides`` the diagonal is lowered until right quasi-reflexivity
    holds as well.
    """
    phi = rng.integers(0, top + 1, size=(n, n)).astype(float)
    phi[rng.random((n, n)) < p_inf] = np.inf
    while True:
        # join is numeric min and tensor is +, so closure is a min-plus product
        step = np.minimum(phi, (phi[:, :, None] + phi[None, :, :]).min(axis=1))
        d = step.min(axis=1)
        if both_sides:
            d = np.minimum(d, step.min(axis=0))
        np.fill_diagonal(step, d)
        if np.array_equal(step, phi):
            return phi
        phi = step
