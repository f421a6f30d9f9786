"""Finite quantales stored as index tables.

Elements are the integers ``0..size-1``.  The order, tensor, binary joins and
meets, and residuals are numpy tables, so the workbench can run exhaustive
checks with array operations.  Large function-space quantales compute their
residuals pointwise on demand instead of materializing the full table.
"""

from __future__ import annotations

import itertools
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from qqm.quantale import Quantale
from qqm.verdict import Verdict


class LatticeError(ValueError):
    pass


def _least_of(mask: np.ndarray, leq: np.ndarray, downsize: np.ndarray) -> np.ndarray:
    """For each row of ``mask`` pick the element below every masked element.

    In a finite poset the least element of a set, when it exists, has the
    strictly smallest down-set, so argmin over down-set sizes finds the
    candidate; a second pass confirms it is actually below every member.
    """
    big = np.iinfo(np.int64).max
    score = np.where(mask, downsize[None, :], big)
    cand = score.argmin(axis=1)
    ok = ~np.any(mask & ~leq[cand, :], axis=1) & mask[np.arange(len(cand)), cand]
    if not ok.all():
        raise LatticeError("set without a least element; not a lattice")
    return cand


def _closure(rel: np.ndarray) -> np.ndarray:
    rel = rel.copy()
    k = rel.shape[0]
    rel[np.arange(k), np.arange(k)] = True
    for m in range(k):
        rel |= rel[:, m : m + 1] & rel[m : m + 1, :]
    return rel


class FiniteQuantale(Quantale):
    """A quantale on ``range(size)`` given by order and tensor tables."""

    def __init__(
        self,
        names: Sequence[str],
        leq_table: np.ndarray,
        tensor_table: np.ndarray,
        unit: int,
        name: str = "finite",
        join_table: np.ndarray | None = None,
        meet_table: np.ndarray | None = None,
        residual_table: np.ndarray | None = None,
        values: Sequence | None = None,
    ):
        self.names = [str(n) for n in names]
        self.size = len(self.names)
        self.leq_table = np.asarray(leq_table, dtype=bool)
        self.tensor_table = np.asarray(tensor_table, dtype=np.int64)
        self.unit = int(unit)
        self.name = name
        self.values = list(values) if values is not None else None
        k = self.size
        if self.leq_table.shape != (k, k) or self.tensor_table.shape != (k, k):
            raise ValueError("table shapes do not match the element count")
        self._downsize = self.leq_table.sum(axis=0).astype(np.int64)
        self._join = join_table
        self._meet = meet_table
        self._residual = residual_table
        self.bottom = int(np.argmin(self._downsize))
        self.top = int(np.argmax(self._downsize))
        self._index = {n: i for i, n in enumerate(self.names)}

    def __repr__(self):
        return f"FiniteQuantale({self.name!r}, size={self.size})"

    # -- lookup
    def index(self, name) -> int:
        if isinstance(name, (int, np.integer)) and not isinstance(name, bool):
            return int(name)
        return self._index[str(name)]

    def name_of(self, i: int) -> str:
        return self.names[int(i)]

    @property
    def join_table(self) -> np.ndarray:
        if self._join is None:
            k = self.size
            L = self.leq_table
            ub = L[:, None, :] & L[None, :, :]
            self._join = _least_of(ub.reshape(k * k, k), L, self._downsize).reshape(k, k)
        return self._join

    @property
    def meet_table(self) -> np.ndarray:
        if self._meet is None:
            k = self.size
            L = self.leq_table
            lb = L.T[:, None, :] & L.T[None, :, :]
            # greatest lower bound = least element in the dual order
            LT = L.T
            upsize = L.sum(axis=1).astype(np.int64)
            self._meet = _least_of(lb.reshape(k * k, k), LT, upsize).reshape(k, k)
        return self._meet

    @property
    def residual_table(self) -> np.ndarray:
        if self._residual is None:
            k = self.size
            idx = np.arange(k)
            self._residual = self.residual_v(idx[:, None].repeat(k, 1), idx[None, :].repeat(k, 0))
        return self._residual

    # -- vectorized operations on index arrays
    def le_v(self, a, b):
        return self.leq_table[a, b]

    def tensor_v(self, a, b):
        return self.tensor_table[a, b]

    def join_v(self, a, b):
        return self.join_table[a, b]

    def meet_v(self, a, b):
        return self.meet_table[a, b]

    def residual_v(self, a, b):
        if self._residual is not None:
            return self._residual[a, b]
        a = np.asarray(a)
        b = np.asarray(b)
        shape = np.broadcast(a, b).shape
        a = np.broadcast_to(a, shape).ravel()
        b = np.broadcast_to(b, shape).ravel()
        # admissible z satisfy a (x) z below b; their join is the greatest one
        adm = self.leq_table[self.tensor_table[a][:, :], b[:, None]]
        score = np.where(adm, self._downsize[None, :], -1)
        cand = score.argmax(axis=1)
        if not np.all(adm[np.arange(len(cand)), cand]):
            raise LatticeError("empty admissible set for a residual")
        if np.any(adm & ~self.leq_table[:, cand].T):
            raise LatticeError("residual is not attained; tensor does not preserve joins")
        return cand.reshape(shape)

    # -- scalar interface shared with the other quantales
    def check_value(self, v):
        from qqm.quantale import ShapeError

        if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or not 0 <= v < self.size:
            raise ShapeError(f"{v!r} is not an element index of {self.name}")

    def leq(self, a, b) -> Verdict:
        self.check_value(a)
        self.check_value(b)
        return Verdict.exact(bool(self.leq_table[a, b]), witness={"left": self.name_of(a), "right": self.name_of(b)})

    def le(self, a, b) -> bool:
        return bool(self.leq_table[a, b])

    def tensor(self, a, b):
        self.check_value(a)
        self.check_value(b)
        return int(self.tensor_table[a, b])

    def meet(self, family):
        out = self.top
        for v in family:
            self.check_value(v)
            out = int(self.meet_table[out, v])
        return out

    def join(self, family):
        out = self.bottom
        for v in family:
            self.check_value(v)
            out = int(self.join_table[out, v])
        return out

    def residual(self, a, b):
        self.check_value(a)
        self.check_value(b)
        return int(self.residual_v(np.array([a]), np.array([b]))[0])

    def upper_chain(self, a, k: int = 16) -> list:
        return [int(b) for b in np.flatnonzero(self.leq_table[a])]

    def samples(self, rng=None, n: int = 8) -> list:
        return list(range(self.size))

    def up_set(self, a) -> np.ndarray:
        return np.flatnonzero(self.leq_table[a])

    # -- law checking
    def check_laws(self, assoc_limit: int = 64) -> dict:
        """Exhaustively check the quantale laws; returns law -> Verdict."""
        k = self.size
        L, T = self.leq_table, self.tensor_table
        idx = np.arange(k)
        out = {}

        def first(mask):
            hit = np.argwhere(mask)
            if len(hit) == 0:
                return Verdict.proof()
            return Verdict.refute([int(v) for v in hit[0]])

        out["reflexive"] = first(~L[idx, idx][:, None])
        out["antisymmetric"] = first(L & L.T & (idx[:, None] != idx[None, :]))
        out["transitive"] = first(L[:, :, None] & L[None, :, :] & ~L[:, None, :])
        try:
            self.join_table
            self.meet_table
            out["lattice"] = Verdict.proof()
        except LatticeError as e:
            out["lattice"] = Verdict.refute(str(e))
            return out
        out["commutative"] = first(T != T.T)
        out["unit"] = first(T[self.unit] != idx)
        out["integral"] = first(~L[:, self.unit][:, None])
        out["monotone"] = first(L[:, :, None] & ~L[T[:, None, :], T[None, :, :]])
        if k <= assoc_limit:
            out["associative"] = first(T[T[:, :, None], idx[None, None, :]] != T[idx[:, None, None], T[None, :, :]])
            J = self.join_table
            lhs = T[idx[:, None, None], J[None, :, :]]
            rhs = J[T[:, :, None], T[:, None, :]]
            out["join_preserving"] = first(lhs != rhs)
        else:
            out["associative"] = Verdict.sampled_ok(0, "skipped: too many elements")
            out["join_preserving"] = Verdict.sampled_ok(0, "skipped: too many elements")
        out["bottom_absorbing"] = first(T[:, self.bottom] != self.bottom)
        return out

    def is_quantale(self) -> bool:
        return all(bool(v) for v in self.check_laws().values())

    # -- serialization
    def to_json(self) -> dict:
        pairs = [[self.names[i], self.names[j]] for i, j in zip(*np.nonzero(self.leq_table))]
        return {
            "name": self.name,
            "elements": self.names,
            "order": pairs,
            "tensor": [[self.names[int(v)] for v in row] for row in self.tensor_table],
            "unit": self.names[self.unit],
        }

    @classmethod
    def from_json(cls, data) -> "FiniteQuantale":
        """Load from a dict or a path.

        ``order`` lists pairs ``[a, b]`` meaning a is below b; the reflexive
        transitive closure is taken.  The tensor is given either as a full
        matrix ``tensor`` of element names or as ``tensor_triples`` entries
        ``[a, b, c]`` read as a (x) b = c (symmetry is filled in).
        """
        if isinstance(data, (str, Path)):
            data = json.loads(Path(data).read_text())
        names = [str(n) for n in data["elements"]]
        pos = {n: i for i, n in enumerate(names)}
        k = len(names)
        rel = np.zeros((k, k), dtype=bool)
        for a, b in data["order"]:
            rel[pos[str(a)], pos[str(b)]] = True
        leq_table = _closure(rel)
        T = np.full((k, k), -1, dtype=np.int64)
        if "tensor" in data:
            for i, row in enumerate(data["tensor"]):
                for j, c in enumerate(row):
                    T[i, j] = pos[str(c)]
        for a, b, c in data.get("tensor_triples", []):
            T[pos[str(a)], pos[str(b)]] = pos[str(c)]
            T[pos[str(b)], pos[str(a)]] = pos[str(c)]
        if (T < 0).any():
            raise ValueError("tensor table is incomplete")
        return cls(names, leq_table, T, pos[str(data["unit"])], name=data.get("name", "finite"),
                   values=data.get("values"))


# ---------------------------------------------------------------- builders


def trivial() -> FiniteQuantale:
    """The one-element quantale; its only element is both unit and bottom."""
    return FiniteQuantale(["1"], np.ones((1, 1), dtype=bool), np.zeros((1, 1), dtype=np.int64), 0, name="one")


def boolean() -> FiniteQuantale:
    L = np.array([[True, True], [False, True]])
    T = np.array([[0, 0], [0, 1]])
    return FiniteQuantale(["false", "true"], L, T, 1, name="bool")


def godel_chain(n: int) -> FiniteQuantale:
    """Chain 0 < 1 < ... < n-1 with tensor = min; top is the unit."""
    idx = np.arange(n)
    return FiniteQuantale([str(i) for i in idx], idx[:, None] <= idx[None, :], np.minimum(idx[:, None], idx[None, :]),
                          n - 1, name=f"godel{n}")


def lukasiewicz_chain(n: int) -> FiniteQuantale:
    idx = np.arange(n)
    T = np.maximum(idx[:, None] + idx[None, :] - (n - 1), 0)
    return FiniteQuantale([str(i) for i in idx], idx[:, None] <= idx[None, :], T, n - 1, name=f"luk{n}")


def truncated_lawvere(ceiling: int) -> FiniteQuantale:
    """Radii ``0..ceiling`` plus a bottom ``inf``; sums past the ceiling saturate.

    Collapsing every value above ``ceiling`` to infinity is compatible with
    addition and with the reversed order, so the result is a quantale and a
    quotient of the Lawvere quantale.  Sums that stay at or below the ceiling
    are computed exactly.
    """
    n = ceiling + 2
    vals = [float(v) for v in range(ceiling + 1)] + [float("inf")]
    v = np.array(vals)
    L = v[:, None] >= v[None, :]
    s = v[:, None] + v[None, :]
    T = np.where(s > ceiling, n - 1, np.minimum(s, ceiling)).astype(np.int64)
    names = [str(i) for i in range(ceiling + 1)] + ["inf"]
    return FiniteQuantale(names, L, T, 0, name=f"lawvere<={ceiling}", values=vals)


def product(a: FiniteQuantale, b: FiniteQuantale) -> FiniteQuantale:
    ka, kb = a.size, b.size
    ia = np.repeat(np.arange(ka), kb)
    ib = np.tile(np.arange(kb), ka)
    L = a.leq_table[ia[:, None], ia[None, :]] & b.leq_table[ib[:, None], ib[None, :]]
    T = a.tensor_table[ia[:, None], ia[None, :]] * kb + b.tensor_table[ib[:, None], ib[None, :]]
    names = [f"({a.names[i]},{b.names[j]})" for i, j in zip(ia, ib)]
    return FiniteQuantale(names, L, T, a.unit * kb + b.unit, name=f"{a.name}x{b.name}")


def lifted(q: FiniteQuantale) -> FiniteQuantale:
    """Index 0 is the empty set; index i+1 is the singleton of element i."""
    k = q.size + 1
    L = np.zeros((k, k), dtype=bool)
    L[0, :] = True
    L[1:, 1:] = q.leq_table
    T = np.zeros((k, k), dtype=np.int64)
    T[1:, 1:] = q.tensor_table + 1
    names = ["∅"] + ["{" + n + "}" for n in q.names]
    return FiniteQuantale(names, L, T, q.unit + 1, name=f"L{q.name}")


def monotone_maps(q: FiniteQuantale, p: FiniteQuantale, cap: int = 200_000) -> np.ndarray:
    """All monotone maps q -> p as rows of p-indices, in lexicographic order."""
    total = p.size ** q.size
    if total > cap:
        raise ValueError(f"{total} candidate maps exceed the cap {cap}")
    grid = np.array(list(itertools.product(range(p.size), repeat=q.size)), dtype=np.int64).reshape(-1, q.size)
    i, j = np.nonzero(q.leq_table)
    ok = np.all(p.leq_table[grid[:, i], grid[:, j]], axis=1)
    return grid[ok]


class FunctionSpaceQuantale(FiniteQuantale):
    """Monotone maps ``X x Q -> P`` with pointwise order and tensor.

    Element ``e`` is stored as row ``E[e]`` of length ``|X| * |Q|`` holding
    P-indices, with position ``x * |Q| + a``.
    """

    def __init__(self, n_points: int, inner: FiniteQuantale, outer: FiniteQuantale, cap: int = 1500):
        mono = monotone_maps(inner, outer)
        count = len(mono) ** n_points
        if count > cap:
            raise ValueError(f"function space has {count} elements, above the cap {cap}")
        rows = [np.concatenate(combo) if combo else np.zeros(0, dtype=np.int64)
                for combo in itertools.product(mono, repeat=n_points)]
        E = np.array(rows, dtype=np.int64).reshape(count, n_points * inner.size)
        self.E = E
        self.n_points = n_points
        self.inner = inner
        self.outer = outer
        width = E.shape[1]
        self._radix = outer.size ** np.arange(width - 1, -1, -1, dtype=np.int64)
        codes = E @ self._radix
        order = np.argsort(codes)
        self._codes = codes[order]
        self._slot = order
        P = outer
        k = count
        leq_table = np.ones((k, k), dtype=bool)
        for c in range(width):
            leq_table &= P.leq_table[E[:, c][:, None], E[:, c][None, :]]
        T = self._encode(P.tensor_table[E[:, None, :], E[None, :, :]])
        J = self._encode(P.join_table[E[:, None, :], E[None, :, :]])
        M = self._encode(P.meet_table[E[:, None, :], E[None, :, :]])
        unit_row = np.full(width, P.unit)
        names = ["[" + ",".join(P.names[v] for v in row) + "]" for row in E]
        super().__init__(names, leq_table, T, int(self._encode(unit_row[None, :])[0]), name=f"({n_points},{inner.name})->{outer.name}",
                         join_table=J, meet_table=M)

    def _encode(self, rows: np.ndarray) -> np.ndarray:
        codes = rows @ self._radix
        pos = np.searchsorted(self._codes, codes)
        if np.any(pos >= len(self._codes)) or np.any(self._codes[np.minimum(pos, len(self._codes) - 1)] != codes):
            raise ValueError("row is not a monotone map")
        return self._slot[pos]

    def apply(self, f, x, a):
        return self.E[f, x * self.inner.size + a]

    def residual_v(self, a, b):
        a = np.asarray(a)
        b = np.asarray(b)
        shape = np.broadcast(a, b).shape
        a = np.broadcast_to(a, shape).ravel()
        b = np.broadcast_to(b, shape).ravel()
        P, Q = self.outer, self.inner
        pw = P.residual_table[self.E[a], self.E[b]].reshape(len(a), self.n_points, Q.size)
        out = np.empty_like(pw)
        for q in range(Q.size):
            acc = np.full(pw.shape[:2], P.top, dtype=np.int64)
            for r in Q.up_set(q):
                acc = P.meet_table[acc, pw[:, :, r]]
            out[:, :, q] = acc
        return self._encode(out.reshape(len(a), -1)).reshape(shape)

    def element(self, table) -> int:
        """Index of the map given as a nested ``[x][a] -> P-index`` table."""
        row = np.asarray(table, dtype=np.int64).reshape(1, -1)
        return int(self._encode(row)[0])


def function_space(n_points: int, inner: FiniteQuantale, outer: FiniteQuantale, cap: int = 1500) -> FunctionSpaceQuantale:
    return FunctionSpaceQuantale(n_points, inner, outer, cap=cap)


def standard_quantales() -> list[FiniteQuantale]:
    """Small quantales used by random tests and the mining scripts."""
    return [
        boolean(),
        godel_chain(3),
        godel_chain(4),
        lukasiewicz_chain(3),
        lukasiewicz_chain(4),
        truncated_lawvere(2),
        truncated_lawvere(3),
        product(boolean(), boolean()),
    ]


def quantale_by_name(name: str) -> FiniteQuantale:
    """``bool``, ``one``, ``godel<n>``, ``luk<n>``, ``lawvere<=<c>`` or ``<a>x<b>``."""
    if name == "bool":
        return boolean()
    if name == "one":
        return trivial()
    if name.startswith("godel"):
        return godel_chain(int(name[5:]))
    if name.startswith("luk"):
        return lukasiewicz_chain(int(name[3:]))
    if name.startswith("lawvere<="):
        return truncated_lawvere(int(name[9:]))
    if "x" in name:
        left, right = name.split("x", 1)
        return product(quantale_by_name(left), quantale_by_name(right))
    raise KeyError(f"unknown quantale {name!r}")
