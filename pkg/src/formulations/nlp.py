"""
Solver-agnostic smooth NLP instances.

Every objective and constraint row is a sum of terms of the form

    coef * x[i] * x[j] * x[k] * T(x[a] - x[b])

with T one of {1, cos, sin}. Unused monomial slots point at a constant-one
sentinel and unused angle slots at a constant-zero sentinel, so a whole
problem evaluates, differentiates and forms Lagrangian Hessians with a few
vectorized numpy passes. Polar power flow, W-space flows, cone constraints,
3x3 determinants and QC envelopes all fit this shape.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Literal

import numpy as np
from scipy import sparse

from src import config
from src.errors import ProblemStructureError

logger = config.LOGGER

TrigKind = Literal["none", "cos", "sin"]
_TRIG_CODE = {"none": 0, "cos": 1, "sin": 2}
MONO_SLOTS = 3


@dataclass(frozen=True, slots=True)
class Term:
    coef: float
    vars: tuple[int, ...] = ()
    trig: TrigKind = "none"
    angle: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if len(self.vars) > MONO_SLOTS:
            raise ProblemStructureError(f"term degree {len(self.vars)} exceeds {MONO_SLOTS}")
        if (self.trig == "none") != (self.angle is None):
            raise ProblemStructureError("trigonometric terms need exactly one angle pair")


def const(c: float) -> Term:
    return Term(c)


def lin(c: float, i: int) -> Term:
    return Term(c, (i,))


def prod(c: float, *idx: int) -> Term:
    return Term(c, tuple(idx))


def trig(c: float, kind: TrigKind, a: int, b: int, *idx: int) -> Term:
    """c * prod(x[idx]) * kind(x[a] - x[b])."""
    return Term(c, tuple(idx), kind, (a, b))


@dataclass(frozen=True)
class TermTable:
    """Columnar storage of terms; ``row`` is -1 for objective terms."""
    row: np.ndarray
    coef: np.ndarray
    mono: np.ndarray
    kind: np.ndarray
    ang: np.ndarray

    @classmethod
    def from_terms(cls, rows: Sequence[int], terms: Sequence[Term], n: int) -> TermTable:
        one, zero = n, n + 1
        count = len(terms)
        mono = np.full((count, MONO_SLOTS), one, dtype=np.int64)
        ang = np.full((count, 2), zero, dtype=np.int64)
        kind = np.zeros(count, dtype=np.int8)
        coef = np.empty(count)
        for k, term in enumerate(terms):
            coef[k] = term.coef
            mono[k, : len(term.vars)] = term.vars
            kind[k] = _TRIG_CODE[term.trig]
            if term.angle is not None:
                ang[k] = term.angle
        return cls(np.asarray(rows, dtype=np.int64), coef, mono, kind, ang)

    def __len__(self) -> int:
        return len(self.coef)

    def subset(self, mask: np.ndarray) -> TermTable:
        return TermTable(self.row[mask], self.coef[mask], self.mono[mask], self.kind[mask], self.ang[mask])


@dataclass(slots=True)
class _Pieces:
    """Per-term factors shared by value and derivative passes."""
    xm: np.ndarray
    m_all: np.ndarray
    m_wo: np.ndarray
    tv: np.ndarray
    td: np.ndarray
    tdd: np.ndarray


def _pieces(table: TermTable, xe: np.ndarray) -> _Pieces:
    xm = xe[table.mono]
    m_wo = np.stack([xm[:, 1] * xm[:, 2], xm[:, 0] * xm[:, 2], xm[:, 0] * xm[:, 1]], axis=1)
    phi = xe[table.ang[:, 0]] - xe[table.ang[:, 1]]
    c, s = np.cos(phi), np.sin(phi)
    is_cos, is_sin = table.kind == 1, table.kind == 2
    tv = np.where(is_cos, c, np.where(is_sin, s, 1.0))
    td = np.where(is_cos, -s, np.where(is_sin, c, 0.0))
    tdd = np.where(is_cos, -c, np.where(is_sin, -s, 0.0))
    return _Pieces(xm, xm[:, 0] * m_wo[:, 0], m_wo, tv, td, tdd)


def _first_order(table: TermTable, p: _Pieces, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(term row, variable, value) triples of first derivatives, sentinels dropped."""
    rows, cols, vals = [], [], []
    for k in range(MONO_SLOTS):
        rows.append(table.row)
        cols.append(table.mono[:, k])
        vals.append(table.coef * p.m_wo[:, k] * p.tv)
    d_ang = table.coef * p.m_all * p.td
    rows += [table.row, table.row]
    cols += [table.ang[:, 0], table.ang[:, 1]]
    vals += [d_ang, -d_ang]
    r, c, v = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    keep = c < n
    return r[keep], c[keep], v[keep]


def _second_order(table: TermTable, p: _Pieces, weights: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full symmetric (i, j, value) triples of the weighted term Hessians."""
    w = weights * table.coef
    ii, jj, vv = [], [], []

    def _add(a: np.ndarray, b: np.ndarray, val: np.ndarray) -> None:
        ii.extend((a, b))
        jj.extend((b, a))
        vv.extend((val, val))

    for k, l, other in ((0, 1, 2), (0, 2, 1), (1, 2, 0)):
        _add(table.mono[:, k], table.mono[:, l], w * p.xm[:, other] * p.tv)
    sign_ang = ((table.ang[:, 0], 1.0), (table.ang[:, 1], -1.0))
    for k in range(MONO_SLOTS):
        for a, sign in sign_ang:
            _add(table.mono[:, k], a, sign * w * p.m_wo[:, k] * p.td)
    curv = w * p.m_all * p.tdd
    a, b = table.ang[:, 0], table.ang[:, 1]
    ii.extend((a, b, a, b))
    jj.extend((a, b, b, a))
    vv.extend((curv, curv, -curv, -curv))
    i, j, v = np.concatenate(ii), np.concatenate(jj), np.concatenate(vv)
    keep = (i < n) & (j < n)
    return i[keep], j[keep], v[keep]


@dataclass(frozen=True)
class NlpProblem:
    """
    min f(x)  s.t.  g_lower <= g(x) <= g_upper,  x_lower <= x <= x_upper.

    Rows with g_lower == g_upper are equalities. ``layout`` maps block names
    (e.g. ``"vm"``, ``"pg"``) to variable index arrays for solution decoding.
    """
    tag: str
    load_factor: float
    convex: bool
    var_names: tuple[str, ...]
    x_lower: np.ndarray
    x_upper: np.ndarray
    x_init: np.ndarray
    con_names: tuple[str, ...]
    g_lower: np.ndarray
    g_upper: np.ndarray
    terms: TermTable
    layout: dict[str, np.ndarray] = field(default_factory=dict)
    row_groups: dict[str, np.ndarray] = field(default_factory=dict)
    metadata: dict[str, object] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.var_names)

    @property
    def m(self) -> int:
        return len(self.con_names)

    @cached_property
    def _objective_terms(self) -> TermTable:
        return self.terms.subset(self.terms.row < 0)

    @cached_property
    def _constraint_terms(self) -> TermTable:
        return self.terms.subset(self.terms.row >= 0)

    @cached_property
    def equality_mask(self) -> np.ndarray:
        return self.g_lower == self.g_upper

    def _extended(self, x: np.ndarray) -> np.ndarray:
        return np.concatenate([np.asarray(x, dtype=float), [1.0, 0.0]])

    def validate(self) -> None:
        """Reject structurally inconsistent instances before any iteration."""
        n = self.n
        if n == 0:
            raise ProblemStructureError(f"{self.tag}: problem declares no variables")
        bad = np.flatnonzero(self.x_lower > self.x_upper)
        if bad.size:
            error = f"{self.tag}: variable {self.var_names[bad[0]]} has lower bound above upper bound"
            logger.error(error)
            raise ProblemStructureError(error)
        bad = np.flatnonzero(self.g_lower > self.g_upper)
        if bad.size:
            error = f"{self.tag}: constraint {self.con_names[bad[0]]} has lower bound above upper bound"
            logger.error(error)
            raise ProblemStructureError(error)
        refs = np.concatenate([self.terms.mono.ravel(), self.terms.ang.ravel()])
        if refs.size and (refs.min() < 0 or refs.max() > n + 1):
            error = f"{self.tag}: a term references an undeclared variable"
            logger.error(error)
            raise ProblemStructureError(error)
        if self.terms.row.size and self.terms.row.max() >= self.m:
            error = f"{self.tag}: a term references an undeclared constraint row"
            logger.error(error)
            raise ProblemStructureError(error)

    def objective(self, x: np.ndarray) -> float:
        table = self._objective_terms
        p = _pieces(table, self._extended(x))
        return float(np.sum(table.coef * p.m_all * p.tv))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        table = self._objective_terms
        _, cols, vals = _first_order(table, _pieces(table, self._extended(x)), self.n)
        return np.bincount(cols, weights=vals, minlength=self.n)

    def constraints(self, x: np.ndarray) -> np.ndarray:
        table = self._constraint_terms
        p = _pieces(table, self._extended(x))
        return np.bincount(table.row, weights=table.coef * p.m_all * p.tv, minlength=self.m)

    def jacobian(self, x: np.ndarray) -> sparse.csr_matrix:
        table = self._constraint_terms
        rows, cols, vals = _first_order(table, _pieces(table, self._extended(x)), self.n)
        return sparse.csr_matrix((vals, (rows, cols)), shape=(self.m, self.n))

    def hessian(self, x: np.ndarray, obj_factor: float, lam: np.ndarray) -> sparse.csc_matrix:
        """Hessian of obj_factor * f + lam' g, full symmetric."""
        table = self.terms
        weights = np.where(table.row < 0, obj_factor, 0.0)
        con = table.row >= 0
        weights[con] = np.asarray(lam)[table.row[con]]
        i, j, v = _second_order(table, _pieces(table, self._extended(x)), weights, self.n)
        return sparse.csc_matrix((v, (i, j)), shape=(self.n, self.n))

    @cached_property
    def jacobian_structure(self) -> tuple[np.ndarray, np.ndarray]:
        """Structurally nonzero (row, col) Jacobian positions, deduplicated."""
        table = self._constraint_terms
        ones = _Pieces(*(np.ones((len(table), MONO_SLOTS)), np.ones(len(table)), np.ones((len(table), MONO_SLOTS)),
                         np.ones(len(table)), np.ones(len(table)), np.ones(len(table))))
        rows, cols, _ = _first_order(table, ones, self.n)
        pairs = np.unique(np.stack([rows, cols], axis=1), axis=0) if rows.size else np.empty((0, 2), dtype=np.int64)
        return pairs[:, 0], pairs[:, 1]

    @cached_property
    def gradient_structure(self) -> np.ndarray:
        table = self._objective_terms
        ones = _Pieces(np.ones((len(table), MONO_SLOTS)), np.ones(len(table)), np.ones((len(table), MONO_SLOTS)),
                       np.ones(len(table)), np.ones(len(table)), np.ones(len(table)))
        _, cols, _ = _first_order(table, ones, self.n)
        return np.unique(cols)

    def with_initial_point(self, x0: np.ndarray) -> NlpProblem:
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (self.n,):
            raise ProblemStructureError(f"{self.tag}: initial point has shape {x0.shape}, expected ({self.n},)")
        return replace(self, x_init=x0.copy())

    def constraint_rows(self, group: str) -> np.ndarray:
        return self.row_groups.get(group, np.empty(0, dtype=np.int64))

    def describe(self) -> dict[str, int]:
        return {
            "variables": self.n,
            "constraints": self.m,
            "equalities": int(self.equality_mask.sum()),
            "terms": len(self.terms),
        }


class NlpBuilder:
    """Incrementally declare variables, rows and objective terms, then freeze."""

    def __init__(self, tag: str, load_factor: float = 1.0, convex: bool = False) -> None:
        self.tag = tag
        self.load_factor = load_factor
        self.convex = convex
        self._names: list[str] = []
        self._lower: list[float] = []
        self._upper: list[float] = []
        self._init: list[float] = []
        self._con_names: list[str] = []
        self._g_lower: list[float] = []
        self._g_upper: list[float] = []
        self._term_rows: list[int] = []
        self._terms: list[Term] = []
        self._layout: dict[str, list[int]] = {}
        self._groups: dict[str, list[int]] = {}
        self.metadata: dict[str, object] = {}

    @property
    def n(self) -> int:
        return len(self._names)

    def add_var(self, name: str, lower: float, upper: float, init: float, block: str | None = None) -> int:
        idx = len(self._names)
        self._names.append(name)
        self._lower.append(lower)
        self._upper.append(upper)
        self._init.append(float(np.clip(init, lower, upper)))
        if block is not None:
            self._layout.setdefault(block, []).append(idx)
        return idx

    def add_constraint(self, name: str, terms: Sequence[Term], lower: float, upper: float, group: str) -> int:
        row = len(self._con_names)
        self._con_names.append(name)
        self._g_lower.append(lower)
        self._g_upper.append(upper)
        self._groups.setdefault(group, []).append(row)
        self._term_rows.extend([row] * len(terms))
        self._terms.extend(terms)
        return row

    def add_equality(self, name: str, terms: Sequence[Term], group: str, rhs: float = 0.0) -> int:
        return self.add_constraint(name, terms, rhs, rhs, group)

    def add_upper(self, name: str, terms: Sequence[Term], group: str, bound: float = 0.0) -> int:
        return self.add_constraint(name, terms, -np.inf, bound, group)

    def add_objective(self, terms: Sequence[Term]) -> None:
        self._term_rows.extend([-1] * len(terms))
        self._terms.extend(terms)

    def initial_value(self, idx: int) -> float:
        return self._init[idx]

    def set_initial(self, idx: int, value: float) -> None:
        self._init[idx] = float(np.clip(value, self._lower[idx], self._upper[idx]))

    def evaluate(self, terms: Sequence[Term]) -> float:
        """Evaluate a term list at the current initial values."""
        xe = self._init + [1.0, 0.0]
        total = 0.0
        for term in terms:
            val = term.coef
            for i in term.vars:
                val *= xe[i]
            if term.angle is not None:
                phi = xe[term.angle[0]] - xe[term.angle[1]]
                val *= np.cos(phi) if term.trig == "cos" else np.sin(phi)
            total += val
        return float(total)

    def build(self) -> NlpProblem:
        problem = NlpProblem(
            tag=self.tag,
            load_factor=self.load_factor,
            convex=self.convex,
            var_names=tuple(self._names),
            x_lower=np.asarray(self._lower, dtype=float),
            x_upper=np.asarray(self._upper, dtype=float),
            x_init=np.asarray(self._init, dtype=float),
            con_names=tuple(self._con_names),
            g_lower=np.asarray(self._g_lower, dtype=float),
            g_upper=np.asarray(self._g_upper, dtype=float),
            terms=TermTable.from_terms(self._term_rows, self._terms, len(self._names)),
            layout={k: np.asarray(v, dtype=np.int64) for k, v in self._layout.items()},
            row_groups={k: np.asarray(v, dtype=np.int64) for k, v in self._groups.items()},
            metadata=dict(self.metadata),
        )
        problem.validate()
        logger.info("Built %s at t=%.4f: %s", self.tag, self.load_factor, problem.describe())
        return problem
