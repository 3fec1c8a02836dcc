"""
Feasibility restoration.

Every constraint row gets a pair of nonnegative elastic variables,
``g(x) - p + n`` within the original row bounds, and the sum of elastics is
minimized under the original variable bounds. A small proximal term keeps
the first pass anchored at the point restoration started from; a positive
minimum is confirmed by a second pass without it before the problem is
declared locally infeasible.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, replace
import time

import numpy as np

from src import config
from src.formulations.nlp import NlpProblem, TermTable
from src.solver.options import IterationLog, SolverOptions, SolveStatus

logger = config.LOGGER


@dataclass(frozen=True, slots=True)
class RestorationResult:
    status: SolveStatus
    x: np.ndarray
    violation: float
    iterations: int
    infeasible: bool


def build_elastic_problem(problem: NlpProblem, x_ref: np.ndarray, prox_weight: float) -> NlpProblem:
    """
    Elastic L1 feasibility problem over (x, p, n).

    The first ``problem.n`` variables are the original ones; ``layout["p"]``
    and ``layout["n"]`` index the elastic pairs row by row.
    """
    n, m = problem.n, problem.m
    n2 = n + 2 * m
    src_terms = problem.terms
    con = src_terms.row >= 0

    def _remap(table: TermTable) -> TermTable:
        mono = np.where(table.mono == n, n2, table.mono)
        ang = np.where(table.ang == n + 1, n2 + 1, table.ang)
        return TermTable(table.row, table.coef, mono, table.kind, ang)

    base = _remap(src_terms.subset(con))
    rows = np.arange(m)
    p_idx = n + rows
    n_idx = n + m + rows

    def _linear(row: np.ndarray, coef: np.ndarray, var: np.ndarray) -> TermTable:
        count = len(var)
        mono = np.full((count, 3), n2, dtype=np.int64)
        mono[:, 0] = var
        return TermTable(
            row.astype(np.int64),
            coef.astype(float),
            mono,
            np.zeros(count, dtype=np.int8),
            np.full((count, 2), n2 + 1, dtype=np.int64),
        )

    elastic = _linear(np.concatenate([rows, rows]), np.concatenate([-np.ones(m), np.ones(m)]), np.concatenate([p_idx, n_idx]))
    obj_lin = _linear(-np.ones(2 * m, dtype=np.int64), np.ones(2 * m), np.concatenate([p_idx, n_idx]))

    free = np.flatnonzero(problem.x_lower < problem.x_upper)
    parts = [base, elastic, obj_lin]
    if prox_weight > 0.0 and free.size:
        damp = np.minimum(1.0, 1.0 / np.maximum(np.abs(x_ref[free]), 1e-12)) ** 2
        w = 0.5 * prox_weight * damp
        quad_mono = np.full((free.size, 3), n2, dtype=np.int64)
        quad_mono[:, 0] = free
        quad_mono[:, 1] = free
        parts.append(
            TermTable(
                -np.ones(free.size, dtype=np.int64),
                w,
                quad_mono,
                np.zeros(free.size, dtype=np.int8),
                np.full((free.size, 2), n2 + 1, dtype=np.int64),
            )
        )
        parts.append(_linear(-np.ones(free.size, dtype=np.int64), -2.0 * w * x_ref[free], free))
    terms = TermTable(
        np.concatenate([t.row for t in parts]),
        np.concatenate([t.coef for t in parts]),
        np.concatenate([t.mono for t in parts]),
        np.concatenate([t.kind for t in parts]),
        np.concatenate([t.ang for t in parts]),
    )

    g = problem.constraints(x_ref)
    over = np.where(np.isfinite(problem.g_upper), np.maximum(g - problem.g_upper, 0.0), 0.0)
    under = np.where(np.isfinite(problem.g_lower), np.maximum(problem.g_lower - g, 0.0), 0.0)
    names = (
        problem.var_names
        + tuple(f"elastic_p[{name}]" for name in problem.con_names)
        + tuple(f"elastic_n[{name}]" for name in problem.con_names)
    )
    return NlpProblem(
        tag=f"{problem.tag}/restoration",
        load_factor=problem.load_factor,
        convex=problem.convex,
        var_names=names,
        x_lower=np.concatenate([problem.x_lower, np.zeros(2 * m)]),
        x_upper=np.concatenate([problem.x_upper, np.full(2 * m, np.inf)]),
        x_init=np.concatenate([x_ref, over, under]),
        con_names=problem.con_names,
        g_lower=problem.g_lower,
        g_upper=problem.g_upper,
        terms=terms,
        layout={"x": np.arange(n), "p": p_idx, "n": n_idx},
        row_groups=problem.row_groups,
        metadata={"restoration_of": problem.tag},
    )


def _elastic_sum(problem: NlpProblem, x: np.ndarray) -> float:
    return float(np.sum(x[problem.layout["p"]]) + np.sum(x[problem.layout["n"]]))


def restore_feasibility(
    problem: NlpProblem,
    x: np.ndarray,
    options: SolverOptions,
    max_iterations: int,
    deadline: float,
    sink: Callable[[IterationLog], None] | None = None,
    prox_weight: float = 1e-2,
) -> RestorationResult:
    """Minimize the L1 constraint violation from ``x``; decide local infeasibility."""
    from src.solver.ipm import InteriorPointSolver

    sub_options = options.model_copy(update={"max_iterations": max_iterations, "restoration": False})
    used = 0
    elastic = build_elastic_problem(problem, x, prox_weight)
    outcome = InteriorPointSolver(elastic, sub_options, sink, deadline, restoration_phase=True).run()
    used += outcome.iterations
    violation = _elastic_sum(elastic, outcome.x)

    if outcome.converged and violation > options.infeasibility_threshold:
        confirm = replace(build_elastic_problem(problem, outcome.x[: problem.n], 0.0), x_init=outcome.x)
        remaining = max(max_iterations - used, 1)
        sub_options = sub_options.model_copy(update={"max_iterations": remaining})
        if time.perf_counter() < deadline:
            second = InteriorPointSolver(confirm, sub_options, sink, deadline, restoration_phase=True).run()
            used += second.iterations
            if second.converged:
                outcome = second
                violation = _elastic_sum(confirm, second.x)

    infeasible = outcome.converged and violation > options.infeasibility_threshold
    logger.info(
        "%s t=%.4f: restoration %s, minimum violation %.3e%s",
        problem.tag,
        problem.load_factor,
        outcome.status.value,
        violation,
        " (infeasible)" if infeasible else "",
    )
    return RestorationResult(
        status=outcome.status,
        x=outcome.x[: problem.n].copy(),
        violation=violation,
        iterations=used,
        infeasible=infeasible,
    )
