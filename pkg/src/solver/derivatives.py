from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src import config
from src.formulations.nlp import NlpProblem

logger = config.LOGGER

FD_STEP = 1e-6


@dataclass(frozen=True, slots=True)
class DerivativeCheck:
    max_error: float
    worst_entry: str
    entries: int


def check_derivatives(problem: NlpProblem, point: np.ndarray) -> DerivativeCheck:
    """
    Compare every structurally nonzero gradient and Jacobian entry with a
    central finite difference.

    Steps are ``1e-6 * max(1, |x_j|)``; the error of an entry is
    ``|fd - exact| / max(1, |exact|)``. Columns are scanned in index order so
    the report is deterministic.
    """
    x = np.asarray(point, dtype=float)
    grad = problem.gradient(x)
    jac = problem.jacobian(x).tocsc()
    jac_rows, jac_cols = problem.jacobian_structure
    grad_cols = set(problem.gradient_structure.tolist())
    rows_by_col: dict[int, list[int]] = {}
    for r, c in zip(jac_rows.tolist(), jac_cols.tolist(), strict=True):
        rows_by_col.setdefault(c, []).append(r)

    worst, worst_entry, entries = 0.0, "", 0
    for j in range(problem.n):
        if j not in grad_cols and j not in rows_by_col:
            continue
        h = FD_STEP * max(1.0, abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        if j in grad_cols:
            fd = (problem.objective(xp) - problem.objective(xm)) / (2.0 * h)
            err = abs(fd - grad[j]) / max(1.0, abs(grad[j]))
            entries += 1
            if err > worst:
                worst, worst_entry = err, f"objective / {problem.var_names[j]}"
        rows = rows_by_col.get(j)
        if rows:
            fd_col = (problem.constraints(xp)[rows] - problem.constraints(xm)[rows]) / (2.0 * h)
            exact = jac[rows, j].toarray().ravel()
            errs = np.abs(fd_col - exact) / np.maximum(1.0, np.abs(exact))
            entries += len(rows)
            k = int(np.argmax(errs))
            if errs[k] > worst:
                worst, worst_entry = float(errs[k]), f"{problem.con_names[rows[k]]} / {problem.var_names[j]}"
    logger.info("Derivative check on %s: %d entries, max relative error %.3e", problem.tag, entries, worst)
    return DerivativeCheck(max_error=worst, worst_entry=worst_entry, entries=entries)
