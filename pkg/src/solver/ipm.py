"""
Primal-dual interior-point method for ``NlpProblem`` instances.

The problem ``g_lower <= g(x) <= g_upper, x_lower <= x <= x_upper`` is
rewritten as ``ce(x) = 0`` and ``ci(x) + z = 0`` with slacks ``z > 0``.
Each iteration solves the reduced Newton system

    [ H + Ji' (mu / z) Ji + dw I    Je' ] [dx  ]   [ -N  ]
    [ Je                         -dc I  ] [dlam] = [ -ce ]

with a sparse LU factorization, applies the fraction-to-the-boundary rule,
and backtracks on an l1 exact-penalty barrier merit. The barrier parameter
is driven down monotonically once its subproblem is solved. When progress
stalls the solver hands over to feasibility restoration, which also decides
local infeasibility.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
import math
import time
from typing import TYPE_CHECKING

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from src import config
from src.formulations.nlp import NlpProblem
from src.solver.options import IterationLog, SolveOutcome, SolverOptions, SolveStatus

if TYPE_CHECKING:
    from src.solver.restoration import RestorationResult

logger = config.LOGGER

IterationSink = Callable[[IterationLog], None]

_ARMIJO = 1e-4
_BACKTRACK = 0.5
_MAX_BACKTRACKS = 40
_PENALTY_RHO = 0.1
_BARRIER_KAPPA = 10.0
_MULTIPLIER_KAPPA = 1e10
_DIVERGENCE = 1e10
_STAGNATION_WINDOW = 30
_SCALE_TARGET = 100.0


@dataclass(slots=True)
class _Reformulation:
    """Sparse selectors mapping (g(x), x) onto ce(x) and ci(x)."""
    eq_g: sparse.csr_matrix
    eq_x: sparse.csr_matrix
    eq_c: np.ndarray
    in_g: sparse.csr_matrix
    in_x: sparse.csr_matrix
    in_c: np.ndarray
    eq_rows: np.ndarray
    fixed_vars: np.ndarray
    up_rows: np.ndarray
    lo_rows: np.ndarray
    up_vars: np.ndarray
    lo_vars: np.ndarray

    @property
    def ne(self) -> int:
        return len(self.eq_c)

    @property
    def ni(self) -> int:
        return len(self.in_c)


def _selector(rows: np.ndarray, signs: np.ndarray, offset: int, total: int, width: int) -> sparse.csr_matrix:
    k = np.arange(len(rows)) + offset
    return sparse.csr_matrix((signs, (k, rows)), shape=(total, width))


def _reformulate(problem: NlpProblem) -> _Reformulation:
    n, m = problem.n, problem.m
    eq = problem.equality_mask
    eq_rows = np.flatnonzero(eq)
    fixed = np.flatnonzero(problem.x_lower == problem.x_upper)
    free = problem.x_lower < problem.x_upper
    up_rows = np.flatnonzero(~eq & np.isfinite(problem.g_upper))
    lo_rows = np.flatnonzero(~eq & np.isfinite(problem.g_lower))
    up_vars = np.flatnonzero(free & np.isfinite(problem.x_upper))
    lo_vars = np.flatnonzero(free & np.isfinite(problem.x_lower))

    ne = len(eq_rows) + len(fixed)
    eq_g = _selector(eq_rows, np.ones(len(eq_rows)), 0, ne, m)
    eq_x = _selector(fixed, np.ones(len(fixed)), len(eq_rows), ne, n)
    eq_c = np.concatenate([-problem.g_lower[eq_rows], -problem.x_lower[fixed]])

    ni = len(up_rows) + len(lo_rows) + len(up_vars) + len(lo_vars)
    n_g = len(up_rows) + len(lo_rows)
    in_g = (
        _selector(up_rows, np.ones(len(up_rows)), 0, ni, m)
        + _selector(lo_rows, -np.ones(len(lo_rows)), len(up_rows), ni, m)
    ).tocsr()
    in_x = (
        _selector(up_vars, np.ones(len(up_vars)), n_g, ni, n)
        + _selector(lo_vars, -np.ones(len(lo_vars)), n_g + len(up_vars), ni, n)
    ).tocsr()
    in_c = np.concatenate(
        [-problem.g_upper[up_rows], problem.g_lower[lo_rows], -problem.x_upper[up_vars], problem.x_lower[lo_vars]]
    )
    return _Reformulation(eq_g, eq_x, eq_c, in_g, in_x, in_c, eq_rows, fixed, up_rows, lo_rows, up_vars, lo_vars)


@dataclass(slots=True)
class _Point:
    """Problem functions evaluated at one primal point."""
    x: np.ndarray
    f: float
    g: np.ndarray
    ce: np.ndarray
    ci: np.ndarray


@dataclass(slots=True)
class _Derivatives:
    grad: np.ndarray
    jac: sparse.csr_matrix
    je: sparse.csr_matrix
    ji: sparse.csr_matrix


def _push_inside(problem: NlpProblem, x: np.ndarray) -> np.ndarray:
    """Clip into the box and move free variables off their bounds."""
    lo, hi = problem.x_lower, problem.x_upper
    x = np.clip(x, lo, hi)
    free = lo < hi
    with np.errstate(invalid="ignore"):
        width = hi - lo
        push_lo = np.minimum(1e-2 * np.maximum(1.0, np.abs(lo)), 0.5 * width)
        push_hi = np.minimum(1e-2 * np.maximum(1.0, np.abs(hi)), 0.5 * width)
        x = np.where(free & np.isfinite(lo), np.maximum(x, lo + push_lo), x)
        return np.where(free & np.isfinite(hi), np.minimum(x, hi - push_hi), x)


def _fraction_to_boundary(v: np.ndarray, dv: np.ndarray, tau: float) -> float:
    shrinking = dv < 0.0
    if not np.any(shrinking):
        return 1.0
    return float(min(1.0, tau * np.min(-v[shrinking] / dv[shrinking])))


def _violation(problem: NlpProblem, x: np.ndarray, g: np.ndarray) -> float:
    """Max-norm violation of the original constraints and bounds."""
    parts = [
        np.maximum(g - problem.g_upper, 0.0),
        np.maximum(problem.g_lower - g, 0.0),
        np.maximum(x - problem.x_upper, 0.0),
        np.maximum(problem.x_lower - x, 0.0),
    ]
    return float(max((np.max(p) for p in parts if p.size), default=0.0))


class InteriorPointSolver:
    """Single-use solver bound to one problem; owns all of its workspace."""

    def __init__(
        self,
        problem: NlpProblem,
        options: SolverOptions,
        sink: IterationSink | None = None,
        deadline: float | None = None,
        restoration_phase: bool = False,
    ) -> None:
        self.problem = problem
        self.options = options
        self.sink = sink
        self.start = time.perf_counter()
        self.deadline = deadline if deadline is not None else self.start + options.time_limit
        self.restoration_phase = restoration_phase
        self.allow_restoration = options.restoration and not restoration_phase
        self.form = _reformulate(problem)
        self.scale = 1.0
        self.barrier = options.initial_barrier
        self.barrier_floor = options.kkt_tolerance / 10.0
        self.penalty = 1.0
        self.iterations = 0
        self.restorations = 0
        self.last_delta_w = 0.0
        self.barrier_history: list[float] = []

    # ---- evaluation -------------------------------------------------------

    def _point(self, x: np.ndarray) -> _Point:
        p, form = self.problem, self.form
        g = p.constraints(x)
        ce = form.eq_g @ g + form.eq_x @ x + form.eq_c
        ci = form.in_g @ g + form.in_x @ x + form.in_c
        return _Point(x, p.objective(x), g, ce, ci)

    def _derivatives(self, x: np.ndarray) -> _Derivatives:
        form = self.form
        jac = self.problem.jacobian(x)
        je = (form.eq_g @ jac + form.eq_x).tocsr()
        ji = (form.in_g @ jac + form.in_x).tocsr()
        return _Derivatives(self.problem.gradient(x), jac, je, ji)

    def _merit(self, pt: _Point, z: np.ndarray) -> float:
        infeas = np.sum(np.abs(pt.ce)) + np.sum(np.abs(pt.ci + z))
        return float(self.scale * pt.f - self.barrier * np.sum(np.log(z)) + self.penalty * infeas)

    # ---- linear algebra ---------------------------------------------------

    def _newton_step(
        self, m0: sparse.spmatrix, je: sparse.csr_matrix, rhs: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, float] | None:
        """Solve the regularized reduced system; None when regularization blows up."""
        n, ne = self.problem.n, self.form.ne
        eye_n = sparse.identity(n, format="csc")
        eye_e = sparse.identity(ne, format="csc")
        floor = max(self.options.regularization_floor, 1e-20)
        delta_w, delta_c = 0.0, 0.0
        for _ in range(60):
            if ne:
                kkt = sparse.bmat([[m0 + delta_w * eye_n, je.T], [je, -delta_c * eye_e]], format="csc")
            else:
                kkt = (m0 + delta_w * eye_n).tocsc()
            singular = False
            try:
                sol = spla.splu(kkt).solve(rhs)
                singular = not np.all(np.isfinite(sol))
            except RuntimeError:
                singular = True
            if not singular:
                dx = sol[:n]
                dxx = float(dx @ dx)
                curvature = float(dx @ (m0 @ dx)) + delta_w * dxx
                if curvature >= 1e-12 * dxx or dxx < 1e-30:
                    if delta_w > 0.0:
                        self.last_delta_w = delta_w
                    return dx, sol[n:], delta_w
            elif ne:
                delta_c = 1e-8 * self.barrier**0.25
            if delta_w == 0.0:
                delta_w = 1e-4 if self.last_delta_w == 0.0 else max(floor, self.last_delta_w / 3.0)
            else:
                delta_w *= 100.0 if self.last_delta_w == 0.0 else 8.0
            if delta_w > 1e40:
                break
        return None

    # ---- bookkeeping ------------------------------------------------------

    def _initial_slacks(self, ci: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        z = np.maximum(-ci, self.barrier)
        return z, self.barrier / z

    def _errors(
        self, lx: np.ndarray, pt: _Point, z: np.ndarray, lam: np.ndarray, mu: np.ndarray
    ) -> tuple[float, float, float, float]:
        """(overall KKT error, barrier-subproblem error, primal, dual) with IPOPT-style scaling."""
        s_max = 100.0
        count = len(lam) + len(mu)
        s_d = max(s_max, (np.sum(np.abs(lam)) + np.sum(np.abs(mu))) / count) / s_max if count else 1.0
        s_c = max(s_max, np.sum(np.abs(mu)) / len(mu)) / s_max if len(mu) else 1.0
        dual = float(np.max(np.abs(lx), initial=0.0))
        primal = float(max(np.max(np.abs(pt.ce), initial=0.0), np.max(np.abs(pt.ci + z), initial=0.0)))
        comp = z * mu
        overall = max(dual / s_d, primal, float(np.max(comp, initial=0.0)) / s_c)
        barrier_err = max(dual / s_d, primal, float(np.max(np.abs(comp - self.barrier), initial=0.0)) / s_c)
        return overall, barrier_err, primal, dual

    def _log(self, pt: _Point, dual: float, alpha: float, delta_w: float) -> None:
        entry = IterationLog(
            iteration=self.iterations,
            objective=pt.f,
            primal_infeasibility=_violation(self.problem, pt.x, pt.g),
            dual_infeasibility=dual,
            barrier=self.barrier,
            step_length=alpha,
            regularization=delta_w,
            restoration=self.restoration_phase,
        )
        if self.sink is not None:
            self.sink(entry)

    def _outcome(
        self,
        status: SolveStatus,
        pt: _Point,
        lam: np.ndarray,
        mu: np.ndarray,
        kkt: float,
        message: str = "",
        infeasibility: float | None = None,
    ) -> SolveOutcome:
        p, form = self.problem, self.form
        lam_u, mu_u = lam / self.scale, mu / self.scale
        n_eq = len(form.eq_rows)
        cons = np.zeros(p.m)
        cons[form.eq_rows] = lam_u[:n_eq]
        k = 0
        for rows, sign in ((form.up_rows, 1.0), (form.lo_rows, -1.0)):
            cons[rows] += sign * mu_u[k : k + len(rows)]
            k += len(rows)
        lower = np.zeros(p.n)
        upper = np.zeros(p.n)
        upper[form.up_vars] = mu_u[k : k + len(form.up_vars)]
        k += len(form.up_vars)
        lower[form.lo_vars] = mu_u[k : k + len(form.lo_vars)]
        fixed_mult = lam_u[n_eq:]
        upper[form.fixed_vars] = np.maximum(fixed_mult, 0.0)
        lower[form.fixed_vars] = np.maximum(-fixed_mult, 0.0)

        dual_objective = None
        if status is SolveStatus.OPTIMAL:
            dual_objective = float(pt.f + lam_u @ pt.ce + mu_u @ pt.ci)
        certainty = None
        if status is SolveStatus.LOCALLY_INFEASIBLE:
            certainty = "proved" if p.convex else "local"
        wall = time.perf_counter() - self.start
        logger.info(
            "%s t=%.4f: %s after %d iterations (%.2fs), objective %.6g",
            p.tag,
            p.load_factor,
            status.value,
            self.iterations,
            wall,
            pt.f,
        )
        return SolveOutcome(
            status=status,
            objective=pt.f,
            x=pt.x.copy(),
            constraint_multipliers=cons,
            lower_bound_multipliers=lower,
            upper_bound_multipliers=upper,
            iterations=self.iterations,
            wall_time=wall,
            tag=p.tag,
            kkt_residual=kkt,
            primal_infeasibility=_violation(p, pt.x, pt.g),
            dual_objective=dual_objective,
            infeasibility=infeasibility,
            certainty=certainty,
            barrier_history=tuple(self.barrier_history),
            message=message,
        )

    # ---- main loop --------------------------------------------------------

    def run(self, x0: np.ndarray | None = None) -> SolveOutcome:
        p, form, opts = self.problem, self.form, self.options
        x = _push_inside(p, np.asarray(p.x_init if x0 is None else x0, dtype=float))
        grad0 = p.gradient(x)
        self.scale = min(1.0, _SCALE_TARGET / max(float(np.max(np.abs(grad0), initial=0.0)), 1e-12))

        pt = self._point(x)
        z, mu = self._initial_slacks(pt.ci)
        lam = np.zeros(form.ne)
        infeas_history: list[float] = []
        kkt = math.inf

        while True:
            d = self._derivatives(pt.x)
            lam_g = form.eq_g.T @ lam + form.in_g.T @ mu
            lx = self.scale * d.grad + d.jac.T @ lam_g + form.eq_x.T @ lam + form.in_x.T @ mu

            kkt, barrier_err, _, dual = self._errors(lx, pt, z, lam, mu)
            if kkt <= opts.kkt_tolerance:
                return self._outcome(SolveStatus.OPTIMAL, pt, lam, mu, kkt)
            while barrier_err <= _BARRIER_KAPPA * self.barrier and self.barrier > self.barrier_floor:
                self.barrier = max(
                    self.barrier_floor, min(opts.barrier_reduction * self.barrier, self.barrier**1.5)
                )
                _, barrier_err, _, _ = self._errors(lx, pt, z, lam, mu)
            self.barrier_history.append(self.barrier)

            if self.iterations >= opts.max_iterations:
                return self._finish_unconverged(SolveStatus.ITERATION_LIMIT, pt, lam, mu, kkt)
            if time.perf_counter() > self.deadline:
                return self._finish_unconverged(SolveStatus.TIME_LIMIT, pt, lam, mu, kkt)

            hess = p.hessian(pt.x, self.scale, lam_g)
            sigma = mu / z
            m0 = (hess + d.ji.T @ sparse.diags(sigma) @ d.ji).tocsc()
            big_n = lx + d.ji.T @ ((self.barrier + mu * pt.ci) / z)
            step = self._newton_step(m0, d.je, np.concatenate([-big_n, -pt.ce]))
            self.iterations += 1
            if step is None:
                outcome = self._restore(pt, lam, mu, kkt, "KKT regularization failed")
                if isinstance(outcome, SolveOutcome):
                    return outcome
                pt, z, mu, lam = outcome
                infeas_history.clear()
                continue
            dx, dlam, delta_w = step
            dz = -pt.ci - z - d.ji @ dx
            dmu = -mu + (self.barrier - mu * dz) / z

            alpha_p = _fraction_to_boundary(z, dz, opts.fraction_to_boundary)
            alpha_d = _fraction_to_boundary(mu, dmu, opts.fraction_to_boundary)

            searched = self._line_search(pt, z, d, dx, dz, m0, alpha_p)
            if searched is None:
                outcome = self._restore(pt, lam, mu, kkt, "line search failed")
                if isinstance(outcome, SolveOutcome):
                    return outcome
                pt, z, mu, lam = outcome
                infeas_history.clear()
                continue
            pt, z, alpha = searched
            lam = lam + alpha_d * dlam
            mu = np.clip(mu + alpha_d * dmu, self.barrier / (_MULTIPLIER_KAPPA * z), _MULTIPLIER_KAPPA * self.barrier / z)
            self._log(pt, dual, alpha, delta_w)

            violation = _violation(p, pt.x, pt.g)
            infeas_history.append(violation)
            diverging = max(np.max(np.abs(lam), initial=0.0), np.max(mu, initial=0.0)) > _DIVERGENCE
            stalled = (
                len(infeas_history) > _STAGNATION_WINDOW
                and violation > math.sqrt(opts.kkt_tolerance)
                and violation > 0.9 * infeas_history[-_STAGNATION_WINDOW - 1]
            )
            if diverging or stalled:
                reason = "multipliers diverging" if diverging else "infeasibility stagnating"
                outcome = self._restore(pt, lam, mu, kkt, reason)
                if isinstance(outcome, SolveOutcome):
                    return outcome
                pt, z, mu, lam = outcome
                infeas_history.clear()

    def _line_search(
        self,
        pt: _Point,
        z: np.ndarray,
        d: _Derivatives,
        dx: np.ndarray,
        dz: np.ndarray,
        m0: sparse.spmatrix,
        alpha_max: float,
    ) -> tuple[_Point, np.ndarray, float] | None:
        infeas = float(np.sum(np.abs(pt.ce)) + np.sum(np.abs(pt.ci + z)))
        smooth = float(self.scale * d.grad @ dx - self.barrier * np.sum(dz / z))
        if infeas > 0.0:
            curvature = max(float(dx @ (m0 @ dx)), 0.0)
            needed = (smooth + 0.5 * curvature) / ((1.0 - _PENALTY_RHO) * infeas)
            self.penalty = max(self.penalty, needed)
        slope = smooth - self.penalty * infeas
        phi0 = self._merit(pt, z)
        alpha = alpha_max
        for _ in range(_MAX_BACKTRACKS):
            trial = self._point(pt.x + alpha * dx)
            z_trial = np.maximum(z + alpha * dz, -trial.ci)
            if np.all(np.isfinite(trial.g)) and math.isfinite(trial.f):
                phi = self._merit(trial, z_trial)
                if phi <= phi0 + _ARMIJO * alpha * min(slope, 0.0):
                    return trial, z_trial, alpha
            alpha *= _BACKTRACK
        return None

    def _finish_unconverged(
        self, status: SolveStatus, pt: _Point, lam: np.ndarray, mu: np.ndarray, kkt: float
    ) -> SolveOutcome:
        """On budget exhaustion while infeasible, let restoration classify the point."""
        violation = _violation(self.problem, pt.x, pt.g)
        if (
            status is SolveStatus.ITERATION_LIMIT
            and self.allow_restoration
            and self.restorations < self.options.max_restorations
            and violation > math.sqrt(self.options.kkt_tolerance)
        ):
            verdict = self._run_restoration(pt.x)
            if verdict is not None and verdict.infeasible:
                return self._outcome(
                    SolveStatus.LOCALLY_INFEASIBLE,
                    self._point(verdict.x),
                    lam,
                    mu,
                    kkt,
                    "restoration converged to a positive violation",
                    verdict.violation,
                )
        return self._outcome(status, pt, lam, mu, kkt, f"budget exhausted with violation {violation:.3e}")

    def _run_restoration(self, x: np.ndarray) -> RestorationResult:
        from src.solver.restoration import restore_feasibility

        self.restorations += 1
        remaining = max(self.options.max_iterations - self.iterations, 1)
        verdict = restore_feasibility(
            self.problem, x, self.options, remaining, self.deadline, self.sink, math.sqrt(self.barrier)
        )
        self.iterations += verdict.iterations
        return verdict

    def _restore(
        self, pt: _Point, lam: np.ndarray, mu: np.ndarray, kkt: float, reason: str
    ) -> SolveOutcome | tuple[_Point, np.ndarray, np.ndarray, np.ndarray]:
        """Enter feasibility restoration; returns either a final outcome or a fresh state."""
        if not self.allow_restoration or self.restorations >= self.options.max_restorations:
            return self._outcome(SolveStatus.NUMERIC_FAILURE, pt, lam, mu, kkt, reason)
        logger.info("%s t=%.4f: entering restoration (%s)", self.problem.tag, self.problem.load_factor, reason)
        verdict = self._run_restoration(pt.x)
        if verdict.infeasible:
            return self._outcome(
                SolveStatus.LOCALLY_INFEASIBLE,
                self._point(verdict.x),
                lam,
                mu,
                kkt,
                "restoration converged to a positive violation",
                verdict.violation,
            )
        if not verdict.status.converged:
            status = verdict.status if verdict.status is not SolveStatus.OPTIMAL else SolveStatus.NUMERIC_FAILURE
            return self._outcome(status, pt, lam, mu, kkt, f"restoration ended with {verdict.status.value}")
        fresh = self._point(_push_inside(self.problem, verdict.x))
        z, mu_new = self._initial_slacks(fresh.ci)
        return fresh, z, mu_new, np.zeros(self.form.ne)


def solve(
    problem: NlpProblem,
    options: SolverOptions | None = None,
    sink: IterationSink | None = None,
    x0: np.ndarray | None = None,
) -> SolveOutcome:
    """
    Solve an NLP instance to a scaled KKT tolerance.

    Non-convergence is reported through ``SolveOutcome.status``, never raised;
    only structurally inconsistent problems raise ``ProblemStructureError``.
    """
    problem.validate()
    options = options or SolverOptions()
    return InteriorPointSolver(problem, options, sink).run(x0)
