"""
Load-scaling sweeps.

A sweep solves every requested model on a base grid of load factors,
re-sweeps once at the finer step wherever the gap jumps or a status flips
between neighbors, then labels the phases. Points are independent and can
run on a thread pool; records are merged in (t, model) order so the result
never depends on completion order.
"""

from __future__ import annotations

from collections.abc import Callable, Collection, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from functools import partial
import math
from typing import Any

import numpy as np

from src import config
from src.errors import UndefinedGapError
from src.formulations.ac import build_ac_opf, build_load_flow
from src.formulations.evaluation import binding_census, evaluate_feasibility
from src.formulations.nlp import NlpProblem
from src.formulations.relaxations import build_qc, build_sdp, build_socp
from src.formulations.solutions import Solution, extract_ac_solution, extract_solution
from src.ingest.scenario import ModelKind, ScenarioSpec
from src.network.model import Network, total_cost
from src.network.scenarios import scale_generation_capacity, widen_voltage_bounds
from src.solver.ipm import IterationSink, solve
from src.solver.options import SolveOutcome, SolverOptions
from src.sweep.phases import TransitionReport, classify_phases
from src.sweep.records import SweepRecord, sort_records

logger = config.LOGGER

Builder = Callable[[Network, float, Collection[int]], NlpProblem]

BUILDERS: dict[ModelKind, Builder] = {
    ModelKind.AC: build_ac_opf,
    ModelKind.QC: build_qc,
    ModelKind.SOCP: build_socp,
    ModelKind.SDP2: partial(build_sdp, minor_order=2),
    ModelKind.SDP3: partial(build_sdp, minor_order=3),
}

_GRID_DIGITS = 12


def compute_gap(ac_cost: float, relax_cost: float) -> float:
    """Optimality gap in percent: 100 * (1 - relax_cost / ac_cost)."""
    if not ac_cost > 0.0:
        error = f"optimality gap is undefined for nonpositive reference cost {ac_cost}"
        logger.error(error)
        raise UndefinedGapError(error)
    return 100.0 * (1.0 - relax_cost / ac_cost)


def _safe_gap(reference: float, bound: float, label: str) -> float | None:
    try:
        return compute_gap(reference, bound)
    except UndefinedGapError:
        logger.warning("Skipping %s gap: reference cost %s", label, reference)
        return None


def scenario_network(net: Network, spec: ScenarioSpec) -> Network:
    """Apply the scenario's capacity scaling and voltage widening."""
    if spec.gen_capacity_factor != 1.0:
        net = scale_generation_capacity(net, spec.gen_capacity_factor)
    if spec.voltage_widening > 0.0:
        net = widen_voltage_bounds(net, spec.voltage_widening)
    return net


def _census(net: Network, sol: Solution) -> tuple[float, float]:
    return binding_census(net, sol, config.VMAG_EPS, config.FLOW_EPS)


def _solve_model(
    kind: ModelKind,
    net: Network,
    t: float,
    scaled: Collection[int],
    options: SolverOptions,
    sink: IterationSink | None,
) -> tuple[NlpProblem, SolveOutcome]:
    problem = BUILDERS[kind](net, t, scaled)
    return problem, solve(problem, options, sink)


def _recover(
    net: Network,
    t: float,
    scaled: Collection[int],
    sol: Solution,
    options: SolverOptions,
    sink: IterationSink | None,
) -> dict[str, Any]:
    """Closest AC-feasible dispatch to the relaxation's; returns SweepRecord recovery fields."""
    target = np.asarray(sol.pg, dtype=float)
    problem = build_load_flow(net, t, scaled, target)
    x0 = problem.x_init.copy()
    vm_cols = problem.layout["vm"]
    x0[vm_cols] = np.clip(sol.vm, problem.x_lower[vm_cols], problem.x_upper[vm_cols])
    outcome = solve(problem, options, sink, x0=x0)
    fields: dict[str, Any] = {"recovery_status": outcome.status, "recovery_time_s": outcome.wall_time}
    if not outcome.converged:
        logger.info("Recovery at t=%s did not converge: %s", t, outcome.status.value)
        return fields
    recovered = extract_ac_solution(problem, outcome.x, outcome.objective)
    cost = total_cost(net, recovered.pg)
    vmag, flow = _census(net, recovered)
    fields.update(
        recovered_objective=cost,
        recovered_gap_pct=_safe_gap(cost, sol.objective, "recovery"),
        recovery_dispatch_distance=float(np.linalg.norm(recovered.pg - target)),
        recovery_pct_binding_vmag=vmag,
        recovery_pct_binding_flow=flow,
        recovery_max_violation=evaluate_feasibility(net, recovered, t, scaled).max_violation,
    )
    return fields


def evaluate_point(
    net: Network,
    t: float,
    scaled: Collection[int],
    models: Sequence[ModelKind],
    recovery: bool = True,
    options: SolverOptions | None = None,
    sink: IterationSink | None = None,
    record_timing: bool = True,
) -> list[SweepRecord]:
    """Solve ``models`` at one load factor on an already scenario-adjusted network."""
    options = options or SolverOptions()
    records: dict[ModelKind, SweepRecord] = {}
    solutions: dict[ModelKind, Solution] = {}
    for kind in models:
        problem, outcome = _solve_model(kind, net, t, scaled, options, sink)
        rec = SweepRecord(
            t=t,
            model=kind.value,
            status=outcome.status,
            iterations=outcome.iterations,
            solve_time_s=outcome.wall_time,
            certainty=outcome.certainty,
        )
        if outcome.converged:
            sol = extract_solution(problem, outcome.x, outcome.objective)
            solutions[kind] = sol
            vmag, flow = _census(net, sol)
            rec = replace(rec, objective=outcome.objective, pct_binding_vmag=vmag, pct_binding_flow=flow)
        logger.info(
            "t=%s %s: %s (%d iterations, %.2fs)", t, kind.value, outcome.status.value, outcome.iterations, outcome.wall_time
        )
        records[kind] = rec

    ac = solutions.get(ModelKind.AC)
    for kind, sol in solutions.items():
        if not kind.is_relaxation:
            continue
        if ac is not None:
            records[kind] = replace(records[kind], gap_pct=_safe_gap(ac.objective, sol.objective, kind.value))
        if recovery:
            records[kind] = replace(records[kind], **_recover(net, t, scaled, sol, options, sink))

    out = list(records.values())
    if not record_timing:
        out = [rec.without_timing() for rec in out]
    return sort_records(out)


def run_point(
    net: Network,
    t: float,
    spec: ScenarioSpec,
    options: SolverOptions | None = None,
    sink: IterationSink | None = None,
    record_timing: bool = True,
) -> list[SweepRecord]:
    """One record per requested model at load factor ``t``."""
    adjusted = scenario_network(net, spec)
    scaled = spec.load_selector.resolve(adjusted)
    return evaluate_point(adjusted, t, scaled, spec.models, spec.recovery_enabled, options, sink, record_timing)


def base_grid(t_start: float, t_end: float, step: float) -> list[float]:
    """t_start, t_start + step, ... up to t_end inclusive; t_end is always a grid point."""
    count = int(math.floor((t_end - t_start) / step + 1e-9))
    grid = [round(t_start + k * step, _GRID_DIGITS) for k in range(count + 1)]
    if t_end - grid[-1] > 1e-9:
        grid.append(round(t_end, _GRID_DIGITS))
    return grid


def _by_t(records: Iterable[SweepRecord]) -> dict[float, dict[str, SweepRecord]]:
    out: dict[float, dict[str, SweepRecord]] = {}
    for rec in records:
        out.setdefault(rec.order_key[0], {})[rec.model] = rec
    return out


def needs_refinement(
    left: dict[str, SweepRecord], right: dict[str, SweepRecord], trigger: float
) -> bool:
    """A status flips or some relaxation gap jumps by at least ``trigger`` points."""
    for model in left.keys() | right.keys():
        a, b = left.get(model), right.get(model)
        if a is None or b is None or a.status is not b.status:
            return True
        if a.gap_pct is not None and b.gap_pct is not None and abs(b.gap_pct - a.gap_pct) >= trigger:
            return True
    return False


def refinement_intervals(
    records: Iterable[SweepRecord], trigger: float
) -> list[tuple[float, float]]:
    table = _by_t(records)
    ts = sorted(table)
    return [(lo, hi) for lo, hi in zip(ts, ts[1:]) if needs_refinement(table[lo], table[hi], trigger)]


def _interior(lo: float, hi: float, step: float) -> list[float]:
    points = []
    k = 1
    while lo + k * step < hi - 1e-9:
        points.append(round(lo + k * step, _GRID_DIGITS))
        k += 1
    return points


def _evaluate_all(
    ts: Sequence[float], evaluate: Callable[[float], list[SweepRecord]], workers: int
) -> list[SweepRecord]:
    if workers <= 1 or len(ts) <= 1:
        results = [evaluate(t) for t in ts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(evaluate, ts))
    return [rec for batch in results for rec in batch]


def run_sweep(
    net: Network,
    spec: ScenarioSpec,
    options: SolverOptions | None = None,
    workers: int = config.WORKERS,
    sink: IterationSink | None = None,
    record_timing: bool = True,
    gap_threshold: float = config.GAP_THRESHOLD,
) -> tuple[list[SweepRecord], TransitionReport]:
    """
    Base-grid sweep plus one refinement pass, then phase classification.

    Records come back sorted by (t, model); with ``record_timing=False``
    two identical sweeps produce identical records whatever ``workers`` is.
    """
    adjusted = scenario_network(net, spec)
    scaled = spec.load_selector.resolve(adjusted)

    def _at(t: float) -> list[SweepRecord]:
        return evaluate_point(
            adjusted, t, scaled, spec.models, spec.recovery_enabled, options, sink, record_timing
        )

    grid = base_grid(spec.t_start, spec.t_end, spec.base_step)
    logger.info(
        "Sweeping %s over %d points in [%s, %s] with models %s",
        net.name, len(grid), spec.t_start, spec.t_end, ",".join(m.value for m in spec.models),
    )
    records = _evaluate_all(grid, _at, workers)

    intervals = refinement_intervals(records, spec.refine_trigger)
    extra: list[float] = []
    for lo, hi in intervals:
        points = _interior(lo, hi, spec.refine_step)
        logger.info("Refining [%s, %s] with %d points at step %s", lo, hi, len(points), spec.refine_step)
        extra += points
    records += _evaluate_all(extra, _at, workers)

    records = sort_records(records)
    report = classify_phases(records, gap_threshold, intervals)
    return records, report
