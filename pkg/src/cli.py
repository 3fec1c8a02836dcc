"""
opfgap command line.

    opfgap solve    --case case9 --model socp --t 1.0
    opfgap sweep    --case case9 --models ac,socp --t-start 0.8 --t-end 1.2 --out results
    opfgap loadflow --case case9 --dispatch dispatch.txt --t 1.0
    opfgap report   --csv results/results.csv --plot gap

Exit codes: 0 on success (solver non-convergence is data, not failure),
2 on usage errors, 3 on invalid input or missing files.
"""

from __future__ import annotations

import argparse
from collections.abc import Sequence
import logging
from pathlib import Path
import sys
from typing import Any

import numpy as np

from src import config
from src.errors import OpfGapError, ScenarioError
from src.formulations.ac import build_load_flow
from src.formulations.evaluation import evaluate_feasibility
from src.formulations.solutions import extract_ac_solution
from src.ingest.case_io import load_case
from src.ingest.results import read_results, write_recovery, write_results
from src.ingest.scenario import LoadSelector, ModelKind, ScenarioSpec, load_scenario
from src.network.model import Network, total_cost
from src.report.plots import ALL_METRICS, emit_report
from src.solver.ipm import solve
from src.solver.options import SolverOptions
from src.sweep.engine import BUILDERS, run_sweep, scenario_network
from src.utils.logger import iteration_sink

logger = config.LOGGER

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3

PLOT_ALIASES = {
    "cost": "objective",
    "gap": "gap_pct",
    "vmag": "pct_binding_vmag",
    "flow": "pct_binding_flow",
    "runtime": "solve_time_s",
    "time": "solve_time_s",
    "recovered": "recovered_objective",
    "recovered-gap": "recovered_gap_pct",
}


def _plot_metrics(tokens: Sequence[str]) -> list[str]:
    metrics: list[str] = []
    for token in tokens:
        for part in token.split(","):
            name = part.strip().lower()
            if not name:
                continue
            if name == "all":
                metrics += [m for m in ALL_METRICS if m not in metrics]
                continue
            metric = PLOT_ALIASES.get(name, name)
            if metric not in ALL_METRICS:
                error = f"unknown plot {part!r}; expected all, {', '.join(ALL_METRICS)} or {', '.join(PLOT_ALIASES)}"
                logger.error(error)
                raise ScenarioError(error)
            if metric not in metrics:
                metrics.append(metric)
    return metrics


def _add_case_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--case", required=True, help="Case file path or bundled case name (e.g. case9).")
    p.add_argument("--scenario", type=Path, default=None, help="Scenario file of key=value lines.")
    p.add_argument("--loads", default=None, help="Scaled loads: all, lowest-k:K or ids:1,2,...")
    p.add_argument("--gen-capacity-factor", type=float, default=None, help="Multiply generator capacities.")
    p.add_argument("--voltage-widening", type=float, default=None, help="Widen every bus voltage band by R p.u.")
    p.add_argument("--tol", type=float, default=None, help=f"KKT tolerance (default: {config.KKT_TOLERANCE:g}).")
    p.add_argument("--max-iters", type=int, default=None, help=f"Iteration limit (default: {config.MAX_ITERATIONS}).")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opfgap",
        description="AC-OPF relaxations, load-scaling sweeps and optimality-gap phase transitions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="Solve one model at one load factor.")
    _add_case_flags(p_solve)
    p_solve.add_argument("--model", required=True, help="ac, qc, socp, sdp2 or sdp3.")
    p_solve.add_argument("--t", type=float, default=1.0, help="Load scaling factor (default: 1.0).")

    p_sweep = sub.add_parser("sweep", help="Sweep load factors and write results.csv, recovery.csv, transitions.txt.")
    _add_case_flags(p_sweep)
    p_sweep.add_argument("--models", default=None, help="Comma-separated models (default: all).")
    p_sweep.add_argument("--t-start", type=float, default=None)
    p_sweep.add_argument("--t-end", type=float, default=None)
    p_sweep.add_argument("--step", type=float, default=None, help=f"Base step (default: {config.DEFAULT_BASE_STEP}).")
    p_sweep.add_argument(
        "--refine-step", type=float, default=None, help=f"Refinement step (default: {config.DEFAULT_REFINE_STEP})."
    )
    p_sweep.add_argument(
        "--refine-trigger",
        type=float,
        default=None,
        help=f"Gap jump in points that triggers refinement (default: {config.DEFAULT_REFINE_TRIGGER}).",
    )
    p_sweep.add_argument("--no-recovery", action="store_true", help="Skip load-flow recovery.")
    p_sweep.add_argument("--workers", type=int, default=config.WORKERS, help="Concurrent sweep points.")
    p_sweep.add_argument("--out", type=Path, default=config.OUT_DIR, help="Output directory.")
    p_sweep.add_argument("--no-timing", action="store_true", help="Leave solve_time_s blank for byte-stable CSVs.")
    p_sweep.add_argument("--plot", action="append", default=[], help="Also render plots (metric names or all).")

    p_flow = sub.add_parser("loadflow", help="Closest AC-feasible dispatch to a target dispatch.")
    _add_case_flags(p_flow)
    p_flow.add_argument("--dispatch", type=Path, required=True, help="Lines of 'generator_id p_pu'.")
    p_flow.add_argument("--t", type=float, default=1.0, help="Load scaling factor (default: 1.0).")

    p_report = sub.add_parser("report", help="Render plots from an existing results.csv.")
    p_report.add_argument("--csv", type=Path, required=True, help="results.csv written by sweep.")
    p_report.add_argument("--plot", action="append", default=[], help="Metric names, aliases or all (default: all).")
    p_report.add_argument("--models", default=None, help="Restrict to these models.")
    p_report.add_argument("--out", type=Path, default=None, help="Output directory (default: next to the CSV).")
    return parser


def _options(args: argparse.Namespace) -> SolverOptions:
    overrides: dict[str, Any] = {}
    if args.tol is not None:
        overrides["kkt_tolerance"] = args.tol
    if args.max_iters is not None:
        overrides["max_iterations"] = args.max_iters
    try:
        return SolverOptions(**overrides)
    except ValueError as exc:
        error = f"invalid solver options: {exc}"
        logger.error(error)
        raise ScenarioError(error) from exc


def _scenario(args: argparse.Namespace) -> ScenarioSpec:
    spec = load_scenario(args.scenario) if args.scenario is not None else ScenarioSpec()
    overrides: dict[str, Any] = {
        "load_selector": LoadSelector.parse(args.loads) if args.loads is not None else None,
        "gen_capacity_factor": args.gen_capacity_factor,
        "voltage_widening": args.voltage_widening,
    }
    if args.command == "sweep":
        overrides.update(
            models=tuple(ModelKind.parse(tok) for tok in args.models.split(",") if tok.strip()) if args.models else None,
            t_start=args.t_start,
            t_end=args.t_end,
            base_step=args.step,
            refine_step=args.refine_step,
            refine_trigger=args.refine_trigger,
            recovery_enabled=False if args.no_recovery else None,
        )
    return spec.with_overrides(overrides)


def _prepared(args: argparse.Namespace) -> tuple[Network, ScenarioSpec, set[int]]:
    spec = _scenario(args)
    net = scenario_network(load_case(args.case), spec)
    return net, spec, spec.load_selector.resolve(net)


def _cmd_solve(args: argparse.Namespace) -> int:
    kind = ModelKind.parse(args.model)
    net, _, scaled = _prepared(args)
    problem = BUILDERS[kind](net, args.t, scaled)
    outcome = solve(problem, _options(args), iteration_sink(config.OPFGAP_LOG))
    line = (
        f"model={kind.value} t={args.t:g} status={outcome.status.value} objective={outcome.objective:.12g} "
        f"iterations={outcome.iterations} time={outcome.wall_time:.3f}s"
    )
    if outcome.certainty is not None:
        line += f" infeasibility={outcome.infeasibility or 0.0:.3e} certainty={outcome.certainty}"
    print(line)
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    net, spec, _ = _prepared(args)
    metrics = _plot_metrics(args.plot)
    record_timing = not args.no_timing
    records, report = run_sweep(
        net,
        spec,
        options=_options(args),
        workers=max(1, args.workers),
        sink=iteration_sink(config.OPFGAP_LOG),
        record_timing=record_timing,
    )
    out: Path = args.out
    write_results(records, out / "results.csv", record_timing)
    if spec.recovery_enabled:
        write_recovery(records, out / "recovery.csv", record_timing)
    (out / "transitions.txt").write_text(report.render(), encoding="utf-8")
    if metrics:
        emit_report(records, out, metrics, title=net.name)
    print(f"{len(records)} records, final phase {report.final_label.value if report.final_label else 'none'}; wrote {out}")
    return EXIT_OK


def _read_dispatch(path: Path, net: Network) -> dict[int, float]:
    if not path.is_file():
        error = f"dispatch file not found: {path}"
        logger.error(error)
        raise FileNotFoundError(error)
    target: dict[int, float] = {}
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].replace(",", " ").replace("=", " ").strip()
        if not line:
            continue
        parts = line.split()
        try:
            gen_id, value = int(parts[0]), float(parts[1])
        except (IndexError, ValueError) as exc:
            error = f"{path}:{line_no}: expected 'generator_id p_pu', got {raw.strip()!r}"
            logger.error(error)
            raise ScenarioError(error) from exc
        target[gen_id] = value
    unknown = sorted(set(target) - {gen.id for gen in net.generators})
    if unknown:
        error = f"{path}: unknown generator ids {unknown}"
        logger.error(error)
        raise ScenarioError(error)
    return target


def _cmd_loadflow(args: argparse.Namespace) -> int:
    net, _, scaled = _prepared(args)
    target = _read_dispatch(args.dispatch, net)
    problem = build_load_flow(net, args.t, scaled, target)
    outcome = solve(problem, _options(args), iteration_sink(config.OPFGAP_LOG))
    line = f"t={args.t:g} status={outcome.status.value} iterations={outcome.iterations}"
    if outcome.converged:
        sol = extract_ac_solution(problem, outcome.x, outcome.objective)
        wanted = np.array([target[gen.id] for gen in net.generators])
        report = evaluate_feasibility(net, sol, args.t, scaled)
        line += (
            f" cost={total_cost(net, sol.pg):.12g} dispatch_distance={float(np.linalg.norm(sol.pg - wanted)):.6g}"
            f" max_violation={report.max_violation:.3e}"
        )
    print(line)
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    records = read_results(args.csv)
    metrics = _plot_metrics(args.plot or ["all"])
    if args.models:
        wanted = {ModelKind.parse(tok).value for tok in args.models.split(",") if tok.strip()}
        records = [rec for rec in records if rec.model in wanted]
    out = args.out or args.csv.parent
    written = emit_report(records, out, metrics)
    for path in written:
        print(path)
    return EXIT_OK


COMMANDS = {"solve": _cmd_solve, "sweep": _cmd_sweep, "loadflow": _cmd_loadflow, "report": _cmd_report}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    if config.OPFGAP_LOG == "quiet":
        logger.setLevel(logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except (OpfGapError, FileNotFoundError) as exc:
        print(f"opfgap: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
