"""End-to-end checks on the bundled cases; every test here solves real problems."""

from __future__ import annotations

import logging

import numpy as np
import pytest

from src.formulations.ac import build_ac_opf, build_load_flow
from src.formulations.evaluation import evaluate_feasibility
from src.formulations.relaxations import build_socp
from src.formulations.solutions import extract_ac_solution, extract_solution
from src.ingest.results import recovery_csv, results_csv
from src.ingest.scenario import ALL_MODELS, ModelKind, ScenarioSpec
from src.network.model import Network
from src.solver.ipm import solve
from src.solver.options import SolverOptions
from src.sweep.engine import evaluate_point, run_sweep
from src.sweep.phases import PhaseLabel

pytestmark = pytest.mark.slow

LOAD_FACTORS = (0.8, 0.9, 1.0, 1.1, 1.2)


def _scaled(net: Network) -> set[int]:
    return {load.id for load in net.scalable_loads}


@pytest.fixture(scope="module", params=["case9", "case14"])
def bound_records(request: pytest.FixtureRequest, fast_options: SolverOptions):
    net = request.getfixturevalue(request.param)
    return {
        t: {rec.model: rec for rec in evaluate_point(net, t, _scaled(net), ALL_MODELS, True, fast_options)}
        for t in LOAD_FACTORS
    }


def test_relaxations_bound_ac(bound_records) -> None:
    for t, row in bound_records.items():
        ac = row["AC"]
        assert ac.converged, t
        for model in ("QC", "SOCP", "SDP2", "SDP3"):
            rec = row[model]
            assert rec.converged, (t, model)
            assert rec.objective <= ac.objective * (1.0 + 1e-6), (t, model)
            assert rec.gap_pct is not None and rec.gap_pct >= -1e-3, (t, model)


def test_relaxation_ordering(bound_records) -> None:
    for t, row in bound_records.items():
        socp = row["SOCP"].objective
        tol = 1e-6 * (1.0 + abs(socp))
        assert row["SDP2"].objective == pytest.approx(socp, rel=1e-5), t
        assert row["SDP3"].objective >= socp - tol, t
        assert row["QC"].objective >= socp - tol, t
        assert abs(row["QC"].objective - socp) <= 5e-3 * abs(socp), t


def test_every_relaxation_point_recovers_feasibly(bound_records) -> None:
    for t, row in bound_records.items():
        for model in ("QC", "SOCP", "SDP2", "SDP3"):
            rec = row[model]
            if not rec.converged:
                continue
            assert rec.recovery_status is not None and rec.recovery_status.converged, (t, model)
            assert rec.recovery_max_violation is not None and rec.recovery_max_violation <= 1e-6, (t, model)
            assert rec.recovered_objective is not None
            assert rec.recovered_objective >= rec.objective - 1e-6 * (1.0 + abs(rec.objective)), (t, model)


def test_recovered_dispatch_is_ac_feasible(case9: Network, fast_options: SolverOptions) -> None:
    scaled = _scaled(case9)
    socp = build_socp(case9, 1.0, scaled)
    relaxed = solve(socp, fast_options)
    assert relaxed.converged
    target = extract_solution(socp, relaxed.x).pg
    flow = build_load_flow(case9, 1.0, scaled, target)
    outcome = solve(flow, fast_options)
    assert outcome.converged
    sol = extract_ac_solution(flow, outcome.x)
    assert evaluate_feasibility(case9, sol, 1.0, scaled).ok(1e-6)


def test_recovery_of_ac_dispatch_stays_put(case9: Network, fast_options: SolverOptions) -> None:
    scaled = _scaled(case9)
    ac = build_ac_opf(case9, 1.0, scaled)
    outcome = solve(ac, fast_options)
    assert outcome.converged
    target = extract_ac_solution(ac, outcome.x).pg
    flow = build_load_flow(case9, 1.0, scaled, target)
    recovered = solve(flow, fast_options)
    assert recovered.converged
    assert recovered.objective == pytest.approx(0.0, abs=1e-6)
    assert float(np.linalg.norm(extract_ac_solution(flow, recovered.x).pg - target)) <= 1e-3


def test_point_records_carry_recovery(case9: Network, fast_options: SolverOptions) -> None:
    records = evaluate_point(case9, 1.0, _scaled(case9), (ModelKind.AC, ModelKind.SOCP), True, fast_options)
    socp = next(rec for rec in records if rec.model == "SOCP")
    assert socp.recovery_status is not None and socp.recovery_status.converged
    assert socp.recovered_objective is not None
    assert socp.recovered_objective >= socp.objective - 1e-6 * abs(socp.objective)
    assert socp.recovery_dispatch_distance is not None and socp.recovery_dispatch_distance >= 0.0


@pytest.fixture(scope="module")
def socp_onset(case9: Network, fast_options: SolverOptions) -> float:
    """Smallest infeasible load factor of the SOCP relaxation, bisected to 0.01."""
    scaled = _scaled(case9)
    lo, hi = 1.0, 4.0
    assert solve(build_socp(case9, lo, scaled), fast_options).converged
    assert not solve(build_socp(case9, hi, scaled), fast_options).converged
    while hi - lo > 0.01:
        mid = 0.5 * (lo + hi)
        if solve(build_socp(case9, mid, scaled), fast_options).converged:
            lo = mid
        else:
            hi = mid
    return hi


def test_phase_sequence_ends_relaxation_infeasible(
    case9: Network, fast_options: SolverOptions, socp_onset: float
) -> None:
    spec = ScenarioSpec(
        t_start=0.8,
        t_end=round(socp_onset + 0.1, 3),
        base_step=0.1,
        refine_step=0.02,
        models=(ModelKind.AC, ModelKind.SOCP),
        recovery_enabled=False,
    )
    records, report = run_sweep(case9, spec, options=fast_options, workers=2, record_timing=False)
    assert report.labels[0] is PhaseLabel.ACCURATE
    assert report.final_label is PhaseLabel.RELAX_INFEASIBLE
    ac_failures = [rec.t for rec in records if rec.model == "AC" and not rec.converged and rec.t <= socp_onset]
    if not ac_failures:
        logging.getLogger("opfgap").warning("AC stayed solvable up to the relaxation onset t=%s", socp_onset)


def test_sweep_csv_is_independent_of_workers(case9: Network, fast_options: SolverOptions) -> None:
    spec = ScenarioSpec(t_start=0.9, t_end=1.1, base_step=0.1, refine_step=0.05, models=(ModelKind.AC, ModelKind.SOCP))
    serial, _ = run_sweep(case9, spec, options=fast_options, workers=1, record_timing=False)
    pooled, _ = run_sweep(case9, spec, options=fast_options, workers=4, record_timing=False)
    assert results_csv(serial, record_timing=False) == results_csv(pooled, record_timing=False)
    assert recovery_csv(serial, record_timing=False) == recovery_csv(pooled, record_timing=False)
