from __future__ import annotations

from dataclasses import replace

import pytest

from src.errors import ResultsFormatError, UndefinedGapError
from src.ingest.results import parse_results, recovery_csv, results_csv
from src.ingest.scenario import ModelKind, ScenarioSpec
from src.network.model import Network
from src.solver.options import SolveStatus
from src.sweep import engine
from src.sweep.engine import base_grid, compute_gap, needs_refinement, refinement_intervals, run_sweep
from src.sweep.phases import PhaseLabel, classify_phases, label_point
from src.sweep.records import SweepRecord, sort_records

OK = SolveStatus.OPTIMAL


def _ac(t: float, status: SolveStatus = OK, cost: float = 100.0) -> SweepRecord:
    return SweepRecord(t=t, model="AC", status=status, objective=cost if status is OK else None)


def _relax(t: float, gap: float | None, status: SolveStatus = OK, model: str = "SOCP") -> SweepRecord:
    return SweepRecord(t=t, model=model, status=status, gap_pct=gap, objective=100.0 - (gap or 0.0))


@pytest.mark.parametrize(
    ("ac", "relax", "expected"),
    [(3366.49, 2356.95, 29.99), (3499.93, 2371.02, 32.26)],
)
def test_gap_formula(ac: float, relax: float, expected: float) -> None:
    assert compute_gap(ac, relax) == pytest.approx(expected, abs=0.01)


@pytest.mark.parametrize("ac", [0.0, -5.0])
def test_gap_is_undefined_for_nonpositive_reference(ac: float) -> None:
    with pytest.raises(UndefinedGapError):
        compute_gap(ac, 1.0)


def test_base_grid_includes_end() -> None:
    assert base_grid(0.8, 1.2, 0.1) == [0.8, 0.9, 1.0, 1.1, 1.2]
    assert base_grid(1.0, 1.05, 0.02) == [1.0, 1.02, 1.04, 1.05]
    assert base_grid(1.0, 1.0, 0.02) == [1.0]


def test_refinement_triggers() -> None:
    left = {"AC": _ac(1.56), "SOCP": _relax(1.56, 0.5)}
    assert not needs_refinement(left, {"AC": _ac(1.58), "SOCP": _relax(1.58, 1.5)}, 2.0)
    assert needs_refinement(left, {"AC": _ac(1.58), "SOCP": _relax(1.58, 3.0)}, 2.0)
    assert needs_refinement(left, {"AC": _ac(1.58, SolveStatus.ITERATION_LIMIT), "SOCP": _relax(1.58, None)}, 2.0)
    assert needs_refinement(left, {"AC": _ac(1.58)}, 2.0)


def test_status_change_refines_between_neighbors(case9: Network, monkeypatch: pytest.MonkeyPatch) -> None:
    def fake_point(net, t, scaled, models, recovery=True, options=None, sink=None, record_timing=True):
        status = OK if t < 1.57 else SolveStatus.ITERATION_LIMIT
        return [_ac(t, status), _relax(t, 0.1 if status is OK else None)]

    monkeypatch.setattr(engine, "evaluate_point", fake_point)
    spec = ScenarioSpec(t_start=1.5, t_end=1.62, models=(ModelKind.AC, ModelKind.SOCP))
    records, report = run_sweep(case9, spec, workers=1)

    assert report.refined == ((1.56, 1.58),)
    ts = sorted({rec.t for rec in records})
    assert ts == [1.5, 1.52, 1.54, 1.56, 1.565, 1.57, 1.575, 1.58, 1.6, 1.62]
    assert report.labels == (PhaseLabel.ACCURATE, PhaseLabel.AC_DIVERGED)
    assert report.transitions == (1.57,)
    assert records == sort_records(records)


def test_label_point() -> None:
    assert label_point([_ac(1.0), _relax(1.0, 0.2)]) is PhaseLabel.ACCURATE
    assert label_point([_ac(1.0), _relax(1.0, 5.0)]) is PhaseLabel.BIFURCATED
    assert label_point([_ac(1.0, SolveStatus.NUMERIC_FAILURE), _relax(1.0, None)]) is PhaseLabel.AC_DIVERGED
    infeasible = [_ac(1.0, SolveStatus.LOCALLY_INFEASIBLE), _relax(1.0, None, SolveStatus.LOCALLY_INFEASIBLE)]
    assert label_point(infeasible) is PhaseLabel.RELAX_INFEASIBLE
    assert label_point([_relax(1.0, None)]) is PhaseLabel.AC_DIVERGED


def test_gap_spike_is_reported_as_grammar_violation() -> None:
    ts = [1.0, 1.1, 1.2, 1.3, 1.4, 1.5]
    gaps = [0.0, 0.0, 20.0, 22.0, 0.0, 0.0]
    records = [rec for t, gap in zip(ts, gaps, strict=True) for rec in (_ac(t), _relax(t, gap))]
    report = classify_phases(records)
    assert report.labels == (PhaseLabel.ACCURATE, PhaseLabel.BIFURCATED, PhaseLabel.ACCURATE)
    assert report.transitions == (1.2, 1.4)
    assert [(iv.t_lo, iv.t_hi) for iv in report.intervals] == [(1.0, 1.2), (1.2, 1.4), (1.4, 1.5)]
    assert report.violations
    assert any(v.startswith("AC/SOCP") for v in report.violations)


def test_monotone_sequence_and_render() -> None:
    records = [
        _ac(1.0), _relax(1.0, 0.1),
        _ac(1.1), _relax(1.1, 4.0),
        _ac(1.2, SolveStatus.ITERATION_LIMIT), _relax(1.2, None),
        _ac(1.3, SolveStatus.LOCALLY_INFEASIBLE), _relax(1.3, None, SolveStatus.LOCALLY_INFEASIBLE),
    ]
    report = classify_phases(records, refined=[(1.1, 1.2)])
    assert report.labels == tuple(PhaseLabel)
    assert report.final_label is PhaseLabel.RELAX_INFEASIBLE
    assert not report.violations
    text = report.render()
    assert text.splitlines()[0] == "[1, 1.1] accurate"
    assert "transition 1.3 ac_diverged -> relax_infeasible" in text
    assert "refined [1.1, 1.2]" in text


def test_classify_rejects_empty() -> None:
    with pytest.raises(ValueError, match="empty"):
        classify_phases([])


def test_results_csv_round_trip() -> None:
    records = [
        _relax(1.02, 3.25),
        SweepRecord(t=1.02, model="AC", status=OK, objective=5296.68610946, iterations=17, solve_time_s=0.25,
                    pct_binding_vmag=11.1111111111, pct_binding_flow=0.0),
        _ac(1.04, SolveStatus.ITERATION_LIMIT),
    ]
    text = results_csv(records)
    lines = text.splitlines()
    assert lines[0] == (
        "t,model,status,objective,gap_pct,iters,solve_time_s,pct_binding_vmag,pct_binding_flow,"
        "recovered_objective,recovered_gap_pct,recovery_dispatch_distance"
    )
    assert lines[1].startswith("1.02,AC,Optimal,5296.68610946,,17,0.25,")
    assert lines[3] == "1.04,AC,IterationLimit,,,0,,,,,,"
    assert results_csv(parse_results(text)) == text
    assert ",0.25," not in results_csv(records, record_timing=False)


def test_recovery_csv_keeps_only_recovered_rows() -> None:
    rec = replace(_relax(1.0, 2.0), recovery_status=OK, recovered_objective=101.5, recovery_time_s=0.5)
    text = recovery_csv([rec, _ac(1.0)])
    assert text.splitlines()[1] == "1,SOCP,Optimal,101.5,,,0.5,,"


def test_results_header_is_enforced() -> None:
    with pytest.raises(ResultsFormatError, match="header"):
        parse_results("t,model\n1,AC\n")
    bad = results_csv([_ac(1.0)]).replace("Optimal", "Solved")
    with pytest.raises(ResultsFormatError, match="status"):
        parse_results(bad)
