from __future__ import annotations

from pathlib import Path
import re

import numpy as np
import pytest

from src.cli import main
from src.errors import PlotError
from src.ingest.results import read_results, write_results
from src.report.plots import PlotSpec, _series, emit_plot, emit_report
from src.solver.options import SolveStatus
from src.sweep.records import SweepRecord

OK = SolveStatus.OPTIMAL


def _records() -> list[SweepRecord]:
    out = []
    for t, ac_ok, gap in ((1.0, True, 0.5), (1.02, True, 1.5), (1.04, False, None), (1.06, True, 4.0)):
        status = OK if ac_ok else SolveStatus.ITERATION_LIMIT
        out.append(SweepRecord(t=t, model="AC", status=status, objective=100.0 * t if ac_ok else None))
        out.append(SweepRecord(t=t, model="SOCP", status=OK, objective=99.0 * t, gap_pct=gap))
    return out


def test_plots_are_byte_stable(tmp_path: Path) -> None:
    first = emit_plot(_records(), PlotSpec(metric="objective", output=tmp_path / "a.svg", title="case9"))
    second = emit_plot(_records(), PlotSpec(metric="objective", output=tmp_path / "b.svg", title="case9"))
    assert first.read_bytes() == second.read_bytes()
    assert b"<svg" in first.read_bytes()


def test_missing_points_break_the_series() -> None:
    series = _series(_records(), "objective")
    ts, ys = series["AC"]
    np.testing.assert_array_equal(ts, [1.0, 1.02, 1.04, 1.06])
    assert np.isnan(ys[2]) and np.isfinite(ys[[0, 1, 3]]).all()
    assert list(series) == ["AC", "SOCP"]


def test_gap_plot_without_relaxations_fails(tmp_path: Path) -> None:
    ac_only = [rec for rec in _records() if rec.model == "AC"]
    with pytest.raises(PlotError):
        emit_plot(ac_only, PlotSpec(metric="gap_pct", output=tmp_path / "gap.svg"))


def test_plot_spec_validation(tmp_path: Path) -> None:
    spec = PlotSpec(metric="gap_pct", output=tmp_path / "g.svg", models=("socp ",))
    assert spec.models == ("SOCP",)
    assert spec.label == "Optimality gap (%)"
    with pytest.raises(ValueError):
        PlotSpec(metric="voltage", output=tmp_path / "v.svg")  # type: ignore[arg-type]


def test_report_skips_empty_metrics(tmp_path: Path) -> None:
    written = emit_report(_records(), tmp_path, ["objective", "gap_pct", "recovered_objective"])
    assert [path.name for path in written] == ["objective.svg", "gap_pct.svg"]


def test_cli_help_and_usage_errors(capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["--help"]) == 0
    assert main([]) == 2
    assert main(["solve", "--case", "case9"]) == 2
    capsys.readouterr()


def test_cli_input_errors(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["solve", "--case", str(tmp_path / "missing.m"), "--model", "socp"]) == 3
    assert "case file not found" in capsys.readouterr().err
    assert main(["solve", "--case", "case9", "--model", "dc"]) == 3
    assert main(["sweep", "--case", "case9", "--models", "socp", "--t-end", "inf"]) == 3
    assert main(["sweep", "--case", "case9", "--models", "socp", "--t-end", "2", "--step", "1e-12", "--refine-step", "1e-13"]) == 3
    assert "unknown model" in capsys.readouterr().err
    bad = tmp_path / "bad.scn"
    bad.write_text("t_start=2 t_end=1\n", encoding="utf-8")
    assert main(["sweep", "--case", "case9", "--scenario", str(bad)]) == 3
    assert main(["report", "--csv", str(tmp_path / "none.csv")]) == 3


def test_cli_report_renders_from_csv(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    csv_path = write_results(_records(), tmp_path / "results.csv")
    assert len(read_results(csv_path)) == 8
    assert main(["report", "--csv", str(csv_path), "--plot", "gap,cost", "--models", "socp"]) == 0
    printed = capsys.readouterr().out.split()
    assert [Path(p).name for p in printed] == ["gap_pct.svg", "objective.svg"]
    assert main(["report", "--csv", str(csv_path), "--plot", "bogus"]) == 3


def _objective(text: str) -> float:
    match = re.search(r"objective=(\S+)", text)
    assert match is not None, text
    return float(match.group(1))


@pytest.mark.slow
def test_cli_sdp2_matches_socp(capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["solve", "--case", "case9", "--model", "sdp2", "--t", "1.0"]) == 0
    sdp2 = capsys.readouterr().out
    assert main(["solve", "--case", "case9", "--model", "socp", "--t", "1.0"]) == 0
    socp = capsys.readouterr().out
    assert "status=Optimal" in sdp2
    assert _objective(sdp2) == pytest.approx(_objective(socp), rel=1e-5)


@pytest.mark.slow
def test_cli_sweep_writes_artifacts(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    out = tmp_path / "run"
    argv = [
        "sweep", "--case", "case9", "--models", "ac,socp", "--t-start", "1.0", "--t-end", "1.0",
        "--out", str(out), "--no-timing", "--plot", "gap",
    ]
    assert main(argv) == 0
    assert {p.name for p in out.iterdir()} == {"results.csv", "recovery.csv", "transitions.txt", "gap_pct.svg"}
    first = (out / "results.csv").read_bytes()
    assert main(argv) == 0
    assert (out / "results.csv").read_bytes() == first
    assert "final phase accurate" in capsys.readouterr().out


@pytest.mark.slow
def test_cli_loadflow(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    dispatch = tmp_path / "dispatch.txt"
    dispatch.write_text("# generator p_pu\n1 0.9\n2 1.3\n3 0.95\n", encoding="utf-8")
    assert main(["loadflow", "--case", "case9", "--dispatch", str(dispatch)]) == 0
    line = capsys.readouterr().out
    assert "status=Optimal" in line
    assert "dispatch_distance=" in line
    dispatch.write_text("7 0.5\n", encoding="utf-8")
    assert main(["loadflow", "--case", "case9", "--dispatch", str(dispatch)]) == 3
