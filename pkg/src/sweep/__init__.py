"""Load-scaling sweeps, optimality gaps and phase classification."""

from src.sweep.engine import (
    base_grid,
    compute_gap,
    evaluate_point,
    refinement_intervals,
    run_point,
    run_sweep,
    scenario_network,
)
from src.sweep.phases import PhaseInterval, PhaseLabel, TransitionReport, classify_phases, label_point
from src.sweep.records import SweepRecord, sort_records

__all__ = [
    "PhaseInterval",
    "PhaseLabel",
    "SweepRecord",
    "TransitionReport",
    "base_grid",
    "classify_phases",
    "compute_gap",
    "evaluate_point",
    "label_point",
    "refinement_intervals",
    "run_point",
    "run_sweep",
    "scenario_network",
    "sort_records",
]
