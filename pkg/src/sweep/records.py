"""Per-(t, model) sweep rows."""

from __future__ import annotations

from dataclasses import dataclass, replace

from src.ingest.scenario import ModelKind
from src.solver.options import SolveStatus

# Model order used for sorting and merging; AC first so gaps read left to right.
MODEL_ORDER = {kind.value: rank for rank, kind in enumerate(ModelKind)}


@dataclass(frozen=True, slots=True)
class SweepRecord:
    """
    One solved model at one load factor.

    ``objective`` is set only for Optimal rows. ``gap_pct`` is set only on
    relaxation rows whose AC partner at the same ``t`` converged. Recovery
    fields describe the load-flow solve seeded by this relaxation's dispatch.
    """
    t: float
    model: str
    status: SolveStatus
    objective: float | None = None
    gap_pct: float | None = None
    iterations: int = 0
    solve_time_s: float | None = None
    pct_binding_vmag: float | None = None
    pct_binding_flow: float | None = None
    recovered_objective: float | None = None
    recovered_gap_pct: float | None = None
    recovery_dispatch_distance: float | None = None
    recovery_status: SolveStatus | None = None
    recovery_time_s: float | None = None
    recovery_pct_binding_vmag: float | None = None
    recovery_pct_binding_flow: float | None = None
    recovery_max_violation: float | None = None
    certainty: str | None = None

    @property
    def converged(self) -> bool:
        return self.status is SolveStatus.OPTIMAL

    @property
    def is_relaxation(self) -> bool:
        return self.model != ModelKind.AC.value

    @property
    def infeasible(self) -> bool:
        return self.status is SolveStatus.LOCALLY_INFEASIBLE

    @property
    def order_key(self) -> tuple[float, int]:
        return (round(self.t, 12), MODEL_ORDER.get(self.model, len(MODEL_ORDER)))

    def without_timing(self) -> SweepRecord:
        return replace(self, solve_time_s=None, recovery_time_s=None)


def sort_records(records: list[SweepRecord]) -> list[SweepRecord]:
    return sorted(records, key=lambda rec: rec.order_key)
