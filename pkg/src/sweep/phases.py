"""Phase labeling of sweep records: where relaxations stop being tight and solvers stop converging."""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import Enum
from itertools import groupby

from src import config
from src.ingest.scenario import ModelKind
from src.sweep.records import MODEL_ORDER, SweepRecord, sort_records

logger = config.LOGGER


class PhaseLabel(str, Enum):
    ACCURATE = "accurate"
    BIFURCATED = "bifurcated"
    AC_DIVERGED = "ac_diverged"
    RELAX_INFEASIBLE = "relax_infeasible"

    @property
    def rank(self) -> int:
        return list(PhaseLabel).index(self)


@dataclass(frozen=True, slots=True)
class PhaseInterval:
    """Maximal run of one label; covers [t_lo, t_hi) except the last, which is closed."""
    t_lo: float
    t_hi: float
    label: PhaseLabel


@dataclass(frozen=True)
class TransitionReport:
    intervals: tuple[PhaseInterval, ...]
    transitions: tuple[float, ...] = ()
    refined: tuple[tuple[float, float], ...] = ()
    violations: tuple[str, ...] = ()
    point_labels: dict[float, PhaseLabel] = field(default_factory=dict)

    @property
    def labels(self) -> tuple[PhaseLabel, ...]:
        return tuple(interval.label for interval in self.intervals)

    @property
    def final_label(self) -> PhaseLabel | None:
        return self.intervals[-1].label if self.intervals else None

    def render(self) -> str:
        """Plain-text transition summary, one fact per line."""
        lines = [f"[{_fmt(iv.t_lo)}, {_fmt(iv.t_hi)}] {iv.label.value}" for iv in self.intervals]
        labels = [iv.label for iv in self.intervals]
        for t, (before, after) in zip(self.transitions, zip(labels, labels[1:]), strict=True):
            lines.append(f"transition {_fmt(t)} {before.value} -> {after.value}")
        lines += [f"refined [{_fmt(lo)}, {_fmt(hi)}]" for lo, hi in self.refined]
        lines += [f"violation {text}" for text in self.violations]
        return "\n".join(lines) + "\n"


def _fmt(t: float) -> str:
    return format(t, ".12g")


def _pair_label(ac: SweepRecord | None, relax: Sequence[SweepRecord], threshold: float) -> PhaseLabel:
    if relax and all(rec.infeasible for rec in relax):
        return PhaseLabel.RELAX_INFEASIBLE
    if ac is not None and ac.converged:
        gaps = [rec.gap_pct for rec in relax if rec.gap_pct is not None]
        return PhaseLabel.BIFURCATED if any(gap >= threshold for gap in gaps) else PhaseLabel.ACCURATE
    return PhaseLabel.AC_DIVERGED


def label_point(records: Sequence[SweepRecord], threshold: float = config.GAP_THRESHOLD) -> PhaseLabel:
    """
    Label one load factor.

    relax_infeasible when every requested relaxation is infeasible;
    accurate/bifurcated by the gap threshold when AC converged; ac_diverged
    otherwise (AC missing or not converged).
    """
    ac = next((rec for rec in records if rec.model == ModelKind.AC.value), None)
    relax = [rec for rec in records if rec.is_relaxation]
    return _pair_label(ac, relax, threshold)


def _grammar_violations(name: str, labeled: Sequence[tuple[float, PhaseLabel]]) -> list[str]:
    out = []
    for (t0, a), (t1, b) in zip(labeled, labeled[1:]):
        if b.rank < a.rank:
            out.append(f"{name}: {a.value} at t={_fmt(t0)} followed by {b.value} at t={_fmt(t1)}")
    return out


def classify_phases(
    records: Iterable[SweepRecord],
    threshold: float = config.GAP_THRESHOLD,
    refined: Sequence[tuple[float, float]] = (),
) -> TransitionReport:
    """
    Partition the swept range into maximal runs of equal phase labels.

    Labels that move backwards in the order accurate, bifurcated,
    ac_diverged, relax_infeasible are kept as reported and listed as
    violations, both for the combined label and for each (AC, relaxation)
    model pair.
    """
    ordered = sort_records(list(records))
    if not ordered:
        error = "cannot classify phases of an empty record set"
        logger.error(error)
        raise ValueError(error)
    by_t = [(t, list(group)) for t, group in groupby(ordered, key=lambda rec: rec.order_key[0])]

    labeled = [(t, label_point(group, threshold)) for t, group in by_t]
    intervals: list[PhaseInterval] = []
    transitions: list[float] = []
    start = 0
    for k in range(1, len(labeled) + 1):
        if k == len(labeled) or labeled[k][1] is not labeled[start][1]:
            t_hi = labeled[k][0] if k < len(labeled) else labeled[-1][0]
            intervals.append(PhaseInterval(labeled[start][0], t_hi, labeled[start][1]))
            if k < len(labeled):
                transitions.append(labeled[k][0])
            start = k

    violations = _grammar_violations("all models", labeled)
    models = sorted({rec.model for rec in ordered if rec.is_relaxation}, key=lambda m: MODEL_ORDER.get(m, len(MODEL_ORDER)))
    for model in models:
        pair = []
        for t, group in by_t:
            ac = next((rec for rec in group if rec.model == ModelKind.AC.value), None)
            relax = [rec for rec in group if rec.model == model]
            if relax:
                pair.append((t, _pair_label(ac, relax, threshold)))
        violations += _grammar_violations(f"AC/{model}", pair)
    for text in violations:
        logger.warning("Phase grammar violation: %s", text)

    return TransitionReport(
        intervals=tuple(intervals),
        transitions=tuple(transitions),
        refined=tuple(refined),
        violations=tuple(violations),
        point_labels=dict(labeled),
    )
