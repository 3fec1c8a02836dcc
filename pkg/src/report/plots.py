"""
Static SVG plots of sweep records: one polyline per model against the load factor.

Missing values (failed solves, blank cells) break the line instead of being
interpolated. Output bytes depend only on the records and the plot spec.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Literal

import matplotlib

matplotlib.use("Agg")
from matplotlib.figure import Figure  # noqa: E402
import numpy as np  # noqa: E402
from pydantic import BaseModel, ConfigDict, field_validator  # noqa: E402

from src import config  # noqa: E402
from src.errors import PlotError  # noqa: E402
from src.sweep.records import MODEL_ORDER, SweepRecord, sort_records  # noqa: E402

logger = config.LOGGER

Metric = Literal[
    "objective",
    "gap_pct",
    "pct_binding_vmag",
    "pct_binding_flow",
    "solve_time_s",
    "recovered_objective",
    "recovered_gap_pct",
]

METRIC_LABELS: dict[str, str] = {
    "objective": "Objective cost",
    "gap_pct": "Optimality gap (%)",
    "pct_binding_vmag": "Buses at a voltage bound (%)",
    "pct_binding_flow": "Branches at a flow limit (%)",
    "solve_time_s": "Solve time (s)",
    "recovered_objective": "Recovered (load-flow) cost",
    "recovered_gap_pct": "Recovered optimality gap (%)",
}
ALL_METRICS: tuple[str, ...] = tuple(METRIC_LABELS)

# Metrics that only exist on relaxation rows.
_RELAXATION_ONLY = {"gap_pct", "recovered_objective", "recovered_gap_pct"}

_STYLE = {
    "svg.hashsalt": "opfgap",
    "svg.fonttype": "none",
    "font.family": "DejaVu Sans",
    "axes.unicode_minus": False,
}


class PlotSpec(BaseModel):
    """Which series to draw and where; ``models`` empty means every model present."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    metric: Metric
    output: Path
    models: tuple[str, ...] = ()
    title: str | None = None
    x_label: str = "Load scaling factor t"
    y_label: str | None = None
    image_format: Literal["svg"] = "svg"

    @field_validator("models")
    @classmethod
    def _normalize_models(cls, value: tuple[str, ...]) -> tuple[str, ...]:
        return tuple(m.strip().upper() for m in value)

    @property
    def label(self) -> str:
        return self.y_label or METRIC_LABELS[self.metric]


def _series(records: Sequence[SweepRecord], metric: str) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    by_model: dict[str, list[SweepRecord]] = {}
    for rec in records:
        by_model.setdefault(rec.model, []).append(rec)
    out = {}
    for model in sorted(by_model, key=lambda m: MODEL_ORDER.get(m, len(MODEL_ORDER))):
        rows = by_model[model]
        ts = np.array([rec.t for rec in rows], dtype=float)
        values = [getattr(rec, metric) for rec in rows]
        ys = np.array([np.nan if v is None else float(v) for v in values], dtype=float)
        out[model] = (ts, ys)
    return out


def emit_plot(records: Iterable[SweepRecord], spec: PlotSpec) -> Path:
    """Render ``spec.metric`` against t for the selected models into ``spec.output``."""
    selected = [
        rec
        for rec in sort_records(list(records))
        if (not spec.models or rec.model in spec.models)
        and (spec.metric not in _RELAXATION_ONLY or rec.is_relaxation)
    ]
    series = {m: s for m, s in _series(selected, spec.metric).items() if np.isfinite(s[1]).any()}
    if not series:
        error = f"no drawable {spec.metric} values for models {list(spec.models) or 'all'}"
        logger.error(error)
        raise PlotError(error)

    with matplotlib.rc_context(_STYLE):
        fig = Figure(figsize=(7.0, 4.0), layout="constrained")
        ax = fig.subplots()
        for model, (ts, ys) in series.items():
            ax.plot(ts, ys, marker="o", markersize=3, linewidth=1.2, label=model)
        ax.set_xlabel(spec.x_label)
        ax.set_ylabel(spec.label)
        if spec.title:
            ax.set_title(spec.title)
        ax.grid(True, alpha=0.3)
        ax.legend(loc="best", fontsize=8)
        spec.output.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(spec.output, format=spec.image_format, metadata={"Date": None})
    logger.info("Wrote %s plot to %s", spec.metric, spec.output)
    return spec.output


def emit_report(
    records: Sequence[SweepRecord], out_dir: Path, metrics: Sequence[str] = ALL_METRICS, title: str | None = None
) -> list[Path]:
    """One ``<metric>.svg`` per metric; metrics with nothing to draw are skipped with a warning."""
    written = []
    for metric in metrics:
        spec = PlotSpec(metric=metric, output=out_dir / f"{metric}.svg", title=title)  # type: ignore[arg-type]
        try:
            written.append(emit_plot(records, spec))
        except PlotError:
            if len(metrics) == 1:
                raise
            logger.warning("Skipping %s plot: nothing to draw", metric)
    return written
