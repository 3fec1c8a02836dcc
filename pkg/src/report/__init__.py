"""Plots derived from sweep result CSVs."""

from src.report.plots import ALL_METRICS, METRIC_LABELS, PlotSpec, emit_plot, emit_report

__all__ = ["ALL_METRICS", "METRIC_LABELS", "PlotSpec", "emit_plot", "emit_report"]
