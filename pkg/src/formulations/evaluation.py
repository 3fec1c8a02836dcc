"""Direct feasibility residuals and binding-constraint census for candidate solutions."""

from __future__ import annotations

from collections.abc import Collection
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from src import config
from src.formulations.branch import branch_arrays, polar_flows
from src.formulations.common import bus_demand
from src.formulations.solutions import AcSolution, Solution
from src.network.model import Network

logger = config.LOGGER

LimitReading = Literal["apparent", "current"]


@dataclass(frozen=True)
class FeasibilityReport:
    """Largest violation per constraint family, in per-unit (radians for angles)."""
    max_violation: float
    violations: dict[str, float] = field(default_factory=dict)

    @property
    def worst(self) -> str | None:
        if not self.violations or self.max_violation <= 0.0:
            return None
        return max(self.violations, key=lambda name: self.violations[name])

    def ok(self, tolerance: float = 1e-6) -> bool:
        return self.max_violation <= tolerance


def _excess(value: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> float:
    if value.size == 0:
        return 0.0
    return float(np.max(np.maximum(np.maximum(lower - value, value - upper), 0.0)))


def _max_abs(value: np.ndarray) -> float:
    return float(np.max(np.abs(value))) if value.size else 0.0


def evaluate_feasibility(net: Network, sol: AcSolution, t: float, scaled_loads: Collection[int]) -> FeasibilityReport:
    """
    Residuals of the AC constraints at ``sol``: balance with the stated
    flows, flow definitions against the voltages, and every box, thermal and
    angle-difference limit.
    """
    arr = branch_arrays(net)
    n_bus = len(net.buses)
    gen_pos = np.array([net.bus_index[gen.bus] for gen in net.generators], dtype=np.int64)
    demand_p, demand_q = bus_demand(net, t, scaled_loads)
    gs = np.zeros(n_bus)
    bs = np.zeros(n_bus)
    for shunt in net.shunts:
        gs[net.bus_index[shunt.bus]] += shunt.gs
        bs[net.bus_index[shunt.bus]] += shunt.bs
    square = sol.vm * sol.vm

    inject_p = np.bincount(gen_pos, weights=sol.pg, minlength=n_bus)
    inject_q = np.bincount(gen_pos, weights=sol.qg, minlength=n_bus)
    out_p = np.bincount(arr.f, weights=sol.pf, minlength=n_bus) + np.bincount(arr.t, weights=sol.pt, minlength=n_bus)
    out_q = np.bincount(arr.f, weights=sol.qf, minlength=n_bus) + np.bincount(arr.t, weights=sol.qt, minlength=n_bus)
    balance_p = inject_p - out_p - gs * square - demand_p
    balance_q = inject_q - out_q + bs * square - demand_q

    exact = polar_flows(arr, sol.vm, sol.va)
    stated = (sol.pf, sol.qf, sol.pt, sol.qt)
    flow_def = max((_max_abs(s - e) for s, e in zip(stated, exact, strict=True)), default=0.0)

    vmin = np.array([bus.vmin for bus in net.buses])
    vmax = np.array([bus.vmax for bus in net.buses])
    pmin = np.array([gen.pmin for gen in net.generators])
    pmax = np.array([gen.pmax for gen in net.generators])
    qmin = np.array([gen.qmin for gen in net.generators])
    qmax = np.array([gen.qmax for gen in net.generators])

    limited = np.isfinite(arr.s_max)
    s_f = np.hypot(sol.pf, sol.qf)[limited]
    s_t = np.hypot(sol.pt, sol.qt)[limited]
    thermal = float(np.max(np.maximum(np.maximum(s_f, s_t) - arr.s_max[limited], 0.0))) if limited.any() else 0.0

    delta = sol.va[arr.f] - sol.va[arr.t]
    violations = {
        "balance_p": _max_abs(balance_p),
        "balance_q": _max_abs(balance_q),
        "flow_def": flow_def,
        "vmag": _excess(sol.vm, vmin, vmax),
        "dispatch": max(_excess(sol.pg, pmin, pmax), _excess(sol.qg, qmin, qmax)),
        "thermal": thermal,
        "angle": _excess(delta, -arr.angle_max, arr.angle_max),
    }
    report = FeasibilityReport(max(violations.values()), violations)
    logger.debug("Feasibility at t=%s: max violation %.3e (%s)", t, report.max_violation, report.worst)
    return report


def binding_census(
    net: Network,
    sol: Solution,
    epsilon: float = config.VMAG_EPS,
    flow_epsilon: float = config.FLOW_EPS,
    limit: LimitReading = "apparent",
) -> tuple[float, float]:
    """
    Percentages of buses at a voltage-magnitude bound and of limited
    branches at their flow limit.

    Voltage binding means |V| within ``epsilon`` of vmin or vmax (sqrt(W_nn)
    for lifted solutions). Flow binding means the larger terminal flow
    within ``flow_epsilon`` (relative) of its limit. The ``current``
    reading divides |S| by the terminal |V| and compares against ``i_max``,
    or ``s_max / vmin`` for branches without a current rating.
    """
    if not epsilon > 0.0 or not flow_epsilon > 0.0:
        error = f"census tolerances must be positive, got epsilon={epsilon}, flow_epsilon={flow_epsilon}"
        logger.error(error)
        raise ValueError(error)
    if limit not in ("apparent", "current"):
        error = f"unknown flow limit reading {limit!r}"
        logger.error(error)
        raise ValueError(error)

    vm = sol.vm
    vmin = np.array([bus.vmin for bus in net.buses])
    vmax = np.array([bus.vmax for bus in net.buses])
    at_bound = (np.abs(vm - vmin) <= epsilon) | (np.abs(vm - vmax) <= epsilon)
    pct_vmag = 100.0 * float(np.count_nonzero(at_bound)) / len(net.buses) if net.buses else 0.0

    arr = branch_arrays(net)
    s_f = np.hypot(sol.pf, sol.qf)
    s_t = np.hypot(sol.pt, sol.qt)
    if limit == "apparent":
        rating = arr.s_max
        loading = np.maximum(s_f, s_t)
    else:
        floor = np.maximum(vm, 1e-9)
        rating = np.array(
            [
                br.i_max if br.i_max is not None else br.s_max / net.bus(br.from_bus).vmin
                for br in net.branches
            ],
            dtype=float,
        )
        loading = np.maximum(s_f / floor[arr.f], s_t / floor[arr.t])
    limited = np.isfinite(rating)
    if not limited.any():
        return pct_vmag, 0.0
    binding = loading[limited] >= rating[limited] * (1.0 - flow_epsilon)
    pct_flow = 100.0 * float(np.count_nonzero(binding)) / int(np.count_nonzero(limited))
    return pct_vmag, pct_flow
