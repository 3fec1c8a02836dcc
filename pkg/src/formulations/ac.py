"""Polar AC-OPF and the load-flow recovery problem."""

from __future__ import annotations

from collections.abc import Collection, Mapping, Sequence

from src import config
from src.errors import ProblemStructureError
from src.formulations.common import (
    add_balance,
    add_dispatch_distance,
    add_generation_cost,
    add_thermal,
    branch_terms,
    check_load_factor,
    declare_dispatch,
    declare_flows,
    polar_flow_terms,
)
from src.formulations.nlp import NlpBuilder, NlpProblem, lin, prod
from src.network.model import Network

logger = config.LOGGER

AC_TAG = "AC"
LOAD_FLOW_TAG = "LOADFLOW"


def _polar_feasible_set(b: NlpBuilder, net: Network, t: float, scaled_loads: Collection[int]) -> list[int]:
    """Declare the AC feasible set; returns the active-dispatch variable indices."""
    ref = net.reference_bus
    vm, va = [], []
    for bus in net.buses:
        vm.append(b.add_var(f"vm[{bus.id}]", bus.vmin, bus.vmax, 1.0, block="vm"))
    for bus in net.buses:
        lo, hi = (0.0, 0.0) if bus.id == ref else (-float("inf"), float("inf"))
        va.append(b.add_var(f"va[{bus.id}]", lo, hi, 0.0, block="va"))
    pg, qg = declare_dispatch(b, net)

    exprs = []
    for br, coef in zip(net.branches, branch_terms(net), strict=True):
        f, to = net.bus_index[br.from_bus], net.bus_index[br.to_bus]
        exprs.append(polar_flow_terms(coef, vm[f], vm[to], va[f], va[to]))
    flows = declare_flows(b, net, exprs)

    add_balance(b, net, t, scaled_loads, pg, qg, flows, [[prod(1.0, v, v)] for v in vm])
    add_thermal(b, net, flows)
    for br in net.branches:
        f, to = net.bus_index[br.from_bus], net.bus_index[br.to_bus]
        b.add_constraint(
            f"angle[{br.id}]", [lin(1.0, va[f]), lin(-1.0, va[to])], -br.angle_max, br.angle_max, group="angle"
        )
    b.metadata["reference_bus"] = ref
    return pg


def build_ac_opf(net: Network, t: float, scaled_loads: Collection[int]) -> NlpProblem:
    """Polar AC-OPF with generation cost objective and scaled loads."""
    check_load_factor(t)
    b = NlpBuilder(AC_TAG, load_factor=t, convex=False)
    pg = _polar_feasible_set(b, net, t, scaled_loads)
    add_generation_cost(b, net, pg)
    return b.build()


def build_load_flow(
    net: Network,
    t: float,
    scaled_loads: Collection[int],
    target_dispatch: Sequence[float] | Mapping[int, float],
) -> NlpProblem:
    """
    Closest AC-feasible active dispatch to ``target_dispatch`` in the L2 sense.

    Targets are given per generator, either positionally or keyed by
    generator id.
    """
    check_load_factor(t)
    if isinstance(target_dispatch, Mapping):
        missing = [gen.id for gen in net.generators if gen.id not in target_dispatch]
        if missing:
            error = f"target dispatch lacks generators {missing}"
            logger.error(error)
            raise ProblemStructureError(error)
        target = [float(target_dispatch[gen.id]) for gen in net.generators]
    else:
        target = [float(p) for p in target_dispatch]
        if len(target) != len(net.generators):
            error = f"target dispatch has {len(target)} entries for {len(net.generators)} generators"
            logger.error(error)
            raise ProblemStructureError(error)
    b = NlpBuilder(LOAD_FLOW_TAG, load_factor=t, convex=False)
    pg = _polar_feasible_set(b, net, t, scaled_loads)
    for v, p_hat in zip(pg, target, strict=True):
        b.set_initial(v, p_hat)
    add_dispatch_distance(b, pg, target)
    b.metadata["target_dispatch"] = tuple(target)
    return b.build()
