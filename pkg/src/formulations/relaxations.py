"""
Convex relaxations in the lifted space W = V V^H.

SOCP keeps W_nn per bus and W_ij = wr + j wi per bus pair with the
rotated-cone inequality. SDP strengthens it with principal minors of 3x3
blocks over network triangles. QC additionally keeps polar voltages and
couples them to W through trigonometric and McCormick envelopes.
"""

from __future__ import annotations

from collections.abc import Collection
from dataclasses import dataclass
import math

import networkx as nx

from src import config
from src.errors import ProblemStructureError
from src.formulations.common import (
    PairMap,
    add_balance,
    add_generation_cost,
    add_thermal,
    branch_terms,
    bus_pairs,
    check_load_factor,
    declare_dispatch,
    declare_flows,
    lifted_flow_terms,
)
from src.formulations.envelopes import McCormick, make_envelopes
from src.formulations.nlp import NlpBuilder, NlpProblem, Term, lin, prod
from src.network.model import Network

logger = config.LOGGER


@dataclass(slots=True)
class _Lifted:
    w: list[int]
    wr: list[int]
    wi: list[int]
    pairs: PairMap


def _declare_lifted(b: NlpBuilder, net: Network) -> _Lifted:
    w = [
        b.add_var(f"w[{bus.id}]", bus.vmin * bus.vmin, bus.vmax * bus.vmax, 1.0, block="w")
        for bus in net.buses
    ]
    pm = bus_pairs(net)
    wr, wi = [], []
    for pair in pm.pairs:
        bi, bj = net.buses[pair.i], net.buses[pair.j]
        hi = bi.vmax * bj.vmax
        lo = bi.vmin * bj.vmin * math.cos(pair.angle_max)
        wr.append(b.add_var(f"wr[{bi.id},{bj.id}]", lo, hi, 1.0, block="wr"))
    for pair in pm.pairs:
        bi, bj = net.buses[pair.i], net.buses[pair.j]
        s = bi.vmax * bj.vmax * math.sin(pair.angle_max)
        wi.append(b.add_var(f"wi[{bi.id},{bj.id}]", -s, s, 0.0, block="wi"))
    b.metadata["pairs"] = tuple((net.buses[p.i].id, net.buses[p.j].id) for p in pm.pairs)
    b.metadata["branch_pair"] = pm.branch_pair
    b.metadata["branch_sign"] = pm.branch_sign
    return _Lifted(w, wr, wi, pm)


def _lifted_network_constraints(
    b: NlpBuilder, net: Network, t: float, scaled_loads: Collection[int], lifted: _Lifted
) -> list[int]:
    """Dispatch, flow definitions, balance, thermal, angle and cone constraints in W."""
    pg, qg = declare_dispatch(b, net)
    exprs = []
    for k, (br, coef) in enumerate(zip(net.branches, branch_terms(net), strict=True)):
        p = int(lifted.pairs.branch_pair[k])
        f, to = net.bus_index[br.from_bus], net.bus_index[br.to_bus]
        exprs.append(
            lifted_flow_terms(coef, lifted.w[f], lifted.w[to], lifted.wr[p], lifted.wi[p], float(lifted.pairs.branch_sign[k]))
        )
    flows = declare_flows(b, net, exprs)
    add_balance(b, net, t, scaled_loads, pg, qg, flows, [[lin(1.0, v)] for v in lifted.w])
    add_thermal(b, net, flows)
    for p, pair in enumerate(lifted.pairs.pairs):
        name = f"{net.buses[pair.i].id},{net.buses[pair.j].id}"
        tan_max = math.tan(pair.angle_max)
        b.add_upper(f"angle_w_hi[{name}]", [lin(1.0, lifted.wi[p]), lin(-tan_max, lifted.wr[p])], "angle_w")
        b.add_upper(f"angle_w_lo[{name}]", [lin(-1.0, lifted.wi[p]), lin(-tan_max, lifted.wr[p])], "angle_w")
    for p, pair in enumerate(lifted.pairs.pairs):
        name = f"{net.buses[pair.i].id},{net.buses[pair.j].id}"
        b.add_upper(
            f"cone[{name}]",
            [
                prod(1.0, lifted.wr[p], lifted.wr[p]),
                prod(1.0, lifted.wi[p], lifted.wi[p]),
                prod(-1.0, lifted.w[pair.i], lifted.w[pair.j]),
            ],
            "cone",
        )
    return pg


def _socp_builder(net: Network, t: float, scaled_loads: Collection[int], tag: str) -> tuple[NlpBuilder, _Lifted]:
    check_load_factor(t)
    b = NlpBuilder(tag, load_factor=t, convex=True)
    lifted = _declare_lifted(b, net)
    pg = _lifted_network_constraints(b, net, t, scaled_loads, lifted)
    add_generation_cost(b, net, pg)
    return b, lifted


def build_socp(net: Network, t: float, scaled_loads: Collection[int]) -> NlpProblem:
    b, _ = _socp_builder(net, t, scaled_loads, "SOCP")
    return b.build()


def network_triangles(net: Network) -> list[tuple[int, ...]]:
    """Bus-position triples forming 3-cliques of the network graph, sorted."""
    graph = nx.Graph()
    graph.add_nodes_from(range(len(net.buses)))
    for br in net.branches:
        graph.add_edge(net.bus_index[br.from_bus], net.bus_index[br.to_bus])
    graph.remove_edges_from(nx.selfloop_edges(graph))
    return sorted(tuple(sorted(c)) for c in nx.enumerate_all_cliques(graph) if len(c) == 3)


def _w_entry(lifted: _Lifted, pair_of: dict[tuple[int, int], int], a: int, b: int) -> tuple[int, int, float]:
    """(wr index, wi index, sign) with W_ab = wr + j * sign * wi."""
    p = pair_of[(min(a, b), max(a, b))]
    pair = lifted.pairs.pairs[p]
    return lifted.wr[p], lifted.wi[p], 1.0 if (pair.i, pair.j) == (a, b) else -1.0


def _minor_terms(lifted: _Lifted, pair_of: dict[tuple[int, int], int], tri: tuple[int, ...]) -> dict[str, list[Term]]:
    """Seven principal minors of the Hermitian block W[tri, tri] as polynomial term lists."""
    i, j, k = tri
    wi_, wj_, wk_ = lifted.w[i], lifted.w[j], lifted.w[k]
    a, b_, s_ij = _w_entry(lifted, pair_of, i, j)
    c, d, s_jk = _w_entry(lifted, pair_of, j, k)
    e, f, s_ik = _w_entry(lifted, pair_of, i, k)
    minors: dict[str, list[Term]] = {
        "d1_i": [lin(1.0, wi_)],
        "d1_j": [lin(1.0, wj_)],
        "d1_k": [lin(1.0, wk_)],
    }
    for label, (x, y), (re, im) in (
        ("d2_ij", (wi_, wj_), (a, b_)),
        ("d2_jk", (wj_, wk_), (c, d)),
        ("d2_ik", (wi_, wk_), (e, f)),
    ):
        minors[label] = [prod(1.0, x, y), prod(-1.0, re, re), prod(-1.0, im, im)]
    # det = Wii Wjj Wkk + 2 Re(W_ij W_jk W_ki) - Wii |W_jk|^2 - Wjj |W_ik|^2 - Wkk |W_ij|^2
    # with W_ij = a + j b, W_jk = c + j d, W_ki = e - j f (signs folded into b, d, f)
    minors["d3"] = [
        prod(1.0, wi_, wj_, wk_),
        prod(2.0, a, c, e),
        prod(-2.0 * s_ij * s_jk, b_, d, e),
        prod(2.0 * s_jk * s_ik, a, d, f),
        prod(2.0 * s_ij * s_ik, b_, c, f),
        prod(-1.0, wi_, c, c),
        prod(-1.0, wi_, d, d),
        prod(-1.0, wj_, e, e),
        prod(-1.0, wj_, f, f),
        prod(-1.0, wk_, a, a),
        prod(-1.0, wk_, b_, b_),
    ]
    return minors


def build_sdp(net: Network, t: float, scaled_loads: Collection[int], minor_order: int = 3) -> NlpProblem:
    """
    SOCP plus principal-minor PSD constraints.

    Order 2 adds nothing (a 2x2 Hermitian block is PSD exactly when its
    diagonal is nonnegative and the cone holds). Order 3 constrains all seven
    principal minors of each triangle block to be nonnegative.
    """
    if minor_order not in (2, 3):
        error = f"minor_order must be 2 or 3, got {minor_order}"
        logger.error(error)
        raise ProblemStructureError(error)
    b, lifted = _socp_builder(net, t, scaled_loads, f"SDP{minor_order}")
    b.metadata["minor_order"] = minor_order
    if minor_order == 3:
        pair_of = {(min(p.i, p.j), max(p.i, p.j)): k for k, p in enumerate(lifted.pairs.pairs)}
        triangles = network_triangles(net)
        for tri in triangles:
            name = ",".join(str(net.buses[v].id) for v in tri)
            for label, terms in _minor_terms(lifted, pair_of, tri).items():
                group = "minor" + label[1]
                b.add_constraint(f"{label}[{name}]", terms, 0.0, math.inf, group)
        b.metadata["triangles"] = tuple(tuple(net.buses[v].id for v in tri) for tri in triangles)
    return b.build()


def build_qc(net: Network, t: float, scaled_loads: Collection[int]) -> NlpProblem:
    """
    QC relaxation: polar voltages, lifted W, and per-pair cos/sin/|V_i||V_j|
    variables tied together by convex envelopes. Includes the SOCP cone.
    """
    check_load_factor(t)
    b = NlpBuilder("QC", load_factor=t, convex=True)
    ref = net.reference_bus
    vm, va = [], []
    for bus in net.buses:
        vm.append(b.add_var(f"vm[{bus.id}]", bus.vmin, bus.vmax, 1.0, block="vm"))
    for bus in net.buses:
        lo, hi = (0.0, 0.0) if bus.id == ref else (-math.inf, math.inf)
        va.append(b.add_var(f"va[{bus.id}]", lo, hi, 0.0, block="va"))
    lifted = _declare_lifted(b, net)
    b.metadata["reference_bus"] = ref

    for n, bus in enumerate(net.buses):
        lo, hi = bus.vmin, bus.vmax
        b.add_upper(f"square_lo[{bus.id}]", [prod(1.0, vm[n], vm[n]), lin(-1.0, lifted.w[n])], "qc_square")
        b.add_upper(f"square_hi[{bus.id}]", [lin(1.0, lifted.w[n]), lin(-(lo + hi), vm[n])], "qc_square", -lo * hi)

    for p, pair in enumerate(lifted.pairs.pairs):
        bi, bj = net.buses[pair.i], net.buses[pair.j]
        name = f"{bi.id},{bj.id}"
        mag = (bi.vmin * bj.vmin, bi.vmax * bj.vmax)
        env = make_envelopes(pair.angle_max, mag)
        ti, tj = va[pair.i], va[pair.j]
        cs_lo, cs_hi = env.cos_range
        sn_lo, sn_hi = env.sin_range
        vv = b.add_var(f"vv[{name}]", mag[0], mag[1], 1.0, block="vv")
        cs = b.add_var(f"cs[{name}]", cs_lo, cs_hi, 1.0, block="cs")
        sn = b.add_var(f"sn[{name}]", sn_lo, sn_hi, 0.0, block="sn")

        b.add_constraint(f"angle[{name}]", [lin(1.0, ti), lin(-1.0, tj)], -pair.angle_max, pair.angle_max, "angle")
        k = env.cos_quad
        b.add_upper(
            f"cos_env[{name}]",
            [lin(1.0, cs), prod(k, ti, ti), prod(-2.0 * k, ti, tj), prod(k, tj, tj)],
            "qc_cos",
            1.0,
        )
        slope = env.sin_slope
        b.add_upper(f"sin_env_hi[{name}]", [lin(1.0, sn), lin(-slope, ti), lin(slope, tj)], "qc_sin", env.sin_offset)
        b.add_upper(f"sin_env_lo[{name}]", [lin(-1.0, sn), lin(slope, ti), lin(-slope, tj)], "qc_sin", env.sin_offset)

        _add_mccormick(b, f"vv_env[{name}]", vv, vm[pair.i], vm[pair.j], (bi.vmin, bi.vmax, bj.vmin, bj.vmax))
        for label, lifted_var, trig_var in (("wr", lifted.wr[p], cs), ("wi", lifted.wi[p], sn)):
            mc = env.products[label]
            _add_mccormick(b, f"{label}_env[{name}]", lifted_var, vv, trig_var, (mc.x_lo, mc.x_hi, mc.y_lo, mc.y_hi))

    pg = _lifted_network_constraints(b, net, t, scaled_loads, lifted)
    add_generation_cost(b, net, pg)
    return b.build()


def _add_mccormick(
    b: NlpBuilder, name: str, z: int, x: int, y: int, box: tuple[float, float, float, float]
) -> None:
    """Four linear McCormick rows for z = x * y over the given box."""
    for k, (a_x, a_y, c, sense) in enumerate(McCormick(*box).cuts()):
        sign = -1.0 if sense == ">=" else 1.0
        # sense ">=": a_x x + a_y y - z <= -c ; sense "<=": z - a_x x - a_y y <= c
        terms = [lin(sign, z), lin(-sign * a_x, x), lin(-sign * a_y, y)]
        b.add_upper(f"{name}_{k}", [term for term in terms if term.coef != 0.0], "qc_product", sign * c)

