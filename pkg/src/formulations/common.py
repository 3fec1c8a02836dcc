"""Building blocks shared by the AC, lifted and load-flow formulations."""

from __future__ import annotations

from collections.abc import Collection, Sequence
from dataclasses import dataclass, field
import math

import numpy as np

from src import config
from src.errors import ProblemStructureError
from src.formulations.branch import BranchCoefficients, branch_coefficients
from src.formulations.nlp import NlpBuilder, Term, lin, prod, trig
from src.network.model import Network
from src.network.scenarios import load_scale_factors

logger = config.LOGGER

FlowExprs = tuple[list[Term], list[Term], list[Term], list[Term]]


@dataclass(slots=True)
class FlowIndex:
    pf: list[int] = field(default_factory=list)
    qf: list[int] = field(default_factory=list)
    pt: list[int] = field(default_factory=list)
    qt: list[int] = field(default_factory=list)


@dataclass(frozen=True, slots=True)
class BusPair:
    """An undirected bus pair carrying one or more branches, stored in the orientation (i, j)."""
    i: int
    j: int
    angle_max: float


@dataclass(frozen=True)
class PairMap:
    pairs: tuple[BusPair, ...]
    branch_pair: np.ndarray
    branch_sign: np.ndarray


def check_load_factor(t: float) -> None:
    if not (t > 0.0 and math.isfinite(t)):
        error = f"load scaling factor must be positive and finite, got {t}"
        logger.error(error)
        raise ProblemStructureError(error)


def bus_pairs(net: Network) -> PairMap:
    """
    Collapse parallel branches onto bus pairs.

    A pair takes the orientation of its first branch; ``branch_sign`` is -1
    for branches running against it (their imaginary W part flips sign).
    The pair angle limit is the tightest among its branches.
    """
    index: dict[tuple[int, int], int] = {}
    oriented: list[tuple[int, int]] = []
    limits: list[float] = []
    branch_pair = np.zeros(len(net.branches), dtype=np.int64)
    branch_sign = np.ones(len(net.branches))
    for k, br in enumerate(net.branches):
        i, j = net.bus_index[br.from_bus], net.bus_index[br.to_bus]
        key = (min(i, j), max(i, j))
        if key not in index:
            index[key] = len(oriented)
            oriented.append((i, j))
            limits.append(br.angle_max)
        p = index[key]
        limits[p] = min(limits[p], br.angle_max)
        branch_pair[k] = p
        branch_sign[k] = 1.0 if oriented[p] == (i, j) else -1.0
    pairs = tuple(BusPair(i, j, lim) for (i, j), lim in zip(oriented, limits, strict=True))
    return PairMap(pairs, branch_pair, branch_sign)


def _nonzero(terms: Sequence[Term]) -> list[Term]:
    return [term for term in terms if term.coef != 0.0]


def polar_flow_terms(c: BranchCoefficients, vf: int, vt: int, af: int, at: int) -> FlowExprs:
    """Terminal flows in polar coordinates; angles enter as cos/sin(af - at)."""
    return (
        _nonzero([prod(c.g_ff, vf, vf), trig(c.g_ft, "cos", af, at, vf, vt), trig(c.b_ft, "sin", af, at, vf, vt)]),
        _nonzero([prod(-c.b_ff, vf, vf), trig(c.g_ft, "sin", af, at, vf, vt), trig(-c.b_ft, "cos", af, at, vf, vt)]),
        _nonzero([prod(c.g_tt, vt, vt), trig(c.g_tf, "cos", af, at, vf, vt), trig(-c.b_tf, "sin", af, at, vf, vt)]),
        _nonzero([prod(-c.b_tt, vt, vt), trig(-c.g_tf, "sin", af, at, vf, vt), trig(-c.b_tf, "cos", af, at, vf, vt)]),
    )


def lifted_flow_terms(c: BranchCoefficients, wf: int, wt: int, wr: int, wi: int, sign: float) -> FlowExprs:
    """Terminal flows linear in W; ``sign`` orients the shared imaginary part."""
    return (
        _nonzero([lin(c.g_ff, wf), lin(c.g_ft, wr), lin(sign * c.b_ft, wi)]),
        _nonzero([lin(-c.b_ff, wf), lin(sign * c.g_ft, wi), lin(-c.b_ft, wr)]),
        _nonzero([lin(c.g_tt, wt), lin(c.g_tf, wr), lin(-sign * c.b_tf, wi)]),
        _nonzero([lin(-c.b_tt, wt), lin(-sign * c.g_tf, wi), lin(-c.b_tf, wr)]),
    )


def declare_dispatch(b: NlpBuilder, net: Network) -> tuple[list[int], list[int]]:
    pg, qg = [], []
    for gen in net.generators:
        pg.append(b.add_var(f"pg[{gen.id}]", gen.pmin, gen.pmax, 0.5 * (gen.pmin + gen.pmax), block="pg"))
    for gen in net.generators:
        qg.append(b.add_var(f"qg[{gen.id}]", gen.qmin, gen.qmax, 0.5 * (gen.qmin + gen.qmax), block="qg"))
    return pg, qg


def declare_flows(b: NlpBuilder, net: Network, exprs: Sequence[FlowExprs]) -> FlowIndex:
    """Directed flow variables with their defining equalities, initialized consistently."""
    idx = FlowIndex()
    targets = (idx.pf, idx.qf, idx.pt, idx.qt)
    for part, (label, target) in enumerate(zip(("pf", "qf", "pt", "qt"), targets, strict=True)):
        for br, expr in zip(net.branches, exprs, strict=True):
            limit = br.s_max if br.has_flow_limit else math.inf
            v = b.add_var(f"{label}[{br.id}]", -limit, limit, b.evaluate(expr[part]), block=label)
            target.append(v)
            b.add_equality(
                f"flow_{label}[{br.id}]",
                [lin(1.0, v), *(Term(-term.coef, term.vars, term.trig, term.angle) for term in expr[part])],
                group="flow_def",
            )
    return idx


def bus_demand(net: Network, t: float, scaled_loads: Collection[int]) -> tuple[np.ndarray, np.ndarray]:
    """Per-bus (p, q) demand after applying the load scaling factors."""
    factors = load_scale_factors(net, t, scaled_loads)
    p = np.zeros(len(net.buses))
    q = np.zeros(len(net.buses))
    for load in net.loads:
        k = net.bus_index[load.bus]
        p[k] += factors[load.id] * load.p
        q[k] += factors[load.id] * load.q
    return p, q


def add_balance(
    b: NlpBuilder,
    net: Network,
    t: float,
    scaled_loads: Collection[int],
    pg: Sequence[int],
    qg: Sequence[int],
    flows: FlowIndex,
    bus_square: Sequence[list[Term]],
) -> None:
    """
    Power balance per bus: generation minus terminal flows minus shunt
    withdrawal equals scaled demand. ``bus_square[k]`` expresses |V_k|^2.
    """
    demand_p, demand_q = bus_demand(net, t, scaled_loads)
    gen_at: dict[int, list[int]] = {}
    for g, gen in enumerate(net.generators):
        gen_at.setdefault(net.bus_index[gen.bus], []).append(g)
    out_p: dict[int, list[int]] = {}
    out_q: dict[int, list[int]] = {}
    for k, br in enumerate(net.branches):
        f, to = net.bus_index[br.from_bus], net.bus_index[br.to_bus]
        out_p.setdefault(f, []).append(flows.pf[k])
        out_q.setdefault(f, []).append(flows.qf[k])
        out_p.setdefault(to, []).append(flows.pt[k])
        out_q.setdefault(to, []).append(flows.qt[k])
    gs = np.zeros(len(net.buses))
    bs = np.zeros(len(net.buses))
    for shunt in net.shunts:
        gs[net.bus_index[shunt.bus]] += shunt.gs
        bs[net.bus_index[shunt.bus]] += shunt.bs

    for n, bus in enumerate(net.buses):
        terms_p = [lin(1.0, pg[g]) for g in gen_at.get(n, [])] + [lin(-1.0, v) for v in out_p.get(n, [])]
        terms_q = [lin(1.0, qg[g]) for g in gen_at.get(n, [])] + [lin(-1.0, v) for v in out_q.get(n, [])]
        if gs[n]:
            terms_p += [Term(-gs[n] * term.coef, term.vars) for term in bus_square[n]]
        if bs[n]:
            terms_q += [Term(bs[n] * term.coef, term.vars) for term in bus_square[n]]
        b.add_equality(f"balance_p[{bus.id}]", terms_p, group="balance_p", rhs=float(demand_p[n]))
        b.add_equality(f"balance_q[{bus.id}]", terms_q, group="balance_q", rhs=float(demand_q[n]))


def add_thermal(b: NlpBuilder, net: Network, flows: FlowIndex) -> None:
    """|S| <= s_max at both terminals of every limited branch, as p^2 + q^2 <= s_max^2."""
    for k, br in enumerate(net.branches):
        if not br.has_flow_limit:
            continue
        limit = br.s_max * br.s_max
        b.add_upper(f"thermal_f[{br.id}]", [prod(1.0, flows.pf[k], flows.pf[k]), prod(1.0, flows.qf[k], flows.qf[k])], "thermal", limit)
        b.add_upper(f"thermal_t[{br.id}]", [prod(1.0, flows.pt[k], flows.pt[k]), prod(1.0, flows.qt[k], flows.qt[k])], "thermal", limit)


def add_generation_cost(b: NlpBuilder, net: Network, pg: Sequence[int]) -> None:
    terms: list[Term] = []
    for gen, v in zip(net.generators, pg, strict=True):
        terms += _nonzero([prod(gen.cost_c2, v, v), lin(gen.cost_c1, v), Term(gen.cost_c0)])
    b.add_objective(terms)


def add_dispatch_distance(b: NlpBuilder, pg: Sequence[int], target: Sequence[float]) -> None:
    """sum (p_g - target_g)^2, constant included so the optimum is the squared distance."""
    terms: list[Term] = []
    for v, p_hat in zip(pg, target, strict=True):
        terms += _nonzero([prod(1.0, v, v), lin(-2.0 * p_hat, v), Term(p_hat * p_hat)])
    b.add_objective(terms)


def branch_terms(net: Network) -> list[BranchCoefficients]:
    return [branch_coefficients(br) for br in net.branches]
