from __future__ import annotations

import math

import numpy as np
import pytest

from src.errors import ProblemStructureError
from src.formulations.ac import build_ac_opf, build_load_flow
from src.formulations.branch import branch_arrays, branch_coefficients, polar_flows
from src.formulations.evaluation import binding_census, evaluate_feasibility
from src.formulations.relaxations import build_qc, build_sdp, build_socp, network_triangles
from src.formulations.solutions import AcSolution, RelaxSolution, extract_solution, lift_to_w
from src.network.model import Branch, Bus, Generator, Load, Network


def _all_loads(net: Network) -> set[int]:
    return {load.id for load in net.scalable_loads}


def _random_point(net: Network, seed: int) -> AcSolution:
    rng = np.random.default_rng(seed)
    vm = rng.uniform(0.95, 1.05, len(net.buses))
    va = rng.uniform(-0.2, 0.2, len(net.buses))
    va[net.bus_index[net.reference_bus]] = 0.0
    pg = np.array([0.5 * (g.pmin + g.pmax) for g in net.generators])
    qg = np.zeros(len(net.generators))
    return AcSolution.from_voltages(net, vm, va, pg, qg)


def _rows(problem, x, group):
    rows = problem.constraint_rows(group)
    return problem.constraints(x)[rows], problem.g_lower[rows], problem.g_upper[rows]


def _assert_within(problem, x, groups, tol=1e-9) -> None:
    for group in groups:
        g, lo, hi = _rows(problem, x, group)
        assert np.all(g >= lo - tol), group
        assert np.all(g <= hi + tol), group


def _triangle() -> Network:
    buses = tuple(Bus(i, 0.9, 1.1) for i in (1, 2, 3))
    branches = (
        Branch(1, 1, 2, r=0.01, x=0.1),
        Branch(2, 2, 3, r=0.02, x=0.2, charge_b=0.05),
        Branch(3, 3, 1, r=0.01, x=0.15, tap=1.02),
    )
    return Network(
        100.0,
        buses,
        branches,
        (Generator(1, 1, 0.0, 3.0, -2.0, 2.0, cost_c1=1.0),),
        (Load(2, 2, 0.4, 0.1), Load(3, 3, 0.3, 0.1)),
    )


def test_polar_flows_match_complex_power() -> None:
    br = Branch(1, 1, 2, r=0.02, x=0.12, charge_b=0.2, tap=1.05, shift=0.1)
    net = Network(100.0, (Bus(1, 0.9, 1.1), Bus(2, 0.9, 1.1)), (br,))
    vm, va = np.array([1.03, 0.97]), np.array([0.0, -0.08])
    pf, qf, pt, qt = polar_flows(branch_arrays(net), vm, va)
    v = vm * np.exp(1j * va)
    y = 1.0 / complex(br.r, br.x)
    ratio = br.tap * np.exp(1j * br.shift)
    i_f = (y + 0.5j * br.charge_b) / br.tap**2 * v[0] - y / np.conj(ratio) * v[1]
    i_t = (y + 0.5j * br.charge_b) * v[1] - y / ratio * v[0]
    s_f, s_t = v[0] * np.conj(i_f), v[1] * np.conj(i_t)
    assert (pf[0], qf[0], pt[0], qt[0]) == pytest.approx((s_f.real, s_f.imag, s_t.real, s_t.imag))
    assert branch_coefficients(br).g_ft == pytest.approx((-y / np.conj(ratio)).real)


def test_ac_variable_count(case9: Network) -> None:
    problem = build_ac_opf(case9, 1.0, _all_loads(case9))
    assert problem.n == 2 * 9 + 2 * 3 + 4 * 9
    assert len(problem.constraint_rows("balance_p")) == 9
    assert len(problem.constraint_rows("flow_def")) == 36
    assert not problem.convex


def test_socp_has_one_cone_per_bus_pair(case9: Network) -> None:
    problem = build_socp(case9, 1.0, _all_loads(case9))
    assert len(problem.constraint_rows("cone")) == 9
    assert problem.convex


def test_cone_values_on_two_bus(two_bus: Network) -> None:
    problem = build_socp(two_bus, 1.0, {1})
    x = problem.x_init.copy()
    x[problem.layout["w"]] = 1.0
    x[problem.layout["wr"]], x[problem.layout["wi"]] = 0.6, 0.8
    g, _, _ = _rows(problem, x, "cone")
    assert g[0] == pytest.approx(0.0, abs=1e-12)
    x[problem.layout["wr"]], x[problem.layout["wi"]] = 1.0, 1.0
    g, _, _ = _rows(problem, x, "cone")
    assert g[0] == pytest.approx(1.0)


def test_sdp2_is_structurally_socp(case9: Network) -> None:
    socp = build_socp(case9, 1.2, _all_loads(case9))
    sdp2 = build_sdp(case9, 1.2, _all_loads(case9), minor_order=2)
    assert sdp2.var_names == socp.var_names
    assert sdp2.con_names == socp.con_names
    np.testing.assert_array_equal(sdp2.g_lower, socp.g_lower)
    np.testing.assert_array_equal(sdp2.g_upper, socp.g_upper)
    np.testing.assert_array_equal(sdp2.terms.coef, socp.terms.coef)
    np.testing.assert_array_equal(sdp2.terms.mono, socp.terms.mono)


def test_sdp_rejects_unknown_minor_order(case9: Network) -> None:
    with pytest.raises(ProblemStructureError):
        build_sdp(case9, 1.0, _all_loads(case9), minor_order=4)


def test_triangles(case5: Network, case9: Network) -> None:
    assert network_triangles(case9) == []
    ids = [tuple(case5.buses[v].id for v in tri) for tri in network_triangles(case5)]
    assert ids == [(1, 4, 5)]


def test_minors_on_identity_and_all_ones() -> None:
    net = _triangle()
    problem = build_sdp(net, 1.0, {2, 3}, minor_order=3)
    assert problem.metadata["triangles"] == ((1, 2, 3),)
    x = problem.x_init.copy()
    x[problem.layout["w"]] = 1.0
    x[problem.layout["wi"]] = 0.0

    x[problem.layout["wr"]] = 0.0
    for group in ("minor1", "minor2", "minor3"):
        g, _, _ = _rows(problem, x, group)
        np.testing.assert_allclose(g, 1.0)

    x[problem.layout["wr"]] = 1.0
    g2, _, _ = _rows(problem, x, "minor2")
    g3, _, _ = _rows(problem, x, "minor3")
    np.testing.assert_allclose(g2, 0.0, atol=1e-12)
    np.testing.assert_allclose(g3, 0.0, atol=1e-12)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_rank_one_lifting_satisfies_relaxations(seed: int) -> None:
    net = _triangle()
    sol = _random_point(net, seed)
    socp = build_sdp(net, 1.0, {2, 3}, minor_order=3)
    x = lift_to_w(socp, net, sol)
    _assert_within(socp, x, ["flow_def", "cone", "angle_w", "minor1", "minor2", "minor3"])
    g3, _, _ = _rows(socp, x, "minor3")
    np.testing.assert_allclose(g3, 0.0, atol=1e-10)

    qc = build_qc(net, 1.0, {2, 3})
    x = lift_to_w(qc, net, sol)
    _assert_within(qc, x, ["flow_def", "cone", "qc_square", "qc_cos", "qc_sin", "qc_product", "angle"])


def test_lifted_case9_point_keeps_flows(case9: Network) -> None:
    sol = _random_point(case9, 11)
    problem = build_qc(case9, 1.0, _all_loads(case9))
    x = lift_to_w(problem, case9, sol)
    _assert_within(problem, x, ["flow_def", "cone"])
    relaxed = extract_solution(problem, x)
    assert isinstance(relaxed, RelaxSolution)
    np.testing.assert_allclose(relaxed.vm, sol.vm)
    np.testing.assert_allclose(relaxed.pf, sol.pf)


def test_ac_flow_rows_vanish_at_consistent_point(case9: Network) -> None:
    sol = _random_point(case9, 5)
    problem = build_ac_opf(case9, 1.0, _all_loads(case9))
    x = problem.x_init.copy()
    for name in ("vm", "va", "pg", "qg", "pf", "qf", "pt", "qt"):
        x[problem.layout[name]] = getattr(sol, name)
    _assert_within(problem, x, ["flow_def"])


def test_load_flow_requires_every_target(case9: Network) -> None:
    with pytest.raises(ProblemStructureError, match="lacks generators"):
        build_load_flow(case9, 1.0, _all_loads(case9), {1: 0.5})
    with pytest.raises(ProblemStructureError):
        build_load_flow(case9, 1.0, _all_loads(case9), [0.5])
    problem = build_load_flow(case9, 1.0, _all_loads(case9), {1: 0.9, 2: 1.6, 3: 0.8})
    assert problem.metadata["target_dispatch"] == (0.9, 1.6, 0.8)


def test_nonpositive_load_factor_is_rejected(case9: Network) -> None:
    with pytest.raises(ProblemStructureError):
        build_socp(case9, 0.0, _all_loads(case9))
    with pytest.raises(ProblemStructureError, match="finite"):
        build_socp(case9, math.inf, _all_loads(case9))


def test_flat_start_violates_balance_by_largest_load(case9: Network) -> None:
    n = len(case9.buses)
    sol = AcSolution.from_voltages(case9, np.ones(n), np.zeros(n), np.zeros(3), np.zeros(3))
    report = evaluate_feasibility(case9, sol, 1.0, _all_loads(case9))
    assert report.worst == "balance_p"
    assert report.max_violation == pytest.approx(1.25)
    assert report.violations["flow_def"] == pytest.approx(0.0, abs=1e-12)
    doubled = evaluate_feasibility(case9, sol, 2.0, _all_loads(case9))
    assert doubled.max_violation == pytest.approx(2.5)
    assert not doubled.ok()


def _census_point(vm1: float) -> AcSolution:
    return AcSolution(
        vm=np.array([vm1, 1.0]),
        va=np.array([0.0, -0.05]),
        pg=np.array([0.5]),
        qg=np.array([0.0]),
        pf=np.array([0.5]),
        qf=np.array([0.0]),
        pt=np.array([-0.49]),
        qt=np.array([0.0]),
    )


def test_binding_census(two_bus_factory) -> None:
    net = two_bus_factory(s_max=0.5)
    assert binding_census(net, _census_point(1.1)) == (50.0, 100.0)
    assert binding_census(net, _census_point(1.05)) == (0.0, 100.0)
    _, current = binding_census(net, _census_point(1.1), limit="current")
    assert current == 0.0
    unlimited = two_bus_factory()
    assert binding_census(unlimited, _census_point(1.1))[1] == 0.0


def test_census_on_lifted_solution(two_bus: Network) -> None:
    relaxed = RelaxSolution(
        w=np.array([0.81, 1.0]),
        wr=np.array([0.9]),
        wi=np.array([0.0]),
        pg=np.array([0.5]),
        qg=np.array([0.0]),
        pf=np.array([0.5]),
        qf=np.array([0.0]),
        pt=np.array([-0.5]),
        qt=np.array([0.0]),
    )
    assert binding_census(two_bus, relaxed)[0] == 50.0


def test_census_rejects_bad_tolerances(two_bus: Network) -> None:
    with pytest.raises(ValueError, match="positive"):
        binding_census(two_bus, _census_point(1.0), epsilon=0.0)
    with pytest.raises(ValueError, match="reading"):
        binding_census(two_bus, _census_point(1.0), limit="thermal")  # type: ignore[arg-type]


def test_default_angle_limit_is_pi_over_three() -> None:
    assert Branch(1, 1, 2, r=0.0, x=0.1).angle_max == pytest.approx(math.pi / 3)
