from __future__ import annotations

import math

import pytest

from src.errors import NetworkValidationError
from src.network.model import (
    Branch,
    Bus,
    FuelType,
    Generator,
    Load,
    Network,
    branch_admittance,
    generation_cost,
    total_cost,
)
from src.network.scenarios import (
    load_scale_factors,
    scale_generation_capacity,
    select_lowest_voltage_loads,
    widen_voltage_bounds,
)


def test_bus_rejects_inverted_voltage_band() -> None:
    with pytest.raises(NetworkValidationError):
        Bus(1, 1.1, 0.9)


def test_branch_rejects_angle_limit_beyond_quarter_turn() -> None:
    with pytest.raises(NetworkValidationError):
        Branch(1, 1, 2, r=0.01, x=0.1, angle_max=math.pi)


def test_network_rejects_dangling_branch() -> None:
    with pytest.raises(NetworkValidationError, match="missing bus 99"):
        Network(100.0, (Bus(1, 0.9, 1.1),), branches=(Branch(1, 1, 99, r=0.0, x=0.1),))


def test_negative_load_is_injection_and_never_scales() -> None:
    net = Network(100.0, (Bus(1, 0.9, 1.1),), loads=(Load(1, 1, -0.2, 0.0), Load(2, 1, 0.3, 0.1)))
    assert net.loads[0].is_injection
    factors = load_scale_factors(net, 1.5, {1, 2})
    assert factors == {1: 1.0, 2: 1.5}


def test_reference_bus_is_lowest_generator_bus(case9: Network) -> None:
    assert case9.reference_bus == 1


@pytest.mark.parametrize(
    ("r", "x", "expected"),
    [
        (0.0, 0.5, complex(0.0, -2.0)),
        (0.0, 1.0, complex(0.0, -1.0)),
        (0.88, 3.12, complex(0.083739, -0.296893)),
        (1.0, 0.0, complex(1.0, 0.0)),
    ],
)
def test_branch_admittance_inverts_impedance(r: float, x: float, expected: complex) -> None:
    y = branch_admittance(Branch(1, 1, 2, r=r, x=x))
    assert y.real == pytest.approx(expected.real, abs=1e-5)
    assert y.imag == pytest.approx(expected.imag, abs=1e-5)


def test_branch_rejects_zero_impedance() -> None:
    with pytest.raises(NetworkValidationError, match="degenerate impedance"):
        Branch(1, 1, 2, r=0.0, x=0.0)


@pytest.mark.parametrize(
    ("c2", "c1", "c0", "p", "expected"),
    [(0.0, 10.0, 0.0, 2.0, 20.0), (1.0, 0.0, 5.0, 3.0, 14.0)],
)
def test_generation_cost(c2: float, c1: float, c0: float, p: float, expected: float) -> None:
    gen = Generator(1, 1, 0.0, 5.0, -1.0, 1.0, cost_c2=c2, cost_c1=c1, cost_c0=c0)
    assert generation_cost(gen, p) == pytest.approx(expected)


def test_renewables_carry_no_quadratic_cost() -> None:
    with pytest.raises(NetworkValidationError, match="solar"):
        Generator(1, 1, 0.0, 1.0, 0.0, 0.0, fuel=FuelType.SOLAR, cost_c2=0.7)


def test_total_cost_sums_quadratics(two_bus: Network) -> None:
    assert total_cost(two_bus, [0.5]) == pytest.approx(0.25 + 5.0)


def test_lowest_voltage_loads_break_ties_by_id() -> None:
    buses = tuple(Bus(i, 0.9, 1.1, setpoint_vm=vm) for i, vm in ((1, 1.0), (2, 0.95), (3, 0.95), (4, 0.97)))
    loads = tuple(Load(i, i, 0.1, 0.0) for i in (2, 3, 4))
    net = Network(100.0, buses, loads=loads)
    assert select_lowest_voltage_loads(net, 2) == {2, 3}
    with pytest.raises(NetworkValidationError):
        select_lowest_voltage_loads(net, 4)
    assert select_lowest_voltage_loads(net, 0) == set()


def test_lowest_voltage_loads_need_setpoints() -> None:
    net = Network(100.0, (Bus(1, 0.9, 1.1), Bus(2, 0.9, 1.1, setpoint_vm=1.0)), loads=(Load(1, 1, 0.1, 0.0),))
    with pytest.raises(NetworkValidationError, match="bus 1"):
        select_lowest_voltage_loads(net, 1)


def test_capacity_scaling_keeps_pmin(case9: Network) -> None:
    scaled = scale_generation_capacity(case9, 3.0)
    for before, after in zip(case9.generators, scaled.generators, strict=True):
        assert after.pmax == pytest.approx(3.0 * before.pmax)
        assert after.pmin == before.pmin
        assert after.qmin == pytest.approx(3.0 * before.qmin)


def test_voltage_widening_floors_vmin() -> None:
    net = Network(100.0, (Bus(1, 0.55, 1.05),))
    wide = widen_voltage_bounds(net, 0.1)
    assert wide.buses[0].vmin == pytest.approx(0.5)
    assert wide.buses[0].vmax == pytest.approx(1.15)
    with pytest.raises(NetworkValidationError):
        widen_voltage_bounds(net, -0.1)


def test_voltage_widening_never_raises_a_low_vmin() -> None:
    net = Network(100.0, (Bus(1, 0.4, 1.0), Bus(2, 0.52, 1.0)))
    wide = widen_voltage_bounds(net, 0.1)
    assert wide.buses[0].vmin == pytest.approx(0.4)
    assert wide.buses[1].vmin == pytest.approx(0.5)
    assert all(b.vmax == pytest.approx(1.1) for b in wide.buses)


def test_generator_rejects_inverted_dispatch_box() -> None:
    with pytest.raises(NetworkValidationError):
        Generator(1, 1, 1.0, 0.5, -1.0, 1.0)
