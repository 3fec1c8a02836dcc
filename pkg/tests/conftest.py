from __future__ import annotations

from collections.abc import Callable
import math

import pytest

from src.ingest.case_io import load_case
from src.network.model import Branch, Bus, Generator, Load, Network
from src.solver.options import SolverOptions


@pytest.fixture(scope="session")
def case5() -> Network:
    return load_case("case5")


@pytest.fixture(scope="session")
def case9() -> Network:
    return load_case("case9")


@pytest.fixture(scope="session")
def case14() -> Network:
    return load_case("case14")


def make_two_bus(
    load_p: float = 0.5,
    load_q: float = 0.1,
    r: float = 0.01,
    x: float = 0.1,
    vmin: float = 0.9,
    vmax: float = 1.1,
    s_max: float = math.inf,
    pmax: float = 5.0,
) -> Network:
    """One generator at bus 1 feeding one load at bus 2 over a single line."""
    return Network(
        base_mva=100.0,
        buses=(Bus(1, vmin, vmax, setpoint_vm=1.0), Bus(2, vmin, vmax, setpoint_vm=1.0)),
        branches=(Branch(1, 1, 2, r=r, x=x, s_max=s_max),),
        generators=(Generator(1, 1, 0.0, pmax, -5.0, 5.0, cost_c2=1.0, cost_c1=10.0),),
        loads=(Load(1, 2, load_p, load_q),),
        name="two_bus",
    )


@pytest.fixture
def two_bus_factory() -> Callable[..., Network]:
    return make_two_bus


@pytest.fixture
def two_bus() -> Network:
    return make_two_bus()


@pytest.fixture(scope="session")
def fast_options() -> SolverOptions:
    return SolverOptions(kkt_tolerance=1e-8, max_iterations=300, time_limit=120.0)
