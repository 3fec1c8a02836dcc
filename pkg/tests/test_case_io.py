from __future__ import annotations

import dataclasses
import math

import pytest

from src.errors import CaseParseError
from src.ingest.case_io import bundled_cases, load_case, parse_case, write_case
from src.network.model import Network

MINIMAL = """
function mpc = tiny
mpc.baseMVA = 100;
mpc.bus = [
\t1\t3\t0\t0\t0\t0\t1\t1.0\t0\t230\t1\t1.1\t0.9;
\t2\t1\t50\t10\t0\t0\t1\t0.98\t0\t230\t1\t1.1\t0.9;
];
mpc.gen = [
\t1\t0\t0\t100\t-100\t1\t100\t1\t200\t0;
];
mpc.branch = [
\t1\t2\t0.01\t0.1\t0\t150\t150\t150\t0\t0\t1\t-30\t30;
];
mpc.gencost = [
\t2\t0\t0\t3\t0.02\t15\t0;
];
"""


def test_case9_shape(case9: Network) -> None:
    assert case9.summary() == {"buses": 9, "branches": 9, "generators": 3, "loads": 3, "shunts": 0}
    assert case9.base_mva == 100.0


def test_minimal_case_is_converted_to_per_unit() -> None:
    net = parse_case(MINIMAL, name="tiny")
    gen = net.generators[0]
    assert gen.pmax == pytest.approx(2.0)
    assert gen.cost_c2 == pytest.approx(0.02 * 100 * 100)
    assert gen.cost_c1 == pytest.approx(15 * 100)
    load = net.loads[0]
    assert (load.id, load.bus, load.p, load.q) == (2, 2, pytest.approx(0.5), pytest.approx(0.1))
    branch = net.branches[0]
    assert branch.s_max == pytest.approx(1.5)
    assert branch.angle_max == pytest.approx(math.radians(30))
    assert net.bus(2).setpoint_vm == pytest.approx(0.98)


def test_empty_input_reports_missing_bus_section() -> None:
    with pytest.raises(CaseParseError, match="missing bus section"):
        parse_case("")


def test_dangling_bus_reference_is_rejected() -> None:
    text = MINIMAL.replace("\t1\t2\t0.01", "\t1\t99\t0.01")
    with pytest.raises(CaseParseError, match="bus 99"):
        parse_case(text)


def test_malformed_number_carries_line() -> None:
    text = MINIMAL.replace("0.01\t0.1", "0.01\tabc")
    with pytest.raises(CaseParseError) as info:
        parse_case(text)
    assert info.value.line is not None


def test_unlimited_rating_reads_as_infinite(case5: Network) -> None:
    assert any(not br.has_flow_limit for br in case5.branches)
    assert any(br.has_flow_limit for br in case5.branches)


def _assert_close(a: Network, b: Network) -> None:
    assert a.summary() == b.summary()
    for left, right in zip(
        a.buses + a.branches + a.generators + a.loads + a.shunts,
        b.buses + b.branches + b.generators + b.loads + b.shunts,
        strict=True,
    ):
        assert type(left) is type(right)
        for f in dataclasses.fields(left):
            x, y = getattr(left, f.name), getattr(right, f.name)
            if isinstance(x, float) and isinstance(y, float):
                assert x == pytest.approx(y, rel=1e-12, abs=1e-12) or (math.isinf(x) and x == y)
            else:
                assert x == y


@pytest.mark.parametrize("path", bundled_cases(), ids=lambda p: p.stem)
def test_write_then_parse_preserves_network(path) -> None:
    net = load_case(path)
    again = parse_case(write_case(net), name=net.name)
    _assert_close(net, again)
    assert write_case(again) == write_case(parse_case(write_case(again), name=net.name))
