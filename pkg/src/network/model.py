"""
In-memory power network model.

All quantities are per-unit on ``Network.base_mva``; angles are radians.
Records are frozen dataclasses, so a ``Network`` can be shared freely between
sweep workers. Mutating helpers in ``src.network.scenarios`` return copies.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
import math

from src import config
from src.errors import NetworkValidationError

logger = config.LOGGER


class FuelType(str, Enum):
    SOLAR = "solar"
    WIND = "wind"
    THERMAL = "thermal"
    HYDRO = "hydro"
    NUCLEAR = "nuclear"

    @property
    def is_renewable(self) -> bool:
        """Fuels whose cost curve carries no quadratic term."""
        return self in (FuelType.SOLAR, FuelType.WIND, FuelType.HYDRO)


def _reject(error: str) -> None:
    logger.error(error)
    raise NetworkValidationError(error)


@dataclass(frozen=True, slots=True)
class Bus:
    id: int
    vmin: float
    vmax: float
    setpoint_vm: float | None = None
    base_kv: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 < self.vmin <= self.vmax):
            _reject(f"bus {self.id}: voltage bounds must satisfy 0 < vmin <= vmax, got [{self.vmin}, {self.vmax}]")


@dataclass(frozen=True, slots=True)
class Branch:
    id: int
    from_bus: int
    to_bus: int
    r: float
    x: float
    charge_b: float = 0.0
    tap: float = 1.0
    shift: float = 0.0
    s_max: float = math.inf
    angle_max: float = math.pi / 3
    i_max: float | None = None

    def __post_init__(self) -> None:
        if self.r * self.r + self.x * self.x <= 0.0:
            _reject(f"branch {self.id}: degenerate impedance r = x = 0")
        if self.tap <= 0.0:
            _reject(f"branch {self.id}: tap ratio must be positive, got {self.tap}")
        if self.s_max < 0.0:
            _reject(f"branch {self.id}: s_max must be nonnegative, got {self.s_max}")
        if not (0.0 < self.angle_max <= math.pi / 2 + 1e-12):
            _reject(f"branch {self.id}: angle_max must lie in (0, pi/2], got {self.angle_max}")

    @property
    def is_transformer(self) -> bool:
        return self.tap != 1.0 or self.shift != 0.0

    @property
    def has_flow_limit(self) -> bool:
        return math.isfinite(self.s_max)


@dataclass(frozen=True, slots=True)
class Generator:
    id: int
    bus: int
    pmin: float
    pmax: float
    qmin: float
    qmax: float
    fuel: FuelType = FuelType.THERMAL
    cost_c2: float = 0.0
    cost_c1: float = 0.0
    cost_c0: float = 0.0

    def __post_init__(self) -> None:
        if self.pmin > self.pmax:
            _reject(f"generator {self.id}: pmin {self.pmin} exceeds pmax {self.pmax}")
        if self.qmin > self.qmax:
            _reject(f"generator {self.id}: qmin {self.qmin} exceeds qmax {self.qmax}")
        if self.cost_c2 < 0.0:
            _reject(f"generator {self.id}: quadratic cost must be nonnegative, got {self.cost_c2}")
        if self.fuel.is_renewable and self.cost_c2 != 0.0:
            _reject(f"generator {self.id}: {self.fuel.value} generators carry no quadratic cost, got c2={self.cost_c2}")


@dataclass(frozen=True, slots=True)
class Load:
    id: int
    bus: int
    p: float
    q: float
    is_injection: bool = False

    def __post_init__(self) -> None:
        if self.p < 0.0 and not self.is_injection:
            # Negative demand models a boundary injection and never scales.
            object.__setattr__(self, "is_injection", True)


@dataclass(frozen=True, slots=True)
class Shunt:
    id: int
    bus: int
    gs: float
    bs: float


@dataclass(frozen=True)
class Network:
    base_mva: float
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...] = ()
    generators: tuple[Generator, ...] = ()
    loads: tuple[Load, ...] = ()
    shunts: tuple[Shunt, ...] = ()
    name: str = field(default="network", compare=False)

    def __post_init__(self) -> None:
        for attr in ("buses", "branches", "generators", "loads", "shunts"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))
        if not self.base_mva > 0.0:
            _reject(f"base_mva must be positive, got {self.base_mva}")
        seen: set[int] = set()
        for bus in self.buses:
            if bus.id in seen:
                _reject(f"duplicate bus id {bus.id}")
            seen.add(bus.id)
        for kind, records in (
            ("branch", self.branches),
            ("generator", self.generators),
            ("load", self.loads),
            ("shunt", self.shunts),
        ):
            ids = [rec.id for rec in records]
            if len(ids) != len(set(ids)):
                _reject(f"duplicate {kind} id in network {self.name}")
        for branch in self.branches:
            for end in (branch.from_bus, branch.to_bus):
                if end not in seen:
                    _reject(f"branch {branch.id} references missing bus {end}")
        for kind, records in (("generator", self.generators), ("load", self.loads), ("shunt", self.shunts)):
            for rec in records:
                if rec.bus not in seen:
                    _reject(f"{kind} {rec.id} references missing bus {rec.bus}")

    @cached_property
    def bus_index(self) -> dict[int, int]:
        """Bus id -> position in ``buses``."""
        return {bus.id: k for k, bus in enumerate(self.buses)}

    def bus(self, bus_id: int) -> Bus:
        return self.buses[self.bus_index[bus_id]]

    def generators_at(self, bus_id: int) -> list[Generator]:
        return [gen for gen in self.generators if gen.bus == bus_id]

    def loads_at(self, bus_id: int) -> list[Load]:
        return [load for load in self.loads if load.bus == bus_id]

    @property
    def scalable_loads(self) -> list[Load]:
        return [load for load in self.loads if not load.is_injection]

    @property
    def reference_bus(self) -> int:
        """Lowest bus id hosting a generator (lowest bus id overall when none do)."""
        gen_buses = {gen.bus for gen in self.generators}
        candidates = sorted(gen_buses) or sorted(self.bus_index)
        return candidates[0]

    def replace(self, **changes: Iterable | float | str) -> Network:
        """Copy with selected collections swapped out; the copy is revalidated."""
        fields = {
            "base_mva": self.base_mva,
            "buses": self.buses,
            "branches": self.branches,
            "generators": self.generators,
            "loads": self.loads,
            "shunts": self.shunts,
            "name": self.name,
        }
        fields.update(changes)
        return Network(**fields)  # type: ignore[arg-type]

    def summary(self) -> dict[str, int]:
        return {
            "buses": len(self.buses),
            "branches": len(self.branches),
            "generators": len(self.generators),
            "loads": len(self.loads),
            "shunts": len(self.shunts),
        }


def branch_admittance(branch: Branch) -> complex:
    """Series admittance y = 1 / (r + jx) of a branch, in per-unit."""
    denom = branch.r * branch.r + branch.x * branch.x
    if denom <= 0.0:
        error = f"branch {branch.id}: cannot invert zero impedance"
        logger.error(error)
        raise NetworkValidationError(error)
    return complex(branch.r / denom, -branch.x / denom)


def generation_cost(gen: Generator, p: float) -> float:
    """Quadratic generation cost; evaluable outside the dispatch box."""
    return gen.cost_c2 * p * p + gen.cost_c1 * p + gen.cost_c0


def total_cost(net: Network, dispatch: Iterable[float]) -> float:
    return sum(generation_cost(gen, p) for gen, p in zip(net.generators, dispatch, strict=True))
