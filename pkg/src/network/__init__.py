"""Power network data model and scenario mutations."""

from src.network.model import (
    Branch,
    Bus,
    FuelType,
    Generator,
    Load,
    Network,
    Shunt,
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

__all__ = [
    "Branch",
    "Bus",
    "FuelType",
    "Generator",
    "Load",
    "Network",
    "Shunt",
    "branch_admittance",
    "generation_cost",
    "load_scale_factors",
    "scale_generation_capacity",
    "select_lowest_voltage_loads",
    "total_cost",
    "widen_voltage_bounds",
]
