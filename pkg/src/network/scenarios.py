"""Scenario mutations used by the load-scaling studies."""

from __future__ import annotations

from collections.abc import Collection
import dataclasses

from src import config
from src.errors import NetworkValidationError
from src.network.model import Network

logger = config.LOGGER

MIN_WIDENED_VMIN = 0.5


def select_lowest_voltage_loads(net: Network, k: int) -> set[int]:
    """
    Pick the k scalable loads sitting on the lowest snapshot voltages.

    Ties on voltage are broken by ascending load id. Boundary injections
    (``is_injection``) are never candidates.
    """
    if k < 0:
        error = f"load count must be nonnegative, got {k}"
        logger.error(error)
        raise NetworkValidationError(error)
    candidates = net.scalable_loads
    if k > len(candidates):
        error = f"requested {k} loads but network {net.name} has only {len(candidates)} scalable loads"
        logger.error(error)
        raise NetworkValidationError(error)
    if k == 0:
        return set()

    keyed: list[tuple[float, int]] = []
    for load in candidates:
        vm = net.bus(load.bus).setpoint_vm
        if vm is None:
            error = f"bus {load.bus} hosts load {load.id} but has no setpoint voltage magnitude"
            logger.error(error)
            raise NetworkValidationError(error)
        keyed.append((vm, load.id))
    keyed.sort()
    return {load_id for _, load_id in keyed[:k]}


def scale_generation_capacity(net: Network, factor: float) -> Network:
    """
    Multiply generator capability by ``factor``.

    pmax and qmax scale; qmin scales only when negative so the reactive range
    widens symmetrically; pmin is left alone.
    """
    if factor <= 0.0:
        error = f"capacity factor must be positive, got {factor}"
        logger.error(error)
        raise NetworkValidationError(error)
    if factor == 1.0:
        return net
    generators = [
        dataclasses.replace(
            gen,
            pmax=gen.pmax * factor,
            qmax=gen.qmax * factor,
            qmin=gen.qmin * factor if gen.qmin < 0.0 else gen.qmin,
        )
        for gen in net.generators
    ]
    logger.info("Scaled generation capacity of %s by %.3f", net.name, factor)
    return net.replace(generators=generators)


def widen_voltage_bounds(net: Network, delta: float) -> Network:
    """Relax every bus voltage band by ``delta`` p.u. on both sides."""
    if delta < 0.0:
        error = f"voltage widening must be nonnegative, got {delta}"
        logger.error(error)
        raise NetworkValidationError(error)
    if delta == 0.0:
        return net
    buses = [
        dataclasses.replace(bus, vmin=min(bus.vmin, max(MIN_WIDENED_VMIN, bus.vmin - delta)), vmax=bus.vmax + delta)
        for bus in net.buses
    ]
    return net.replace(buses=buses)


def load_scale_factors(net: Network, t: float, scaled_loads: Collection[int]) -> dict[int, float]:
    """Per-load multiplier t^l: t for members of the scaled set, 1 otherwise."""
    chosen = set(scaled_loads)
    return {
        load.id: (t if (load.id in chosen and not load.is_injection) else 1.0)
        for load in net.loads
    }
