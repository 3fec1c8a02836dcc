"""
Convex envelopes for the QC relaxation.

On a symmetric angle interval [-a, a] with 0 < a <= pi/2:

    cos:  cos(a) <= c <= 1 - (1 - cos a) / a^2 * theta^2
    sin:  cos(a/2) * (theta + a/2) - sin(a/2) <= s <= cos(a/2) * (theta - a/2) + sin(a/2)

Bilinear products use McCormick envelopes over box bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from src import config
from src.errors import ProblemStructureError

logger = config.LOGGER


@dataclass(frozen=True, slots=True)
class McCormick:
    """
    Envelope of z = x * y over [x_lo, x_hi] x [y_lo, y_hi].

    ``cuts`` yields (a_x, a_y, c, sense) with ``z sense a_x * x + a_y * y + c``
    where sense is ">=" for under-estimators and "<=" for over-estimators.
    """
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def cuts(self) -> tuple[tuple[float, float, float, str], ...]:
        xl, xu, yl, yu = self.x_lo, self.x_hi, self.y_lo, self.y_hi
        return (
            (yl, xl, -xl * yl, ">="),
            (yu, xu, -xu * yu, ">="),
            (yl, xu, -xu * yl, "<="),
            (yu, xl, -xl * yu, "<="),
        )

    def bounds(self, x: np.ndarray | float, y: np.ndarray | float) -> tuple[np.ndarray, np.ndarray]:
        """Tightest (lower, upper) envelope values at (x, y)."""
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        lowers = [a_x * x + a_y * y + c for a_x, a_y, c, sense in self.cuts() if sense == ">="]
        uppers = [a_x * x + a_y * y + c for a_x, a_y, c, sense in self.cuts() if sense == "<="]
        return np.maximum(*lowers), np.minimum(*uppers)


@dataclass(frozen=True)
class EnvelopeSet:
    angle_max: float
    cos_quad: float
    cos_floor: float
    sin_slope: float
    sin_offset: float
    products: dict[str, McCormick] = field(default_factory=dict)

    def cos_upper(self, theta: np.ndarray | float) -> np.ndarray:
        return 1.0 - self.cos_quad * np.square(theta)

    def cos_lower(self, theta: np.ndarray | float) -> np.ndarray:
        return np.full_like(np.asarray(theta, dtype=float), self.cos_floor)

    def sin_upper(self, theta: np.ndarray | float) -> np.ndarray:
        return self.sin_slope * np.asarray(theta, dtype=float) + self.sin_offset

    def sin_lower(self, theta: np.ndarray | float) -> np.ndarray:
        return self.sin_slope * np.asarray(theta, dtype=float) - self.sin_offset

    @property
    def sin_range(self) -> tuple[float, float]:
        s = math.sin(self.angle_max)
        return -s, s

    @property
    def cos_range(self) -> tuple[float, float]:
        return self.cos_floor, 1.0

    def slack(self, theta: np.ndarray) -> np.ndarray:
        """Smallest envelope slack of (cos, sin) at each sample; >= 0 means contained."""
        c, s = np.cos(theta), np.sin(theta)
        return np.minimum.reduce(
            [self.cos_upper(theta) - c, c - self.cos_lower(theta), self.sin_upper(theta) - s, s - self.sin_lower(theta)]
        )


def make_envelopes(
    angle_max: float, magnitude_product: tuple[float, float] | None = None
) -> EnvelopeSet:
    """
    Envelope coefficients for [-angle_max, angle_max].

    With ``magnitude_product`` bounds for the lifted |V_i||V_j|, the set also
    carries the McCormick envelopes of its products with cos ("wr") and
    sin ("wi").
    """
    if not (0.0 < angle_max <= math.pi / 2 + 1e-12):
        error = f"envelopes need 0 < angle_max <= pi/2, got {angle_max}"
        logger.error(error)
        raise ProblemStructureError(error)
    half = 0.5 * angle_max
    env = EnvelopeSet(
        angle_max=angle_max,
        cos_quad=(1.0 - math.cos(angle_max)) / (angle_max * angle_max),
        cos_floor=math.cos(angle_max),
        sin_slope=math.cos(half),
        sin_offset=math.sin(half) - math.cos(half) * half,
    )
    if magnitude_product is not None:
        lo, hi = magnitude_product
        s_lo, s_hi = env.sin_range
        env.products["wr"] = McCormick(lo, hi, env.cos_floor, 1.0)
        env.products["wi"] = McCormick(lo, hi, s_lo, s_hi)
    return env
