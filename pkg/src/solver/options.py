from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src import config


class SolveStatus(str, Enum):
    OPTIMAL = "Optimal"
    LOCALLY_INFEASIBLE = "LocallyInfeasible"
    ITERATION_LIMIT = "IterationLimit"
    TIME_LIMIT = "TimeLimit"
    NUMERIC_FAILURE = "NumericFailure"

    @property
    def converged(self) -> bool:
        return self is SolveStatus.OPTIMAL


class SolverOptions(BaseModel):
    """Interior-point settings; defaults come from the environment via ``src.config``."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    kkt_tolerance: float = Field(default=config.KKT_TOLERANCE, gt=0.0)
    max_iterations: int = Field(default=config.MAX_ITERATIONS, ge=1)
    initial_barrier: float = Field(default=0.1, gt=0.0)
    barrier_reduction: float = Field(default=0.2, gt=0.0, lt=1.0)
    time_limit: float = Field(default=config.TIME_LIMIT_S, gt=0.0)
    regularization_floor: float = Field(default=1e-20, ge=0.0)
    fraction_to_boundary: float = Field(default=0.995, gt=0.0, lt=1.0)
    restoration: bool = True
    max_restorations: int = Field(default=3, ge=0)
    infeasibility_threshold: float = Field(default=1e-6, gt=0.0)


@dataclass(frozen=True, slots=True)
class IterationLog:
    iteration: int
    objective: float
    primal_infeasibility: float
    dual_infeasibility: float
    barrier: float
    step_length: float
    regularization: float = 0.0
    restoration: bool = False


@dataclass(frozen=True, slots=True)
class SolveOutcome:
    """
    Result of one interior-point solve.

    ``constraint_multipliers`` follow the sign convention of the Lagrangian
    ``f + lam' g``: positive on active upper limits, negative on active lower
    limits. Bound multipliers are nonnegative and split by side.
    """
    status: SolveStatus
    objective: float
    x: np.ndarray
    constraint_multipliers: np.ndarray
    lower_bound_multipliers: np.ndarray
    upper_bound_multipliers: np.ndarray
    iterations: int
    wall_time: float
    tag: str = ""
    kkt_residual: float = float("nan")
    primal_infeasibility: float = float("nan")
    dual_objective: float | None = None
    infeasibility: float | None = None
    certainty: str | None = None
    barrier_history: tuple[float, ...] = field(default=())
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status.converged
