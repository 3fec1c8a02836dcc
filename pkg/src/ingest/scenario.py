"""
Sweep scenario files.

A scenario is a flat list of ``key=value`` pairs separated by whitespace or
newlines; ``#`` starts a comment. Example::

    t_start=1.2 t_end=2.05
    loads=lowest_k:5
    models=ac,qc,socp,sdp3
    gen_capacity_factor=3

Unknown keys are errors so that typos never silently fall back to defaults.
"""

from __future__ import annotations

from collections.abc import Mapping
from enum import Enum
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src import config
from src.errors import ScenarioError
from src.network.model import Network
from src.network.scenarios import select_lowest_voltage_loads

logger = config.LOGGER


class ModelKind(str, Enum):
    AC = "AC"
    QC = "QC"
    SOCP = "SOCP"
    SDP2 = "SDP2"
    SDP3 = "SDP3"

    @property
    def is_relaxation(self) -> bool:
        return self is not ModelKind.AC

    @classmethod
    def parse(cls, token: str) -> ModelKind:
        try:
            return cls(token.strip().upper())
        except ValueError as exc:
            error = f"unknown model {token!r}; expected one of {', '.join(m.value for m in cls)}"
            logger.error(error)
            raise ScenarioError(error) from exc


ALL_MODELS: tuple[ModelKind, ...] = tuple(ModelKind)


class LoadSelector(BaseModel):
    """Which loads form the scaled set: all, the k lowest-voltage ones, or explicit ids."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["all", "lowest_k", "ids"] = "all"
    k: int = 0
    ids: tuple[int, ...] = ()

    @classmethod
    def parse(cls, text: str) -> LoadSelector:
        raw = text.strip()
        head, _, tail = raw.partition(":")
        head = head.strip().lower().replace("-", "_")
        try:
            if head == "all" and not tail:
                return cls()
            if head == "lowest_k":
                return cls(kind="lowest_k", k=int(tail))
            if head == "ids":
                ids = tuple(int(tok) for tok in tail.replace(";", ",").split(",") if tok.strip())
                return cls(kind="ids", ids=ids)
        except ValueError as exc:
            error = f"malformed load selector {text!r}"
            logger.error(error)
            raise ScenarioError(error) from exc
        error = f"unknown load selector {text!r}; expected all, lowest_k:K or ids:1,2,..."
        logger.error(error)
        raise ScenarioError(error)

    def render(self) -> str:
        if self.kind == "lowest_k":
            return f"lowest_k:{self.k}"
        if self.kind == "ids":
            return "ids:" + ",".join(str(i) for i in self.ids)
        return "all"

    def resolve(self, net: Network) -> set[int]:
        """The concrete scaled-load set for a network (injections excluded)."""
        if self.kind == "lowest_k":
            return select_lowest_voltage_loads(net, self.k)
        scalable = {load.id for load in net.scalable_loads}
        if self.kind == "all":
            return scalable
        missing = [i for i in self.ids if i not in {load.id for load in net.loads}]
        if missing:
            error = f"load selector names loads absent from {net.name}: {missing}"
            logger.error(error)
            raise ScenarioError(error)
        return {i for i in self.ids if i in scalable}


class ScenarioSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    t_start: float = Field(default=1.0, gt=0.0)
    t_end: float = Field(default=1.0, gt=0.0)
    base_step: float = Field(default=config.DEFAULT_BASE_STEP, gt=0.0)
    refine_step: float = Field(default=config.DEFAULT_REFINE_STEP, gt=0.0)
    refine_trigger: float = Field(default=config.DEFAULT_REFINE_TRIGGER, gt=0.0)
    load_selector: LoadSelector = Field(default_factory=LoadSelector)
    models: tuple[ModelKind, ...] = ALL_MODELS
    gen_capacity_factor: float = Field(default=config.DEFAULT_GEN_CAPACITY_FACTOR, gt=0.0)
    recovery_enabled: bool = True
    voltage_widening: float = Field(default=0.0, ge=0.0)

    @field_validator("models")
    @classmethod
    def _dedupe_models(cls, value: tuple[ModelKind, ...]) -> tuple[ModelKind, ...]:
        if not value:
            raise ValueError("at least one model is required")
        return tuple(m for m in ALL_MODELS if m in set(value))

    @model_validator(mode="after")
    def _check_ranges(self) -> ScenarioSpec:
        if self.t_start > self.t_end:
            raise ValueError(f"t_start {self.t_start} exceeds t_end {self.t_end}")
        if self.refine_step > self.base_step:
            raise ValueError(f"refine_step {self.refine_step} exceeds base_step {self.base_step}")
        points = (self.t_end - self.t_start) / self.base_step + 1.0
        if points > config.MAX_SWEEP_POINTS:
            raise ValueError(
                f"grid from {self.t_start} to {self.t_end} at step {self.base_step} has {points:.0f} points; "
                f"the limit is {config.MAX_SWEEP_POINTS}"
            )
        if self.base_step / self.refine_step > config.MAX_SWEEP_POINTS:
            raise ValueError(f"refine_step {self.refine_step} splits base_step {self.base_step} too finely")
        return self

    @property
    def relaxations(self) -> tuple[ModelKind, ...]:
        return tuple(m for m in self.models if m.is_relaxation)

    def with_overrides(self, overrides: Mapping[str, Any]) -> ScenarioSpec:
        """Apply already-typed overrides (e.g. from CLI flags), revalidating."""
        merged = self.model_dump()
        merged.update({k: v for k, v in overrides.items() if v is not None})
        return build_scenario(merged)

    def render(self) -> str:
        """Serialize back to the key=value dialect."""
        return "\n".join(
            [
                f"t_start={self.t_start!r}",
                f"t_end={self.t_end!r}",
                f"base_step={self.base_step!r}",
                f"refine_step={self.refine_step!r}",
                f"refine_trigger={self.refine_trigger!r}",
                f"loads={self.load_selector.render()}",
                "models=" + ",".join(m.value.lower() for m in self.models),
                f"gen_capacity_factor={self.gen_capacity_factor!r}",
                f"recovery_enabled={'true' if self.recovery_enabled else 'false'}",
                f"voltage_widening={self.voltage_widening!r}",
            ]
        ) + "\n"


_FLOAT_KEYS = {
    "t_start",
    "t_end",
    "base_step",
    "refine_step",
    "refine_trigger",
    "gen_capacity_factor",
    "voltage_widening",
}
_KEY_ALIASES = {"loads": "load_selector", "step": "base_step", "recovery": "recovery_enabled"}
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def build_scenario(values: Mapping[str, Any]) -> ScenarioSpec:
    try:
        return ScenarioSpec(**values)
    except ValidationError as exc:
        details = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'scenario'}: {err['msg']}" for err in exc.errors()
        )
        error = f"invalid scenario: {details}"
        logger.error(error)
        raise ScenarioError(error) from exc


def _coerce(key: str, raw: str) -> Any:
    if key in _FLOAT_KEYS:
        try:
            return float(raw)
        except ValueError as exc:
            error = f"scenario key {key!r} expects a number, got {raw!r}"
            logger.error(error)
            raise ScenarioError(error) from exc
    if key == "load_selector":
        return LoadSelector.parse(raw)
    if key == "models":
        return tuple(ModelKind.parse(tok) for tok in raw.split(",") if tok.strip())
    if key == "recovery_enabled":
        lowered = raw.strip().lower()
        if lowered in _TRUE:
            return True
        if lowered in _FALSE:
            return False
        error = f"scenario key 'recovery_enabled' expects a boolean, got {raw!r}"
        logger.error(error)
        raise ScenarioError(error)
    error = f"unknown scenario key {key!r}"
    logger.error(error)
    raise ScenarioError(error)


def parse_scenario(text: str) -> ScenarioSpec:
    """Parse the key=value scenario dialect into a fully defaulted ScenarioSpec."""
    values: dict[str, Any] = {}
    for raw_line in text.splitlines():
        line = raw_line.split("#", 1)[0]
        for token in line.split():
            key, sep, raw = token.partition("=")
            if not sep or not key:
                error = f"expected key=value, got {token!r}"
                logger.error(error)
                raise ScenarioError(error)
            key = _KEY_ALIASES.get(key.strip().lower(), key.strip().lower())
            values[key] = _coerce(key, raw)
    return build_scenario(values)


def load_scenario(path: Path) -> ScenarioSpec:
    if not path.is_file():
        error = f"scenario file not found: {path}"
        logger.error(error)
        raise FileNotFoundError(error)
    return parse_scenario(path.read_text(encoding="utf-8"))
