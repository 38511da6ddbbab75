import json
import os
from typing import Literal

import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from fidelity import FidelityKind, FidelitySpec


class ConfigError(Exception):
    pass


class FidelityConfig(BaseModel):
    type: Literal["delta", "alpha", "explicit"] = "delta"
    value: float | None = None
    bounds: list[tuple[float, float]] | None = None

    @model_validator(mode="after")
    def check_value_or_bounds(self) -> "FidelityConfig":
        if self.type == "explicit":
            if not self.bounds:
                raise ValueError("explicit fidelity needs per-record bounds")
            for lo, hi in self.bounds:
                if not 0.0 <= lo <= hi <= 1.0:
                    raise ValueError(f"bound [{lo}, {hi}] is not inside [0, 1]")
        elif self.value is None or not 0.0 <= self.value <= 1.0:
            raise ValueError(f"{self.type} must be in [0, 1], got {self.value}")
        return self

    def to_spec(self) -> FidelitySpec:
        if self.type == "explicit":
            return FidelitySpec.from_bounds(self.bounds)
        return FidelitySpec(FidelityKind(self.type), self.value)


class RunConfig(BaseModel):
    """Effective settings of one run: config file values under CLI overrides."""

    data: str | None = None
    # attribute -> "public" | "sensitive"; columns missing here are sensitive
    roles: dict[str, Literal["public", "sensitive"]] = Field(default_factory=dict)
    public: list[str] = Field(default_factory=list)
    fidelity: FidelityConfig | None = None
    out: str | None = None
    jobs: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)
    seed: int = 0
    grid_step: float = Field(default=0.005, gt=0.0, le=0.5)
    side_info: str | None = None

    @field_validator("public")
    @classmethod
    def strip_names(cls, v: list[str]) -> list[str]:
        return [name.strip() for name in v if name.strip()]

    def roles_for(self, columns: list[str]) -> dict[str, str]:
        """Role of every attribute column; ``public`` wins over ``roles``."""
        roles = {}
        for column in columns:
            if column in self.public:
                roles[column] = "public"
            else:
                roles[column] = self.roles.get(column, "sensitive")
        return roles

    def with_overrides(self, **overrides) -> "RunConfig":
        updates = {k: v for k, v in overrides.items() if v is not None}
        try:
            return RunConfig.model_validate({**self.model_dump(), **updates})
        except ValidationError as e:
            raise ConfigError(str(e)) from e


def load_config(path: str | None) -> RunConfig:
    """Read a JSON or YAML run config; no path gives the defaults."""
    if path is None:
        return RunConfig()
    try:
        with open(path, encoding="utf-8") as f:
            if path.endswith((".yaml", ".yml")):
                raw = yaml.safe_load(f) or {}
            else:
                raw = json.load(f)
    except (yaml.YAMLError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot parse {path}: {e}") from e
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"Invalid config {path}: {e}") from e
