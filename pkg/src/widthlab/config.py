"""Validated run configurations, one model per subcommand. Unknown keys are rejected."""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Exponent = Union[float, Literal["inf"]]


def as_float(x: Exponent) -> float:
    return math.inf if x == "inf" else float(x)


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ComponentConfig(Strict):
    q: Exponent
    scale: float = Field(1.0, ge=0)
    weights: Union[Literal["shared"], list[float]] = "shared"


class NormConfig(Strict):
    components: list[ComponentConfig] = Field(min_length=1)


class ProblemConfig(Strict):
    N: int = Field(ge=1)
    blocks: list[list[int]] | None = None
    weights: list[float] | None = None
    norm: NormConfig


class SearchOptions(Strict):
    random_starts: int = Field(4, ge=0)
    refine: bool = True
    refine_maxiter: int = Field(150, ge=1)
    stages: list[float] = Field(default_factory=lambda: [10.0, 100.0, 1000.0], min_length=1)
    refine_vertex_limit: int = Field(4096, ge=1)
    coordinate: bool = True
    block_budget: bool = True


class EstimateWidthConfig(Strict):
    problem: ProblemConfig
    n: int = Field(ge=0)
    method: Literal["search", "brute_force"] = "search"
    search: SearchOptions = SearchOptions()
    brute_force_starts: int = Field(1000, ge=1)
    tol: float = Field(1e-9, gt=0)
    timings: bool = False


class SubspaceConfig(Strict):
    kind: Literal["block_random", "full", "zero"] = "block_random"
    per_block: int = Field(8, ge=0)


class ProductCheckConfig(Strict):
    block_sizes: list[int] = Field(default_factory=lambda: [256, 256, 256, 256], min_length=1)
    weights: list[float] | None = None
    n: int = Field(32, ge=1)
    q: float = Field(4.0, ge=2)
    A: float = Field(4.0, gt=1.5)
    C: float = Field(1.0, gt=0)
    h: float = Field(1.0, gt=0)
    c_q: float = Field(1.0, ge=0)
    trials: int = Field(10_000, ge=100)
    delta: float = Field(1.0 / 3.0, gt=0, lt=1)
    k_trials: int = Field(10_000, ge=2)
    lower_samples: int = Field(200, ge=1)
    subspace: SubspaceConfig = SubspaceConfig()
    timings: bool = False

    @model_validator(mode="after")
    def _sizes(self):
        if any(s < 1 for s in self.block_sizes):
            raise ValueError("block sizes must be >= 1")
        if self.weights is not None and len(self.weights) != sum(self.block_sizes):
            raise ValueError("weights must have one entry per coordinate")
        return self


class BesovCheckConfig(Strict):
    r0: int = Field(4, ge=1, le=10)
    J: int = Field(12, ge=8, le=16)
    gram_levels: int = Field(4, ge=1)
    roundtrip_levels: int = Field(4, ge=1)
    discretization_levels: int = Field(5, ge=1)
    p: float = Field(4.0, ge=2)
    samples: int = Field(50, ge=1)
    function_csv: bool = False
    timings: bool = False


class ScalingSweepConfig(Strict):
    thetas: list[Exponent] = Field(default_factory=lambda: [1.0, "inf"], min_length=1)
    q: float = Field(4.0, gt=2)
    ns: list[int] = Field(default_factory=lambda: [16, 32, 64, 128, 256], min_length=1)
    m: int | None = Field(None, ge=1, le=14)
    random_draws: int = Field(4, ge=0)
    tol: float = Field(1e-9, gt=0)
    timings: bool = False

    @field_validator("thetas")
    @classmethod
    def _theta_range(cls, v):
        if any(as_float(t) < 1 for t in v):
            raise ValueError("theta must be >= 1")
        return v

    @field_validator("ns")
    @classmethod
    def _n_range(cls, v):
        if any(n < 2 for n in v):
            raise ValueError("n must be >= 2")
        return v


class KashinTableConfig(Strict):
    N: int = Field(64, ge=3)
    q: float = Field(4.0, gt=2)
    ns: list[int] = Field(default_factory=lambda: [4, 8, 16], min_length=1)
    search: SearchOptions = SearchOptions()
    tol: float = Field(1e-9, gt=0)
    timings: bool = False


COMMAND_CONFIGS = {
    "estimate-width": EstimateWidthConfig,
    "verify-theorem2": ProductCheckConfig,
    "besov-check": BesovCheckConfig,
    "scaling-sweep": ScalingSweepConfig,
    "kashin-table": KashinTableConfig,
}


def load_config(command: str, path: str | Path | None) -> BaseModel:
    """Parse and validate; raises ValueError (json or pydantic) on bad input."""
    model = COMMAND_CONFIGS[command]
    if path is None:
        return model()
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return model.model_validate(doc)
