"""Experiment configuration: YAML files validated against a strict schema."""
from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .environment import ConductanceLaw
from .lattice import DomainSpec

EXPERIMENTS = (
    "qip-marginal",
    "mixing-trend",
    "local-clt",
    "geometry-audit",
    "holes-tail",
    "dirichlet-lln",
    "exit-envelope",
    "block-events",
    "window-agreement",
)

DEFAULT_CRITERION = {
    "qip-marginal": "AC3",
    "mixing-trend": "AC4",
    "local-clt": "AC5",
    "exit-envelope": "AC6",
    "geometry-audit": "AC7",
    "holes-tail": "AC8",
    "block-events": "AC8",
    "window-agreement": "AC8",
    "dirichlet-lln": "AC9",
}


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DomainModel(_Strict):
    kind: Literal["full", "orthant", "box"]
    d: int = Field(ge=1)
    d1: int = 0
    n: int | None = None

    def build(self) -> DomainSpec:
        if self.kind == "orthant":
            return DomainSpec.orthant(self.d1, self.d - self.d1)
        if self.kind == "box":
            return DomainSpec.box(self.d, self.n if self.n is not None else 1)
        return DomainSpec.full(self.d)

    @model_validator(mode="after")
    def _check(self):
        if self.kind == "orthant" and not 0 <= self.d1 <= self.d:
            raise ValueError("orthant needs 0 <= d1 <= d")
        if self.kind != "orthant" and self.d1 != 0:
            raise ValueError("d1 applies to orthants only")
        return self


class LawModel(_Strict):
    kind: Literal["bernoulli", "uniform", "pareto", "constant"]
    p1: float = Field(1.0, ge=0, le=1)
    a: float | None = None
    b: float | None = None
    c: float | None = None
    exponent: float | None = None
    w: float | None = None

    def build(self) -> ConductanceLaw:
        if self.kind == "bernoulli":
            return ConductanceLaw.bernoulli(self.p1)
        if self.kind == "uniform":
            return ConductanceLaw.uniform(self.a, self.b, self.p1)
        if self.kind == "pareto":
            return ConductanceLaw.pareto(self.c, self.exponent, self.p1)
        return ConductanceLaw.constant(self.w if self.w is not None else 1.0)

    @model_validator(mode="after")
    def _check(self):
        try:
            self.build()
        except (TypeError, ValueError) as exc:
            raise ValueError(f"invalid law: {exc}") from exc
        return self


class SeedRange(_Strict):
    start: int = Field(ge=0)
    stop: int = Field(ge=0)

    @model_validator(mode="after")
    def _order(self):
        if self.stop < self.start:
            raise ValueError("seed range must satisfy start <= stop")
        return self

    @classmethod
    def parse(cls, text: str) -> "SeedRange":
        """``"a..b"`` (inclusive) or a single integer."""
        text = str(text).strip()
        if ".." in text:
            a, b = text.split("..", 1)
            return cls(start=int(a), stop=int(b))
        return cls(start=int(text), stop=int(text))

    def values(self) -> list[int]:
        return list(range(self.start, self.stop + 1))


class ExperimentConfig(_Strict):
    experiment: Literal[EXPERIMENTS] | None = None  # type: ignore[valid-type]
    criterion: str | None = None
    domain: DomainModel
    law: LawModel
    K: float | None = Field(None, gt=0)
    seeds: SeedRange = SeedRange(start=0, stop=0)
    scales: list[int] = []
    walk_kind: Literal["vsrw", "csrw", "discrete"] = "vsrw"
    horizon: float = Field(1.0, gt=0)
    times: list[float] = []
    radii: list[float] = []
    paths: int = Field(2000, ge=1)
    eps: float = 0.5
    window_factor: float = Field(5.0, gt=0)
    inner_radius: int | None = Field(None, ge=1)
    window: int | None = Field(None, ge=1)
    c_hat: float | None = Field(None, gt=0)
    c_expected: float | None = Field(None, gt=0)
    compare_domain: DomainModel | None = None
    ball_radius: int = Field(20, ge=1)
    poincare_radius: int = Field(4, ge=1)
    chain_c1: float = Field(0.2, gt=0)
    chain_c2: float = Field(1.0, gt=0)
    envelope_c3: float = Field(2.0, gt=0)
    envelope_c4: float = Field(0.4, gt=0)
    grid_points: int = Field(5, ge=2)
    tolerance: float = Field(0.15, gt=0)
    threshold: float = Field(0.05, gt=0)
    edge_class: Literal["o1", "o2"] = "o1"
    output: str = "out"

    @field_validator("seeds", mode="before")
    @classmethod
    def _seeds(cls, v):
        if isinstance(v, (str, int)):
            return SeedRange.parse(str(v))
        return v

    @field_validator("eps")
    @classmethod
    def _eps(cls, v):
        if not 0 < v < 1:
            raise ValueError("eps must lie in (0, 1)")
        return v

    @field_validator("scales")
    @classmethod
    def _scales(cls, v):
        if any(s < 1 for s in v):
            raise ValueError("scales must be positive integers")
        return v

    @field_validator("times", "radii")
    @classmethod
    def _positive(cls, v):
        if any(not (x > 0 and math.isfinite(x)) for x in v):
            raise ValueError("entries must be positive and finite")
        return v

    def resolved_criterion(self, experiment: str) -> str:
        return self.criterion or DEFAULT_CRITERION[experiment]

    def config_hash(self) -> str:
        """sha256 of the canonical JSON dump; the output location is not part of it."""
        blob = json.dumps(self.model_dump(mode="json", exclude={"output"}), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must hold a mapping")
    return ExperimentConfig.model_validate(data)


def config_schema() -> dict:
    return ExperimentConfig.model_json_schema()
