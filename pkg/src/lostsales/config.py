"""Experiment configuration: JSON loading, schema validation, derived cells."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import jsonschema

from .constant_order import STABLE, check_stability, stable_upper_bound
from .errors import ConfigError
from .models import DemandModel, SupplyModel, TruncatedNormal, Uniform
from .system import CostParams


def load_schema() -> dict:
    return json.loads(resources.files("lostsales").joinpath("data/config.schema.json").read_text())


@dataclass(frozen=True)
class BenchmarkSpec:
    grid_points: int = 200
    eval_periods: int = 100_000
    burn_in: int | None = None
    seed: int = 20240601


@dataclass(frozen=True)
class DPSpec:
    delta: float = 1.0
    T: int = 1000
    order_max: float | None = None
    on_hand_max: float | None = None
    demand_max: float | None = None
    z_step: float | None = None
    budget: int = 50_000_000


@dataclass(frozen=True)
class Cell:
    """One parameter point of an experiment family."""

    param: float | None
    supply: SupplyModel
    demand: DemandModel
    h: float
    b: float
    L: int
    q_bar: float

    def params(self, T: int) -> CostParams:
        return CostParams(self.h, self.b, self.L, T)


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    supply: SupplyModel
    demand: DemandModel
    h: float
    b: float
    L: int
    T: tuple[int, ...]
    seeds: tuple[int, ...] = tuple(range(20))
    sweep_param: str | None = None
    sweep_values: tuple[float, ...] = ()
    K: int | str = "sqrt"
    kappa2: float | str = "log"
    q_bar: float | dict = field(default_factory=lambda: {"margin": 0.05, "cap": 1.2})
    benchmark: BenchmarkSpec = BenchmarkSpec()
    dp: DPSpec | None = None
    policy_q: float | None = None
    output_dir: str = "out"
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    def K_for(self, T: int) -> int:
        return math.ceil(math.sqrt(T)) if self.K == "sqrt" else int(self.K)

    def with_seed(self, base: int) -> "ExperimentConfig":
        return replace(self, seeds=tuple(base + i for i in range(len(self.seeds))))

    def cells(self) -> list[Cell]:
        values = self.sweep_values if self.sweep_param else (None,)
        return [self._cell(v) for v in values]

    def _cell(self, value) -> Cell:
        supply, demand, h, b, L = self.supply, self.demand, self.h, self.b, self.L
        p = self.sweep_param
        if p == "b":
            b = float(value)
        elif p == "h":
            h = float(value)
        elif p == "L":
            if value != int(value):
                raise ConfigError(f"lead time sweep needs integers, got {value}")
            L = int(value)
        elif p == "demand_variance":
            d = demand.dist
            if not isinstance(d, TruncatedNormal):
                raise ConfigError("demand_variance sweeps need truncated-normal demand")
            demand = DemandModel(TruncatedNormal(d.mean_param, math.sqrt(value), d.lower))
        elif p == "supply_halfwidth":
            z = supply.z
            if not isinstance(z, Uniform):
                raise ConfigError("supply_halfwidth sweeps need a uniform shock law")
            c = z.mean
            supply = replace(supply, z=Uniform(c - value, c + value))
        if not (h > 0 and b > 0):
            raise ConfigError(f"costs must be positive, got h={h}, b={b}")
        if isinstance(self.q_bar, dict):
            q_bar = stable_upper_bound(supply, demand, **self.q_bar)
        else:
            q_bar = float(self.q_bar)
        status = check_stability(q_bar, supply, demand)
        if status != STABLE:
            raise ConfigError(f"q_bar={q_bar:.6g} is {status}: needs E[s(q_bar,Z)] < E[D]")
        return Cell(None if value is None else float(value), supply, demand, h, b, L, q_bar)


def _seeds(spec) -> tuple[int, ...]:
    if spec is None:
        return tuple(range(20))
    if isinstance(spec, list):
        return tuple(int(s) for s in spec)
    base = int(spec.get("base", 0))
    return tuple(base + i for i in range(int(spec["count"])))


def parse_config(raw: dict) -> ExperimentConfig:
    try:
        jsonschema.validate(raw, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    supply = SupplyModel.from_dict(raw["supply"])
    demand = DemandModel.from_dict(raw["demand"])
    T = raw["T"]
    sweep = raw.get("sweep")
    cfg = ExperimentConfig(
        name=raw["name"],
        supply=supply,
        demand=demand,
        h=float(raw["h"]),
        b=float(raw["b"]),
        L=int(raw["L"]),
        T=tuple(T) if isinstance(T, list) else (int(T),),
        seeds=_seeds(raw.get("seeds")),
        sweep_param=sweep["param"] if sweep else None,
        sweep_values=tuple(float(v) for v in sweep["values"]) if sweep else (),
        K=raw.get("K", "sqrt"),
        kappa2=raw.get("kappa2", "log"),
        q_bar=raw.get("q_bar", {"margin": 0.05, "cap": 1.2}),
        benchmark=BenchmarkSpec(**raw.get("benchmark", {})),
        dp=DPSpec(**raw["dp"]) if "dp" in raw else None,
        policy_q=raw.get("policy", {}).get("q"),
        output_dir=raw.get("output_dir", "out"),
        raw=raw,
    )
    cfg.cells()  # fail early on infeasible q_bar
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return parse_config(raw)
