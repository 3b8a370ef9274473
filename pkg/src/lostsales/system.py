"""Lost-sales dynamics with lead time, period costs and the censored view.

Within a period the order of events is: the state is observed, the pipeline
head arrives (its size is revealed), the new order is placed, then demand is
met from stock and the excess is lost.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .errors import ConfigError, PolicyFault
from .models import DemandModel, SupplyModel
from .rng import SeededRng


@dataclass(frozen=True)
class CostParams:
    h: float
    b: float
    L: int
    T: int = 1

    def __post_init__(self):
        if not (self.h >= 0 and self.b >= 0 and self.h + self.b > 0):
            raise ConfigError(f"costs must be non-negative and not both zero, got h={self.h}, b={self.b}")
        if int(self.L) != self.L or self.L < 1:
            raise ConfigError(f"lead time must be a positive integer, got {self.L}")
        if int(self.T) != self.T or self.T < 1:
            raise ConfigError(f"horizon must be a positive integer, got {self.T}")


@dataclass(frozen=True)
class SystemState:
    on_hand: float
    pipeline: tuple[float, ...]

    def __post_init__(self):
        if self.on_hand < 0 or any(x < 0 for x in self.pipeline):
            raise ValueError(f"negative inventory in state {self}")

    @classmethod
    def empty(cls, L: int) -> "SystemState":
        return cls(0.0, (0.0,) * L)


@dataclass(frozen=True, slots=True)
class CensoredObservation:
    """Everything a policy may learn about period ``t``. Demand is not here."""

    t: int
    start_on_hand: float
    realized_supply: float
    sales: float
    end_on_hand: float

    @property
    def stockout(self) -> bool:
        return self.end_on_hand == 0.0


@dataclass(frozen=True)
class PeriodRecord:
    """A censored observation plus oracle-only ground truth.

    ``oracle_demand`` and ``oracle_z`` exist for cost accounting and tests;
    they are never handed to a policy.
    """

    obs: CensoredObservation
    order: float
    cost: float
    oracle_demand: float = field(repr=False)
    oracle_z: float = field(repr=False)


class Policy(Protocol):
    def order(self, t: int, state: SystemState, arrived: float) -> float: ...

    def observe(self, obs: CensoredObservation) -> None: ...


def period_cost(available: float, demand: float, h: float, b: float) -> float:
    return h * max(available - demand, 0.0) + b * max(demand - available, 0.0)


def step(
    state: SystemState,
    order: float,
    z: float,
    d: float,
    params: CostParams,
    supply: SupplyModel,
    t: int = 1,
) -> tuple[SystemState, PeriodRecord]:
    if not order >= 0:
        raise ValueError(f"order must be non-negative, got {order}")
    arrived = supply.realize(state.pipeline[0], z)
    available = state.on_hand + arrived
    sales = min(available, d)
    end = max(available - d, 0.0)
    cost = period_cost(available, d, params.h, params.b)
    nxt = SystemState(end, state.pipeline[1:] + (float(order),))
    obs = CensoredObservation(t, state.on_hand, arrived, sales, end)
    return nxt, PeriodRecord(obs, float(order), cost, float(d), float(z))


@dataclass(frozen=True)
class Scenario:
    """Exogenous randomness for one replication."""

    demand: np.ndarray
    z: np.ndarray

    def __len__(self) -> int:
        return len(self.demand)

    def checksum(self) -> str:
        import hashlib

        digest = hashlib.sha256(self.demand.tobytes())
        digest.update(self.z.tobytes())
        return digest.hexdigest()


def draw_scenario(T: int, demand: DemandModel, supply: SupplyModel, rng: SeededRng) -> Scenario:
    """Draw D_1..D_T and Z_1..Z_T from separate child streams of ``rng``."""
    d = np.asarray(demand.sample(rng.child("demand"), T), dtype=float)
    z = np.asarray(supply.z.sample(rng.child("supply"), T), dtype=float)
    return Scenario(d, z)


@dataclass
class RunResult:
    trace: list[PeriodRecord]
    total_cost: float

    @property
    def costs(self) -> np.ndarray:
        return np.array([r.cost for r in self.trace])

    @property
    def orders(self) -> np.ndarray:
        return np.array([r.order for r in self.trace])


def run_scenario(
    policy: Policy,
    scenario: Scenario,
    params: CostParams,
    supply: SupplyModel,
    *,
    compensated: bool = False,
) -> RunResult:
    state = SystemState.empty(params.L)
    trace = []
    for i in range(len(scenario)):
        t = i + 1
        z, d = float(scenario.z[i]), float(scenario.demand[i])
        arrived = supply.realize(state.pipeline[0], z)
        q = policy.order(t, state, arrived)
        try:
            q = float(q)
        except (TypeError, ValueError):
            raise PolicyFault(f"period {t}: policy returned non-numeric order {q!r}") from None
        if not (q >= 0 and math.isfinite(q)):
            raise PolicyFault(f"period {t}: policy emitted infeasible order {q}")
        state, rec = step(state, q, z, d, params, supply, t)
        policy.observe(rec.obs)
        trace.append(rec)
    costs = [r.cost for r in trace]
    total = math.fsum(costs) if compensated else sum(costs)
    return RunResult(trace, float(total))


def run(
    policy: Policy,
    T: int,
    params: CostParams,
    supply: SupplyModel,
    demand: DemandModel,
    rng: SeededRng,
    *,
    compensated: bool = False,
) -> RunResult:
    """Simulate ``policy`` for ``T`` periods from the empty system."""
    scenario = draw_scenario(T, demand, supply, rng)
    return run_scenario(policy, scenario, params, supply, compensated=compensated)


class ConstantOrderPolicy:
    """Order the same ``q`` every period."""

    def __init__(self, q: float):
        if q < 0:
            raise ValueError("constant order must be non-negative")
        self.q = float(q)

    def order(self, t, state, arrived):
        return self.q

    def observe(self, obs):
        pass


TRACE_COLUMNS = ["t", "order", "realized_supply", "sales", "on_hand_end", "cost"]


def write_trace_csv(path, trace: Sequence[PeriodRecord], *, oracle: bool = False) -> None:
    cols = TRACE_COLUMNS + (["demand", "z"] if oracle else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in trace:
            row = [r.obs.t, repr(r.order), repr(r.obs.realized_supply), repr(r.obs.sales),
                   repr(r.obs.end_on_hand), repr(r.cost)]
            if oracle:
                row += [repr(r.oracle_demand), repr(r.oracle_z)]
            w.writerow(row)
