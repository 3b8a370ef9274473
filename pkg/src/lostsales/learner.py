"""Epoch-based active elimination over a uniform grid of constant orders.

Each epoch plays the largest surviving order. Because every other active
order is smaller, its supply in each period can be read off the observed
supply, and its on-hand inventory can be replayed from the censored sales
record alone. Orders whose replayed pseudo-cost is clearly worse than the
best one are dropped before the next epoch.

Nothing in this module sees demand or shock realisations.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .models import SupplyModel, Uniform
from .system import CensoredObservation, CostParams, SystemState, RunResult, run

_CEIL_SLACK = 1e-9


def _ceil(x: float) -> int:
    # guards against 6.9 * 30 = 207.00000000000003 style round-up
    return math.ceil(x - _CEIL_SLACK)


def kappa2_for(T: int, rule="log") -> float:
    """kappa_2 = ln T by default (at least 1); a number overrides the rule."""
    if rule == "log":
        return max(math.log(T), 1.0)
    value = float(rule)
    if not value > 0:
        raise ValueError("kappa2 must be positive")
    return value


@dataclass(frozen=True)
class Epoch:
    n: int
    start: int  # tau_n, 1-based
    end: int  # last period actually played, inclusive
    planned_length: int
    gamma: float

    @property
    def complete(self) -> bool:
        return self.end - self.start + 1 == self.planned_length


@dataclass(frozen=True)
class EpochPlan:
    T: int
    L: int
    kappa2: float
    burn_in: int
    epochs: tuple[Epoch, ...]

    def epoch_at(self, t: int) -> Epoch:
        for ep in self.epochs:
            if ep.start <= t <= ep.end:
                return ep
        raise IndexError(f"period {t} outside the horizon 1..{self.T}")

    @property
    def starts(self) -> list[int]:
        return [ep.start for ep in self.epochs]


def gamma(n: int) -> float:
    return 2.0 ** (-n)


def epoch_length(n: int, T: int, L: int, kappa2: float) -> int:
    return _ceil(kappa2 * max(math.log(T) / gamma(n + 1) ** 2, 3 * L))


def plan_epochs(T: int, L: int, kappa2: float) -> EpochPlan:
    """Epoch schedule covering periods 1..T; the last epoch is cut at T."""
    if T < 1 or L < 1 or not kappa2 > 0:
        raise ValueError("need T >= 1, L >= 1 and kappa2 > 0")
    burn_in = _ceil(kappa2 * max(math.log(T), 2 * L))
    epochs = []
    start, n = 1, 1
    while start <= T:
        length = epoch_length(n, T, L, kappa2)
        epochs.append(Epoch(n, start, min(start + length - 1, T), length, gamma(n)))
        start += length
        n += 1
    return EpochPlan(T, L, float(kappa2), burn_in, tuple(epochs))


def order_grid(q_bar: float, K: int) -> np.ndarray:
    """a_k = (k-1)/K * q_bar for k = 1..K+1."""
    if K < 1 or q_bar < 0:
        raise ValueError("need K >= 1 and q_bar >= 0")
    return np.arange(K + 1) / K * q_bar


def reconstruct_counterfactual(arms, a_star: float, observations, supply: SupplyModel):
    """Replay on-hand inventory under each smaller constant order.

    ``observations`` are the censored records for the periods t0..t1 of an
    epoch, all of which received a shipment from an order of ``a_star``.
    Returns ``(inv, supplies)``: ``inv[:, j]`` is the start-of-period stock
    of period t0 + j (a final extra column holds stock after t1) and
    ``supplies[:, j]`` is s(a, Z_{t0+j}).
    """
    arms = np.atleast_1d(np.asarray(arms, dtype=float))
    if np.any(arms > a_star):
        raise ValueError("counterfactual orders must not exceed the played order")
    n = len(observations)
    start = np.fromiter((o.start_on_hand for o in observations), float, n)
    end = np.fromiter((o.end_on_hand for o in observations), float, n)
    seen = np.fromiter((o.realized_supply for o in observations), float, n)
    supplies = supply.downshift(a_star, seen[None, :], arms[:, None]) if n else np.empty((len(arms), 0))
    supplies = np.asarray(supplies).reshape(len(arms), n)
    inv = np.empty((len(arms), n + 1))
    if n == 0:
        return inv[:, :0], supplies
    inv[:, 0] = start[0]
    for j in range(n):
        if end[j] > 0:
            inv[:, j + 1] = np.maximum(inv[:, j] + supplies[:, j] + end[j] - start[j] - seen[j], 0.0)
        else:
            inv[:, j + 1] = 0.0
    return inv, supplies


def arm_pseudo_cost(inv, supplies, h: float, b: float):
    """Average of h I^a_t - b s(a, Z_t) over the given periods, per arm."""
    inv = np.asarray(inv, dtype=float)
    supplies = np.asarray(supplies, dtype=float)
    if inv.shape[-1] == 0:
        raise ValueError("no periods to average over")
    return h * inv.mean(axis=-1) - b * supplies.mean(axis=-1)


def eliminate(active, ctilde, gamma_n: float, h: float, b: float):
    """Keep arms whose estimate is within (h+b) gamma_n / 2 of the best."""
    active = np.asarray(active)
    ctilde = np.asarray(ctilde, dtype=float)
    best = ctilde.min()
    return active[ctilde <= best + (h + b) * gamma_n / 2.0]


@dataclass
class EpochLog:
    n: int
    tau: int
    a_star: float
    n_active: int
    c_star: float | None
    eliminated: list[float] = field(default_factory=list)


class ActiveEliminationLearner:
    """Learning policy: plays the largest active order, prunes once per epoch.

    ``supply`` is used only through ``realize``/``downshift`` on its shape;
    the shock law is replaced by a flat law over the declared shock bounds.
    """

    def __init__(
        self,
        T: int,
        h: float,
        b: float,
        L: int,
        q_bar: float,
        supply: SupplyModel,
        K: int | None = None,
        kappa2="log",
    ):
        self.T, self.h, self.b, self.L = T, h, b, L
        self.K = K if K is not None else math.ceil(math.sqrt(T))
        self.kappa2 = kappa2_for(T, kappa2)
        self.plan = plan_epochs(T, L, self.kappa2)
        self.grid = order_grid(q_bar, self.K)
        self.active = np.arange(len(self.grid))  # indices into grid
        self.supply = SupplyModel(
            supply.formulation, Uniform(*supply.support), supply.alpha, supply.rho, supply.k
        )
        self.log: list[EpochLog] = []
        self._epoch_idx = 0
        self._buffer: list[CensoredObservation] = []
        self._open_epoch()

    @property
    def epoch(self) -> Epoch:
        return self.plan.epochs[self._epoch_idx]

    @property
    def a_star(self) -> float:
        return float(self.grid[self.active[-1]])

    @property
    def active_orders(self) -> np.ndarray:
        return self.grid[self.active]

    def _open_epoch(self):
        ep = self.epoch
        self._buffer = []
        self.log.append(EpochLog(ep.n, ep.start, self.a_star, len(self.active), None))

    def order(self, t: int, state: SystemState, arrived: float) -> float:
        return self.a_star

    def observe(self, obs: CensoredObservation) -> None:
        ep = self.epoch
        if obs.t >= ep.start + self.L:
            self._buffer.append(obs)
        if obs.t == ep.end:
            self._close_epoch()
            if self._epoch_idx + 1 < len(self.plan.epochs):
                self._epoch_idx += 1
                self._open_epoch()

    def epoch_estimates(self):
        """C-tilde for every active arm from the current epoch buffer, or None."""
        ep = self.epoch
        first = max(ep.start + self.plan.burn_in, ep.start + self.L)
        if ep.end < first or not self._buffer:
            return None
        arms = self.grid[self.active]
        inv, sup = reconstruct_counterfactual(arms, self.a_star, self._buffer, self.supply)
        offset = first - self._buffer[0].t
        return arm_pseudo_cost(inv[:, offset:-1], sup[:, offset:], self.h, self.b)

    def _close_epoch(self):
        ctilde = self.epoch_estimates()
        entry = self.log[-1]
        if ctilde is None:
            return
        entry.c_star = float(ctilde.min())
        keep = eliminate(self.active, ctilde, self.epoch.gamma, self.h, self.b)
        entry.eliminated = [float(self.grid[i]) for i in np.setdiff1d(self.active, keep)]
        self.active = keep

    def write_log_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "tau_n", "a_star", "n_active", "c_star", "eliminated"])
            for e in self.log:
                w.writerow([e.n, e.tau, repr(e.a_star), e.n_active,
                            "" if e.c_star is None else repr(e.c_star),
                            " ".join(repr(x) for x in e.eliminated)])


@dataclass
class LearnerRun:
    result: RunResult
    learner: ActiveEliminationLearner

    @property
    def total_cost(self) -> float:
        return self.result.total_cost

    @property
    def final_active(self) -> np.ndarray:
        return self.learner.active_orders


def run_learner(T, params: CostParams, supply, demand, q_bar, rng, K=None, kappa2="log") -> LearnerRun:
    learner = ActiveEliminationLearner(T, params.h, params.b, params.L, q_bar, supply, K, kappa2)
    return LearnerRun(run(learner, T, params, supply, demand, rng), learner)
