"""Finite-horizon dynamic program on a lattice, for small lead times.

All quantities live on the lattice {0, delta, 2 delta, ...}. The order in
period t is chosen after that period's arrival is seen, so the decision
state is (y, x_2, ..., x_L) with y = I_t + s(x_1, Z_t).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded
from .models import DemandModel, Discrete, Distribution, SupplyModel

DEFAULT_BUDGET = 50_000_000


def _cell_masses(dist: Distribution, step: float, n_cells: int, origin: float = 0.0) -> np.ndarray:
    """Mass of dist lumped onto origin + k*step, k = 0..n_cells-1; tails go to the end cells."""
    if isinstance(dist, Discrete):
        pmf = np.zeros(n_cells)
        for v, p in zip(dist.values, dist.probs):
            k = int(np.clip(math.floor((v - origin) / step + 0.5), 0, n_cells - 1))
            pmf[k] += p
        return pmf
    edges = origin + (np.arange(n_cells + 1) - 0.5) * step
    cdf = np.asarray(dist.cdf(edges), dtype=float)
    cdf[0], cdf[-1] = 0.0, 1.0
    return np.diff(cdf)


def discretize_distribution(dist: Distribution, step: float, upper: float, lower: float = 0.0):
    """Lattice pmf on lower, lower+step, ..., up to upper (inclusive)."""
    if not step > 0:
        raise ValueError("lattice step must be positive")
    n = int(math.floor((upper - lower) / step + 1e-9)) + 1
    values = lower + np.arange(n) * step
    return values, _cell_masses(dist, step, n, lower)


@dataclass(frozen=True)
class DiscreteInstance:
    delta: float
    n_on_hand: int  # on-hand levels 0..n_on_hand-1
    n_actions: int  # orders 0..n_actions-1 (times delta); also pipeline levels
    demand_pmf: np.ndarray  # over 0..len-1 (times delta)
    z_values: np.ndarray
    z_probs: np.ndarray
    supply_kernel: np.ndarray  # [x, s]: P(arrival = s*delta | pipeline head x*delta)
    L: int
    T: int
    h: float
    b: float

    def __post_init__(self):
        for name, pmf in (("demand", self.demand_pmf), ("shock", self.z_probs)):
            if abs(pmf.sum() - 1.0) > 1e-9 or (pmf < 0).any():
                raise ValueError(f"{name} pmf must be non-negative and sum to 1")
        if not np.allclose(self.supply_kernel.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("supply kernel rows must sum to 1")

    @property
    def n_decision(self) -> int:
        return self.n_on_hand + self.supply_kernel.shape[1] - 1

    @property
    def mean_demand(self) -> float:
        return float(self.delta * np.arange(len(self.demand_pmf)) @ self.demand_pmf)

    def state_action_size(self) -> int:
        return self.n_on_hand * self.n_actions ** self.L * self.n_actions

    def period_cost(self) -> np.ndarray:
        """g(y) = E[h (y - D)^+ + b (D - y)^+] for each decision level y."""
        y = np.arange(self.n_decision)[:, None] * self.delta
        d = np.arange(len(self.demand_pmf))[None, :] * self.delta
        c = self.h * np.maximum(y - d, 0.0) + self.b * np.maximum(d - y, 0.0)
        return c @ self.demand_pmf

    def on_hand_kernel(self) -> np.ndarray:
        """[y, i]: P(next on-hand = i | decision level y); overflow lumps at the top level."""
        ny, ni = self.n_decision, self.n_on_hand
        out = np.zeros((ny, ni))
        for k, p in enumerate(self.demand_pmf):
            if p == 0:
                continue
            nxt = np.clip(np.arange(ny) - k, 0, ni - 1)
            np.add.at(out, (np.arange(ny), nxt), p)
        return out

    def arrival_matrices(self) -> np.ndarray:
        """[x, i, y]: P(decision level y | on-hand i, pipeline head x)."""
        ns = self.supply_kernel.shape[1]
        out = np.zeros((self.n_actions, self.n_on_hand, self.n_decision))
        for i in range(self.n_on_hand):
            out[:, i, i : i + ns] = self.supply_kernel
        return out


def discretize(
    demand: DemandModel,
    supply: SupplyModel,
    delta: float,
    *,
    L: int,
    T: int,
    h: float,
    b: float,
    order_max: float,
    on_hand_max: float | None = None,
    demand_max: float | None = None,
    z_step: float | None = None,
) -> DiscreteInstance:
    """Lump demand, shocks and supplies onto the delta lattice."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    if on_hand_max is None:
        on_hand_max = 4.0 * demand.mean
    if demand_max is None:
        demand_max = demand.upper
    _, d_pmf = discretize_distribution(demand.dist, delta, demand_max)
    lo, hi = supply.support
    if z_step is None:
        z_step = delta if supply.formulation == "capacity" else (hi - lo) / 100 if hi > lo else 1.0
    if isinstance(supply.z, Discrete):
        z_vals = np.asarray(supply.z.values)
        z_pmf = np.asarray(supply.z.probs)
    elif hi > lo:
        n = int(math.floor((hi - lo) / z_step + 1e-9)) + 1
        z_vals = lo + np.arange(n) * z_step
        z_pmf = _cell_masses(supply.z, z_step, n, lo)
    else:
        z_vals, z_pmf = np.array([lo]), np.array([1.0])
    n_actions = int(math.floor(order_max / delta + 1e-9)) + 1
    x = np.arange(n_actions) * delta
    s = supply.realize(x[:, None], z_vals[None, :])
    s_idx = np.floor(s / delta + 0.5).astype(int)
    kernel = np.zeros((n_actions, s_idx.max() + 1))
    for xi in range(n_actions):
        np.add.at(kernel[xi], s_idx[xi], z_pmf)
    n_on_hand = int(math.floor(on_hand_max / delta + 1e-9)) + 1
    return DiscreteInstance(delta, n_on_hand, n_actions, d_pmf, z_vals, z_pmf, kernel, L, T, h, b)


@dataclass
class DPSolution:
    value: float
    policy: np.ndarray  # [t, y, rest...] -> action index, t = 0..T-1
    instance: DiscreteInstance

    def write_policy_csv(self, path) -> None:
        """Rows: t, y_index, pipeline indices x_2..x_L, action index."""
        inst = self.instance
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "y"] + [f"x{i}" for i in range(2, inst.L + 1)] + ["action"])
            for t in range(self.policy.shape[0]):
                for idx in np.ndindex(*self.policy.shape[1:]):
                    w.writerow([t + 1, *idx, int(self.policy[(t, *idx)])])


def _check_budget(instance: DiscreteInstance, budget: int):
    size = instance.state_action_size()
    if size > budget:
        raise BudgetExceeded(size, budget)


def solve_dp(instance: DiscreteInstance, budget: int = DEFAULT_BUDGET) -> DPSolution:
    """Backward induction; returns the optimal expected T-period cost from the empty state."""
    _check_budget(instance, budget)
    A, L = instance.n_actions, instance.L
    ni, ny = instance.n_on_hand, instance.n_decision
    R = A ** (L - 1)
    g = instance.period_cost()
    nxt = instance.on_hand_kernel()  # (ny, ni)
    arrive = instance.arrival_matrices()  # (A, ni, ny)
    policy = np.empty((instance.T, ny, R), dtype=np.int32)
    V = np.zeros((ni, A, R))
    for t in range(instance.T - 1, -1, -1):
        Q = (nxt @ V.reshape(ni, A * R)).reshape(ny, R, A)
        best = Q.argmin(axis=2)
        W = g[:, None] + np.take_along_axis(Q, best[:, :, None], axis=2)[:, :, 0]
        policy[t] = best
        V = np.transpose(arrive @ W, (1, 0, 2))  # (ni, A, R)
    shape = (instance.T, ny) + (A,) * (L - 1)
    return DPSolution(float(V[0, 0, 0]), policy.reshape(shape), instance)


def evaluate_policy_on_instance(policy, instance: DiscreteInstance, budget: int = DEFAULT_BUDGET) -> float:
    """Exact expected T-period cost of a DP policy table or a constant order (in units, not indices)."""
    _check_budget(instance, budget)
    A, L = instance.n_actions, instance.L
    ni, ny = instance.n_on_hand, instance.n_decision
    R = A ** (L - 1)
    if isinstance(policy, DPSolution):
        table = policy.policy.reshape(instance.T, ny, R)
    else:
        a = policy / instance.delta
        ai = int(round(a))
        if abs(a - ai) > 1e-9 or not 0 <= ai < A:
            raise ValueError(f"constant order {policy} is not on the action lattice")
        table = None
    g = instance.period_cost()
    nxt = instance.on_hand_kernel()
    arrive = instance.arrival_matrices().transpose(2, 0, 1).reshape(ny, A * ni)
    mu = np.zeros((ni, A, R))
    mu[0, 0, 0] = 1.0
    total = 0.0
    for t in range(instance.T):
        nu = arrive @ mu.transpose(1, 0, 2).reshape(A * ni, R)  # (ny, R)
        total += float(g @ nu.sum(axis=1))
        mass = np.zeros((ny, R, A))
        if table is None:
            mass[:, :, ai] = nu
        else:
            np.put_along_axis(mass, table[t][:, :, None], nu[:, :, None], axis=2)
        mu = (nxt.T @ mass.reshape(ny, R * A)).reshape(ni, A, R)
    return total


def constant_order_cost(q: float, instance: DiscreteInstance) -> float:
    """Exact expected T-period cost of a constant order.

    The pipeline is deterministic under a constant order (empty for the
    first L periods, then q), so only the on-hand law is propagated.
    """
    ai = int(round(q / instance.delta))
    if abs(q / instance.delta - ai) > 1e-9 or not 0 <= ai < instance.n_actions:
        raise ValueError(f"constant order {q} is not on the action lattice")
    g = instance.period_cost()
    nxt = instance.on_hand_kernel()
    arrive = instance.arrival_matrices()
    empty, full = arrive[0], arrive[ai]
    mu = np.zeros(instance.n_on_hand)
    mu[0] = 1.0
    total = 0.0
    for t in range(instance.T):
        nu = mu @ (empty if t < instance.L else full)
        total += float(g @ nu)
        mu = nu @ nxt
    return total


def best_constant_order(instance: DiscreteInstance):
    """Exact finite-horizon cost of every lattice constant order; returns (q, cost, costs)."""
    costs = np.array([constant_order_cost(a * instance.delta, instance) for a in range(instance.n_actions)])
    i = int(np.argmin(costs))
    return i * instance.delta, float(costs[i]), costs
