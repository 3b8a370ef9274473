"""Benchmark-side evaluation of constant-order policies.

These routines know the true demand and shock distributions. The learner
never imports from here.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import UnstableOrderError
from .models import DemandModel, Discrete, SupplyModel
from .rng import SeededRng
from .system import CostParams, draw_scenario

STABLE, UNSTABLE, MARGINAL = "stable", "unstable", "marginal"


def default_burn_in(T: int, L: int) -> int:
    return math.ceil(10 * max(math.log(T), 2 * L))


def check_stability(q: float, supply: SupplyModel, demand: DemandModel, tolerance: float = 1e-9) -> str:
    """Classify q by the drift E[s(q, Z)] - E[D] of the inventory chain."""
    if q < 0:
        raise ValueError("order quantity must be non-negative")
    gap = supply.expected_supply(q) - demand.mean
    if gap < -tolerance:
        return STABLE
    if gap > tolerance:
        return UNSTABLE
    return MARGINAL


def stable_upper_bound(supply: SupplyModel, demand: DemandModel, margin: float = 0.05, cap: float = 1.2) -> float:
    """Largest order up to a cap whose mean supply stays below (1 - margin) E[D].

    The cap is ``cap * E[D]``, divided by E[Z] for yield supply.
    """
    scale = demand.mean / supply.z.mean if supply.formulation == "yield" else demand.mean
    hi = cap * scale
    target = (1.0 - margin) * demand.mean
    if supply.expected_supply(hi) <= target:
        return hi
    lo = 0.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if supply.expected_supply(mid) <= target:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class PseudoCostEstimate:
    q: float
    estimate: float
    se: float
    burn_in: int
    eval_periods: int


@dataclass(frozen=True)
class GridEvaluation:
    """Long-run statistics for each candidate order, under common random numbers."""

    q: np.ndarray
    cost_mean: np.ndarray
    cost_se: np.ndarray
    pseudo_mean: np.ndarray
    pseudo_se: np.ndarray
    mean_inventory: np.ndarray
    mean_supply: np.ndarray
    stable: list[str]
    burn_in: int
    eval_periods: int

    @property
    def best_index(self) -> int:
        # np.argmin returns the first minimum, so ties go to the smaller q
        return int(np.argmin(self.cost_mean))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["q", "cost_mean", "cost_se", "pseudo_cost", "stable"])
            for i in range(len(self.q)):
                w.writerow([repr(float(self.q[i])), repr(float(self.cost_mean[i])),
                            repr(float(self.cost_se[i])), repr(float(self.pseudo_mean[i])),
                            self.stable[i]])


def _batch_se(batch_means: np.ndarray) -> np.ndarray:
    n = batch_means.shape[-1]
    if n < 2:
        return np.zeros(batch_means.shape[:-1])
    return batch_means.std(axis=-1, ddof=1) / math.sqrt(n)


def simulate_constant_orders(
    qs,
    params: CostParams,
    supply: SupplyModel,
    demand: DemandModel,
    burn_in: int,
    eval_periods: int,
    rng: SeededRng,
    n_batches: int = 50,
) -> dict:
    """Run I_{t+1} = (I_t + s(q, Z_t) - D_t)^+ from I = 0 for every q at once.

    All candidates share one (D, Z) stream. Returns post-burn-in means and
    batch-means standard errors of the pseudo-cost h I_t - b s_t and of the
    true period cost.
    """
    qs = np.atleast_1d(np.asarray(qs, dtype=float))
    if burn_in < 0 or eval_periods < 1:
        raise ValueError("need burn_in >= 0 and eval_periods >= 1")
    n_batches = max(1, min(n_batches, eval_periods))
    scen = draw_scenario(burn_in + eval_periods, demand, supply, rng)
    h, b = params.h, params.b
    inv = np.zeros(len(qs))
    for t in range(burn_in):
        inv = np.maximum(inv + supply.realize(qs, scen.z[t]) - scen.demand[t], 0.0)

    edges = np.linspace(0, eval_periods, n_batches + 1).round().astype(int) + burn_in
    pseudo_b = np.empty((len(qs), n_batches))
    cost_b = np.empty_like(pseudo_b)
    inv_b = np.empty_like(pseudo_b)
    sup_b = np.empty_like(pseudo_b)
    weights = np.diff(edges).astype(float)
    for k in range(n_batches):
        lo, hi = edges[k], edges[k + 1]
        s_blk = supply.realize(qs[:, None], scen.z[None, lo:hi])
        d_blk = scen.demand[lo:hi]
        i_blk = np.empty_like(s_blk)
        for j in range(hi - lo):
            i_blk[:, j] = inv
            inv = np.maximum(inv + s_blk[:, j] - d_blk[j], 0.0)
        avail = i_blk + s_blk
        c_blk = h * np.maximum(avail - d_blk, 0.0) + b * np.maximum(d_blk - avail, 0.0)
        inv_b[:, k] = i_blk.mean(axis=1)
        sup_b[:, k] = s_blk.mean(axis=1)
        cost_b[:, k] = c_blk.mean(axis=1)
        pseudo_b[:, k] = h * inv_b[:, k] - b * sup_b[:, k]
    w = weights / weights.sum()
    return {
        "q": qs,
        "pseudo_mean": pseudo_b @ w,
        "pseudo_se": _batch_se(pseudo_b),
        "cost_mean": cost_b @ w,
        "cost_se": _batch_se(cost_b),
        "mean_inventory": inv_b @ w,
        "mean_supply": sup_b @ w,
    }


def _require_stable(q, supply, demand):
    status = check_stability(q, supply, demand)
    if status != STABLE:
        raise UnstableOrderError(f"q={q} is {status}: E[s(q,Z)] >= E[D]")


def estimate_pseudo_cost(
    q: float,
    params: CostParams,
    supply: SupplyModel,
    demand: DemandModel,
    burn_in: int | None = None,
    eval_periods: int = 100_000,
    rng: SeededRng | None = None,
) -> PseudoCostEstimate:
    """Estimate h E[I_inf] - b E[s(q, Z)] for the constant order q."""
    _require_stable(q, supply, demand)
    if burn_in is None:
        burn_in = default_burn_in(params.T, params.L)
    if q == 0:
        return PseudoCostEstimate(0.0, 0.0, 0.0, burn_in, eval_periods)
    res = simulate_constant_orders([q], params, supply, demand, burn_in, eval_periods, rng or SeededRng(0))
    return PseudoCostEstimate(float(q), float(res["pseudo_mean"][0]), float(res["pseudo_se"][0]), burn_in, eval_periods)


def long_run_average_cost(
    q: float,
    params: CostParams,
    supply: SupplyModel,
    demand: DemandModel,
    burn_in: int | None = None,
    eval_periods: int = 100_000,
    rng: SeededRng | None = None,
) -> PseudoCostEstimate:
    """Estimate the long-run average cost of constant order q.

    The period cost h (I+s-D)^+ + b (D-I-s)^+ is averaged directly, so the
    result should differ from the pseudo-cost by b E[D] only up to noise.
    """
    _require_stable(q, supply, demand)
    if burn_in is None:
        burn_in = default_burn_in(params.T, params.L)
    res = simulate_constant_orders([q], params, supply, demand, burn_in, eval_periods, rng or SeededRng(0))
    return PseudoCostEstimate(float(q), float(res["cost_mean"][0]), float(res["cost_se"][0]), burn_in, eval_periods)


def evaluate_grid(
    grid,
    params: CostParams,
    supply: SupplyModel,
    demand: DemandModel,
    burn_in: int | None = None,
    eval_periods: int = 100_000,
    rng: SeededRng | None = None,
) -> GridEvaluation:
    grid = np.asarray(sorted(float(g) for g in grid))
    if grid.size == 0:
        raise ValueError("candidate grid is empty")
    status = [check_stability(q, supply, demand) for q in grid]
    if any(s != STABLE for s in status):
        bad = [float(q) for q, s in zip(grid, status) if s != STABLE]
        raise UnstableOrderError(f"grid contains non-stable orders {bad[:5]}")
    if burn_in is None:
        burn_in = default_burn_in(params.T, params.L)
    res = simulate_constant_orders(grid, params, supply, demand, burn_in, eval_periods, rng or SeededRng(0))
    return GridEvaluation(
        q=grid,
        cost_mean=res["cost_mean"],
        cost_se=res["cost_se"],
        pseudo_mean=res["pseudo_mean"],
        pseudo_se=res["pseudo_se"],
        mean_inventory=res["mean_inventory"],
        mean_supply=res["mean_supply"],
        stable=status,
        burn_in=burn_in,
        eval_periods=eval_periods,
    )


def optimal_constant_order(grid, params, supply, demand, burn_in=None, eval_periods=100_000, rng=None):
    """Grid argmin of the long-run average cost; returns (q*, estimate, table)."""
    table = evaluate_grid(grid, params, supply, demand, burn_in, eval_periods, rng)
    i = table.best_index
    est = PseudoCostEstimate(float(table.q[i]), float(table.cost_mean[i]), float(table.cost_se[i]),
                             table.burn_in, table.eval_periods)
    return float(table.q[i]), est, table


# -- exact stationary analysis on a lattice ---------------------------------------


@dataclass(frozen=True)
class StationaryResult:
    q: float
    levels: np.ndarray
    pi: np.ndarray
    mean_inventory: float
    mean_supply: float
    pseudo_cost: float
    average_cost: float


def _lattice_pmf(values, probs, step: float) -> dict[int, float]:
    out: dict[int, float] = {}
    for v, p in zip(values, probs):
        k = round(v / step)
        if abs(k * step - v) > 1e-9 * max(1.0, abs(v)):
            raise ValueError(f"value {v} is not on the lattice of step {step}")
        out[k] = out.get(k, 0.0) + p
    return out


def stationary_inventory(
    q: float,
    params: CostParams,
    supply: SupplyModel,
    demand: DemandModel,
    step: float = 1.0,
    n_levels: int | None = None,
) -> StationaryResult:
    """Solve the balance equations of I_{t+1} = (I_t + s(q,Z) - D)^+ exactly.

    Needs discrete demand and shocks whose supplies and demands sit on the
    lattice {0, step, 2 step, ...}. The chain is truncated at ``n_levels``
    states; the default is chosen so the neglected tail is far below 1e-12.
    """
    if not isinstance(demand.dist, Discrete) or not isinstance(supply.z, Discrete):
        raise ValueError("exact stationary analysis needs discrete demand and shocks")
    _require_stable(q, supply, demand)
    s_vals = supply.realize(q, np.asarray(supply.z.values))
    s_pmf = _lattice_pmf(np.atleast_1d(s_vals), supply.z.probs, step)
    d_pmf = _lattice_pmf(demand.dist.values, demand.dist.probs, step)
    inc: dict[int, float] = {}
    for ks, ps in s_pmf.items():
        for kd, pd in d_pmf.items():
            inc[ks - kd] = inc.get(ks - kd, 0.0) + ps * pd
    if n_levels is None:
        span = max(abs(k) for k in inc) or 1
        drift = -sum(k * p for k, p in inc.items())
        var = sum(k * k * p for k, p in inc.items())
        # geometric tail exp(-2 drift x / var) pushed below 1e-16
        n_levels = int(min(20_000, max(50, 40 * var / max(drift, 1e-12) + 20 * span)))
    n = n_levels
    P = np.zeros((n, n))
    for i in range(n):
        for k, p in inc.items():
            j = min(max(i + k, 0), n - 1)
            P[i, j] += p
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    pi = np.linalg.solve(A, rhs)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    levels = np.arange(n) * step
    mean_i = float(pi @ levels)
    mean_s = float(sum(k * step * p for k, p in s_pmf.items()))
    pseudo = params.h * mean_i - params.b * mean_s
    return StationaryResult(float(q), levels, pi, mean_i, mean_s, pseudo, pseudo + params.b * demand.mean)
