from __future__ import annotations

import pytest

from lostsales.models import DemandModel, Discrete, SupplyModel, TruncatedNormal, Uniform


def make_supply(formulation: str) -> SupplyModel:
    """One representative model per formulation, shocks bounded away from 0."""
    if formulation == "yield":
        return SupplyModel("yield", Uniform(0.5, 1.5))
    if formulation == "capacity":
        return SupplyModel("capacity", Uniform(5.0, 15.0))
    if formulation == "dada":
        return SupplyModel("dada", Uniform(0.5, 2.0), alpha=0.7, rho=0.6)
    return SupplyModel("allocation", Uniform(1.0, 6.0), k=12.0)


@pytest.fixture
def capacity_u515() -> SupplyModel:
    return SupplyModel("capacity", Uniform(5.0, 15.0))


@pytest.fixture
def demand_tn10_var4() -> DemandModel:
    return DemandModel(TruncatedNormal(10.0, 2.0, 0.0))


def point(v: float) -> Discrete:
    return Discrete.point(v)


def censored_epoch(formulation: str, L: int, n: int, seed: int):
    """Play a_prev, then a_star, on the real system; return the a_star-fed records and ground truth.

    Returns (supply, a_star, observations, demand, z) where the observations
    cover the n periods whose arrivals all come from a_star orders.
    """
    import numpy as np

    from lostsales.system import CostParams, Scenario, run_scenario

    rng = np.random.default_rng(seed)
    supply = make_supply(formulation)
    lo, hi = supply.support
    a_star = float(rng.uniform(2.0, 14.0))
    a_prev = a_star + float(rng.uniform(0.0, 3.0))
    warm = int(rng.integers(0, 30))
    T = warm + L + n
    d = rng.uniform(0.0, 2.0 * float(np.mean(supply.realize(a_star, np.linspace(lo, hi, 101)))) + 1.0, T)
    z = rng.uniform(lo, hi, T)

    class Switch:
        def order(self, t, state, arrived):
            return a_prev if t <= warm else a_star

        def observe(self, obs):
            pass

    res = run_scenario(Switch(), Scenario(d, z), CostParams(1.0, 1.0, L, T), supply)
    first = warm + L  # 0-based index of the first period fed by an a_star order
    obs = [r.obs for r in res.trace[first:]]
    return supply, a_star, obs, d[first:], z[first:]


def uncensored_replay(supply, arms, start, d, z):
    """I^a_{t+1} = (I^a_t + s(a, Z_t) - D_t)^+ from I^a = start, with oracle demand."""
    import numpy as np

    arms = np.asarray(arms, dtype=float)
    inv = np.empty((len(arms), len(d) + 1))
    inv[:, 0] = start
    for j in range(len(d)):
        inv[:, j + 1] = np.maximum(inv[:, j] + supply.realize(arms, z[j]) - d[j], 0.0)
    return inv


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
