from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from conftest import make_supply
from lostsales.errors import ConfigError
from lostsales.models import (
    FORMULATIONS,
    DemandModel,
    Discrete,
    SupplyModel,
    TruncatedNormal,
    Uniform,
    distribution_from_dict,
)
from lostsales.rng import SeededRng


# -- demand ---------------------------------------------------------------------------


def test_point_mass_demand_always_returns_its_value():
    d = DemandModel(Discrete.point(10.0))
    draws = d.sample(SeededRng(1), 50)
    assert np.all(draws == 10.0)


def test_uniform_demand_stays_in_support():
    d = DemandModel(Uniform(5.0, 15.0))
    draws = d.sample(SeededRng(2), 10_000)
    assert draws.min() >= 5.0 and draws.max() <= 15.0


def _quadrature_mean(mu, sd, lower):
    # independent oracle: integrate x f(x) over the truncated density
    dens = lambda x: stats.norm.pdf(x, mu, sd)
    upper = mu + 6 * sd
    mass, _ = integrate.quad(dens, lower, np.inf)
    first, _ = integrate.quad(lambda x: x * dens(x), lower, np.inf)
    return first / mass, upper


def test_truncated_normal_matches_quadrature_mean():
    oracle, _ = _quadrature_mean(10.0, 2.0, 0.0)
    tn = TruncatedNormal(10.0, 2.0, 0.0)
    draws = tn.sample(SeededRng(3), 1_000_000)
    assert abs(draws.mean() - oracle) < 0.02
    assert abs(tn.mean - oracle) < 1e-6


def test_truncation_at_zero_shifts_the_mean_up():
    # heavy truncation: the oracle mean is far above the location parameter
    oracle, _ = _quadrature_mean(1.0, 2.0, 0.0)
    tn = TruncatedNormal(1.0, 2.0, 0.0)
    assert oracle > 1.5
    draws = tn.sample(SeededRng(4), 400_000)
    assert draws.min() >= 0.0
    assert abs(draws.mean() - oracle) < 0.02


def test_truncated_normal_upper_clamp():
    tn = TruncatedNormal(10.0, 3.0, 0.0)
    assert tn.support == (0.0, 28.0)
    assert tn.sample(SeededRng(5), 100_000).max() <= 28.0


def test_variance_key_is_read_as_variance():
    dist = distribution_from_dict({"kind": "truncated-normal", "mean": 10, "variance": 9})
    assert dist.sd == pytest.approx(3.0)


@pytest.mark.parametrize("spec", [
    {"kind": "uniform", "lo": 5, "hi": 15},
    {"kind": "truncated-normal", "mean": 10, "sd": 2, "lower": 0},
    {"kind": "discrete", "values": [0, 2], "probs": [0.4, 0.6]},
])
def test_distribution_json_round_trip(spec):
    dist = distribution_from_dict(spec)
    again = distribution_from_dict(json.loads(json.dumps(dist.to_dict())))
    assert again == dist


def test_bad_distributions_are_rejected():
    with pytest.raises(ConfigError):
        distribution_from_dict({"kind": "gamma"})
    with pytest.raises(ConfigError):
        Discrete((1.0, 2.0), (0.5, 0.6))
    with pytest.raises(ConfigError):
        DemandModel(Discrete.point(0.0))


# -- supply ---------------------------------------------------------------------------


def test_realize_examples():
    assert SupplyModel("capacity", Uniform(0, 10)).realize(5, 3) == 3
    assert SupplyModel("yield", Uniform(0, 1)).realize(10, 0) == 0
    assert SupplyModel("allocation", Uniform(1, 5), k=12).realize(4, 2) == pytest.approx(8.0)


def test_realize_rejects_negative_orders():
    with pytest.raises(ValueError):
        make_supply("yield").realize(-1.0, 1.0)


def test_downshift_examples():
    cap = SupplyModel("capacity", Uniform(0, 10))
    assert cap.downshift(5, 5, 3) == 3
    assert cap.downshift(5, 2, 3) == 2
    assert SupplyModel("yield", Uniform(0, 1)).downshift(10, 5, 4) == pytest.approx(2.0)


def test_downshift_errors():
    cap = SupplyModel("capacity", Uniform(5, 15))
    with pytest.raises(ValueError):
        cap.downshift(5, 5, 6)
    with pytest.raises(ValueError):
        cap.downshift(10, 3, 2)  # below the lowest possible capacity
    y = make_supply("yield")
    with pytest.raises(ValueError):
        y.downshift(0.0, 0.0, 1.0)
    assert y.downshift(0.0, 0.0, 0.0) == 0.0


def test_mean_supply_examples():
    cap = SupplyModel("capacity", Discrete((3.0, 7.0), (0.5, 0.5)))
    assert cap.mean_supply(0.0) == 0.0
    assert cap.mean_supply(20.0) == 5.0
    y = SupplyModel("yield", Uniform(0.0, 1.0))
    assert abs(y.mean_supply(10.0, n_draws=1_000_000, rng=SeededRng(6)) - 5.0) < 0.02


@pytest.mark.parametrize("f", FORMULATIONS)
def test_expected_supply_agrees_with_monte_carlo(f):
    m = make_supply(f)
    exact = m.expected_supply(7.0)
    mc = m.mean_supply(7.0, n_draws=400_000, rng=SeededRng(7))
    assert abs(exact - mc) < 0.01 * max(1.0, exact)


@pytest.mark.parametrize("f", FORMULATIONS)
def test_supply_json_round_trip(f):
    m = make_supply(f)
    assert SupplyModel.from_dict(json.loads(json.dumps(m.to_dict()))) == m


def test_dada_needs_shocks_away_from_zero():
    with pytest.raises(ConfigError):
        SupplyModel("dada", Uniform(0.0, 1.0))


# -- properties -----------------------------------------------------------------------

orders = st.floats(min_value=1e-3, max_value=50.0, allow_nan=False)
fractions = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


@pytest.mark.parametrize("f", FORMULATIONS)
@settings(max_examples=300, deadline=None)
@given(q=orders, frac=fractions, u=fractions)
def test_downshift_matches_direct_realization(f, q, frac, u):
    m = make_supply(f)
    lo, hi = m.support
    z = lo + u * (hi - lo)
    qp = frac * q
    got = m.downshift(q, m.realize(q, z), qp)
    want = m.realize(qp, z)
    assert abs(got - want) <= 1e-12 * max(1.0, abs(want))


@pytest.mark.parametrize("f", FORMULATIONS)
@settings(max_examples=200, deadline=None)
@given(q1=orders, q2=orders, u=fractions)
def test_supply_is_monotone_in_the_order(f, q1, q2, u):
    m = make_supply(f)
    lo, hi = m.support
    z = lo + u * (hi - lo)
    a, b = sorted((q1, q2))
    assert m.realize(a, z) <= m.realize(b, z)


@settings(max_examples=300, deadline=None)
@given(q=orders, u=fractions)
def test_capacity_observation_is_censored_shock(q, u):
    m = make_supply("capacity")
    z = 5.0 + 10.0 * u
    s = m.realize(q, z)
    assert s <= q
    if s < q:
        assert s == z


@given(seed=st.integers(min_value=0, max_value=2**32))
@settings(max_examples=25, deadline=None)
def test_equal_seeds_give_equal_draws(seed):
    tn = TruncatedNormal(10.0, 2.0, 0.0)
    a = tn.sample(SeededRng(seed), 100)
    b = tn.sample(SeededRng(seed), 100)
    assert np.array_equal(a, b)


def test_child_streams_are_independent_of_parent_usage():
    r1, r2 = SeededRng(11), SeededRng(11)
    r2.uniform(0, 1, 1000)
    assert np.array_equal(r1.child("demand").uniform(0, 1, 5), r2.child("demand").uniform(0, 1, 5))
    assert not np.array_equal(r1.child("demand").uniform(0, 1, 5), r1.child("supply").uniform(0, 1, 5))
