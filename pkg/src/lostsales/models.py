"""Demand distributions, supply-shock distributions and supply functions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import integrate, stats

from .errors import ConfigError
from .rng import SeededRng

FORMULATIONS = ("yield", "capacity", "dada", "allocation")


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float
    kind = "uniform"

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.hi < self.lo:
            raise ConfigError(f"uniform needs finite lo <= hi, got [{self.lo}, {self.hi}]")

    @property
    def support(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    @property
    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def variance(self) -> float:
        return (self.hi - self.lo) ** 2 / 12.0

    def sample(self, rng: SeededRng, size=None):
        return rng.uniform(self.lo, self.hi, size)

    def cdf(self, x):
        if self.hi == self.lo:
            return np.where(np.asarray(x, dtype=float) >= self.lo, 1.0, 0.0)
        return np.clip((np.asarray(x, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def expect(self, func) -> float:
        if self.hi == self.lo:
            return float(func(self.lo))
        val, _ = integrate.quad(func, self.lo, self.hi, limit=200)
        return val / (self.hi - self.lo)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class TruncatedNormal:
    """Normal(mean, sd) conditioned on >= lower, then clamped at upper.

    ``upper`` defaults to mean + 6 sd. Draws are made by rejection below
    ``lower``; mass above ``upper`` is moved onto ``upper``.
    """

    mean_param: float
    sd: float
    lower: float = 0.0
    upper: float | None = None
    kind = "truncated-normal"

    def __post_init__(self):
        if not self.sd > 0:
            raise ConfigError(f"truncated-normal sd must be positive, got {self.sd}")
        if self.upper is None:
            object.__setattr__(self, "upper", self.mean_param + 6.0 * self.sd)
        if not self.upper > self.lower:
            raise ConfigError("truncated-normal upper bound must exceed the lower bound")

    @property
    def support(self) -> tuple[float, float]:
        return (self.lower, self.upper)

    def _std(self, x):
        return (np.asarray(x, dtype=float) - self.mean_param) / self.sd

    @property
    def _tail(self) -> float:
        return float(stats.norm.sf(self._std(self.lower)))

    @property
    def mean(self) -> float:
        a, u = float(self._std(self.lower)), float(self._std(self.upper))
        body = self.mean_param * (stats.norm.cdf(u) - stats.norm.cdf(a)) + self.sd * (
            stats.norm.pdf(a) - stats.norm.pdf(u)
        )
        return float((body + self.upper * stats.norm.sf(u)) / self._tail)

    @property
    def variance(self) -> float:
        m = self.mean
        return self.expect(lambda x: (x - m) ** 2)

    def sample(self, rng: SeededRng, size=None):
        scalar = size is None
        n = 1 if scalar else int(np.prod(size))
        out = rng.normal(self.mean_param, self.sd, n)
        bad = out < self.lower
        while bad.any():
            out[bad] = rng.normal(self.mean_param, self.sd, int(bad.sum()))
            bad = out < self.lower
        np.minimum(out, self.upper, out=out)
        if scalar:
            return float(out[0])
        return out.reshape(size)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        base = (stats.norm.cdf(self._std(x)) - stats.norm.cdf(self._std(self.lower))) / self._tail
        return np.where(x < self.lower, 0.0, np.where(x >= self.upper, 1.0, base))

    def expect(self, func) -> float:
        pdf = lambda x: stats.norm.pdf(self._std(x)) / (self.sd * self._tail)
        body, _ = integrate.quad(lambda x: func(x) * pdf(x), self.lower, self.upper, limit=200)
        return body + func(self.upper) * float(stats.norm.sf(self._std(self.upper))) / self._tail

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "mean": self.mean_param,
            "sd": self.sd,
            "lower": self.lower,
            "upper": self.upper,
        }


@dataclass(frozen=True)
class Discrete:
    values: tuple[float, ...]
    probs: tuple[float, ...]
    kind = "discrete"

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        probs = tuple(float(p) for p in self.probs)
        if not values or len(values) != len(probs):
            raise ConfigError("discrete distribution needs equally many values and probs")
        if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
            raise ConfigError(f"discrete probabilities must be >= 0 and sum to 1, got {probs}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def point(cls, value: float) -> "Discrete":
        return cls((value,), (1.0,))

    @property
    def support(self) -> tuple[float, float]:
        return (min(self.values), max(self.values))

    @property
    def mean(self) -> float:
        return float(np.dot(self.values, self.probs))

    @property
    def variance(self) -> float:
        v = np.asarray(self.values)
        return float(np.dot((v - self.mean) ** 2, self.probs))

    @property
    def is_point(self) -> bool:
        return sum(p > 0 for p in self.probs) == 1

    def sample(self, rng: SeededRng, size=None):
        if self.is_point:
            v = self.values[int(np.argmax(self.probs))]
            return v if size is None else np.full(size, v)
        return rng.choice(np.asarray(self.values), np.asarray(self.probs), size)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        v, p = np.asarray(self.values), np.asarray(self.probs)
        return (p[None, :] * (v[None, :] <= x.reshape(-1, 1))).sum(axis=1).reshape(x.shape)

    def expect(self, func) -> float:
        return float(sum(p * func(v) for v, p in zip(self.values, self.probs)))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "values": list(self.values), "probs": list(self.probs)}


Distribution = Union[Uniform, TruncatedNormal, Discrete]


def distribution_from_dict(spec: dict) -> Distribution:
    """Build a distribution from its JSON form; see ``data/config.schema.json``."""
    try:
        kind = spec["kind"]
        if kind == "uniform":
            return Uniform(float(spec["lo"]), float(spec["hi"]))
        if kind == "truncated-normal":
            sd = spec["sd"] if "sd" in spec else math.sqrt(spec["variance"])
            upper = spec.get("upper")
            return TruncatedNormal(
                float(spec["mean"]),
                float(sd),
                float(spec.get("lower", 0.0)),
                None if upper is None else float(upper),
            )
        if kind == "discrete":
            return Discrete(tuple(spec["values"]), tuple(spec["probs"]))
        if kind == "point":
            return Discrete.point(float(spec["value"]))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed distribution {spec!r}: {exc}") from None
    raise ConfigError(f"unknown distribution kind {kind!r}")


@dataclass(frozen=True)
class DemandModel:
    dist: Distribution

    def __post_init__(self):
        lo, hi = self.dist.support
        if lo < 0 or not math.isfinite(hi):
            raise ConfigError(f"demand must live on a bounded subset of [0, inf), got {self.dist.support}")
        if not self.dist.mean > 0:
            raise ConfigError("demand mean must be strictly positive")

    @property
    def upper(self) -> float:
        return self.dist.support[1]

    @property
    def mean(self) -> float:
        return self.dist.mean

    def sample(self, rng: SeededRng, size=None):
        return self.dist.sample(rng, size)

    @classmethod
    def from_dict(cls, spec: dict) -> "DemandModel":
        return cls(distribution_from_dict(spec))

    def to_dict(self) -> dict:
        return self.dist.to_dict()


def _bisect_increasing(func, target, lo, hi, iters: int = 200):
    """Elementwise root of an increasing ``func`` on [lo, hi], to machine precision."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = func(mid) < target
        new_lo = np.where(below, mid, lo)
        new_hi = np.where(below, hi, mid)
        if np.array_equal(new_lo, lo) and np.array_equal(new_hi, hi):
            break
        lo, hi = new_lo, new_hi
    err_lo = np.abs(func(lo) - target)
    err_hi = np.abs(func(hi) - target)
    return np.where(err_lo <= err_hi, lo, hi)


@dataclass(frozen=True)
class SupplyModel:
    """One of the four supply functions together with the shock law of Z.

    yield       s = q z
    capacity    s = min(q, z)
    dada        s = q z / (q + alpha z**rho),  alpha > 0, rho <= 1
    allocation  s = q k / (q + z),             k > 0
    """

    formulation: str
    z: Distribution
    alpha: float = 1.0
    rho: float = 1.0
    k: float = 1.0
    image_rtol: float = field(default=1e-9, repr=False)

    def __post_init__(self):
        if self.formulation not in FORMULATIONS:
            raise ConfigError(f"unknown supply formulation {self.formulation!r}")
        lo, hi = self.z.support
        if lo < 0 or not math.isfinite(hi):
            raise ConfigError(f"supply shocks must be bounded and non-negative, got {self.z.support}")
        if self.formulation == "dada":
            if not self.alpha > 0 or self.rho > 1:
                raise ConfigError("dada supply needs alpha > 0 and rho <= 1")
            if lo <= 0:
                raise ConfigError("dada supply needs shocks bounded away from 0")
        if self.formulation == "allocation" and not self.k > 0:
            raise ConfigError("allocation supply needs k > 0")

    @property
    def support(self) -> tuple[float, float]:
        return self.z.support

    def realize(self, q, z):
        """Supplied quantity for order ``q`` under shock ``z`` (broadcasts)."""
        q_arr = np.asarray(q, dtype=float)
        if np.any(q_arr < 0):
            raise ValueError("order quantity must be non-negative")
        out = self._realize(q_arr, np.asarray(z, dtype=float))
        return float(out) if out.ndim == 0 else out

    def _realize(self, q, z):
        f = self.formulation
        if f == "yield":
            return q * z
        if f == "capacity":
            return np.minimum(q, z)
        with np.errstate(divide="ignore", invalid="ignore"):
            if f == "dada":
                out = q * z / (q + self.alpha * z**self.rho)
            else:
                out = q * self.k / (q + z)
        return np.where(q > 0, out, 0.0)

    def image(self, q) -> tuple:
        """Range of ``realize(q, .)`` over the shock support."""
        lo, hi = self.support
        a, b = self._realize(np.asarray(q, float), np.float64(lo)), self._realize(np.asarray(q, float), np.float64(hi))
        return np.minimum(a, b), np.maximum(a, b)

    def invert(self, q, observed):
        """Recover z from (q, s(q, z)) for q > 0; not defined for capacity."""
        q = np.asarray(q, dtype=float)
        s = np.asarray(observed, dtype=float)
        f = self.formulation
        if f == "yield":
            return s / q
        if f == "allocation":
            return q * (self.k - s) / s
        if f == "dada":
            lo, hi = self.support
            return _bisect_increasing(
                lambda zz: self._realize(q, zz), s, np.full(np.broadcast(q, s).shape, lo), hi
            )
        raise ValueError("capacity shocks are censored and cannot be inverted")

    def downshift(self, q, observed, q_prime):
        """s(q', Z) for q' <= q, computed from the observed s(q, Z) alone."""
        q = np.asarray(q, dtype=float)
        s = np.asarray(observed, dtype=float)
        qp = np.asarray(q_prime, dtype=float)
        if np.any(qp < 0):
            raise ValueError("downshifted order must be non-negative")
        if np.any(qp > q):
            raise ValueError("downshift requires q_prime <= q")
        lo_img, hi_img = self.image(q)
        slack = self.image_rtol * np.maximum(1.0, np.abs(hi_img))
        if np.any(s < lo_img - slack) or np.any(s > hi_img + slack):
            raise ValueError("observed supply is outside the image of realize(q, .)")
        if self.formulation == "capacity":
            out = np.where(s >= q, qp, np.minimum(qp, s))
        else:
            zero = q <= 0
            if np.any(zero & (qp > 0)):
                raise ValueError("shock is unrecoverable from a zero order")
            safe_q = np.where(zero, 1.0, q)
            safe_s = np.where(zero, self._realize(np.float64(1.0), np.float64(self.support[1])), s)
            z = self.invert(safe_q, safe_s)
            out = np.where(zero, 0.0, self._realize(qp, z))
        out = np.asarray(out, dtype=float)
        return float(out) if out.ndim == 0 else out

    def mean_supply(self, q: float, n_draws: int = 100_000, rng: SeededRng | None = None) -> float:
        """E[s(q, Z)]: exact for discrete shocks, Monte Carlo otherwise."""
        if q < 0:
            raise ValueError("order quantity must be non-negative")
        if q == 0:
            return 0.0
        if isinstance(self.z, Discrete):
            return float(np.dot(self._realize(np.float64(q), np.asarray(self.z.values)), self.z.probs))
        if rng is None:
            rng = SeededRng(0)
        return float(np.mean(self._realize(np.float64(q), self.z.sample(rng, n_draws))))

    def expected_supply(self, q: float) -> float:
        """E[s(q, Z)] by quadrature (exact sum for discrete shocks)."""
        if q == 0:
            return 0.0
        if self.formulation == "capacity" and not isinstance(self.z, Discrete):
            lo, hi = self.support
            if q <= lo:
                return float(q)
        return self.z.expect(lambda zz: float(self._realize(np.float64(q), np.float64(zz))))

    @classmethod
    def from_dict(cls, spec: dict) -> "SupplyModel":
        try:
            kind = spec["kind"]
            z = distribution_from_dict(spec["z"])
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed supply spec {spec!r}: {exc}") from None
        kwargs = {key: float(spec[key]) for key in ("alpha", "rho", "k") if key in spec}
        return cls(kind, z, **kwargs)

    def to_dict(self) -> dict:
        out = {"kind": self.formulation, "z": self.z.to_dict()}
        if self.formulation == "dada":
            out.update(alpha=self.alpha, rho=self.rho)
        if self.formulation == "allocation":
            out["k"] = self.k
        return out
