"""Model primitives and closed-form equilibrium objects.

Everything here is a pure function of its inputs. Scalar functions accept
floats or numpy arrays and return the same shape; out-of-domain input raises
:class:`DomainError`.

Notation used throughout:

* ``q``   share of (costly) consumers that sample two firms
* ``mu``  price-law weight, captive demand over comparing demand, halved
* ``v``   valuation (monopoly price), ``c`` marginal cost

Each closed form has an ``*_integral`` twin evaluated by adaptive quadrature
so the two routes can be cross-checked.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy import integrate

# Below this q the log-difference is summed as a power series.
SERIES_CUTOFF = 0.05
# Above this mu the shopper benefit is summed in powers of 1/mu.
MU_SERIES_CUTOFF = 20.0
DEFAULT_QUADRATURE_NODES = 64


class DomainError(ValueError):
    """Argument outside the domain where a model object is defined."""


class SearchCostMode(str, enum.Enum):
    FIRST_FREE = "first_free"
    ALL_COSTLY = "all_costly"


# ---------------------------------------------------------------------------
# helpers


def _as_array(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)):
        raise DomainError(f"{name} contains NaN")
    return arr


def _out(arr: np.ndarray, like):
    return float(arr) if np.ndim(like) == 0 else arr


def _check_open_unit(q: np.ndarray, name: str = "q") -> None:
    if np.any((q <= 0.0) | (q >= 1.0)):
        raise DomainError(f"{name} must lie in the open interval (0, 1)")


def _log_excess_ratio(q: np.ndarray) -> np.ndarray:
    """(ln((1+q)/(1-q)) - 2q) / q**3, stable for small q."""
    h = np.empty_like(q)
    small = q < SERIES_CUTOFF
    if np.any(small):
        qs2 = q[small] ** 2
        acc = np.zeros_like(qs2)
        # 2 * sum_{j>=1} q^(2j-2) / (2j+1), truncated far past double precision
        for j in range(9, 0, -1):
            acc = acc * qs2 + 2.0 / (2 * j + 1)
        h[small] = acc
    big = ~small
    if np.any(big):
        qb = q[big]
        h[big] = (2.0 * np.arctanh(qb) - 2.0 * qb) / qb**3
    return h


# ---------------------------------------------------------------------------
# closed forms


def benefit_factor(q):
    """Added benefit of a second price quote per unit of surplus ``v - c``.

    ``A(q) = [ln((1+q)/(1-q)) - 2q] (1-q) / (2 q^2)``. Active-search
    equilibria solve ``A(q) (v - c) = s``.
    """
    qa = _as_array(q, "q")
    _check_open_unit(qa)
    qa1 = np.atleast_1d(qa)
    val = 0.5 * qa1 * (1.0 - qa1) * _log_excess_ratio(qa1)
    return _out(val.reshape(qa.shape), q)


def benefit_factor_deriv(q):
    """Derivative of :func:`benefit_factor` with respect to ``q``."""
    qa = _as_array(q, "q")
    _check_open_unit(qa)
    qa1 = np.atleast_1d(qa)
    h = _log_excess_ratio(qa1)
    # [2q(2+q) - (2+q-q^2) L] / (2 q^3 (1+q)) with L = 2q + q^3 h
    val = (1.0 - 0.5 * (2.0 + qa1 - qa1**2) * h) / (1.0 + qa1)
    return _out(val.reshape(qa.shape), q)


def cs_factor(q):
    """Consumer surplus per unit of ``v - c``: ``1 - (1-q)/(2q) ln((1+q)/(1-q))``.

    Equivalent to ``q (1 - A(q))``, which is the form evaluated here.
    """
    qa = _as_array(q, "q")
    _check_open_unit(qa)
    qa1 = np.atleast_1d(qa)
    a = 0.5 * qa1 * (1.0 - qa1) * _log_excess_ratio(qa1)
    val = qa1 * (1.0 - a)
    return _out(val.reshape(qa.shape), q)


def shopper_weight(q, shopper_share):
    """Price-law weight when a share of consumers always compares two prices.

    ``mu = (1-q) / (2q + phi)`` with ``phi = 2 lam / (1 - lam)``; reduces to
    ``(1-q)/(2q)`` at ``lam = 0``.
    """
    qa = _as_array(q, "q")
    _check_open_unit(qa)
    lam = float(shopper_share)
    if not 0.0 <= lam < 1.0:
        raise DomainError("shopper_share must lie in [0, 1)")
    phi = 2.0 * lam / (1.0 - lam)
    return _out((1.0 - qa) / (2.0 * qa + phi), q)


def intensity_from_weight(mu, shopper_share: float = 0.0):
    """Invert :func:`shopper_weight`: the ``q`` that produces weight ``mu``."""
    m = _as_array(mu, "mu")
    lam = float(shopper_share)
    phi = 2.0 * lam / (1.0 - lam)
    return _out((1.0 - m * phi) / (1.0 + 2.0 * m), mu)


def shopper_benefit_factor(mu):
    """Second-search benefit per unit surplus as a function of the weight.

    ``G(mu) = mu [(1 + 2mu) ln(1 + 1/mu) - 2]``. At ``lam = 0`` this equals
    ``benefit_factor(q)`` with ``mu = (1-q)/(2q)``.
    """
    m = _as_array(mu, "mu")
    if np.any(m <= 0.0):
        raise DomainError("mu must be positive")
    m1 = np.atleast_1d(m)
    out = np.empty_like(m1)
    big = m1 > MU_SERIES_CUTOFF
    if np.any(big):
        t = 1.0 / m1[big]
        acc = np.zeros_like(t)
        # sum_{n>=2} (-1)^n (n-1) / (n (n+1)) t^n, highest term first
        for n in range(24, 1, -1):
            acc = acc * t + (-1) ** n * (n - 1) / (n * (n + 1))
        out[big] = t * acc  # mu * t^2 * acc
    small = ~big
    if np.any(small):
        ms = m1[small]
        out[small] = ms * ((1.0 + 2.0 * ms) * np.log1p(1.0 / ms) - 2.0)
    return _out(out.reshape(m.shape), mu)


def market_power(q):
    """Captive-to-comparing demand ratio ``(1-q)/(2q)``."""
    qa = _as_array(q, "q")
    _check_open_unit(qa)
    return _out((1.0 - qa) / (2.0 * qa), q)


# ---------------------------------------------------------------------------
# integral definitions (quadrature oracles)


def _quad(fn: Callable[[float], float]) -> float:
    val, _ = integrate.quad(fn, 0.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def _quantile_from_weight(mu: float, c: float, v: float) -> Callable[[float], float]:
    return lambda x: mu * (v - c) / (mu + x) + c


def benefit_integral(q: float, c: float = 0.0, v: float = 1.0) -> float:
    """``int_0^1 p(x) (1 - 2x) dx`` by adaptive quadrature (not normalised)."""
    p = _quantile_from_weight((1.0 - q) / (2.0 * q), c, v)
    return _quad(lambda x: p(x) * (1.0 - 2.0 * x))


def cs_integral(q: float, c: float = 0.0, v: float = 1.0) -> float:
    """``v - int_0^1 p(x) dx`` by adaptive quadrature."""
    p = _quantile_from_weight((1.0 - q) / (2.0 * q), c, v)
    return v - _quad(p)


def shopper_benefit_integral(mu: float, c: float = 0.0, v: float = 1.0) -> float:
    p = _quantile_from_weight(mu, c, v)
    return _quad(lambda x: p(x) * (1.0 - 2.0 * x))


# ---------------------------------------------------------------------------
# price law


@dataclass(frozen=True)
class PriceLaw:
    """Equilibrium price distribution for one cost state.

    Stored by its weight ``mu`` so the base model and the shopper extension
    share a single parameterisation.
    """

    cost: float
    weight: float
    valuation: float

    def __post_init__(self):
        if not self.weight > 0.0:
            raise DomainError("price-law weight must be positive")
        if not self.valuation > self.cost:
            raise DomainError("valuation must exceed cost")

    @classmethod
    def from_intensity(cls, q: float, cost: float, valuation: float,
                       shopper_share: float = 0.0) -> "PriceLaw":
        return cls(cost, float(shopper_weight(q, shopper_share)), valuation)

    @property
    def support_low(self) -> float:
        mu = self.weight
        return self.cost + mu * (self.valuation - self.cost) / (mu + 1.0)

    @property
    def support_high(self) -> float:
        return self.valuation

    def quantile(self, x):
        return price_quantile(x, self)

    def ccdf(self, p):
        return price_ccdf(p, self)

    def cdf(self, p):
        return 1.0 - price_ccdf(p, self)


def price_quantile(x, law: PriceLaw):
    """Price whose survival probability is ``x``: ``mu (v-c)/(mu + x) + c``."""
    xa = _as_array(x, "x")
    if np.any((xa < 0.0) | (xa > 1.0)):
        raise DomainError("CCDF level must lie in [0, 1]")
    mu, c, v = law.weight, law.cost, law.valuation
    return _out(mu * (v - c) / (mu + xa) + c, x)


def price_ccdf(p, law: PriceLaw):
    """Probability that a firm prices above ``p``: ``mu ((v-c)/(p-c) - 1)``."""
    pa = _as_array(p, "p")
    c, v = law.cost, law.valuation
    if np.any(pa <= c):
        raise DomainError("price at or below cost")
    lo = law.support_low
    # a few ulps of slack for endpoints produced by price_quantile
    slack = 8.0 * np.finfo(float).eps * max(abs(v), 1.0)
    if np.any((pa < lo - slack) | (pa > v + slack)):
        raise DomainError("price outside the support")
    val = law.weight * ((v - c) / (pa - c) - 1.0)
    return _out(np.clip(val, 0.0, 1.0), p)


# ---------------------------------------------------------------------------
# cost distributions


def gauss_legendre_unit(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    return 0.5 * (x + 1.0), 0.5 * w


@dataclass(frozen=True)
class DiscreteCosts:
    costs: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        costs = tuple(float(c) for c in self.costs)
        probs = tuple(float(f) for f in self.probs)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "probs", probs)
        if not costs or len(costs) != len(probs):
            raise DomainError("costs and probs must be non-empty and of equal length")
        if costs[0] < 0.0 or any(b < a for a, b in zip(costs, costs[1:])):
            raise DomainError("costs must be non-negative and ascending")
        if any(f <= 0.0 for f in probs):
            raise DomainError("probabilities must be positive")
        if abs(math.fsum(probs) - 1.0) > 1e-12:
            raise DomainError("probabilities must sum to one")

    @property
    def lower(self) -> float:
        return self.costs[0]

    @property
    def upper(self) -> float:
        return self.costs[-1]

    def atoms(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.costs), np.array(self.probs)

    def mean(self) -> float:
        return math.fsum(c * f for c, f in zip(self.costs, self.probs))

    def is_degenerate(self) -> bool:
        return self.costs[0] == self.costs[-1]

    def sample(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms to cost-state indices."""
        cum = np.cumsum(self.probs)
        cum[-1] = 1.0
        return np.searchsorted(cum, u, side="right").clip(max=len(self.costs) - 1)


@dataclass(frozen=True)
class ContinuousCosts:
    """Atomless cost law on ``[lower, upper]`` given by its quantile function.

    Expectations use a Gauss-Legendre rule with ``nodes`` points on the
    quantile scale; those nodes also serve as the state grid for the
    observed-cost regime.
    """

    lower: float
    upper: float
    quantile: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    nodes: int = DEFAULT_QUADRATURE_NODES
    label: str = "custom"

    def __post_init__(self):
        if not 0.0 <= self.lower < self.upper:
            raise DomainError("need 0 <= lower < upper")
        if self.nodes < 2:
            raise DomainError("need at least two quadrature nodes")
        grid = np.linspace(0.0, 1.0, 257)
        vals = np.asarray(self.quantile(grid), dtype=float)
        tol = 1e-12 * max(1.0, self.upper)
        if abs(vals[0] - self.lower) > tol or abs(vals[-1] - self.upper) > tol:
            raise DomainError("quantile(0) and quantile(1) must equal the bounds")
        if np.any(np.diff(vals) < -tol):
            raise DomainError("quantile must be nondecreasing")

    @classmethod
    def uniform(cls, lower: float, upper: float,
                nodes: int = DEFAULT_QUADRATURE_NODES) -> "ContinuousCosts":
        lo, hi = float(lower), float(upper)
        return cls(lo, hi, lambda u: lo + (hi - lo) * np.asarray(u, dtype=float),
                   nodes, "uniform")

    @classmethod
    def tabulated(cls, levels: Sequence[float], values: Sequence[float],
                  nodes: int = DEFAULT_QUADRATURE_NODES) -> "ContinuousCosts":
        """Piecewise-linear quantile through ``(levels[i], values[i])``."""
        lv = np.asarray(levels, dtype=float)
        vv = np.asarray(values, dtype=float)
        if lv.ndim != 1 or lv.shape != vv.shape or lv.size < 2:
            raise DomainError("levels and values must be equal-length 1-D sequences")
        if lv[0] != 0.0 or lv[-1] != 1.0 or np.any(np.diff(lv) <= 0.0):
            raise DomainError("levels must increase strictly from 0 to 1")
        if np.any(np.diff(vv) <= 0.0):
            # flat pieces would be atoms
            raise DomainError("tabulated quantile must be strictly increasing")
        return cls(float(vv[0]), float(vv[-1]),
                   lambda u: np.interp(np.asarray(u, dtype=float), lv, vv),
                   nodes, "tabulated")

    def atoms(self) -> tuple[np.ndarray, np.ndarray]:
        u, w = gauss_legendre_unit(self.nodes)
        return np.asarray(self.quantile(u), dtype=float), w

    def mean(self) -> float:
        c, w = self.atoms()
        return float(np.dot(c, w))

    def is_degenerate(self) -> bool:
        return False

    def sample_costs(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(self.quantile(u), dtype=float)


CostDistribution = Union[DiscreteCosts, ContinuousCosts]


@dataclass(frozen=True)
class MarketParams:
    n_firms: int
    valuation: float
    search_cost: float
    cost_dist: CostDistribution
    shopper_share: float = 0.0
    search_cost_mode: SearchCostMode = SearchCostMode.FIRST_FREE

    def __post_init__(self):
        if int(self.n_firms) != self.n_firms or self.n_firms < 2:
            raise DomainError("n_firms must be an integer >= 2")
        if not self.valuation > self.cost_dist.upper:
            raise DomainError("valuation must exceed every cost in the support")
        if not self.search_cost >= 0.0:
            raise DomainError("search_cost must be non-negative")
        if not 0.0 <= self.shopper_share < 1.0:
            raise DomainError("shopper_share must lie in [0, 1)")
        object.__setattr__(self, "search_cost_mode", SearchCostMode(self.search_cost_mode))

    @property
    def mean_cost(self) -> float:
        return self.cost_dist.mean()

    def at_state(self, k: int) -> "MarketParams":
        """Same market with the cost fixed at discrete state ``k``."""
        if not isinstance(self.cost_dist, DiscreteCosts):
            raise DomainError("state restriction needs a discrete cost law")
        c = self.cost_dist.costs[k]
        return MarketParams(self.n_firms, self.valuation, self.search_cost,
                            DiscreteCosts((c,), (1.0,)), self.shopper_share,
                            self.search_cost_mode)
