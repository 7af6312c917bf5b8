"""Equilibrium sets, search-cost thresholds and the disclosure iteration.

Active-search intensities solve ``A(q) * surplus = s`` where ``A`` is the
hump-shaped :func:`~bjsearch.model.benefit_factor`. The hump peaks at a
cost-independent ``q*``, so each side of the peak is monotone and the two
roots are found by bisection on ``[eps, q*]`` and ``[q*, 1 - eps]``.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy import optimize

from .model import (
    ContinuousCosts,
    DiscreteCosts,
    DomainError,
    MarketParams,
    PriceLaw,
    SearchCostMode,
    benefit_factor,
    benefit_factor_deriv,
    cs_factor,
    intensity_from_weight,
    shopper_benefit_factor,
)

ENDPOINT_EPS = 1e-12
TANGENCY_RTOL = 1e-9
DEFAULT_XTOL = 1e-14


class Stability(str, enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"


class Regime(str, enum.Enum):
    UNOBSERVED = "unobserved"
    OBSERVED = "observed"


class Root(NamedTuple):
    q: float
    stability: Stability


@dataclass(frozen=True)
class DiamondOutcome:
    """Everyone samples one firm and pays ``v``; no trade if every search costs."""

    price: float
    trade: bool


@dataclass(frozen=True)
class ActiveSearch:
    q: float
    stability: Stability
    price_laws: tuple[PriceLaw, ...]
    shopper_share: float = 0.0

    @property
    def weight(self) -> float:
        return self.price_laws[0].weight


@dataclass(frozen=True)
class EquilibriumSet:
    regime: Regime
    state: Optional[int]
    diamond: DiamondOutcome
    active: tuple[ActiveSearch, ...]

    @property
    def stable(self) -> Optional[ActiveSearch]:
        for eq in self.active:
            if eq.stability is Stability.STABLE:
                return eq
        return None

    @property
    def unstable(self) -> Optional[ActiveSearch]:
        for eq in self.active:
            if eq.stability is Stability.UNSTABLE:
                return eq
        return None


@dataclass(frozen=True)
class Thresholds:
    q_star: float
    s_bar_per_state: tuple[float, ...]
    s_bar: float


# ---------------------------------------------------------------------------
# thresholds


@functools.lru_cache(maxsize=None)
def find_q_star() -> float:
    """Unique maximiser of the benefit factor on (0, 1)."""
    return optimize.bisect(benefit_factor_deriv, 1e-3, 1.0 - 1e-9,
                           xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def peak_benefit() -> float:
    return benefit_factor(find_q_star())


def thresholds(params: MarketParams) -> Thresholds:
    """Largest search costs that still support active search, per state and pooled."""
    costs, probs = params.cost_dist.atoms()
    peak = peak_benefit()
    per_state = tuple(float(x) for x in (params.valuation - costs) * peak)
    s_bar = (params.valuation - params.mean_cost) * peak
    return Thresholds(find_q_star(), per_state, s_bar)


# ---------------------------------------------------------------------------
# root finding


def _bisect(fn, lo: float, hi: float, xtol: float) -> float:
    return optimize.bisect(fn, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps,
                           maxiter=500)


def solve_active(effective_surplus: float, s: float,
                 xtol: float = DEFAULT_XTOL) -> tuple[Root, ...]:
    """Search intensities with ``benefit_factor(q) * effective_surplus == s``.

    Returns zero, one (tangency, within a relative ``1e-9`` of the peak) or
    two roots in ascending ``q``. The larger root is stable.
    """
    if not effective_surplus > 0.0:
        raise DomainError("effective surplus must be positive")
    if not s > 0.0:
        raise DomainError("search cost must be positive for active search")
    q_star = find_q_star()
    target = s / effective_surplus
    peak = peak_benefit()
    if target > peak * (1.0 + TANGENCY_RTOL):
        return ()
    if abs(target - peak) <= peak * TANGENCY_RTOL:
        return (Root(q_star, Stability.STABLE),)

    def gap(q):
        return benefit_factor(q) - target

    roots = []
    lo, hi = ENDPOINT_EPS, 1.0 - ENDPOINT_EPS
    if gap(lo) < 0.0:
        roots.append(Root(_bisect(gap, lo, q_star, xtol), Stability.UNSTABLE))
    if gap(hi) < 0.0:
        roots.append(Root(_bisect(gap, q_star, hi, xtol), Stability.STABLE))
    return tuple(roots)


def _diamond(params: MarketParams) -> DiamondOutcome:
    return DiamondOutcome(params.valuation,
                          params.search_cost_mode is SearchCostMode.FIRST_FREE)


def _require_no_shoppers(params: MarketParams) -> None:
    if params.shopper_share != 0.0:
        raise DomainError("use solve_shoppers when shopper_share > 0")


def _active_records(roots, costs, v, shopper_share=0.0) -> tuple[ActiveSearch, ...]:
    return tuple(
        ActiveSearch(r.q, r.stability,
                     tuple(PriceLaw.from_intensity(r.q, float(c), v, shopper_share)
                           for c in costs),
                     shopper_share)
        for r in roots)


def solve_unobserved(params: MarketParams, xtol: float = DEFAULT_XTOL) -> EquilibriumSet:
    """Equilibria when consumers know only the cost distribution.

    Only ``E[c]`` enters the consumer indifference condition; every cost
    state then gets its own price law sharing the same ``q``.
    """
    _require_no_shoppers(params)
    costs, _ = params.cost_dist.atoms()
    v = params.valuation
    roots = solve_active(v - params.mean_cost, params.search_cost, xtol)
    return EquilibriumSet(Regime.UNOBSERVED, None, _diamond(params),
                          _active_records(roots, costs, v))


def solve_observed(params: MarketParams, xtol: float = DEFAULT_XTOL) -> list[EquilibriumSet]:
    """One equilibrium set per cost state (per quadrature node if continuous)."""
    _require_no_shoppers(params)
    costs, _ = params.cost_dist.atoms()
    v = params.valuation
    out = []
    for k, c in enumerate(costs):
        roots = solve_active(v - c, params.search_cost, xtol)
        out.append(EquilibriumSet(Regime.OBSERVED, k, _diamond(params),
                                  _active_records(roots, [c], v)))
    return out


def stable_intensity(effective_surplus: float, s: float,
                     xtol: float = DEFAULT_XTOL) -> Optional[float]:
    for r in solve_active(effective_surplus, s, xtol):
        if r.stability is Stability.STABLE:
            return r.q
    return None


# ---------------------------------------------------------------------------
# shoppers


def _solve_weight_roots(surplus: float, s: float, shopper_share: float,
                        xtol: float) -> tuple[Root, ...]:
    """Roots of ``G(mu) * surplus = s`` for mu in (0, mu_max), mapped back to q.

    ``G`` peaks at the weight of ``q*``; small weights mean large ``q``, so
    the branch below the peak is the stable one.
    """
    if not surplus > 0.0 or not s > 0.0:
        raise DomainError("surplus and search cost must be positive")
    lam = shopper_share
    mu_max = (1.0 - lam) / (2.0 * lam)  # weight at q = 0
    q_star = find_q_star()
    mu_peak = (1.0 - q_star) / (2.0 * q_star)
    target = s / surplus

    def gap(mu):
        return shopper_benefit_factor(mu) - target

    mu_lo = ENDPOINT_EPS
    mu_top = min(mu_peak, mu_max)
    roots = []
    if gap(mu_top) >= 0.0 and gap(mu_lo) < 0.0:
        mu = mu_top if gap(mu_top) == 0.0 else _bisect(gap, mu_lo, mu_top, xtol * 1e-2)
        roots.append(Root(float(intensity_from_weight(mu, lam)), Stability.STABLE))
    if mu_max > mu_peak and gap(mu_peak) > 0.0 and gap(mu_max) < 0.0:
        mu = _bisect(gap, mu_peak, mu_max, xtol * max(1.0, mu_peak))
        q = float(intensity_from_weight(mu, lam))
        if q > 0.0:
            roots.append(Root(q, Stability.UNSTABLE))
    return tuple(sorted(roots, key=lambda r: r.q))


def solve_shoppers(params: MarketParams, xtol: float = DEFAULT_XTOL
                   ) -> tuple[EquilibriumSet, list[EquilibriumSet]]:
    """Equilibria with a share of consumers that always compares two prices.

    Returns the unobserved-cost equilibrium set and the per-state observed
    list. With ``shopper_share = 0`` this matches the base solvers.
    """
    lam = params.shopper_share
    if lam == 0.0:
        return solve_unobserved(params, xtol), solve_observed(params, xtol)
    costs, _ = params.cost_dist.atoms()
    v, s = params.valuation, params.search_cost
    roots = _solve_weight_roots(v - params.mean_cost, s, lam, xtol)
    unobserved = EquilibriumSet(Regime.UNOBSERVED, None, _diamond(params),
                                _active_records(roots, costs, v, lam))
    observed = []
    for k, c in enumerate(costs):
        r = _solve_weight_roots(v - c, s, lam, xtol)
        observed.append(EquilibriumSet(Regime.OBSERVED, k, _diamond(params),
                                       _active_records(r, [c], v, lam)))
    return unobserved, observed


def active_search_at(params: MarketParams, q: float,
                     stability: Stability = Stability.STABLE) -> ActiveSearch:
    """Price laws induced by an arbitrary intensity, equilibrium or not."""
    costs, _ = params.cost_dist.atoms()
    return _active_records([Root(q, stability)], costs, params.valuation,
                           params.shopper_share)[0]


# ---------------------------------------------------------------------------
# participation


class Participation(NamedTuple):
    participates: bool
    payoff: float


def participation_check(q: float, effective_surplus: float, s: float,
                        mode: SearchCostMode | str) -> Participation:
    """Expected payoff of searching at intensity ``q`` versus staying out.

    Under ``all_costly`` the first quote also costs ``s``.
    """
    mode = SearchCostMode(mode)
    payoff = cs_factor(q) * effective_surplus
    if mode is SearchCostMode.ALL_COSTLY:
        payoff -= s
        return Participation(payoff >= 0.0, payoff)
    return Participation(True, payoff)


def participation_margin(eta):
    """``(1+2eta)/(2eta(1+eta)) - ln(1 + 1/eta)``: non-negative for eta > 0.

    At ``eta* = (1 - q*) / (2 q*)`` the scaled value ``2 eta*^2`` times the
    margin equals the peak benefit factor.
    """
    e = np.asarray(eta, dtype=float)
    if np.any(e <= 0.0):
        raise DomainError("eta must be positive")
    val = (1.0 + 2.0 * e) / (2.0 * e * (1.0 + e)) - np.log1p(1.0 / e)
    return float(val) if np.ndim(eta) == 0 else val


# ---------------------------------------------------------------------------
# disclosure


@dataclass(frozen=True)
class DisclosureStep:
    state: int
    cost: float
    pool: tuple[int, ...]
    pool_mean_cost: float
    q_disclosed: float
    q_pooled: float
    profit_disclosed: float
    profit_pooled: float
    disclosed: bool


@dataclass(frozen=True)
class DisclosureResult:
    steps: tuple[DisclosureStep, ...]
    undisclosed: tuple[int, ...]


def unravel_disclosure(params: MarketParams, xtol: float = DEFAULT_XTOL) -> DisclosureResult:
    """Iterated disclosure starting from the highest undisclosed cost.

    A state leaves the pool when revealing its cost earns weakly more than
    being pooled. Pooled consumers search as if the cost were the
    conditional mean of the states still in the pool.
    """
    dist = params.cost_dist
    if not isinstance(dist, DiscreteCosts):
        raise DomainError("disclosure unraveling needs a discrete cost law")
    _require_no_shoppers(params)
    v, s, n = params.valuation, params.search_cost, params.n_firms
    if s > thresholds(params).s_bar_per_state[-1] * (1.0 + TANGENCY_RTOL):
        raise DomainError("every cost state needs active search (s <= s_bar_K)")

    pool = list(range(len(dist.costs)))
    steps = []
    while len(pool) > 1:
        k = pool[-1]
        c = dist.costs[k]
        weights = [dist.probs[j] for j in pool]
        pool_mean = math.fsum(dist.probs[j] * dist.costs[j] for j in pool) / math.fsum(weights)
        q_disc = stable_intensity(v - c, s, xtol)
        q_pool = stable_intensity(v - pool_mean, s, xtol)
        prof_disc = (1.0 - q_disc) * (v - c) / n
        prof_pool = (1.0 - q_pool) * (v - c) / n
        disclosed = prof_disc >= prof_pool
        steps.append(DisclosureStep(k, c, tuple(pool), pool_mean, q_disc, q_pool,
                                    prof_disc, prof_pool, disclosed))
        if not disclosed:
            break
        pool.pop()
    return DisclosureResult(tuple(steps), tuple(pool))


def is_continuous(params: MarketParams) -> bool:
    return isinstance(params.cost_dist, ContinuousCosts)
