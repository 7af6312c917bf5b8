"""Welfare accounting and the observed-versus-unobserved comparison.

Intensity ``q = 0`` denotes the Diamond outcome throughout: one search,
price ``v``, or no trade at all when every search is costly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .model import (
    DomainError,
    MarketParams,
    SearchCostMode,
    cs_factor,
    market_power,
)
from .solver import DEFAULT_XTOL, solve_observed, solve_unobserved


def _check_q(q: float) -> None:
    if not 0.0 <= q < 1.0:
        raise DomainError("q must be 0 (Diamond) or an active intensity in (0, 1)")


def consumer_surplus(q: float, c: float, v: float, s: float,
                     mode: SearchCostMode | str = SearchCostMode.FIRST_FREE) -> float:
    """Ex-interim consumer surplus at intensity ``q``.

    Active search: ``cs_factor(q) * (v - c)``, less ``s`` when the first
    search is also paid for. This form uses the consumer indifference
    condition, so it is exact only at equilibrium intensities.
    """
    _check_q(q)
    if q == 0.0:
        return 0.0
    cs = cs_factor(q) * (v - c)
    if SearchCostMode(mode) is SearchCostMode.ALL_COSTLY:
        cs -= s
    return cs


def firm_profit(q: float, c: float, v: float, n_firms: int,
                mode: SearchCostMode | str = SearchCostMode.FIRST_FREE) -> float:
    _check_q(q)
    if q == 0.0 and SearchCostMode(mode) is SearchCostMode.ALL_COSTLY:
        return 0.0
    return (1.0 - q) * (v - c) / n_firms


def total_surplus(q: float, c: float, v: float, s: float,
                  mode: SearchCostMode | str = SearchCostMode.FIRST_FREE) -> float:
    """Gains from trade net of everything spent on search."""
    _check_q(q)
    all_costly = SearchCostMode(mode) is SearchCostMode.ALL_COSTLY
    if q == 0.0:
        return 0.0 if all_costly else v - c
    searches = (1.0 + q) if all_costly else q
    return v - c - searches * s


class RegimeClass(str, enum.Enum):
    BOTH_ACTIVE = "both_active"
    # some observed states Diamond-only while the pooled regime is active
    PARTIAL = "partial"
    ASYMMETRY_DIAMOND_ONLY = "asymmetry_diamond_only"
    NO_ACTIVE_ANYWHERE = "no_active_anywhere"


@dataclass(frozen=True)
class StateOutcome:
    state: int
    cost: float
    prob: float
    q: float
    active: bool
    consumer_surplus: float
    firm_profit: float
    total_surplus: float
    market_power: float


@dataclass(frozen=True)
class RegimeSummary:
    q: float
    consumer_surplus: float
    firm_profit: float
    total_surplus: float
    market_power: float


@dataclass(frozen=True)
class Ordering:
    """One welfare comparison; ``gap`` is unobserved minus observed.

    ``asymmetry_direction`` is true when the gap has the sign under which
    hiding the cost favours consumers (more search, more consumer surplus,
    less profit, less total surplus).
    """

    name: str
    unobserved: float
    observed: float
    gap: float
    asymmetry_direction: bool


@dataclass(frozen=True)
class WelfareReport:
    unobserved: RegimeSummary
    unobserved_states: tuple[StateOutcome, ...]
    observed: RegimeSummary
    observed_states: tuple[StateOutcome, ...]
    orderings: tuple[Ordering, ...]
    regime_class: RegimeClass

    def ordering(self, name: str) -> Ordering:
        for o in self.orderings:
            if o.name == name:
                return o
        raise KeyError(name)

    @property
    def asymmetry_favours_consumers(self) -> bool:
        """All four comparisons strictly in the hidden-cost direction."""
        return all(o.asymmetry_direction for o in self.orderings)

    @property
    def disclosure_favours_consumers(self) -> bool:
        """All four comparisons strictly reversed."""
        signs = {"search": -1, "consumer_surplus": -1, "firm_profit": 1, "total_surplus": 1}
        return all(o.gap * signs[o.name] > 0.0 for o in self.orderings)


def _outcome(k, c, f, q, active, params) -> StateOutcome:
    v, s, n, mode = (params.valuation, params.search_cost, params.n_firms,
                     params.search_cost_mode)
    return StateOutcome(
        k, c, f, q, active,
        consumer_surplus(q, c, v, s, mode),
        firm_profit(q, c, v, n, mode),
        total_surplus(q, c, v, s, mode),
        market_power(q) if active else math.inf,
    )


def _expect(states, attr) -> float:
    return math.fsum(st.prob * getattr(st, attr) for st in states)


def welfare_report(params: MarketParams, xtol: float = DEFAULT_XTOL) -> WelfareReport:
    """Compare stable equilibria with hidden and with observed cost.

    Where a regime has no active-search equilibrium its Diamond outcome is
    used, state by state for the observed regime.
    """
    costs, probs = params.cost_dist.atoms()
    v, s, n, mode = (params.valuation, params.search_cost, params.n_firms,
                     params.search_cost_mode)
    mean_c = params.mean_cost

    unobs = solve_unobserved(params, xtol).stable
    q_u = unobs.q if unobs is not None else 0.0
    u_active = unobs is not None
    unobserved_states = tuple(
        _outcome(k, float(c), float(f), q_u, u_active, params)
        for k, (c, f) in enumerate(zip(costs, probs)))
    # pooled quantities are linear in the cost, so evaluate them at E[c]
    unobserved = RegimeSummary(
        q_u,
        consumer_surplus(q_u, mean_c, v, s, mode),
        firm_profit(q_u, mean_c, v, n, mode),
        total_surplus(q_u, mean_c, v, s, mode),
        market_power(q_u) if u_active else math.inf,
    )

    observed_states = []
    for k, (eqs, c, f) in enumerate(zip(solve_observed(params, xtol), costs, probs)):
        st = eqs.stable
        q = st.q if st is not None else 0.0
        observed_states.append(_outcome(k, float(c), float(f), q, st is not None, params))
    observed_states = tuple(observed_states)
    e_q = _expect(observed_states, "q")
    observed = RegimeSummary(
        e_q,
        _expect(observed_states, "consumer_surplus"),
        _expect(observed_states, "firm_profit"),
        _expect(observed_states, "total_surplus"),
        _expect(observed_states, "market_power"),
    )

    def order(name, attr, direction):
        a, b = getattr(unobserved, attr), getattr(observed, attr)
        return Ordering(name, a, b, a - b, (a - b) * direction > 0.0)

    orderings = (
        order("search", "q", 1),
        order("consumer_surplus", "consumer_surplus", 1),
        order("firm_profit", "firm_profit", -1),
        order("total_surplus", "total_surplus", -1),
    )

    n_active = sum(st.active for st in observed_states)
    if u_active:
        cls = (RegimeClass.BOTH_ACTIVE if n_active == len(observed_states)
               else RegimeClass.PARTIAL)
    else:
        cls = (RegimeClass.ASYMMETRY_DIAMOND_ONLY if n_active
               else RegimeClass.NO_ACTIVE_ANYWHERE)
    return WelfareReport(unobserved, unobserved_states, observed, observed_states,
                         orderings, cls)
