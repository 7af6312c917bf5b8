"""Seeded Monte Carlo market simulation.

Each round draws one cost realisation, one price per firm by inverse
transform of the equilibrium price law, and a batch of consumers who sample
one or two distinct firms and buy at the lowest price seen.

Rounds are grouped into fixed-size blocks; every block owns a Philox stream
keyed by ``(seed, block index)``. Blocks are reduced in index order, so the
result is bit-identical for any number of worker threads.
"""

from __future__ import annotations

import concurrent.futures
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from .model import ContinuousCosts, MarketParams, SearchCostMode
from .solver import ActiveSearch

DEFAULT_BLOCK_ROUNDS = 1 << 16


@dataclass(frozen=True)
class SimulationConfig:
    seed: int
    n_rounds: int
    consumers_per_round: int = 1
    threads: int = 1
    block_rounds: int = DEFAULT_BLOCK_ROUNDS
    track_prices: bool = True

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.n_rounds < 1 or self.consumers_per_round < 1:
            raise ValueError("n_rounds and consumers_per_round must be >= 1")
        if self.threads < 1 or self.block_rounds < 1:
            raise ValueError("threads and block_rounds must be >= 1")


@dataclass(frozen=True)
class Estimate:
    mean: float
    se: float
    n: int


@dataclass(frozen=True)
class SimulationResult:
    """Round-level estimates; standard errors are across rounds.

    Consumers within a round share the same prices, so rounds are the
    independent units.
    """

    n_rounds: int
    n_consumers: int
    n_one_search: int
    n_two_search: int
    profit: Estimate  # per firm, averaged over firms
    profit_by_firm: tuple[Estimate, ...]
    profit_by_state: tuple[Estimate, ...]
    mean_price: Estimate
    second_search_benefit: Estimate
    consumer_surplus: Estimate
    ks_distance_by_state: tuple[float, ...]


class _Moments:
    """Count, mean and centred sum of squares, merged with Chan's update."""

    __slots__ = ("n", "mean", "m2")

    def __init__(self, n=0, mean=0.0, m2=0.0):
        self.n, self.mean, self.m2 = n, mean, m2

    @classmethod
    def of(cls, x: np.ndarray) -> "_Moments":
        n = x.size
        if n == 0:
            return cls()
        mean = float(np.sum(x) / n)
        return cls(n, mean, float(np.sum((x - mean) ** 2)))

    def merge(self, other: "_Moments") -> None:
        if other.n == 0:
            return
        if self.n == 0:
            self.n, self.mean, self.m2 = other.n, other.mean, other.m2
            return
        n = self.n + other.n
        delta = other.mean - self.mean
        self.mean += delta * other.n / n
        self.m2 += other.m2 + delta * delta * self.n * other.n / n
        self.n = n

    def estimate(self) -> Estimate:
        if self.n < 2:
            return Estimate(self.mean, math.nan, self.n)
        var = self.m2 / (self.n - 1)
        return Estimate(self.mean, math.sqrt(var / self.n), self.n)


def _block_stream(seed: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(block,))
    return np.random.Generator(np.random.Philox(ss))


def _simulate_block(params: MarketParams, eq: ActiveSearch, cfg: SimulationConfig,
                    block: int, n_rounds: int) -> dict:
    rng = _block_stream(cfg.seed, block)
    n, m = params.n_firms, cfg.consumers_per_round
    v, s, lam = params.valuation, params.search_cost, params.shopper_share
    mu = eq.weight
    dist = params.cost_dist

    u_cost = rng.random(n_rounds)
    if isinstance(dist, ContinuousCosts):
        state = np.zeros(n_rounds, dtype=np.intp)
        cost = dist.sample_costs(u_cost)
    else:
        state = dist.sample(u_cost)
        cost = np.asarray(dist.costs)[state]

    # x is the survival level; price = mu (v - c) / (mu + x) + c
    x = rng.random((n_rounds, n))
    prices = mu * (v - cost)[:, None] / (mu + x) + cost[:, None]

    shopper = rng.random((n_rounds, m)) < lam
    two = shopper | (rng.random((n_rounds, m)) < eq.q)
    first = rng.integers(0, n, size=(n_rounds, m))
    second = (first + 1 + rng.integers(0, n - 1, size=(n_rounds, m))) % n
    rows = np.arange(n_rounds)[:, None]
    p1 = prices[rows, first]
    p2 = prices[rows, second]
    cheaper = np.minimum(p1, p2)
    paid = np.where(two, cheaper, p1)
    seller = np.where(two & (p2 < p1), second, first)

    spend = s * two
    if params.search_cost_mode is SearchCostMode.ALL_COSTLY:
        spend = spend + s
    margin = paid - cost[:, None]

    firm_rev = np.zeros((n_rounds, n))
    np.add.at(firm_rev, (np.broadcast_to(rows, seller.shape), seller), margin)
    firm_rev /= m

    out = {
        "two": int(np.count_nonzero(two)),
        "consumers": n_rounds * m,
        "profit": _Moments.of(firm_rev.mean(axis=1)),
        "profit_by_firm": [_Moments.of(firm_rev[:, j]) for j in range(n)],
        "price": _Moments.of(paid.mean(axis=1)),
        "benefit": _Moments.of((p1 - cheaper).mean(axis=1)),
        "cs": _Moments.of((v - paid - spend).mean(axis=1)),
        "state": state,
        "round_profit": firm_rev.mean(axis=1),
    }
    if cfg.track_prices:
        out["prices"] = prices
    return out


def simulate_market(params: MarketParams, equilibrium: ActiveSearch,
                    config: SimulationConfig) -> SimulationResult:
    """Monte Carlo run of the market at a given active-search profile.

    ``equilibrium`` need not solve the indifference condition; perturbed
    intensities are how the stability check is exercised.
    """
    n_states = 1 if isinstance(params.cost_dist, ContinuousCosts) else len(params.cost_dist.costs)
    sizes = []
    left = config.n_rounds
    while left > 0:
        sizes.append(min(config.block_rounds, left))
        left -= sizes[-1]

    def run(b):
        return _simulate_block(params, equilibrium, config, b, sizes[b])

    if config.threads == 1:
        blocks = [run(b) for b in range(len(sizes))]
    else:
        with concurrent.futures.ThreadPoolExecutor(config.threads) as pool:
            blocks = list(pool.map(run, range(len(sizes))))

    n = params.n_firms
    profit, price, benefit, cs = _Moments(), _Moments(), _Moments(), _Moments()
    by_firm = [_Moments() for _ in range(n)]
    by_state = [_Moments() for _ in range(n_states)]
    price_samples = [[] for _ in range(n_states)]
    two = consumers = 0
    for blk in blocks:
        two += blk["two"]
        consumers += blk["consumers"]
        profit.merge(blk["profit"])
        price.merge(blk["price"])
        benefit.merge(blk["benefit"])
        cs.merge(blk["cs"])
        for j in range(n):
            by_firm[j].merge(blk["profit_by_firm"][j])
        for k in range(n_states):
            mask = blk["state"] == k
            by_state[k].merge(_Moments.of(blk["round_profit"][mask]))
            if config.track_prices:
                price_samples[k].append(blk["prices"][mask].ravel())

    ks = ()
    if config.track_prices and not isinstance(params.cost_dist, ContinuousCosts):
        ks = tuple(_ks_distance(np.concatenate(samples), law)
                   for samples, law in zip(price_samples, equilibrium.price_laws))

    return SimulationResult(
        n_rounds=config.n_rounds,
        n_consumers=consumers,
        n_one_search=consumers - two,
        n_two_search=two,
        profit=profit.estimate(),
        profit_by_firm=tuple(mm.estimate() for mm in by_firm),
        profit_by_state=tuple(mm.estimate() for mm in by_state),
        mean_price=price.estimate(),
        second_search_benefit=benefit.estimate(),
        consumer_surplus=cs.estimate(),
        ks_distance_by_state=ks,
    )


def _ks_distance(samples: np.ndarray, law) -> float:
    if samples.size == 0:
        return math.nan
    lo, hi = law.support_low, law.support_high
    return float(stats.kstest(samples, lambda p: law.cdf(np.clip(p, lo, hi))).statistic)


def verify_equal_profit(params: MarketParams, price_law, grid_size: int = 1000) -> float:
    """Largest deviation of expected profit across the price support.

    Expected profit at price ``p`` is ``(captive + comparing * x(p)) (p - c)``
    with the demand shares implied by the law's weight; the reference level is
    ``(1 - lam)(1 - q)(v - c) / N``.
    """
    lam = params.shopper_share
    phi = 2.0 * lam / (1.0 - lam)
    mu = price_law.weight
    q = (1.0 - mu * phi) / (1.0 + 2.0 * mu)
    n = params.n_firms
    c, v = price_law.cost, price_law.valuation
    captive = (1.0 - lam) * (1.0 - q) / n
    comparing = ((1.0 - lam) * 2.0 * q + 2.0 * lam) / n
    p = np.linspace(price_law.support_low, v, grid_size)
    profit = (captive + comparing * price_law.ccdf(p)) * (p - c)
    reference = (1.0 - lam) * (1.0 - q) * (v - c) / n
    return float(np.max(np.abs(profit - reference)))


def verify_indifference(sim_result: SimulationResult, s: float,
                        benefit: Optional[float] = None) -> float:
    """z-score of the empirical second-search benefit against the search cost.

    ``benefit`` overrides the simulated mean (same standard error).
    """
    est = sim_result.second_search_benefit
    if not (est.se > 0.0 and math.isfinite(est.se)):
        raise ValueError("degenerate standard error; run more rounds")
    b = est.mean if benefit is None else benefit
    return (b - s) / est.se
