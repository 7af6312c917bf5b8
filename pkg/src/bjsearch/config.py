"""Scenario files: YAML with ``market``, ``solver``, ``simulation``, ``output``.

Unknown keys are rejected so that typos fail loudly.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .model import (
    DEFAULT_QUADRATURE_NODES,
    ContinuousCosts,
    DiscreteCosts,
    DomainError,
    MarketParams,
    SearchCostMode,
)


class ConfigError(ValueError):
    pass


@dataclass
class CostSpec:
    kind: str = "discrete"  # discrete | uniform | tabulated
    values: Optional[list[float]] = None
    probs: Optional[list[float]] = None
    lower: Optional[float] = None
    upper: Optional[float] = None
    levels: Optional[list[float]] = None


@dataclass
class MarketSection:
    n_firms: int
    valuation: float
    search_cost: float
    costs: CostSpec
    shopper_share: float = 0.0
    search_cost_mode: str = SearchCostMode.FIRST_FREE.value


@dataclass
class SolverSection:
    tolerance: float = 1e-14
    quadrature_nodes: int = DEFAULT_QUADRATURE_NODES


@dataclass
class SimulationSection:
    seed: int = 0
    n_rounds: int = 100_000
    consumers_per_round: int = 1
    threads: int = 1
    regime: str = "unobserved"  # unobserved | observed
    root: str = "stable"  # stable | unstable
    state: Optional[int] = None


@dataclass
class OutputSection:
    format: str = "json"
    path: Optional[str] = None


@dataclass
class ScenarioConfig:
    market: MarketSection
    solver: SolverSection = field(default_factory=SolverSection)
    simulation: Optional[SimulationSection] = None
    output: OutputSection = field(default_factory=OutputSection)

    def market_params(self) -> MarketParams:
        m = self.market
        try:
            return MarketParams(m.n_firms, m.valuation, m.search_cost,
                                _build_costs(m.costs, self.solver.quadrature_nodes),
                                m.shopper_share, SearchCostMode(m.search_cost_mode))
        except (DomainError, ValueError, TypeError) as exc:
            raise ConfigError(f"market: {exc}") from exc

    def to_dict(self) -> dict[str, Any]:
        return _strip_none(dataclasses.asdict(self))


def _strip_none(obj):
    if isinstance(obj, dict):
        return {k: _strip_none(v) for k, v in obj.items() if v is not None}
    return obj


def _build_costs(spec: CostSpec, nodes: int):
    if spec.kind == "discrete":
        if spec.values is None or spec.probs is None:
            raise ConfigError("discrete costs need 'values' and 'probs'")
        return DiscreteCosts(tuple(spec.values), tuple(spec.probs))
    if spec.kind == "uniform":
        if spec.lower is None or spec.upper is None:
            raise ConfigError("uniform costs need 'lower' and 'upper'")
        return ContinuousCosts.uniform(spec.lower, spec.upper, nodes)
    if spec.kind == "tabulated":
        if spec.levels is None or spec.values is None:
            raise ConfigError("tabulated costs need 'levels' and 'values'")
        return ContinuousCosts.tabulated(spec.levels, spec.values, nodes)
    raise ConfigError(f"unknown cost kind {spec.kind!r}")


_FLOAT_KEYS = {"valuation", "search_cost", "shopper_share", "tolerance", "lower", "upper"}
_FLOAT_LIST_KEYS = {"values", "probs", "levels"}


def _to_float(value, key):
    # YAML 1.1 reads 1e-14 (no dot) as a string
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"{key} must be a number, got {value!r}") from None
    return value


def _section(cls, raw, where: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected a mapping")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(raw) - set(names)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    kwargs = {}
    for key, value in raw.items():
        if key == "costs":
            value = _section(CostSpec, value, f"{where}.costs")
        elif key in _FLOAT_KEYS:
            value = _to_float(value, f"{where}.{key}")
        elif key in _FLOAT_LIST_KEYS and isinstance(value, list):
            value = [_to_float(x, f"{where}.{key}") for x in value]
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _check_types(cfg: ScenarioConfig) -> None:
    m = cfg.market
    if isinstance(m.n_firms, bool) or not isinstance(m.n_firms, int):
        raise ConfigError("market.n_firms must be an integer")
    for name in ("valuation", "search_cost", "shopper_share"):
        if not isinstance(getattr(m, name), (int, float)):
            raise ConfigError(f"market.{name} must be a number")
    if m.search_cost_mode not in {e.value for e in SearchCostMode}:
        raise ConfigError("market.search_cost_mode must be first_free or all_costly")
    tol = cfg.solver.tolerance
    if not isinstance(tol, (int, float)) or not 0.0 < tol <= 1e-3:
        raise ConfigError("solver.tolerance must lie in (0, 1e-3]")
    nodes = cfg.solver.quadrature_nodes
    if not isinstance(nodes, int) or nodes < 2:
        raise ConfigError("solver.quadrature_nodes must be an integer >= 2")
    if cfg.output.format not in ("csv", "json"):
        raise ConfigError("output.format must be csv or json")
    sim = cfg.simulation
    if sim is not None:
        if sim.regime not in ("unobserved", "observed"):
            raise ConfigError("simulation.regime must be unobserved or observed")
        if sim.root not in ("stable", "unstable"):
            raise ConfigError("simulation.root must be stable or unstable")
        for name in ("seed", "n_rounds", "consumers_per_round", "threads"):
            if not isinstance(getattr(sim, name), int):
                raise ConfigError(f"simulation.{name} must be an integer")
        if not 0 <= sim.seed < 2**64:
            raise ConfigError("simulation.seed must be an unsigned 64-bit integer")
        if sim.n_rounds < 1 or sim.consumers_per_round < 1 or sim.threads < 1:
            raise ConfigError("simulation counts must be >= 1")


def parse_config(raw: Any) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(raw) - {"market", "solver", "simulation", "output"}
    if unknown:
        raise ConfigError(f"unknown section(s) {sorted(unknown)}")
    if "market" not in raw:
        raise ConfigError("missing 'market' section")
    cfg = ScenarioConfig(
        market=_section(MarketSection, raw["market"], "market"),
        solver=_section(SolverSection, raw.get("solver", {}), "solver"),
        simulation=(_section(SimulationSection, raw["simulation"], "simulation")
                    if raw.get("simulation") is not None else None),
        output=_section(OutputSection, raw.get("output", {}), "output"),
    )
    _check_types(cfg)
    cfg.market_params()  # full model validation
    return cfg


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    return parse_config(raw)


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
