"""Command-line front end.

Subcommands read a YAML scenario and write JSON or CSV to stdout (or
``--out``). Diagnostics go to stderr.

Exit codes: 0 ok, 2 invalid config (or parameters outside the solver domain), 3 no active-search equilibrium
anywhere, 4 selected equilibrium missing, 5 unraveling on a continuous law.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Any, Optional

import numpy as np

from . import __version__
from .config import ConfigError, ScenarioConfig, load_config
from .model import (
    ContinuousCosts,
    DomainError,
    MarketParams,
    benefit_factor,
    shopper_benefit_factor,
    shopper_weight,
    intensity_from_weight,
)
from .simulator import SimulationConfig, simulate_market, verify_indifference
from .solver import (
    EquilibriumSet,
    Stability,
    find_q_star,
    solve_shoppers,
    thresholds,
    unravel_disclosure,
)
from .welfare import welfare_report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_ACTIVE = 3
EXIT_NO_SELECTION = 4
EXIT_CONTINUOUS = 5

SOLVE_COLUMNS = ["record", "regime", "state", "cost", "q", "stability", "s_bar",
                 "price_low", "price_high"]
WELFARE_COLUMNS = ["regime", "state", "cost", "prob", "q", "active", "consumer_surplus",
                   "firm_profit", "total_surplus", "market_power"]
UNRAVEL_COLUMNS = ["step", "state", "cost", "pool", "pool_mean_cost", "q_disclosed",
                   "q_pooled", "profit_disclosed", "profit_pooled", "disclosed"]
LONG_COLUMNS = ["name", "value"]


def _num(x) -> Optional[float]:
    x = float(x)
    return x if math.isfinite(x) else None


# ---------------------------------------------------------------------------
# output


def _csv_text(columns: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in columns})
    return buf.getvalue()


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_text(obj: Any) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _flatten(prefix: str, obj: Any, rows: list[dict]) -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, rows)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}.{i}", v, rows)
    else:
        rows.append({"name": prefix, "value": obj})


# ---------------------------------------------------------------------------
# records


def _eqset_dict(es: EquilibriumSet, costs) -> dict:
    return {
        "regime": es.regime.value,
        "state": es.state,
        "diamond": {"price": es.diamond.price, "trade": es.diamond.trade},
        "active": [
            {
                "q": a.q,
                "stability": a.stability.value,
                "price_laws": [
                    {"cost": law.cost, "weight": law.weight,
                     "price_low": law.support_low, "price_high": law.support_high}
                    for law in a.price_laws
                ],
            }
            for a in es.active
        ],
    }


def _solve_all(cfg: ScenarioConfig, params: MarketParams):
    return solve_shoppers(params, cfg.solver.tolerance)


def _any_active(unobs: EquilibriumSet, obs: list[EquilibriumSet]) -> bool:
    return bool(unobs.active) or any(e.active for e in obs)


# ---------------------------------------------------------------------------
# commands


def cmd_solve(cfg: ScenarioConfig, fmt: str, out: Optional[str]) -> int:
    params = cfg.market_params()
    costs, _ = params.cost_dist.atoms()
    th = thresholds(params)
    unobs, obs = _solve_all(cfg, params)
    if fmt == "json":
        _emit(_json_text({
            "thresholds": {"q_star": th.q_star, "s_bar": th.s_bar,
                           "s_bar_per_state": list(th.s_bar_per_state)},
            "unobserved": _eqset_dict(unobs, costs),
            "observed": [_eqset_dict(e, [costs[e.state]]) for e in obs],
        }), out)
    else:
        rows = [{"record": "threshold", "regime": "unobserved", "q": th.q_star,
                 "s_bar": th.s_bar}]
        rows += [{"record": "threshold", "regime": "observed", "state": k,
                  "cost": float(costs[k]), "q": th.q_star, "s_bar": sb}
                 for k, sb in enumerate(th.s_bar_per_state)]
        for es in [unobs] + obs:
            rows.append({"record": "diamond", "regime": es.regime.value, "state": es.state,
                         "q": 0.0, "price_low": es.diamond.price,
                         "price_high": es.diamond.price})
            for a in es.active:
                for j, law in enumerate(a.price_laws):
                    state = es.state if es.state is not None else j
                    rows.append({"record": "active", "regime": es.regime.value,
                                 "state": state, "cost": law.cost, "q": a.q,
                                 "stability": a.stability.value,
                                 "price_low": law.support_low,
                                 "price_high": law.support_high})
        _emit(_csv_text(SOLVE_COLUMNS, rows), out)
    if not _any_active(unobs, obs):
        print("no active-search equilibrium; Diamond outcome only", file=sys.stderr)
        return EXIT_NO_ACTIVE
    return EXIT_OK


def benefit_table(params: MarketParams, grid: int) -> tuple[list[str], list[dict]]:
    """Benefit of a second search against ``q``: pooled and per cost state.

    The grid spans [0, 1] inclusive and always contains the peak intensity.
    """
    if grid < 3:
        raise ConfigError("--grid must be at least 3")
    costs, probs = params.cost_dist.atoms()
    v, lam = params.valuation, params.shopper_share
    q_star = find_q_star()
    if lam == 0.0:
        peak = q_star
    else:
        peak = float(intensity_from_weight((1.0 - q_star) / (2.0 * q_star), lam))
    qs = np.linspace(0.0, 1.0, grid)
    if 0.0 < peak < 1.0:
        qs = np.unique(np.append(qs, peak))
    factor = np.zeros_like(qs)
    inner = (qs > 0.0) & (qs < 1.0)
    if lam == 0.0:
        factor[inner] = benefit_factor(qs[inner])
    else:
        factor[inner] = shopper_benefit_factor(shopper_weight(qs[inner], lam))
        factor[qs == 0.0] = shopper_benefit_factor((1.0 - lam) / (2.0 * lam))
    columns = ["q", "pooled"] + [f"state_{k}" for k in range(len(costs))] + ["search_cost"]
    rows = []
    for q, a in zip(qs, factor):
        row = {"q": float(q)}
        per_state = [float(a * (v - c)) for c in costs]
        row["pooled"] = float(a * (v - params.mean_cost))
        for k, b in enumerate(per_state):
            row[f"state_{k}"] = b
        row["search_cost"] = params.search_cost
        rows.append(row)
    return columns, rows


def cmd_sweep_benefit(cfg: ScenarioConfig, fmt: str, out: Optional[str], grid: int) -> int:
    params = cfg.market_params()
    columns, rows = benefit_table(params, grid)
    if fmt == "json":
        _emit(_json_text({"columns": columns, "rows": rows}), out)
    else:
        _emit(_csv_text(columns, rows), out)
    unobs, obs = _solve_all(cfg, params)
    if not _any_active(unobs, obs):
        print("no active-search equilibrium; Diamond outcome only", file=sys.stderr)
        return EXIT_NO_ACTIVE
    return EXIT_OK


def _welfare_dict(rep) -> dict:
    def summary(s):
        return {"q": s.q, "consumer_surplus": s.consumer_surplus,
                "firm_profit": s.firm_profit, "total_surplus": s.total_surplus,
                "market_power": _num(s.market_power)}

    def state(st):
        return {"state": st.state, "cost": st.cost, "prob": st.prob, "q": st.q,
                "active": st.active, "consumer_surplus": st.consumer_surplus,
                "firm_profit": st.firm_profit, "total_surplus": st.total_surplus,
                "market_power": _num(st.market_power)}

    return {
        "regime_class": rep.regime_class.value,
        "unobserved": summary(rep.unobserved),
        "unobserved_states": [state(s) for s in rep.unobserved_states],
        "observed": summary(rep.observed),
        "observed_states": [state(s) for s in rep.observed_states],
        "orderings": [{"name": o.name, "unobserved": o.unobserved, "observed": o.observed,
                       "gap": o.gap, "asymmetry_direction": o.asymmetry_direction}
                      for o in rep.orderings],
        "asymmetry_favours_consumers": rep.asymmetry_favours_consumers,
        "disclosure_favours_consumers": rep.disclosure_favours_consumers,
    }


def cmd_welfare(cfg: ScenarioConfig, fmt: str, out: Optional[str]) -> int:
    params = cfg.market_params()
    if params.shopper_share != 0.0:
        raise ConfigError("welfare reports need shopper_share = 0")
    rep = welfare_report(params, cfg.solver.tolerance)
    data = _welfare_dict(rep)
    if fmt == "json":
        _emit(_json_text(data), out)
    else:
        rows = []
        for regime, summ, states in (("unobserved", data["unobserved"], data["unobserved_states"]),
                                     ("observed", data["observed"], data["observed_states"])):
            for st in states:
                rows.append({"regime": regime, **st})
            rows.append({"regime": regime, "state": "expected", "active": None, **{
                k: v for k, v in summ.items()}})
        text = _csv_text(WELFARE_COLUMNS, rows)
        long_rows: list[dict] = []
        _flatten("", {"regime_class": data["regime_class"],
                      "orderings": {o["name"]: {"gap": o["gap"],
                                                "asymmetry_direction": o["asymmetry_direction"]}
                                    for o in data["orderings"]},
                      "asymmetry_favours_consumers": data["asymmetry_favours_consumers"],
                      "disclosure_favours_consumers": data["disclosure_favours_consumers"]},
                 long_rows)
        _emit(text + "\n" + _csv_text(LONG_COLUMNS, long_rows), out)
    if rep.regime_class.value == "no_active_anywhere":
        print("no active-search equilibrium; Diamond outcome only", file=sys.stderr)
        return EXIT_NO_ACTIVE
    return EXIT_OK


def cmd_simulate(cfg: ScenarioConfig, fmt: str, out: Optional[str]) -> int:
    if cfg.simulation is None:
        raise ConfigError("simulate needs a 'simulation' section")
    sim = cfg.simulation
    params = cfg.market_params()
    unobs, obs = _solve_all(cfg, params)
    if sim.regime == "unobserved":
        es, run_params = unobs, params
    else:
        if isinstance(params.cost_dist, ContinuousCosts):
            raise ConfigError("observed-regime simulation needs a discrete cost law")
        if sim.state is None or not 0 <= sim.state < len(obs):
            raise ConfigError("simulation.state must name a cost state for the observed regime")
        es, run_params = obs[sim.state], params.at_state(sim.state)
    chosen = es.stable if sim.root == "stable" else es.unstable
    if chosen is None:
        print(f"no {sim.root} active-search equilibrium in the selected regime",
              file=sys.stderr)
        return EXIT_NO_SELECTION
    res = simulate_market(run_params, chosen, SimulationConfig(
        sim.seed, sim.n_rounds, sim.consumers_per_round, sim.threads))
    try:
        z = verify_indifference(res, params.search_cost)
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        z = None
    lam = params.shopper_share
    mean_c = run_params.mean_cost
    v = params.valuation
    analytic_profit = (1.0 - lam) * (1.0 - chosen.q) * (v - mean_c) / params.n_firms

    def est(e):
        return {"mean": e.mean, "se": _num(e.se), "n": e.n}

    data = {
        "equilibrium": {"regime": sim.regime, "state": sim.state, "q": chosen.q,
                        "stability": chosen.stability.value,
                        "flag": "unstable" if chosen.stability is Stability.UNSTABLE else ""},
        "seed": sim.seed,
        "n_rounds": res.n_rounds,
        "n_consumers": res.n_consumers,
        "n_one_search": res.n_one_search,
        "n_two_search": res.n_two_search,
        "profit": est(res.profit),
        "profit_analytic": analytic_profit,
        "profit_by_firm": [est(e) for e in res.profit_by_firm],
        "profit_by_state": [est(e) for e in res.profit_by_state],
        "mean_price": est(res.mean_price),
        "second_search_benefit": est(res.second_search_benefit),
        "consumer_surplus": est(res.consumer_surplus),
        "ks_distance_by_state": [_num(d) for d in res.ks_distance_by_state],
        "indifference_z": _num(z) if z is not None else None,
    }
    if fmt == "json":
        _emit(_json_text(data), out)
    else:
        rows: list[dict] = []
        _flatten("", data, rows)
        _emit(_csv_text(LONG_COLUMNS, rows), out)
    return EXIT_OK


def cmd_unravel(cfg: ScenarioConfig, fmt: str, out: Optional[str]) -> int:
    params = cfg.market_params()
    if isinstance(params.cost_dist, ContinuousCosts):
        print("unraveling needs a discrete cost distribution", file=sys.stderr)
        return EXIT_CONTINUOUS
    try:
        res = unravel_disclosure(params, cfg.solver.tolerance)
    except DomainError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_NO_ACTIVE
    steps = [{"step": i, "state": st.state, "cost": st.cost,
              "pool": " ".join(str(j) for j in st.pool),
              "pool_mean_cost": st.pool_mean_cost, "q_disclosed": st.q_disclosed,
              "q_pooled": st.q_pooled, "profit_disclosed": st.profit_disclosed,
              "profit_pooled": st.profit_pooled, "disclosed": st.disclosed}
             for i, st in enumerate(res.steps)]
    if fmt == "json":
        for s in steps:
            s["pool"] = [int(j) for j in s["pool"].split()]
        _emit(_json_text({"steps": steps, "undisclosed": list(res.undisclosed)}), out)
    else:
        _emit(_csv_text(UNRAVEL_COLUMNS, steps), out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bjsearch",
        description="Search-equilibrium solver and market simulator with cost uncertainty.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "sweep-benefit", "welfare", "simulate", "unravel"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML scenario file")
        p.add_argument("--out", help="write output here instead of stdout")
        p.add_argument("--format", choices=["csv", "json"], help="override output.format")
        if name == "simulate":
            p.add_argument("--seed", type=int, help="override simulation.seed")
        if name == "sweep-benefit":
            p.add_argument("--grid", type=int, default=101, help="number of q grid points")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if getattr(args, "seed", None) is not None:
            if cfg.simulation is None:
                raise ConfigError("--seed given but config has no simulation section")
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg.simulation.seed = args.seed
        fmt = args.format or cfg.output.format
        out = args.out or cfg.output.path
        if args.command == "solve":
            return cmd_solve(cfg, fmt, out)
        if args.command == "sweep-benefit":
            return cmd_sweep_benefit(cfg, fmt, out, args.grid)
        if args.command == "welfare":
            return cmd_welfare(cfg, fmt, out)
        if args.command == "simulate":
            return cmd_simulate(cfg, fmt, out)
        return cmd_unravel(cfg, fmt, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        # valid parameters the solvers cannot handle, e.g. free search
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
