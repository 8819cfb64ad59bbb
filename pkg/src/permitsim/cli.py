"""Command-line entry point: ``permitsim adopt | montecarlo | market``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .adoption import AdoptionTrajectory, BudgetExceeded, run_adoption
from .config import ConfigError, ModelParams, Tech, load_config, reference_scenario, validate_options
from .market import SolverError, clear_market
from .risk import LEVELS, empirical_cdf_pdf, risk_report_json
from .simulate import monte_carlo

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_BUDGET = 0, 2, 3, 4


def _pg_label(pg: float) -> str:
    return f"{pg:g}"


def _parse_sweep(text: str | None) -> list[float] | None:
    if text is None:
        return None
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--pg-sweep: cannot parse {text!r}") from None


def _load(args: argparse.Namespace) -> ModelParams:
    params = load_config(args.config) if args.config else reference_scenario()
    changes = {}
    for flag in ("mode", "matching", "risk_convention"):
        value = getattr(args, flag, None)
        if value is not None:
            changes[flag] = value
    if changes:
        params = params.with_options(**changes)
        problems = validate_options(params.options)
        if problems:
            raise ConfigError("; ".join(problems), problems)
    return params


def _price_levels(params: ModelParams, sweep: list[float] | None) -> list[float]:
    levels = sweep if sweep is not None else [0.0, params.policy.price_support]
    out = []
    for pg in levels:
        if not 0.0 <= pg < params.policy.penalty:
            raise ConfigError(f"price support {pg} outside [0, penalty)")
        if pg not in out:
            out.append(pg)
    return out


def _write_rows(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x: float | None) -> str:
    if x is None:
        return "never"
    return repr(float(x))


def _write_manifest(out: Path, command: str, params: ModelParams, seed: int | None, files: list[str],
                    started: float) -> None:
    manifest = {
        "command": command,
        "config_hash": params.config_hash(),
        "engine_version": __version__,
        "outputs": sorted(files),
        "seed": seed,
        "timing_seconds": round(time.perf_counter() - started, 3),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_adopt(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    params = _load(args)
    levels = _price_levels(params, _parse_sweep(args.pg_sweep))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trajectories: dict[float, AdoptionTrajectory] = {}
    files = []
    for pg in levels:
        traj = run_adoption(params.with_price_support(pg))
        trajectories[pg] = traj
        name = f"trajectory_pg{_pg_label(pg)}.csv"
        traj.to_csv(out / name)
        files.append(name)
    labels = [f"pg_{_pg_label(pg)}" for pg in levels]
    _write_rows(out / "adoption_times.csv", ["firm", *labels],
                ([i, *(_fmt(trajectories[pg].adoption_times[i]) for pg in levels)] for i in range(params.m)))
    _write_rows(out / "adopters.csv", ["period", *labels],
                ([t, *(trajectories[pg].adopters(t) for pg in levels)] for t in range(params.T)))
    _write_rows(out / "expected_prices.csv", ["period", *labels],
                ([t, *(repr(trajectories[pg].expected_prices[t]) for pg in levels)] for t in range(params.T)))
    files += ["adoption_times.csv", "adopters.csv", "expected_prices.csv"]
    _write_manifest(out, "adopt", params, None, files, started)
    for pg in levels:
        print(f"P_g={_pg_label(pg)}: adopters per period {trajectories[pg].cumulative_adopters}")
    return EXIT_OK


def cmd_montecarlo(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    params = _load(args)
    if args.paths < 1:
        raise ConfigError("--paths must be at least 1")
    sweep = _parse_sweep(args.pg_sweep)
    levels = sweep if sweep is not None else [params.policy.price_support]
    levels = _price_levels(params, levels)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for pg in levels:
        p = params.with_price_support(pg)
        ens = monte_carlo(p, args.paths, args.seed, workers=args.workers)
        tag = _pg_label(pg)
        ens.to_csv(out / f"nets_pg{tag}.csv")
        table = empirical_cdf_pdf(ens.nets, bins=args.bins)
        _write_rows(out / f"cdf_pg{tag}.csv", ["value", "cdf"],
                    ([repr(v), repr(c)] for v, c in zip(table["support"], table["cdf"])))
        edges = table["bin_edges"]
        _write_rows(out / f"pdf_pg{tag}.csv", ["bin_left", "bin_right", "density"],
                    ([repr(edges[k]), repr(edges[k + 1]), repr(d)] for k, d in enumerate(table["density"])))
        (out / f"risk_pg{tag}.json").write_text(risk_report_json(ens.nets, LEVELS), encoding="utf-8")
        (out / f"summary_pg{tag}.json").write_text(ens.summary_json(), encoding="utf-8")
        files += [f"{kind}_pg{tag}.{ext}" for kind, ext in
                  (("nets", "csv"), ("cdf", "csv"), ("pdf", "csv"), ("risk", "json"), ("summary", "json"))]
        s = ens.summary()
        print(f"P_g={tag}: mean net {s['mean']:.4f}, min {s['min']:.4f}, max {s['max']:.4f}")
    _write_manifest(out, "montecarlo", params, args.seed, files, started)
    return EXIT_OK


def read_positions(path: str | Path) -> tuple[list[str], np.ndarray, list[Tech]]:
    """Parse ``id,position,tech`` lines; ``#`` starts a comment; negative position = seller."""
    ids, pos, techs = [], [], []
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) == 2:
            parts.append("old")
        if len(parts) != 3:
            raise ConfigError(f"{path}: line {lineno}: expected 'id,position[,tech]'")
        try:
            x = float(parts[1])
            tech = Tech(parts[2].lower())
        except ValueError:
            raise ConfigError(f"{path}: line {lineno}: bad position or tech in {raw.strip()!r}") from None
        if not np.isfinite(x):
            raise ConfigError(f"{path}: line {lineno}: position must be finite")
        ids.append(parts[0])
        pos.append(x)
        techs.append(tech)
    if not ids:
        raise ConfigError(f"{path}: no positions found")
    return ids, np.array(pos), techs


def cmd_market(args: argparse.Namespace) -> int:
    if not (args.penalty > 0 and 0 <= args.price_support < args.penalty):
        raise ConfigError("need penalty > 0 and 0 <= price_support < penalty")
    ids, x, techs = read_positions(args.positions)
    rng = np.random.default_rng(args.seed) if args.matching == "stochastic" else None
    out = clear_market(x, techs, args.penalty, args.price_support, np.zeros(len(x)), rng)
    if out.demand <= 0:
        status = "no demand"
    elif out.supply <= 0:
        status = "no supply"
    else:
        status = "equilibrium"
    report = {
        "status": status,
        "penalty": args.penalty,
        "price_support": args.price_support,
        "price": None if np.isnan(out.price) else out.price,
        "demand": out.demand,
        "supply": out.supply,
        "total_submitted": out.total_submitted,
        "firms": [
            {
                "id": ids[k],
                "position": float(x[k]),
                "tech": techs[k].value,
                "side": "seller" if x[k] < 0 else "buyer",
                "submitted": float(out.submissions[k]),
                "executed": float(out.executed[k]),
                "uncovered": float(out.uncovered[k]),
                "cashed": float(out.cashed[k]),
                "payoff": float(out.payoffs[k]),
            }
            for k in range(len(ids))
        ],
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="permitsim", description="Transferable-permits market simulator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON configuration (default: built-in reference scenario)")
        p.add_argument("--pg-sweep", help="comma-separated price-support levels, e.g. 1.5,2.5,3.5,4.5")
        p.add_argument("--mode", choices=("expected", "conditional"))
        p.add_argument("--matching", choices=("proportional", "stochastic"))
        p.add_argument("--risk-convention", dest="risk_convention", choices=("standard", "raw"))
        p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("adopt", help="adoption trajectories with and without price support")
    common(p)
    p.set_defaults(func=cmd_adopt)

    p = sub.add_parser("montecarlo", help="Monte Carlo ensemble and risk report")
    common(p)
    p.add_argument("--paths", type=int, default=2000)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("market", help="solve one exchange period from a positions file")
    p.add_argument("positions", help="file of 'id,position,tech' lines (negative position = seller)")
    p.add_argument("--penalty", type=float, default=10.0)
    p.add_argument("--price-support", dest="price_support", type=float, default=0.0)
    p.add_argument("--matching", choices=("proportional", "stochastic"), default="proportional")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_market)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
