"""Command-line front end.

Subcommands: ``base-case`` (optimize all regimes, Table-style CSV),
``sweep`` (comparative statics over one population parameter), ``optimize``
(selected regimes only), ``evaluate`` (price a fixed menu), ``verify``
(closed-form vs oracle cross-checks).

Exit codes: 0 success, 2 config error, 3 verification failure, 4 numerical
non-convergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .experiments import (
    ConfigError,
    ExperimentConfig,
    evaluate_menu,
    load_config,
    run_base_case,
    run_sweep,
    run_verify,
    write_csv,
    SWEEPABLE,
)
from .market import QuadratureError, check_quadrature
from .optimizer import PricingRegime

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFY = 3
EXIT_NUMERIC = 4


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="YAML config file")
    parser.add_argument("--seed", type=int, default=None, help="override run.seed")
    parser.add_argument("--out", type=Path, default=None, help="override run.out_dir")
    parser.add_argument("--workers", type=int, default=None, help="parallel restart workers")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="softprice", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("base-case", help="optimize every regime on the configured population")
    _add_common(p)
    p.add_argument("--regimes", type=str, default=None, help="comma-separated regime list")

    p = sub.add_parser("sweep", help="comparative statics over one population parameter")
    _add_common(p)
    p.add_argument("--param", type=str, default=None, choices=SWEEPABLE)
    p.add_argument("--values", type=str, default=None, help="comma-separated values")
    p.add_argument("--regimes", type=str, default=None)

    p = sub.add_parser("optimize", help="optimize selected regimes only")
    _add_common(p)
    p.add_argument("--regimes", type=str, default=None)

    p = sub.add_parser("evaluate", help="evaluate the configured price menu without optimizing")
    _add_common(p)
    p.add_argument("--check-quadrature", action="store_true", help="grid-doubling convergence check")

    p = sub.add_parser("verify", help="run the oracle-equivalence and Monte Carlo suites")
    _add_common(p)

    return parser


def _apply_overrides(config: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out is not None:
        updates["out_dir"] = str(args.out)
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("run.workers", f"expected a positive integer, got {args.workers}")
        updates["workers"] = args.workers
    if getattr(args, "regimes", None):
        try:
            updates["regimes"] = tuple(PricingRegime(r.strip()) for r in args.regimes.split(","))
        except ValueError as exc:
            raise ConfigError("run.regimes", str(exc)) from exc
    if getattr(args, "param", None):
        updates["sweep_param"] = args.param
    if getattr(args, "values", None):
        try:
            updates["sweep_values"] = tuple(float(v) for v in args.values.split(","))
        except ValueError as exc:
            raise ConfigError("sweep.values", str(exc)) from exc
    return dataclasses.replace(config, **updates) if updates else config


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _apply_overrides(load_config(args.config), args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(config.out_dir)
    try:
        if args.command in ("base-case", "optimize"):
            rows = run_base_case(config)
            name = "base_case.csv" if args.command == "base-case" else "optimize.csv"
            path = write_csv(rows, config, out_dir / name)
            for row in rows:
                print(
                    f"{row.regime.value:14s} revenue={row.revenue:8.3f} "
                    f"user_welfare={row.user_welfare:8.3f} overall={row.overall_welfare:8.3f}"
                )
            print(f"wrote {path}")
        elif args.command == "sweep":
            rows = run_sweep(config)
            path = write_csv(rows, config, out_dir / f"sweep_{config.sweep_param}.csv")
            print(f"wrote {path} ({len(rows)} rows)")
        elif args.command == "evaluate":
            if args.check_quadrature:
                check_quadrature(config.population, config.prices, config.product, config.integration)
            result = evaluate_menu(config)
            for key in ("revenue", "user_welfare", "overall_welfare"):
                print(f"{key} = {result[key]:.6f}")
            shares = ", ".join(f"{k}={v:.4f}" for k, v in result["class_shares"].items())
            print(f"class shares: {shares}")
        elif args.command == "verify":
            report = run_verify(config)
            print(report.summary())
            if not report.passed:
                return EXIT_VERIFY
    except QuadratureError as exc:
        print(f"error: quadrature did not converge: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
