"""Experiment drivers: config files, regime optimization runs, sweeps, CSV output.

A single YAML file configures everything; every key is optional and defaults
to the standard parametrization (launch-spike arrivals x_a=5, decay mix
x_gamma=0.8, engagement mix x_delta=0.5, value sigma=10, product constants
q1=1, q2=0.5, m=6, n_max=12). Output CSVs embed provenance (version, config
hash, seed) in a leading comment row and are byte-identical for identical
config + seed, regardless of worker count.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .equilibrium import best_response
from .market import IntegrationConfig, Population, expected_revenue
from .model import PriceMenu, ProductConfig, UserType
from .optimizer import DEConfig, OptResult, PricingRegime, optimize
from .oracles import OracleConfig, mdp_best_utility, simulate_population

SWEEPABLE = ("x_delta", "x_gamma", "sigma", "x_a", "x_c")

CSV_COLUMNS = (
    "sweep_param",
    "sweep_value",
    "regime",
    "revenue",
    "user_welfare",
    "overall_welfare",
    "p1_pre",
    "p1_post",
    "p2",
    "p_s",
    "relative_revenue",
)

_REGIME_ORDER = (
    PricingRegime.BUY_ONLY,
    PricingRegime.SUB_ONLY,
    PricingRegime.BOTH,
    PricingRegime.BOTH_GIVEN_BUY,
)


class ConfigError(ValueError):
    """Configuration problem, naming the offending key."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"config key '{key}': {message}")


@dataclass(frozen=True)
class VerifyConfig:
    instances: int = 200
    tolerance: float = 1e-6
    mc_pairs: int = 2
    mc_samples: int = 20_000


@dataclass(frozen=True)
class ExperimentConfig:
    product: ProductConfig = field(default_factory=ProductConfig)
    population: Population = field(default_factory=Population)
    integration: IntegrationConfig = field(default_factory=IntegrationConfig)
    de: DEConfig = field(default_factory=DEConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    prices: PriceMenu = PriceMenu(None, None, None, None)
    regimes: tuple[PricingRegime, ...] = _REGIME_ORDER
    sweep_param: str = "x_delta"
    sweep_values: tuple[float, ...] = (0.3, 0.5, 0.7, 0.9)
    seed: int = 0
    out_dir: str = "."
    workers: int = 1

    def config_hash(self) -> str:
        data = _as_jsonable(self)
        # hash only what determines the numbers: worker counts parallelize
        # identical work and out_dir is just a destination
        data.pop("workers", None)
        data.pop("out_dir", None)
        data.get("de", {}).pop("workers", None)
        blob = json.dumps(data, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _as_jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _as_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, PricingRegime):
        return obj.value
    if isinstance(obj, (tuple, list)):
        return [_as_jsonable(t) for t in obj]
    return obj


def _build_section(key: str, cls, data: dict):
    section = data.get(key, {})
    if section is None:
        section = {}
    if not isinstance(section, dict):
        raise ConfigError(key, f"expected a mapping, got {type(section).__name__}")
    allowed = {f.name for f in dataclasses.fields(cls)}
    for sub in section:
        if sub not in allowed:
            raise ConfigError(f"{key}.{sub}", f"unknown key (allowed: {sorted(allowed)})")
    try:
        return cls(**section)
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, str(exc)) from exc


def parse_config(data: dict | None) -> ExperimentConfig:
    """Validate a raw config mapping, applying the standard defaults."""
    data = dict(data or {})
    known = {"product", "population", "integration", "de", "oracle", "verify", "prices", "run", "sweep"}
    for key in data:
        if key not in known:
            raise ConfigError(key, f"unknown section (allowed: {sorted(known)})")

    product = _build_section("product", ProductConfig, data)
    population = _build_section("population", Population, data)
    integration = _build_section("integration", IntegrationConfig, data)
    de = _build_section("de", DEConfig, data)
    oracle = _build_section("oracle", OracleConfig, data)
    verify = _build_section("verify", VerifyConfig, data)

    prices_raw = data.get("prices") or {}
    menu_kwargs = {}
    for key in ("p1_pre", "p1_post", "p2", "p_s"):
        value = prices_raw.get(key)
        if isinstance(value, str):
            if value.upper() != "NA":
                raise ConfigError(f"prices.{key}", f"expected a number or 'NA', got {value!r}")
            value = None
        menu_kwargs[key] = value
    try:
        prices = PriceMenu(**menu_kwargs)
    except ValueError as exc:
        raise ConfigError("prices", str(exc)) from exc

    run = data.get("run") or {}
    regimes = run.get("regimes", [r.value for r in _REGIME_ORDER])
    try:
        regime_list = tuple(PricingRegime(r) for r in regimes)
    except ValueError as exc:
        raise ConfigError("run.regimes", f"{exc} (allowed: {[r.value for r in _REGIME_ORDER]})") from exc

    sweep = data.get("sweep") or {}
    sweep_param = sweep.get("param", "x_delta")
    if sweep_param not in SWEEPABLE:
        raise ConfigError("sweep.param", f"unknown parameter {sweep_param!r} (allowed: {SWEEPABLE})")
    sweep_values = tuple(float(v) for v in sweep.get("values", (0.3, 0.5, 0.7, 0.9)))
    if not sweep_values:
        raise ConfigError("sweep.values", "need at least one value")

    seed = run.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("run.seed", f"expected a nonnegative integer, got {seed!r}")
    workers = run.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError("run.workers", f"expected a positive integer, got {workers!r}")

    return ExperimentConfig(
        product=product,
        population=population,
        integration=integration,
        de=de,
        oracle=oracle,
        verify=verify,
        prices=prices,
        regimes=regime_list,
        sweep_param=sweep_param,
        sweep_values=sweep_values,
        seed=seed,
        out_dir=str(run.get("out_dir", ".")),
        workers=workers,
    )


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return parse_config({})
    raw = Path(path).read_text()
    try:
        data = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"not valid YAML: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError(str(path), "top level must be a mapping")
    return parse_config(data)


# ---------------------------------------------------------------------------
# Runs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    sweep_param: str
    sweep_value: float | None
    regime: PricingRegime
    revenue: float
    user_welfare: float
    overall_welfare: float
    menu: PriceMenu
    relative_revenue: float | None


def _derived_seed(base: int, *path: int) -> int:
    return int(np.random.SeedSequence((base, *path)).generate_state(1)[0])


def _optimize_point(config: ExperimentConfig, population: Population,
                    value_index: int) -> list[tuple[PricingRegime, OptResult]]:
    """Optimize every requested regime for one population (one sweep point)."""
    wanted = list(config.regimes)
    need_buy = PricingRegime.BOTH_GIVEN_BUY in wanted or PricingRegime.BUY_ONLY in wanted
    results: dict[PricingRegime, OptResult] = {}
    buy_result: OptResult | None = None
    for regime in _REGIME_ORDER:
        if regime not in wanted and not (regime is PricingRegime.BUY_ONLY and need_buy):
            continue
        de = replace(
            config.de,
            seed=_derived_seed(config.seed, value_index, _REGIME_ORDER.index(regime)),
            workers=max(config.de.workers, config.workers),
        )
        fixed = buy_result.menu if regime is PricingRegime.BOTH_GIVEN_BUY else None
        result = optimize(regime, population, config.product, config.integration, de, fixed_buy=fixed)
        if regime is PricingRegime.BUY_ONLY:
            buy_result = result
        results[regime] = result
    return [(r, results[r]) for r in _REGIME_ORDER if r in wanted and r in results]


def _rows_for_point(config: ExperimentConfig, population: Population, value_index: int,
                    sweep_param: str, sweep_value: float | None) -> list[SweepRow]:
    results = _optimize_point(config, population, value_index)
    buy_revenue = next(
        (res.report.revenue for regime, res in results if regime is PricingRegime.BUY_ONLY), None
    )
    rows = []
    for regime, res in results:
        rel = None
        if buy_revenue is not None and buy_revenue > 0:
            rel = res.report.revenue / buy_revenue
        rows.append(
            SweepRow(
                sweep_param,
                sweep_value,
                regime,
                res.report.revenue,
                res.report.user_welfare,
                res.report.overall_welfare,
                res.menu,
                rel,
            )
        )
    return rows


def run_base_case(config: ExperimentConfig) -> list[SweepRow]:
    """Optimize all requested regimes on the configured population."""
    return _rows_for_point(config, config.population, 0, "base_case", None)


def run_sweep(config: ExperimentConfig) -> list[SweepRow]:
    """One row per (sweep value, regime), optimizing prices at every point."""
    rows: list[SweepRow] = []
    for i, value in enumerate(config.sweep_values):
        try:
            population = replace(config.population, **{config.sweep_param: value})
        except ValueError as exc:
            raise ConfigError(f"sweep.values[{i}]", str(exc)) from exc
        rows.extend(_rows_for_point(config, population, i, config.sweep_param, value))
    return rows


def _fmt(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: list[SweepRow], config: ExperimentConfig) -> str:
    buf = io.StringIO()
    buf.write(f"# softprice={__version__} config_sha256={config.config_hash()} seed={config.seed}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(
            [
                row.sweep_param,
                _fmt(row.sweep_value),
                row.regime.value,
                _fmt(row.revenue),
                _fmt(row.user_welfare),
                _fmt(row.overall_welfare),
                _fmt(row.menu.p1_pre),
                _fmt(row.menu.p1_post),
                _fmt(row.menu.p2),
                _fmt(row.menu.p_s),
                _fmt(row.relative_revenue),
            ]
        )
    return buf.getvalue()


def write_csv(rows: list[SweepRow], config: ExperimentConfig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(rows_to_csv(rows, config))
    return path


# ---------------------------------------------------------------------------
# Verification runs
# ---------------------------------------------------------------------------

@dataclass
class VerificationReport:
    oracle_instances: int
    oracle_max_rel_err: float
    oracle_failures: int
    mc_pairs: int
    mc_within_band: int
    mc_max_sigma: float
    elapsed: float
    passed: bool

    def summary(self) -> str:
        lines = [
            f"oracle equivalence: {self.oracle_instances} instances, "
            f"max rel err {self.oracle_max_rel_err:.3e}, failures {self.oracle_failures}",
            f"monte carlo: {self.mc_within_band}/{self.mc_pairs} inside 3-sigma band "
            f"(max {self.mc_max_sigma:.2f} sigma)",
            f"elapsed {self.elapsed:.1f}s: {'PASS' if self.passed else 'FAIL'}",
        ]
        return "\n".join(lines)


def sample_instance(rng: np.random.Generator, cfg: ProductConfig, v_max: float = 50.0) -> tuple[UserType, PriceMenu]:
    """One random (user type, price menu) pair in the regime the model targets.

    The menu always discounts the base product at the upgrade release
    (p1_post <= p1_pre), matching how such products are actually priced, and
    every option is occasionally withheld.
    """
    n_a = int(rng.integers(1, cfg.n_max + 1))
    user = UserType(
        n_a,
        float(rng.uniform(0.25, 0.92)),
        float(rng.uniform(0.80, 0.95)),
        float(rng.uniform(0.0, v_max)),
    )
    p1_pre = float(rng.uniform(5.0, 120.0))
    p1_post = p1_pre * float(rng.uniform(0.25, 1.0))
    prices = [p1_pre, p1_post, float(rng.uniform(1.0, 100.0)), float(rng.uniform(0.5, 40.0))]
    drop = rng.random(4) < 0.15
    menu = PriceMenu(*[None if d else p for d, p in zip(drop, prices)])
    return user, menu


def sample_population(rng: np.random.Generator) -> Population:
    return Population(
        x_a=float(rng.uniform(1.0, 10.0)),
        x_gamma=float(rng.uniform(0.0, 1.0)),
        x_delta=float(rng.uniform(0.3, 0.85)),
        sigma=float(rng.uniform(5.0, 20.0)),
        x_c=float(rng.uniform(0.0, 1.0)),
    )


def sample_menu(rng: np.random.Generator) -> PriceMenu:
    p1_pre = float(rng.uniform(20.0, 120.0))
    return PriceMenu(
        p1_pre,
        p1_pre * float(rng.uniform(0.3, 1.0)),
        float(rng.uniform(5.0, 60.0)),
        float(rng.uniform(5.0, 30.0)),
    )


def run_verify(config: ExperimentConfig) -> VerificationReport:
    """Cross-check closed forms against the oracles; used by the CLI and CI."""
    t0 = time.time()
    rng = np.random.default_rng(np.random.SeedSequence((config.seed, 1)))
    cfg = config.product
    oc = config.oracle
    tol = config.verify.tolerance

    max_err = 0.0
    failures = 0
    for _ in range(config.verify.instances):
        user, menu = sample_instance(rng, cfg, config.population.v_max)
        u_opt, _, _ = mdp_best_utility(user, menu, cfg, oc)
        u_closed = best_response(user, menu, cfg).u
        err = abs(u_closed - u_opt) / max(1.0, abs(u_opt))
        max_err = max(max_err, err)
        if err > tol:
            failures += 1

    rng_mc = np.random.default_rng(np.random.SeedSequence((config.seed, 2)))
    within = 0
    max_sigma = 0.0
    for pair in range(config.verify.mc_pairs):
        population = sample_population(rng_mc)
        menu = sample_menu(rng_mc)
        analytic = expected_revenue(population, menu, cfg, config.integration).revenue
        sim = simulate_population(
            population, menu, cfg,
            OracleConfig(oc.horizon, oc.tail_tol, config.verify.mc_samples, _derived_seed(config.seed, 3, pair)),
        )
        sigma = abs(sim.revenue - analytic) / sim.revenue_se if sim.revenue_se > 0 else 0.0
        max_sigma = max(max_sigma, sigma)
        if sigma <= 3.0:
            within += 1

    passed = failures == 0 and within == config.verify.mc_pairs
    return VerificationReport(
        config.verify.instances, max_err, failures,
        config.verify.mc_pairs, within, max_sigma,
        time.time() - t0, passed,
    )


def evaluate_menu(config: ExperimentConfig) -> dict:
    """Evaluate the configured price menu without optimizing."""
    report = expected_revenue(config.population, config.prices, config.product, config.integration)
    return {
        "revenue": report.revenue,
        "user_welfare": report.user_welfare,
        "overall_welfare": report.overall_welfare,
        "class_shares": report.class_shares,
    }
