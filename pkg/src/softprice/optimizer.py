"""Differential-evolution search over the price vector.

The revenue surface has many local maxima (price changes help some user
types and hurt others), so each regime is optimized with classic rand/1/bin
differential evolution restarted from independent seeds, keeping the best
restart. Everything is deterministic given the seed; restarts are
independent and may run in parallel processes without changing the result.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .market import IntegrationConfig, MarketReport, Population, expected_revenue
from .model import PriceMenu, ProductConfig

DEFAULT_BUY_BOUNDS = (0.0, 200.0)
DEFAULT_SUB_BOUNDS = (0.0, 60.0)


class PricingRegime(Enum):
    """Which menu options the publisher offers (and which prices are free)."""

    BUY_ONLY = "BuyOnly"
    SUB_ONLY = "SubOnly"
    BOTH = "Both"
    BOTH_GIVEN_BUY = "BothGivenBuy"


@dataclass(frozen=True)
class DEConfig:
    """Search hyperparameters.

    ``population_size=None`` means 15 per dimension (at least 15). The search
    runs on a coarsened value grid (``search_v_nodes``) for speed; the
    winning menu is re-evaluated on the full grid. Early stopping kicks in
    after ``stall_generations`` generations without a relative improvement of
    ``stall_tol``.
    """

    population_size: int | None = None
    mutation: float = 0.8
    crossover: float = 0.9
    generations: int = 300
    restarts: int = 15
    stall_generations: int = 60
    stall_tol: float = 1e-6
    seed: int = 0
    search_v_nodes: int = 201
    workers: int = 1
    buy_bounds: tuple[float, float] = DEFAULT_BUY_BOUNDS
    sub_bounds: tuple[float, float] = DEFAULT_SUB_BOUNDS

    def __post_init__(self) -> None:
        if self.restarts < 1:
            raise ValueError(f"restarts must be >= 1, got {self.restarts}")
        for lo, hi in (self.buy_bounds, self.sub_bounds):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError(f"bounds must be finite and ordered, got ({lo}, {hi})")


@dataclass
class DEResult:
    x: np.ndarray
    value: float
    history: list[float]
    evaluations: int


@dataclass
class OptResult:
    """Winning menu plus the full-resolution market report for it."""

    regime: PricingRegime
    menu: PriceMenu
    report: MarketReport
    restart_values: list[float] = field(default_factory=list)
    evaluations: int = 0


def _de_single(objective: Callable[[np.ndarray], float], bounds: Sequence[tuple[float, float]],
               de: DEConfig, seed_key: tuple[int, int]) -> DEResult:
    """One maximization run of rand/1/bin differential evolution."""
    dim = len(bounds)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    pop_size = de.population_size or max(15, 15 * dim)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed_key)))

    def safe_eval(x: np.ndarray) -> float:
        val = objective(x)
        if not np.isfinite(val):
            warnings.warn(f"discarding non-finite objective value {val!r} at {x!r}", stacklevel=2)
            return -np.inf
        return val

    pop = lo + rng.random((pop_size, dim)) * (hi - lo)
    fitness = np.array([safe_eval(x) for x in pop])
    evals = pop_size
    history = [float(fitness.max())]
    best = history[0]
    stall = 0
    for _ in range(de.generations):
        for i in range(pop_size):
            idx = rng.choice(pop_size - 1, size=3, replace=False)
            idx[idx >= i] += 1
            mutant = pop[idx[0]] + de.mutation * (pop[idx[1]] - pop[idx[2]])
            cross = rng.random(dim) < de.crossover
            cross[rng.integers(dim)] = True
            trial = np.clip(np.where(cross, mutant, pop[i]), lo, hi)
            f_trial = safe_eval(trial)
            evals += 1
            if f_trial >= fitness[i]:
                pop[i], fitness[i] = trial, f_trial
        gen_best = float(fitness.max())
        history.append(gen_best)
        if gen_best - best <= de.stall_tol * max(1.0, abs(best)):
            stall += 1
            if stall >= de.stall_generations:
                best = max(best, gen_best)
                break
        else:
            stall = 0
        best = max(best, gen_best)
    j = int(fitness.argmax())
    return DEResult(pop[j].copy(), float(fitness[j]), history, evals)


def differential_evolution(objective: Callable[[np.ndarray], float],
                           bounds: Sequence[tuple[float, float]],
                           de: DEConfig) -> DEResult:
    """Best-of-restarts rand/1/bin DE maximization within ``bounds``."""
    best: DEResult | None = None
    restart_values = []
    evals = 0
    for k in range(de.restarts):
        res = _de_single(objective, bounds, de, (de.seed, k))
        restart_values.append(res.value)
        evals += res.evaluations
        if best is None or res.value > best.value:
            best = res
    best.evaluations = evals
    best.history = restart_values
    return best


# ---------------------------------------------------------------------------
# Regime-level optimization
# ---------------------------------------------------------------------------

def regime_dimension(regime: PricingRegime) -> int:
    return {
        PricingRegime.BUY_ONLY: 3,
        PricingRegime.SUB_ONLY: 1,
        PricingRegime.BOTH: 4,
        PricingRegime.BOTH_GIVEN_BUY: 1,
    }[regime]


def menu_from_vector(regime: PricingRegime, x: Sequence[float], fixed_buy: PriceMenu | None = None) -> PriceMenu:
    """Decode a DE candidate into a price menu for ``regime``."""
    x = [float(t) for t in x]
    if regime is PricingRegime.BUY_ONLY:
        return PriceMenu(x[0], x[1], x[2], None)
    if regime is PricingRegime.SUB_ONLY:
        return PriceMenu(None, None, None, x[0])
    if regime is PricingRegime.BOTH:
        return PriceMenu(x[0], x[1], x[2], x[3])
    if fixed_buy is None:
        raise ValueError("BothGivenBuy needs the frozen buy menu")
    return PriceMenu(fixed_buy.p1_pre, fixed_buy.p1_post, fixed_buy.p2, x[0])


def regime_bounds(regime: PricingRegime, de: DEConfig) -> list[tuple[float, float]]:
    buy, sub = de.buy_bounds, de.sub_bounds
    return {
        PricingRegime.BUY_ONLY: [buy, buy, buy],
        PricingRegime.SUB_ONLY: [sub],
        PricingRegime.BOTH: [buy, buy, buy, sub],
        PricingRegime.BOTH_GIVEN_BUY: [sub],
    }[regime]


def _run_restart(args) -> DEResult:
    regime, pop_, cfg, ic_search, de, fixed_buy, k = args
    objective = _make_objective(regime, pop_, cfg, ic_search, fixed_buy)
    return _de_single(objective, regime_bounds(regime, de), de, (de.seed, k))


def _make_objective(regime, pop_, cfg, ic_search, fixed_buy):
    def objective(x: np.ndarray) -> float:
        menu = menu_from_vector(regime, x, fixed_buy)
        return expected_revenue(pop_, menu, cfg, ic_search).revenue

    return objective


def optimize(regime: PricingRegime, pop: Population, cfg: ProductConfig,
             ic: IntegrationConfig, de: DEConfig,
             fixed_buy: PriceMenu | None = None) -> OptResult:
    """Maximize expected revenue over the regime's free prices.

    For ``BOTH_GIVEN_BUY``, if even the best subscription add-on earns less
    than the frozen buy menu alone, the subscription is dropped (offering it
    is optional, so the buy-only revenue is always attainable).
    """
    if regime is PricingRegime.BOTH_GIVEN_BUY and fixed_buy is None:
        raise ValueError("BothGivenBuy needs the frozen buy menu")
    ic_search = replace(ic, v_nodes=min(ic.v_nodes, de.search_v_nodes))
    tasks = [(regime, pop, cfg, ic_search, de, fixed_buy, k) for k in range(de.restarts)]
    if de.workers > 1 and de.restarts > 1:
        with ProcessPoolExecutor(max_workers=min(de.workers, de.restarts)) as ex:
            results = list(ex.map(_run_restart, tasks))
    else:
        results = [_run_restart(t) for t in tasks]

    evals = sum(r.evaluations for r in results)
    restart_values = [r.value for r in results]
    best = results[int(np.argmax(restart_values))]
    menu = menu_from_vector(regime, best.x, fixed_buy)
    report = expected_revenue(pop, menu, cfg, ic)

    if regime is PricingRegime.BOTH_GIVEN_BUY:
        baseline_menu = PriceMenu(fixed_buy.p1_pre, fixed_buy.p1_post, fixed_buy.p2, None)
        baseline = expected_revenue(pop, baseline_menu, cfg, ic)
        if baseline.revenue > report.revenue:
            menu, report = baseline_menu, baseline

    return OptResult(regime, menu, report, restart_values, evals)
