import numpy as np
import pytest

from softprice.market import IntegrationConfig, Population, expected_revenue
from softprice.model import PriceMenu, ProductConfig
from softprice.optimizer import (
    DEConfig,
    PricingRegime,
    differential_evolution,
    menu_from_vector,
    optimize,
    regime_bounds,
    regime_dimension,
)

CFG = ProductConfig()

FAST_DE = DEConfig(population_size=20, generations=60, restarts=3, stall_generations=25,
                   search_v_nodes=101, seed=5)


def test_de_finds_quadratic_maximum():
    res = differential_evolution(lambda x: -(x[0] - 3.0) ** 2, [(0.0, 10.0)],
                                 DEConfig(population_size=20, generations=120, restarts=3, seed=1))
    assert res.x[0] == pytest.approx(3.0, abs=1e-3)
    assert res.value == pytest.approx(0.0, abs=1e-6)


def test_de_constant_objective_returns_feasible_point():
    res = differential_evolution(lambda x: 7.5, [(2.0, 4.0)], DEConfig(population_size=10, generations=5, restarts=2, seed=3))
    assert res.value == 7.5
    assert 2.0 <= res.x[0] <= 4.0


def test_de_deterministic_given_seed():
    def f(x):
        return -np.sum((x - 1.7) ** 2) + np.sin(5 * x).sum()

    de = DEConfig(population_size=15, generations=40, restarts=3, seed=42)
    r1 = differential_evolution(f, [(-4, 4), (-4, 4)], de)
    r2 = differential_evolution(f, [(-4, 4), (-4, 4)], de)
    assert np.array_equal(r1.x, r2.x) and r1.value == r2.value


def test_de_discards_non_finite_candidates():
    def f(x):
        return np.nan if x[0] > 5.0 else float(x[0])

    with pytest.warns(UserWarning):
        res = differential_evolution(f, [(0.0, 10.0)], DEConfig(population_size=12, generations=30, restarts=2, seed=7))
    assert res.x[0] <= 5.0
    assert res.value == pytest.approx(5.0, abs=1e-2)


def test_de_multimodal_needs_restarts():
    # two widely separated peaks; best-of-restarts should land on the higher one
    def f(x):
        return max(np.exp(-((x[0] - 1.0) / 0.05) ** 2), 1.2 * np.exp(-((x[0] - 9.0) / 0.05) ** 2))

    res = differential_evolution(f, [(0.0, 10.0)], DEConfig(population_size=15, generations=150, restarts=8, seed=11))
    assert res.x[0] == pytest.approx(9.0, abs=0.01)


def test_regime_dimensions_and_bounds():
    de = DEConfig()
    assert [regime_dimension(r) for r in PricingRegime] == [3, 1, 4, 1]
    for regime in PricingRegime:
        assert len(regime_bounds(regime, de)) == regime_dimension(regime)


def test_menu_from_vector_respects_regime():
    assert menu_from_vector(PricingRegime.BUY_ONLY, [10, 20, 30]) == PriceMenu(10.0, 20.0, 30.0, None)
    assert menu_from_vector(PricingRegime.SUB_ONLY, [7]) == PriceMenu(None, None, None, 7.0)
    fixed = PriceMenu(10.0, 20.0, 30.0, None)
    got = menu_from_vector(PricingRegime.BOTH_GIVEN_BUY, [9], fixed)
    assert got == PriceMenu(10.0, 20.0, 30.0, 9.0)
    with pytest.raises(ValueError):
        menu_from_vector(PricingRegime.BOTH_GIVEN_BUY, [9])


@pytest.fixture(scope="module")
def small_regime_results():
    # tiny population grid (single arrival spike dominates) for cheap optimization
    pop = Population(x_a=5.0)
    cfg = ProductConfig(n_max=4, m=3)
    ic = IntegrationConfig(201)
    results = {}
    buy = optimize(PricingRegime.BUY_ONLY, pop, cfg, ic, FAST_DE)
    results[PricingRegime.BUY_ONLY] = buy
    results[PricingRegime.SUB_ONLY] = optimize(PricingRegime.SUB_ONLY, pop, cfg, ic, FAST_DE)
    results[PricingRegime.BOTH] = optimize(PricingRegime.BOTH, pop, cfg, ic, FAST_DE)
    results[PricingRegime.BOTH_GIVEN_BUY] = optimize(
        PricingRegime.BOTH_GIVEN_BUY, pop, cfg, ic, FAST_DE, fixed_buy=buy.menu)
    return pop, cfg, ic, results


def test_regime_nesting_invariants(small_regime_results):
    pop, cfg, ic, res = small_regime_results
    noise = 5e-3
    both = res[PricingRegime.BOTH].report.revenue
    buy = res[PricingRegime.BUY_ONLY].report.revenue
    sub = res[PricingRegime.SUB_ONLY].report.revenue
    given = res[PricingRegime.BOTH_GIVEN_BUY].report.revenue
    assert both >= max(buy, sub) - noise
    assert given >= buy - 1e-9  # falls back to disabling the subscription


def test_given_buy_is_pareto_improvement_for_users(small_regime_results):
    from softprice.equilibrium import best_response
    from softprice.model import UserType

    pop, cfg, ic, res = small_regime_results
    buy_menu = res[PricingRegime.BUY_ONLY].menu
    given_menu = res[PricingRegime.BOTH_GIVEN_BUY].menu
    arrivals, _ = pop.arrival_support(cfg)
    deltas, _ = pop.delta_support()
    gammas, _ = pop.gamma_support()
    for na in arrivals:
        for dl in deltas:
            for gm in gammas:
                for v in np.linspace(0.0, 50.0, 21):
                    user = UserType(int(na), float(dl), float(gm), float(v))
                    assert best_response(user, given_menu, cfg).u >= best_response(user, buy_menu, cfg).u - 1e-9


def test_optimize_reports_match_menu(small_regime_results):
    pop, cfg, ic, res = small_regime_results
    for regime, r in res.items():
        again = expected_revenue(pop, r.menu, cfg, ic)
        assert again.revenue == pytest.approx(r.report.revenue, abs=1e-12)
        assert len(r.restart_values) == FAST_DE.restarts
        assert all(np.isfinite(v) for v in r.restart_values)
        assert r.evaluations > 0


def test_optimize_parallel_workers_match_sequential():
    pop = Population()
    cfg = ProductConfig(n_max=3, m=2)
    ic = IntegrationConfig(101)
    de_seq = DEConfig(population_size=12, generations=25, restarts=2, stall_generations=20,
                      search_v_nodes=101, seed=9, workers=1)
    de_par = DEConfig(population_size=12, generations=25, restarts=2, stall_generations=20,
                      search_v_nodes=101, seed=9, workers=2)
    r_seq = optimize(PricingRegime.SUB_ONLY, pop, cfg, ic, de_seq)
    r_par = optimize(PricingRegime.SUB_ONLY, pop, cfg, ic, de_par)
    assert r_seq.menu == r_par.menu
    assert r_seq.report.revenue == r_par.report.revenue
    assert r_seq.restart_values == r_par.restart_values
