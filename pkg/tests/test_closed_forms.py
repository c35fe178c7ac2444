"""Closed-form building blocks against step-by-step reference summation."""

import math

import numpy as np
import pytest

from reference import sum_kappa, sum_rho_sub, sum_w_post, sum_w_pre
from softprice.equilibrium import kappa, rho_sub, w_post, w_pre
from softprice.model import ProductConfig, UserType


def test_rho_sub_examples():
    assert rho_sub(3, 3, 0.5, 10.0) == 0.0
    assert rho_sub(1, 3, 0.5, 10.0) == pytest.approx(15.0)
    assert rho_sub(1, 6, 1e-9, 10.0) == pytest.approx(10.0, rel=1e-8)


def test_kappa_examples():
    assert kappa(4, 4, 0.31) == 1.0
    assert kappa(1, 3, 0.5) == pytest.approx(0.625)
    assert kappa(1, 5, 0.999999) == pytest.approx(1.0, abs=1e-5)


def test_w_pre_examples():
    cfg = ProductConfig(m=3)
    owner = UserType(1, 0.5, 0.9, 1.0)
    assert w_pre(1, 1, 1, owner, cfg) == pytest.approx(1.45)
    assert w_pre(1, 3, 0, owner, cfg) == pytest.approx(1.45)
    assert w_pre(1, 1, 0, owner, cfg) == 0.0


def test_w_post_examples():
    cfg = ProductConfig()
    user = UserType(1, 0.5, 0.9, 1.0)
    assert w_post(6, 6, (0, 0), user, cfg) == 0.0
    expected = (cfg.q1 * 0.9**5 + cfg.q2) / (1.0 - 0.9 * 0.5)
    assert w_post(6, 6, (1, 1), user, cfg) == pytest.approx(expected)


def test_w_post_infinite_subscription_limit():
    cfg = ProductConfig()
    user = UserType(1, 0.6, 0.9, 1.0)
    closed = w_post(6, math.inf, (0, 0), user, cfg)
    assert closed == pytest.approx(sum_w_post(6, math.inf, (0, 0), 0.6, 0.9, cfg), abs=1e-10)


def test_closed_forms_match_summation_on_random_grid():
    rng = np.random.default_rng(2024)
    for cfg in (ProductConfig(), ProductConfig(base_release=0), ProductConfig(m=3, n_max=8)):
        for _ in range(400):
            delta = float(rng.uniform(0.05, 0.97))
            gamma = float(rng.uniform(0.5, 0.97))
            user = UserType(1, delta, gamma, 1.0)
            n_from = int(rng.integers(1, cfg.m + 1))
            n_mid = int(rng.integers(n_from, cfg.m + 1))
            p_s = float(rng.uniform(0.0, 40.0))
            own = int(rng.integers(0, 2))

            assert rho_sub(n_from, n_mid, delta, p_s) == pytest.approx(
                sum_rho_sub(n_from, n_mid, delta, p_s), abs=1e-10)
            assert kappa(n_from, n_mid, delta) == pytest.approx(
                sum_kappa(n_from, n_mid, delta), abs=1e-12)
            assert w_pre(n_from, n_mid, own, user, cfg) == pytest.approx(
                sum_w_pre(n_from, n_mid, own, delta, gamma, cfg), abs=1e-10)

            start = cfg.m + int(rng.integers(0, 4))
            stop = start + int(rng.integers(0, 30))
            o = (int(rng.integers(0, 2)), int(rng.integers(0, 2)))
            assert w_post(start, stop, o, user, cfg) == pytest.approx(
                sum_w_post(start, stop, o, delta, gamma, cfg), abs=1e-10)


def test_w_post_ownership_tail_carries_survival_factor():
    # A user subscribing for k timesteps only keeps using what he owns with
    # probability delta**k; dropping that factor would overstate the reward.
    cfg = ProductConfig()
    user = UserType(1, 0.5, 0.9, 1.0)
    exact = w_post(6, 10, (1, 0), user, cfg)
    assert exact == pytest.approx(sum_w_post(6, 10, (1, 0), 0.5, 0.9, cfg), abs=1e-12)
    sub_part = w_post(6, 10, (0, 0), user, cfg)
    tail_no_survival = sub_part + (cfg.q1 * 0.9 ** (10 - 1)) / (1.0 - 0.45)
    assert exact < tail_no_survival - 0.3


def test_interval_validation():
    cfg = ProductConfig()
    user = UserType(1, 0.5, 0.9, 1.0)
    with pytest.raises(ValueError):
        rho_sub(5, 4, 0.5, 10.0)
    with pytest.raises(ValueError):
        kappa(5, 4, 0.5)
    with pytest.raises(ValueError):
        w_pre(2, 8, 1, user, cfg)
    with pytest.raises(ValueError):
        w_post(4, 10, (1, 1), user, cfg)
