"""Type distributions and the publisher's expected revenue per user.

Revenue is the expectation of the best-response payment over the four type
coordinates: a discrete arrival distribution (a mass spike at launch), a
three-point quality-decay distribution, a two-point engagement distribution
and a truncated-normal value distribution whose mean can be tied to the
engagement factor. The value integral uses composite Simpson quadrature on a
uniform grid; everything else is an exact finite sum.

The hot path (`expected_revenue` inside the price optimizer) evaluates the
closed-form strategy classes for all grid cells at once with numpy. It is an
algebraic transcription of :mod:`softprice.equilibrium` and is pinned to it
by tests.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .equilibrium import CLASS_PRIORITY
from .model import PriceMenu, ProductConfig

_GAMMA_SUPPORT = (0.85, 0.90, 0.95)
_POW_TABLE_SIZE = 2048


class QuadratureError(RuntimeError):
    """Raised when doubling the value grid still moves the revenue estimate."""


@dataclass(frozen=True)
class Population:
    """Parametrized type distribution.

    ``x_a`` multiplies the launch-timestep arrival mass, ``x_gamma`` is the
    probability of the central decay factor 0.9, ``x_delta`` the short-term
    engagement value held with probability 0.8 (long-term 0.9 with 0.2), and
    ``x_c`` in [0, 1] shifts the value mean of highly engaged users downward:
    mean = mu * ((1 - x_c) + x_c * (1 - delta)).
    """

    x_a: float = 5.0
    x_gamma: float = 0.8
    x_delta: float = 0.5
    mu: float = 25.0
    sigma: float = 10.0
    v_max: float = 50.0
    x_c: float = 0.0

    def __post_init__(self) -> None:
        if not self.x_a > 0:
            raise ValueError(f"x_a must be > 0, got {self.x_a}")
        if not 0.0 <= self.x_gamma <= 1.0:
            raise ValueError(f"x_gamma must be in [0, 1], got {self.x_gamma}")
        if not 0.0 < self.x_delta < 1.0:
            raise ValueError(f"x_delta must be in (0, 1), got {self.x_delta}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not (self.v_max > 0 and math.isfinite(self.v_max)):
            raise ValueError(f"v_max must be positive and finite, got {self.v_max}")
        if not 0.0 <= self.x_c <= 1.0:
            raise ValueError(f"x_c must be in [0, 1], got {self.x_c}")

    def arrival_support(self, cfg: ProductConfig) -> tuple[np.ndarray, np.ndarray]:
        return np.arange(1, cfg.n_max + 1), arrival_pmf(self.x_a, cfg.n_max)

    def gamma_support(self) -> tuple[np.ndarray, np.ndarray]:
        probs = np.array([(1 - self.x_gamma) / 2, self.x_gamma, (1 - self.x_gamma) / 2])
        keep = probs > 0
        return np.asarray(_GAMMA_SUPPORT)[keep], probs[keep]

    def delta_support(self) -> tuple[np.ndarray, np.ndarray]:
        if self.x_delta == 0.9:
            return np.array([0.9]), np.array([1.0])
        return np.array([self.x_delta, 0.9]), np.array([0.8, 0.2])

    def value_mean(self, delta: float) -> float:
        return self.mu * ((1.0 - self.x_c) + self.x_c * (1.0 - delta))


@dataclass(frozen=True)
class IntegrationConfig:
    """Value-integral grid size and the grid-doubling convergence criterion."""

    v_nodes: int = 2001
    refinement: float = 1e-3

    def __post_init__(self) -> None:
        if self.v_nodes < 3 or self.v_nodes % 2 == 0:
            raise ValueError(f"v_nodes must be odd and >= 3, got {self.v_nodes}")
        if not self.refinement > 0:
            raise ValueError(f"refinement must be > 0, got {self.refinement}")


@dataclass(frozen=True)
class MarketReport:
    """Per-user expectations for one price menu (money units)."""

    revenue: float
    user_welfare: float
    overall_welfare: float
    class_shares: dict[str, float]
    arrival_class_shares: dict[int, dict[str, float]]


def arrival_pmf(x_a: float, n_max: int) -> np.ndarray:
    """Arrival pmf over {1..n_max}: mass ``x_a : 1 : ... : 1``.

    The launch timestep attracts ``x_a`` times the mass of each later one;
    the support includes ``n_max`` so the pmf normalizes.
    """
    if not x_a > 0:
        raise ValueError(f"x_a must be > 0, got {x_a}")
    probs = np.full(n_max, 1.0 / (x_a + n_max - 1))
    probs[0] = x_a / (x_a + n_max - 1)
    return probs


def value_density(pop: Population, delta: float, v) -> np.ndarray:
    """Truncated-normal value density on [0, v_max], renormalized exactly."""
    v = np.asarray(v, dtype=float)
    mu, sig = pop.value_mean(delta), pop.sigma
    z_mass = ndtr((pop.v_max - mu) / sig) - ndtr((0.0 - mu) / sig)
    z = (v - mu) / sig
    dens = np.exp(-0.5 * z * z) / (sig * math.sqrt(2.0 * math.pi) * z_mass)
    return np.where((v < 0.0) | (v > pop.v_max), 0.0, dens)


def sample_value(pop: Population, delta: float, u: float) -> float:
    """Inverse-CDF draw from the truncated value distribution (u in [0, 1))."""
    mu, sig = pop.value_mean(delta), pop.sigma
    lo = ndtr((0.0 - mu) / sig)
    hi = ndtr((pop.v_max - mu) / sig)
    v = mu + sig * ndtri(lo + u * (hi - lo))
    return float(min(max(v, 0.0), pop.v_max))


# ---------------------------------------------------------------------------
# Precomputed integration grid
# ---------------------------------------------------------------------------

class _TypeGrid:
    """Price-independent arrays for one (population, product, grid-size) triple."""

    def __init__(self, pop: Population, cfg: ProductConfig, v_nodes: int):
        self.pop, self.cfg = pop, cfg
        arrivals, a_p = pop.arrival_support(cfg)
        deltas, d_p = pop.delta_support()
        gammas, g_p = pop.gamma_support()
        cells = [
            (int(na), float(dl), float(gm), float(pa * pd * pg))
            for na, pa in zip(arrivals, a_p)
            for dl, pd in zip(deltas, d_p)
            for gm, pg in zip(gammas, g_p)
        ]
        self.n_a = np.array([c[0] for c in cells])[:, None]
        self.delta = np.array([c[1] for c in cells])[:, None]
        self.gamma = np.array([c[2] for c in cells])[:, None]
        cell_prob = np.array([c[3] for c in cells])

        self.v = np.linspace(0.0, pop.v_max, v_nodes)
        h = self.v[1] - self.v[0]
        simp = np.ones(v_nodes)
        simp[1:-1:2], simp[2:-1:2] = 4.0, 2.0
        simp *= h / 3.0
        fv = np.vstack([value_density(pop, dl, self.v) for (_, dl, _, _) in cells])
        self.weight = cell_prob[:, None] * fv * simp[None, :]
        self.mass = float(self.weight.sum())

        m, r = cfg.m, cfg.base_release
        na, dl, gm = self.n_a, self.delta, self.gamma
        self.start = np.maximum(na, m)
        self.gd = gm * dl
        self.log_gamma = np.log(gm)
        self.q_base_start = cfg.q1 * gm ** (self.start - r)
        self.q_up_start = cfg.q2 * gm ** (self.start - m)
        self.q_full_start = self.q_base_start + self.q_up_start
        self.q_base_arrival = cfg.q1 * gm ** (na - r)
        self.pre = na < m
        k_pre = np.where(self.pre, m - na, 0)
        db = dl ** k_pre
        self.kappa_buy = np.where(self.pre, db + dl * (1.0 - db), 1.0)
        self.w_pre_buy = np.where(self.pre, self.q_base_arrival * (1.0 - self.gd ** k_pre) / (1.0 - self.gd), 0.0)
        # marginal pre-release subscription value v*q1*gamma**(n-r) for n = 1..m-1
        self.marg_q = cfg.q1 * self.gamma ** (np.arange(1, m) - r)[None, :]
        self.marg_mask = np.arange(1, m)[None, :] >= na

        k = np.arange(_POW_TABLE_SIZE)
        self.pow_g = gm ** k
        self.pow_d = dl ** k
        self.pow_gd = self.gd ** k


@functools.lru_cache(maxsize=8)
def _grid(pop: Population, cfg: ProductConfig, v_nodes: int) -> _TypeGrid:
    return _TypeGrid(pop, cfg, v_nodes)


def _take_pow(table: np.ndarray, k: np.ndarray) -> np.ndarray:
    """table[cell, k] with k possibly infinite (maps to the exact limit 0)."""
    inf = np.isinf(k)
    ki = np.where(inf, _POW_TABLE_SIZE - 1, k).astype(np.int64)
    np.clip(ki, 0, _POW_TABLE_SIZE - 1, out=ki)
    vals = np.take_along_axis(table, ki, axis=1)
    if inf.any():
        vals = np.where(inf, 0.0, vals)
    return vals


def _first_below(vq: np.ndarray, bound, grid: _TypeGrid) -> np.ndarray:
    """Smallest integer k >= 0 with ``vq * gamma**k < bound`` (inf if never)."""
    bound = np.asarray(bound, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        k = np.floor(np.log(bound / vq) / grid.log_gamma) + 1.0
        k = np.maximum(k, 0.0)
        k = np.where(vq < bound, 0.0, k)
        k = np.where(np.broadcast_to(bound <= 0.0, k.shape), np.inf, k)
    # log round-off can be off by one step; fix with exact comparisons
    finite = np.isfinite(k)
    up = finite & ~(vq * _take_pow(grid.pow_g, k) < bound)
    k = k + up
    down = finite & (k >= 1.0) & (vq * _take_pow(grid.pow_g, np.maximum(k - 1.0, 0.0)) < bound)
    k = k - down
    return k


def _evaluate_menu(grid: _TypeGrid, p: PriceMenu):
    """Best-response arrays (w, rho, rho_post, u, class index) over the grid.

    Vectorized transcription of the five closed-form strategy classes; cells
    are rows, value-grid nodes are columns.
    """
    cfg = grid.cfg
    v = grid.v[None, :]
    dl, gd = grid.delta, grid.gd
    one_m_gd, one_m_d = 1.0 - gd, 1.0 - dl
    pre = grid.pre
    has_sub = p.p_s is not None
    ps = p.p_s if has_sub else 0.0
    p1pre = p.p1_pre if p.p1_pre is not None else 0.0
    p1post = p.p1_post if p.p1_post is not None else 0.0
    p2 = p.p2 if p.p2 is not None else 0.0

    zeros = np.zeros((grid.n_a.shape[0], grid.v.shape[0]))

    # Post-release stopping steps past start (k arrays, possibly inf).
    if has_sub:
        k2_00 = _first_below(v * grid.q_full_start, ps, grid)
        k2_10 = _first_below(v * grid.q_up_start, ps, grid)
        k3 = _first_below(v * grid.q_up_start, ps - one_m_d * p1post, grid)
    else:
        k2_00 = k2_10 = k3 = zeros

    def powers(k):
        g = _take_pow(grid.pow_g, k)
        d = _take_pow(grid.pow_d, k)
        return g, d, g * d

    g00, d00, gd00 = powers(k2_00)
    g10, d10, gd10 = powers(k2_10)
    g3, d3, gd3 = powers(k3)

    # Post parts: expected reward/payment from max(n_a, m) given demand there.
    w2_full = grid.q_full_start / one_m_gd
    w2_bb = np.broadcast_to(w2_full, zeros.shape)
    rho2_bb = np.where(pre, p2, p1post + p2)
    w2_bs = (grid.q_full_start * (1.0 - gd10) + d10 * grid.q_base_start * g10) / one_m_gd
    rho2_bs_sub = ps * (1.0 - d10) / one_m_d
    rho2_bs = np.where(pre, rho2_bs_sub, rho2_bs_sub + p1post)
    w2_ss = grid.q_full_start * (1.0 - gd00) / one_m_gd
    rho2_ss = ps * (1.0 - d00) / one_m_d
    w2_sb = w2_bb
    rho2_sb = np.broadcast_to(np.asarray(p1post + p2), zeros.shape)
    w2_sbb = (grid.q_full_start * (1.0 - gd3) + d3 * grid.q_base_start * g3) / one_m_gd
    rho2_sbb = ps * (1.0 - d3) / one_m_d + d3 * p1post

    # Pre-release parts. Buyers own the base throughout [n_a, m); subscribers
    # stop at the marginal-utility threshold given their continuation.
    dl2 = one_m_d * one_m_d

    def pre_parts(w2, rho2):
        if not has_sub:
            k1 = zeros
        else:
            u2 = v * w2 - rho2
            marg_ok = (
                v[:, None, :] * grid.marg_q[:, :, None]
                - ps
                - dl2[:, None, :] * u2[:, None, :]
                >= 0.0
            ) & grid.marg_mask[:, :, None]
            k1 = marg_ok.sum(axis=1).astype(float)
        d1 = _take_pow(grid.pow_d, k1)
        gd1 = _take_pow(grid.pow_gd, k1)
        w_pre = grid.q_base_arrival * (1.0 - gd1) / one_m_gd
        rho_pre = ps * (1.0 - d1) / one_m_d
        kap = d1 + dl * (1.0 - d1)
        return w_pre, rho_pre, kap

    def assemble_buyer(w2, rho2):
        w = np.where(pre, grid.w_pre_buy + grid.kappa_buy * w2, w2)
        rho_post = np.where(pre, grid.kappa_buy * rho2, rho2)
        rho = np.where(pre, p1pre + rho_post, rho_post)
        return w, rho, rho_post

    def assemble_sub(w2, rho2):
        w_pre, rho_pre, kap = pre_parts(w2, rho2)
        w = np.where(pre, w_pre + kap * w2, w2)
        rho_post = np.where(pre, kap * rho2, rho2)
        rho = np.where(pre, rho_pre + rho_post, rho_post)
        return w, rho, rho_post

    w_bb, rho_bb, rp_bb = assemble_buyer(w2_bb, rho2_bb)
    w_bs, rho_bs, rp_bs = assemble_buyer(w2_bs, rho2_bs)
    w_ss, rho_ss, rp_ss = assemble_sub(w2_ss, rho2_ss)
    w_sb, rho_sb, rp_sb = assemble_sub(w2_sb, rho2_sb)
    w_sbb, rho_sbb, rp_sbb = assemble_sub(w2_sbb, rho2_sbb)

    has_pre_buy = p.p1_pre is not None
    has_post_buy = p.p1_post is not None
    base_buyable = np.where(pre, has_pre_buy, has_post_buy).astype(bool)
    feas = {
        "BB": base_buyable & (p.p2 is not None),
        "BS": base_buyable,
        "SB": np.full_like(pre, has_post_buy and p.p2 is not None),
        "SBb": np.full_like(pre, has_post_buy),
        "SS": np.ones_like(pre),
    }
    by_name = {
        "BB": (w_bb, rho_bb, rp_bb),
        "BS": (w_bs, rho_bs, rp_bs),
        "SS": (w_ss, rho_ss, rp_ss),
        "SB": (w_sb, rho_sb, rp_sb),
        "SBb": (w_sbb, rho_sbb, rp_sbb),
    }
    names = [s.value for s in CLASS_PRIORITY]
    W = np.stack([np.broadcast_to(by_name[n][0], zeros.shape) for n in names])
    RHO = np.stack([np.broadcast_to(by_name[n][1], zeros.shape) for n in names])
    RP = np.stack([np.broadcast_to(by_name[n][2], zeros.shape) for n in names])
    U = v * W - RHO
    for i, n in enumerate(names):
        U[i] = np.where(feas[n], U[i], -np.inf)

    idx = U.argmax(axis=0)
    take = idx[None, :, :]
    w_sel = np.take_along_axis(W, take, axis=0)[0]
    rho_sel = np.take_along_axis(RHO, take, axis=0)[0]
    rp_sel = np.take_along_axis(RP, take, axis=0)[0]
    u_sel = grid.v[None, :] * w_sel - rho_sel
    return w_sel, rho_sel, rp_sel, u_sel, idx


def expected_revenue(pop: Population, p: PriceMenu, cfg: ProductConfig, ic: IntegrationConfig) -> MarketReport:
    """Expected per-user revenue, welfare and strategy shares under menu ``p``."""
    grid = _grid(pop, cfg, ic.v_nodes)
    _, rho_sel, _, u_sel, idx = _evaluate_menu(grid, p)
    weight = grid.weight
    revenue = float((weight * rho_sel).sum() / grid.mass)
    welfare = float((weight * u_sel).sum() / grid.mass)

    names = [s.value for s in CLASS_PRIORITY]
    class_shares = {}
    for i, name in enumerate(names):
        class_shares[name] = float(weight[idx == i].sum() / grid.mass)

    arrival_shares: dict[int, dict[str, float]] = {}
    arrivals = grid.n_a[:, 0]
    for na in np.unique(arrivals):
        rows = arrivals == na
        mass_na = weight[rows].sum()
        arrival_shares[int(na)] = {
            name: float(weight[rows][idx[rows] == i].sum() / mass_na)
            for i, name in enumerate(names)
        }

    return MarketReport(revenue, welfare, revenue + welfare, class_shares, arrival_shares)


def check_quadrature(pop: Population, p: PriceMenu, cfg: ProductConfig, ic: IntegrationConfig) -> tuple[float, float]:
    """Grid-doubling check; raises :class:`QuadratureError` on non-convergence."""
    coarse = expected_revenue(pop, p, cfg, ic).revenue
    fine_ic = IntegrationConfig(2 * (ic.v_nodes - 1) + 1, ic.refinement)
    fine = expected_revenue(pop, p, cfg, fine_ic).revenue
    change = abs(fine - coarse) / max(1.0, abs(fine))
    if change > ic.refinement:
        raise QuadratureError(
            f"revenue moved {change:.3e} (> {ic.refinement:.1e}) when doubling "
            f"v_nodes from {ic.v_nodes}"
        )
    return coarse, fine


def construct_sub_improvement(pop: Population, p: PriceMenu, cfg: ProductConfig, ic: IntegrationConfig,
                              eps_scale: float = 1e-6) -> PriceMenu:
    """Add a buy option to a subscription-only menu without losing revenue.

    Prices the perpetual license (upgrade included for free) just above the
    highest expected post-upgrade payment any type makes under the
    subscription-only menu, offered from the upgrade timestep on. Types that
    switch then pay strictly more than their old post-upgrade stream; the
    others keep their strategies. Offering the license before the upgrade as
    well would instead let heavy pre-release subscribers cap their total
    spend at the new price, which can lose revenue.
    """
    if not (p.p1_pre is None and p.p1_post is None and p.p2 is None and p.p_s is not None):
        raise ValueError("expected a subscription-only menu")
    grid = _grid(pop, cfg, ic.v_nodes)
    _, _, rho_post, _, _ = _evaluate_menu(grid, p)
    rho_max = float(rho_post.max())
    if rho_max <= 0.0:
        return p
    buy_price = rho_max * (1.0 + eps_scale)
    return PriceMenu(None, buy_price, 0.0, p.p_s)
