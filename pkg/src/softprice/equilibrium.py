"""Closed-form user equilibrium strategies.

Only five strategy patterns can be optimal for a user: buy at arrival or
subscribe for a while before the upgrade ships, combined with (from the
upgrade timestep on) buying everything, subscribing only, or subscribing and
then buying just the base product. This module evaluates each pattern's
expected reward and payment in closed form and picks the utility-maximizing
one. The formulas are verified against brute-force backward induction and
direct summation in the test suite.

Demand mechanics encoded here: a user loses demand with probability
``1 - delta`` in every timestep he actually uses the product (owns something
or subscribes, with demand); idle demand is retained; a lapsed user regains
demand with probability ``delta`` exactly once, when the upgrade ships.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .model import PriceMenu, ProductConfig, UserType, quality


class StrategyClass(Enum):
    """The five potentially optimal (pre-upgrade, post-upgrade) patterns."""

    BB = "BB"    # buy base at arrival, buy upgrade at release
    BS = "BS"    # buy base at arrival, subscribe for the upgrade afterwards
    SS = "SS"    # subscribe only (possibly for zero timesteps: the null strategy)
    SB = "SB"    # subscribe early, buy base + upgrade at release prices
    SBB = "SBb"  # subscribe early and after release, then buy only the base


#: Deterministic tie-breaking: earlier entries win ties in ``best_response``.
CLASS_PRIORITY: tuple[StrategyClass, ...] = (
    StrategyClass.BB,
    StrategyClass.SB,
    StrategyClass.BS,
    StrategyClass.SBB,
    StrategyClass.SS,
)


@dataclass(frozen=True)
class StrategyEval:
    """Expected outcome of one strategy class for one user type.

    ``w`` is the expected reward in quality units, ``rho`` the expected total
    payment, ``rho_post`` the part of the payment made from the upgrade
    timestep on, and ``u = v*w - rho``. ``n1`` is the first pre-upgrade
    timestep without a subscription, ``n2``/``n3`` the post-upgrade stopping
    (or buying) timesteps; ``math.inf`` means "subscribe for as long as
    demand lasts".
    """

    strategy: StrategyClass
    w: float
    rho: float
    u: float
    n1: int
    n2: float
    n3: float
    feasible: bool
    rho_post: float = 0.0


@dataclass(frozen=True)
class Continuation:
    """Reward/payment a user would obtain if he arrived at the upgrade timestep."""

    w: float
    rho: float


# ---------------------------------------------------------------------------
# Closed-form building blocks
# ---------------------------------------------------------------------------

def rho_sub(n_from: int, n_to: float, delta: float, p_s: float) -> float:
    """Expected subscription outlay for subscribing in [n_from, n_to) while demand lasts.

    Demand survives each subscribed timestep with probability ``delta``, so
    the expected number of paid timesteps is a truncated geometric sum.
    """
    if n_to < n_from:
        raise ValueError(f"empty interval reversed: [{n_from}, {n_to})")
    return p_s * (1.0 - delta ** (n_to - n_from)) / (1.0 - delta)


def kappa(n_from: int, n_to: float, delta: float) -> float:
    """Probability of demand at the upgrade release after ``n_to - n_from`` usage timesteps.

    Either demand survived every usage timestep, or it lapsed and the upgrade
    rekindles it with probability ``delta``.
    """
    if n_to < n_from:
        raise ValueError(f"empty interval reversed: [{n_from}, {n_to})")
    survive = delta ** (n_to - n_from)
    return survive + delta * (1.0 - survive)


def w_pre(n_from: int, n_to: int, own_base: int, user: UserType, cfg: ProductConfig) -> float:
    """Expected reward collected before the upgrade ships.

    The user has demand in ``n_from``, subscribes in [n_from, n_to) while
    demand lasts, and afterwards keeps using the base product only if he owns
    it. Both phases decay demand per usage timestep, so the ownership tail
    carries the survival factor ``delta**(n_to - n_from)``.
    """
    if not n_from <= n_to <= cfg.m:
        raise ValueError(f"need n_from <= n_to <= m, got {n_from}, {n_to}, {cfg.m}")
    g, d = user.gamma, user.delta
    gd = g * d
    out = cfg.q1 * g ** (n_from - cfg.base_release) * (1.0 - gd ** (n_to - n_from)) / (1.0 - gd)
    if own_base:
        out += (
            cfg.q1
            * g ** (n_to - cfg.base_release)
            * d ** (n_to - n_from)
            * (1.0 - gd ** (cfg.m - n_to))
            / (1.0 - gd)
        )
    return out


def w_post(n_from: int, n_to: float, o: tuple[int, int], user: UserType, cfg: ProductConfig) -> float:
    """Expected reward from the upgrade timestep on.

    The user has demand in ``n_from >= m``, subscribes (full access) in
    [n_from, n_to) while demand lasts, then keeps using whatever he owns.
    ``n_to = math.inf`` is the everlasting-subscription limit.
    """
    if n_from < cfg.m:
        raise ValueError(f"post-release reward needs n_from >= m, got {n_from} < {cfg.m}")
    if n_to < n_from:
        raise ValueError(f"empty interval reversed: [{n_from}, {n_to})")
    g, d = user.gamma, user.delta
    gd = g * d
    q_full = cfg.q1 * g ** (n_from - cfg.base_release) + cfg.q2 * g ** (n_from - cfg.m)
    out = q_full * (1.0 - gd ** (n_to - n_from)) / (1.0 - gd)
    if (o[0] or o[1]) and not math.isinf(n_to):
        q_owned = 0.0
        if o[0]:
            q_owned += cfg.q1 * g ** (n_to - cfg.base_release)
        if o[1]:
            q_owned += cfg.q2 * g ** (n_to - cfg.m)
        out += d ** (n_to - n_from) * q_owned / (1.0 - gd)
    return out


# ---------------------------------------------------------------------------
# Stopping thresholds
# ---------------------------------------------------------------------------

def threshold_n2(o: tuple[int, int], user: UserType, p: PriceMenu, cfg: ProductConfig) -> float:
    """First timestep at which a user owning ``o`` stops subscribing.

    Subscribing adds the quality of the components he lacks; he keeps paying
    while that marginal value still exceeds the subscription price. Returns
    ``math.inf`` when the price never exceeds it (free subscription).
    """
    start = max(user.n_a, cfg.m)
    if p.p_s is None:
        return start
    missing = (1 - o[0], 1 - o[1])
    if p.p_s <= 0.0:
        return math.inf
    if user.v <= 0.0 or missing == (0, 0):
        return start
    n = start
    while user.v * quality(missing, user.gamma, n, cfg) >= p.p_s:
        n += 1
    return n


def threshold_n3(user: UserType, p: PriceMenu, cfg: ProductConfig) -> float:
    """Timestep at which a subscribe-then-buy-base user buys.

    While subscribed he enjoys the upgrade's extra quality now and, with
    probability ``1 - delta``, lapses and never pays the base price at all;
    he delays the purchase while that is worth more than the subscription
    price. Degenerates to ``math.inf`` (never buy) when the subscription is
    cheaper than the expected savings from lapsing.
    """
    start = max(user.n_a, cfg.m)
    if p.p_s is None:
        return start
    rhs = p.p_s - (1.0 - user.delta) * p.p1_post
    if rhs <= 0.0:
        return math.inf
    if user.v <= 0.0:
        return start
    n = start
    while user.v * quality((0, 1), user.gamma, n, cfg) >= rhs:
        n += 1
    return n


def threshold_n1(cont: Continuation, user: UserType, p: PriceMenu, cfg: ProductConfig) -> int:
    """First pre-upgrade timestep without a subscription (clamped to ``m``).

    Implemented as the marginal-utility sign test: subscribing one more
    timestep pays ``v*q - p_s`` now and forfeits the continuation utility
    with probability ``(1-delta)**2`` (lapse now, fail to rekindle at the
    release). This form stays valid when the continuation utility is
    negative, where the equivalent quotient form would divide by a
    nonpositive number.
    """
    if user.n_a >= cfg.m:
        return user.n_a
    if p.p_s is None:
        return user.n_a
    u_cont = user.v * cont.w - cont.rho
    loss = (1.0 - user.delta) ** 2 * u_cont
    n = user.n_a
    while n < cfg.m and user.v * quality((1, 0), user.gamma, n, cfg) - p.p_s - loss >= 0.0:
        n += 1
    return n


# ---------------------------------------------------------------------------
# Strategy evaluation
# ---------------------------------------------------------------------------

def _post_parts(strategy: StrategyClass, user: UserType, p: PriceMenu, cfg: ProductConfig) -> tuple[float, float, float, float]:
    """Post-release (w, rho, n2, n3) for ``strategy`` given demand at max(n_a, m)."""
    start = max(user.n_a, cfg.m)
    n2 = n3 = float(start)
    if strategy in (StrategyClass.BB, StrategyClass.SB):
        w2 = w_post(start, start, (1, 1), user, cfg)
        rho2 = p.p2
        if strategy is StrategyClass.SB or user.n_a >= cfg.m:
            rho2 += p.p1_post
    elif strategy is StrategyClass.BS:
        n2 = threshold_n2((1, 0), user, p, cfg)
        w2 = w_post(start, n2, (1, 0), user, cfg)
        rho2 = rho_sub(start, n2, user.delta, p.p_s) if p.p_s is not None else 0.0
        if user.n_a >= cfg.m:
            rho2 += p.p1_post
    elif strategy is StrategyClass.SS:
        n2 = threshold_n2((0, 0), user, p, cfg)
        w2 = w_post(start, n2, (0, 0), user, cfg)
        rho2 = rho_sub(start, n2, user.delta, p.p_s) if p.p_s is not None else 0.0
    else:  # SBB
        n3 = threshold_n3(user, p, cfg)
        w2 = w_post(start, n3, (1, 0), user, cfg)
        rho2 = rho_sub(start, n3, user.delta, p.p_s) if p.p_s is not None else 0.0
        if not math.isinf(n3):
            rho2 += user.delta ** (n3 - start) * p.p1_post
    return w2, rho2, n2, n3


def _feasible(strategy: StrategyClass, user: UserType, p: PriceMenu, cfg: ProductConfig) -> bool:
    base_price = p.p1(user.n_a, cfg) if user.n_a < cfg.m else p.p1_post
    if strategy is StrategyClass.BB:
        return base_price is not None and p.p2 is not None
    if strategy is StrategyClass.BS:
        return base_price is not None
    if strategy is StrategyClass.SB:
        return p.p1_post is not None and p.p2 is not None
    if strategy is StrategyClass.SBB:
        return p.p1_post is not None
    return True  # SS needs nothing; without a subscription it is the null strategy


def strategy_value(strategy: StrategyClass, user: UserType, p: PriceMenu, cfg: ProductConfig) -> StrategyEval:
    """Expected reward/payment/utility of one strategy class for ``user``.

    Infeasible classes (an option they would buy is not offered) come back
    with ``feasible=False`` and ``u=-inf`` so the argmax skips them.
    """
    if not _feasible(strategy, user, p, cfg):
        return StrategyEval(strategy, 0.0, 0.0, -math.inf, user.n_a, float(max(user.n_a, cfg.m)), float(max(user.n_a, cfg.m)), False)

    w2, rho2, n2, n3 = _post_parts(strategy, user, p, cfg)

    if user.n_a >= cfg.m:
        w, rho, rho_post, n1 = w2, rho2, rho2, user.n_a
    elif strategy in (StrategyClass.BB, StrategyClass.BS):
        # Owner pre-release: uses the base every timestep, so demand decays
        # over the whole window [n_a, m).
        k = kappa(user.n_a, cfg.m, user.delta)
        w = w_pre(user.n_a, user.n_a, 1, user, cfg) + k * w2
        rho_post = k * rho2
        rho = p.p1_pre + rho_post
        n1 = user.n_a
    else:
        n1 = threshold_n1(Continuation(w2, rho2), user, p, cfg)
        k = kappa(user.n_a, n1, user.delta)
        w = w_pre(user.n_a, n1, 0, user, cfg) + k * w2
        rho_post = k * rho2
        rho = (rho_sub(user.n_a, n1, user.delta, p.p_s) if p.p_s is not None else 0.0) + rho_post

    return StrategyEval(strategy, w, rho, user.v * w - rho, n1, n2, n3, True, rho_post)


def best_response(user: UserType, p: PriceMenu, cfg: ProductConfig) -> StrategyEval:
    """Utility-maximizing strategy class for ``user`` under menu ``p``.

    Ties break deterministically in ``CLASS_PRIORITY`` order. The null
    strategy (SS with zero subscriptions) is always feasible, so the returned
    utility is never negative.
    """
    best: StrategyEval | None = None
    for strategy in CLASS_PRIORITY:
        cand = strategy_value(strategy, user, p, cfg)
        if best is None or cand.u > best.u:
            best = cand
    return best
