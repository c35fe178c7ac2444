"""Primitive types and per-timestep mechanics of the license-pricing game.

A publisher sells a digital product with base quality ``q1`` plus an optional
upgrade worth ``q2`` that ships at timestep ``m``. Users either buy perpetual
licenses (base and upgrade separately) or pay a per-timestep subscription that
grants access to everything released so far. Perceived quality of each
component decays geometrically (factor ``gamma``) from its release timestep.

Timesteps are 1-based. All functions here are pure and thread-safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ProductConfig:
    """Product constants: qualities, upgrade timing and horizon.

    ``base_release`` fixes the quality-indexing convention: the base product
    has quality exactly ``q1`` in timestep ``base_release`` and decays from
    there. The default (1) means a user arriving at launch sees quality q1;
    setting 0 shifts every base-quality term by one decay factor.
    """

    q1: float = 1.0
    q2: float = 0.5
    m: int = 6
    n_max: int = 12
    base_release: int = 1

    def __post_init__(self) -> None:
        if not (self.q1 > 0 and math.isfinite(self.q1)):
            raise ValueError(f"q1 must be positive and finite, got {self.q1}")
        if not (self.q2 >= 0 and math.isfinite(self.q2)):
            raise ValueError(f"q2 must be nonnegative and finite, got {self.q2}")
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")
        if self.base_release > 1:
            raise ValueError(f"base_release must be <= 1, got {self.base_release}")


@dataclass(frozen=True)
class UserType:
    """A user: arrival timestep, engagement, quality decay and value scale.

    ``delta`` is the per-usage-timestep probability of keeping demand;
    ``gamma`` the per-timestep quality decay; ``v`` the money value of one
    unit of quality in a timestep with demand.
    """

    n_a: int
    delta: float
    gamma: float
    v: float

    def validate(self, cfg: ProductConfig, v_max: float = math.inf) -> None:
        if not 1 <= self.n_a <= cfg.n_max:
            raise ValueError(f"n_a must be in [1, {cfg.n_max}], got {self.n_a}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")
        if not 0.0 <= self.v <= v_max:
            raise ValueError(f"v must be in [0, {v_max}], got {self.v}")


@dataclass(frozen=True)
class UserState:
    """Demand flag plus ownership vector (base, upgrade)."""

    d: int
    o: tuple[int, int]


@dataclass(frozen=True)
class PriceMenu:
    """Publisher price vector with per-option availability.

    ``None`` means the option is not offered (the user can never take the
    corresponding action); it is deliberately not a numeric sentinel so no
    infinity ever enters the arithmetic. ``p1_pre`` applies to base purchases
    before the upgrade timestep, ``p1_post`` from then on.
    """

    p1_pre: float | None
    p1_post: float | None
    p2: float | None
    p_s: float | None

    def __post_init__(self) -> None:
        for name in ("p1_pre", "p1_post", "p2", "p_s"):
            value = getattr(self, name)
            if value is not None and not (value >= 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be finite and >= 0 or None, got {value}")

    def p1(self, n: int, cfg: ProductConfig) -> float | None:
        """Base-product price in timestep ``n`` (None if not offered)."""
        return self.p1_pre if n < cfg.m else self.p1_post

    @property
    def has_subscription(self) -> bool:
        return self.p_s is not None

    @property
    def has_upgrade(self) -> bool:
        return self.p2 is not None

    def replace_unavailable(self) -> "PriceMenu":
        return self


@dataclass(frozen=True)
class Action:
    """One timestep's choice: subscribe and/or buy base / upgrade."""

    subscribe: int
    buy_base: int
    buy_upgrade: int


def subscription_access(n: int, cfg: ProductConfig) -> tuple[int, int]:
    """Access vector a subscriber enjoys in timestep ``n``: everything released."""
    if n < 1:
        raise ValueError(f"timestep must be >= 1, got {n}")
    return (1, 1) if n >= cfg.m else (1, 0)


def quality(o: tuple[int, int], gamma: float, n: int, cfg: ProductConfig) -> float:
    """Realized quality of having access to ``o`` in timestep ``n``.

    Each owned/accessible component contributes its quality decayed from its
    release timestep: ``o1*q1*gamma**(n - base_release) + o2*q2*gamma**(n - m)``.
    """
    if n < 1:
        raise ValueError(f"timestep must be >= 1, got {n}")
    if o[1] and n < cfg.m:
        raise ValueError(f"upgrade access before its release (n={n} < m={cfg.m})")
    total = 0.0
    if o[0]:
        total += cfg.q1 * gamma ** (n - cfg.base_release)
    if o[1]:
        total += cfg.q2 * gamma ** (n - cfg.m)
    return total


def _check_action_legal(a: Action, state: UserState, p: PriceMenu, n: int, cfg: ProductConfig) -> None:
    if a.subscribe and p.p_s is None:
        raise ValueError("subscribing while no subscription is offered")
    if a.buy_base and p.p1(n, cfg) is None:
        raise ValueError(f"buying the base product in timestep {n} while not offered")
    if a.buy_upgrade:
        if n < cfg.m:
            raise ValueError(f"buying the upgrade before its release (n={n} < m={cfg.m})")
        if p.p2 is None:
            raise ValueError("buying the upgrade while not offered")


def immediate_reward(a: Action, user: UserType, state: UserState, n: int, cfg: ProductConfig, p: PriceMenu) -> float:
    """Quality units consumed this timestep (zero without demand).

    A subscriber consumes the subscription access regardless of ownership; a
    non-subscriber consumes what he owns after this timestep's purchases.
    """
    _check_action_legal(a, state, p, n, cfg)
    if not state.d:
        return 0.0
    owned = (max(state.o[0], a.buy_base), max(state.o[1], a.buy_upgrade))
    if a.subscribe:
        return quality(subscription_access(n, cfg), user.gamma, n, cfg)
    return quality(owned, user.gamma, n, cfg)


def immediate_payment(a: Action, p: PriceMenu, n: int, cfg: ProductConfig) -> float:
    """Money paid this timestep for the chosen action."""
    _check_action_legal(a, UserState(1, (0, 0)), p, n, cfg)
    total = 0.0
    if a.subscribe:
        total += p.p_s
    if a.buy_base:
        total += p.p1(n, cfg)
    if a.buy_upgrade:
        total += p.p2
    return total


def immediate_utility(a: Action, user: UserType, state: UserState, n: int, cfg: ProductConfig, p: PriceMenu) -> float:
    """``v * reward - payment`` for one timestep."""
    return user.v * immediate_reward(a, user, state, n, cfg, p) - immediate_payment(a, p, n, cfg)
