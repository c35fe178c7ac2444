"""Independent brute-force verifiers for the closed-form equilibrium.

Three layers, all deliberately naive:

* ``mdp_best_utility`` solves a user's full decision problem by backward
  induction over a truncated horizon, enumerating every legal action in
  every reachable state.
* ``pattern_value`` evaluates one fixed strategy pattern exactly by forward
  probability propagation (no optimization involved).
* ``simulate_population`` plays sampled users through the stochastic demand
  process with a seeded, per-user random stream.

One modeling rule is enforced here and mirrored by the strategy classes: the
upgrade extends the base product, so it can only be bought by someone who
owns (or simultaneously buys) the base.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .equilibrium import StrategyClass, StrategyEval, best_response
from .model import PriceMenu, ProductConfig, UserType, quality, subscription_access

_OWNERSHIPS = ((0, 0), (0, 1), (1, 0), (1, 1))


@dataclass(frozen=True)
class OracleConfig:
    """Truncation, tolerance and sampling knobs for the verifiers.

    ``horizon=None`` picks, per user, the smallest horizon whose remaining
    value is provably below ``tail_tol``.
    """

    horizon: int | None = None
    tail_tol: float = 1e-9
    mc_samples: int = 100_000
    seed: int = 0


@dataclass
class SimTrace:
    """Per-timestep (timestep, demand, ownership, action, reward, payment) of one user."""

    steps: list[tuple[int, int, tuple[int, int], tuple[int, int, int], float, float]] = field(default_factory=list)


def auto_horizon(user: UserType, cfg: ProductConfig, tail_tol: float) -> int:
    """Smallest truncation point with residual value below ``tail_tol``.

    Any continuation from timestep ``n`` is worth at most
    ``v*(q1+q2)*gamma**(n-m) / (1-gamma*delta)``.
    """
    start = max(user.n_a, cfg.m)
    if user.v <= 0.0:
        return start + 1
    gd = user.gamma * user.delta
    bound = tail_tol * (1.0 - gd) / (user.v * (cfg.q1 + cfg.q2))
    if bound >= 1.0:
        return start + 1
    steps = math.ceil(math.log(bound) / math.log(user.gamma))
    return max(start + 1, cfg.m + steps)


def _legal_actions(o: tuple[int, int], n: int, p: PriceMenu, cfg: ProductConfig) -> list[tuple[int, int, int]]:
    p1 = p.p1(n, cfg)
    b1_options = (0, 1) if (not o[0] and p1 is not None) else (0,)
    actions = []
    for b1 in b1_options:
        owns_base = o[0] or b1
        b2_options = (0, 1) if (not o[1] and n >= cfg.m and p.p2 is not None and owns_base) else (0,)
        for b2 in b2_options:
            for s in (0, 1) if p.p_s is not None else (0,):
                actions.append((s, b1, b2))
    return actions


def mdp_best_utility(user: UserType, p: PriceMenu, cfg: ProductConfig, oc: OracleConfig) -> tuple[float, float, float]:
    """Exact optimum of the truncated user decision problem.

    Returns ``(utility, reward, payment)`` of the optimal action sequence
    over states (timestep, demand, ownership). The truncation error is below
    ``oc.tail_tol``.
    """
    if oc.horizon is not None and oc.horizon < cfg.m + 1:
        raise ValueError(f"horizon must be >= m + 1 = {cfg.m + 1}, got {oc.horizon}")
    horizon = oc.horizon if oc.horizon is not None else auto_horizon(user, cfg, oc.tail_tol)

    g, d_keep, v = user.gamma, user.delta, user.v
    m, r = cfg.m, cfg.base_release
    p_s = p.p_s

    # value[d*4 + o_index] -> (V, W, R); terminal values are zero.
    value = [(0.0, 0.0, 0.0)] * 8
    o_index = {o: i for i, o in enumerate(_OWNERSHIPS)}

    for n in range(horizon, user.n_a - 1, -1):
        q_base = cfg.q1 * g ** (n - r)
        q_up = cfg.q2 * g ** (n - m) if n >= m else 0.0
        q_sub = q_base + (q_up if n >= m else 0.0)
        p1 = p.p1(n, cfg)
        rekindle = (n + 1 == m)
        nxt = [(0.0, 0.0, 0.0)] * 8
        for oi, o in enumerate(_OWNERSHIPS):
            if o[1] and n < m:
                continue  # unreachable: upgrade cannot be owned yet
            # Lapsed after the upgrade shipped: no rekindle ever again, so
            # no action can generate reward and the optimum is to do nothing.
            if n >= m:
                nxt[oi] = (0.0, 0.0, 0.0)
            else:
                nxt[oi] = _solve_state(0, o, oi, n, value, q_base, q_up, q_sub, p1, p_s, p, cfg, v, d_keep, rekindle, o_index)
            nxt[4 + oi] = _solve_state(1, o, oi, n, value, q_base, q_up, q_sub, p1, p_s, p, cfg, v, d_keep, rekindle, o_index)
        value = nxt

    return value[4 + o_index[(0, 0)]]


def _solve_state(d, o, oi, n, value, q_base, q_up, q_sub, p1, p_s, p, cfg, v, d_keep, rekindle, o_index):
    best = None
    for (s, b1, b2) in _legal_actions(o, n, p, cfg):
        o_new = (o[0] or b1, o[1] or b2)
        pay = (p_s if s else 0.0) + (p1 if b1 else 0.0) + (p.p2 if b2 else 0.0)
        if d:
            if s:
                reward = q_sub
            else:
                reward = (q_base if o_new[0] else 0.0) + (q_up if o_new[1] else 0.0)
        else:
            reward = 0.0
        usage = d and (s or o_new != (0, 0))
        p_alive = d_keep if usage else float(d)
        if rekindle:
            p_alive = p_alive + (1.0 - p_alive) * d_keep
        noi = o_index[o_new]
        v1, w1, r1 = value[4 + noi]
        v0, w0, r0 = value[noi]
        val = v * reward - pay + p_alive * v1 + (1.0 - p_alive) * v0
        if best is None or val > best[0] + 1e-15:
            w_tot = reward + p_alive * w1 + (1.0 - p_alive) * w0
            r_tot = pay + p_alive * r1 + (1.0 - p_alive) * r0
            best = (val, w_tot, r_tot)
    return best


# ---------------------------------------------------------------------------
# Fixed-pattern evaluation and simulation
# ---------------------------------------------------------------------------

def _pattern_action(strategy: StrategyClass, n1: float, n2: float, n3: float,
                    n: int, d: int, o: tuple[int, int],
                    user: UserType, cfg: ProductConfig) -> tuple[int, int, int]:
    """Action the pattern prescribes in timestep ``n`` at state ``(d, o)``."""
    m = cfg.m
    if n < m:
        if strategy in (StrategyClass.BB, StrategyClass.BS):
            return (0, int(n == user.n_a and not o[0]), 0)
        return (int(d == 1 and n < n1), 0, 0)
    start = max(user.n_a, m)
    if strategy in (StrategyClass.BB, StrategyClass.SB):
        if d and n == start:
            return (0, int(not o[0]), int(not o[1]))
        return (0, 0, 0)
    if strategy is StrategyClass.BS:
        b1 = int(n == start and not o[0]) if user.n_a >= m else 0
        return (int(d == 1 and n < n2), b1, 0)
    if strategy is StrategyClass.SS:
        return (int(d == 1 and n < n2), 0, 0)
    # SBB: subscribe while n < n3, buy the base in n3 if demand survived.
    if d and n == n3 and not o[0]:
        return (0, 1, 0)
    return (int(d == 1 and n < n3), 0, 0)


def pattern_value(strategy: StrategyClass, n1: float, n2: float, n3: float,
                  user: UserType, p: PriceMenu, cfg: ProductConfig,
                  horizon: int) -> tuple[float, float]:
    """Exact (reward, payment) of a fixed pattern by forward propagation."""
    dist: dict[tuple[int, tuple[int, int]], float] = {(1, (0, 0)): 1.0}
    w_tot = rho_tot = 0.0
    for n in range(user.n_a, horizon + 1):
        nxt: dict[tuple[int, tuple[int, int]], float] = {}
        for (d, o), prob in dist.items():
            s, b1, b2 = _pattern_action(strategy, n1, n2, n3, n, d, o, user, cfg)
            o_new = (o[0] or b1, o[1] or b2)
            pay = (p.p_s if s else 0.0) + ((p.p1(n, cfg) or 0.0) if b1 else 0.0) + (p.p2 if b2 else 0.0)
            if d:
                access = subscription_access(n, cfg) if s else o_new
                w_tot += prob * quality(access, user.gamma, n, cfg)
            rho_tot += prob * pay
            usage = d and (s or o_new != (0, 0))
            p_alive = user.delta if usage else float(d)
            if n + 1 == cfg.m:
                p_alive = p_alive + (1.0 - p_alive) * user.delta
            for d_new, pr in ((1, p_alive), (0, 1.0 - p_alive)):
                if pr > 0.0:
                    key = (d_new, o_new)
                    nxt[key] = nxt.get(key, 0.0) + prob * pr
        dist = nxt
    return w_tot, rho_tot


def simulate_user(user: UserType, p: PriceMenu, strat: StrategyEval, cfg: ProductConfig,
                  rng: np.random.Generator, horizon: int,
                  trace: SimTrace | None = None) -> tuple[float, float]:
    """One stochastic play-through of ``strat`` for ``user``.

    Consumes one uniform per usage timestep (demand survival) plus one for
    the rekindle roll at the upgrade release when demand has lapsed.
    """
    d, o = 1, (0, 0)
    w_tot = rho_tot = 0.0
    for n in range(user.n_a, horizon + 1):
        if n >= cfg.m and d == 0:
            break
        s, b1, b2 = _pattern_action(strat.strategy, strat.n1, strat.n2, strat.n3, n, d, o, user, cfg)
        o = (o[0] or b1, o[1] or b2)
        pay = (p.p_s if s else 0.0) + ((p.p1(n, cfg) or 0.0) if b1 else 0.0) + (p.p2 if b2 else 0.0)
        reward = 0.0
        if d:
            access = subscription_access(n, cfg) if s else o
            reward = quality(access, user.gamma, n, cfg)
        w_tot += reward
        rho_tot += pay
        if trace is not None:
            trace.steps.append((n, d, o, (s, b1, b2), reward, pay))
        if n >= cfg.m and o == (0, 0) and (s, b1, b2) == (0, 0, 0):
            break  # no ownership and the pattern never acts again
        usage = d and (s or o != (0, 0))
        if usage and rng.random() >= user.delta:
            d = 0
        if n + 1 == cfg.m and d == 0:
            if rng.random() < user.delta:
                d = 1
        if d == 0 and n + 1 >= cfg.m:
            break
    return w_tot, rho_tot


@dataclass(frozen=True)
class SimResult:
    revenue: float
    revenue_se: float
    utility: float
    utility_se: float
    class_shares: dict[str, float]
    samples: int


def simulate_population(pop, p: PriceMenu, cfg: ProductConfig, oc: OracleConfig) -> SimResult:
    """Monte Carlo estimate of revenue and user welfare under best responses.

    User ``i`` derives its whole random stream from
    ``SeedSequence(oc.seed).spawn()[i]``: four uniforms pick the type
    (arrival, decay, engagement, value in that order), the rest drive the
    demand path. Results are therefore identical however users are batched.
    """
    from . import market

    if oc.mc_samples < 1:
        raise ValueError("mc_samples must be >= 1")
    children = np.random.SeedSequence(oc.seed).spawn(oc.mc_samples)
    arrivals, arrival_probs = pop.arrival_support(cfg)
    gammas, gamma_probs = pop.gamma_support()
    deltas, delta_probs = pop.delta_support()
    a_cum = np.cumsum(arrival_probs)
    g_cum = np.cumsum(gamma_probs)
    d_cum = np.cumsum(delta_probs)

    payments = np.empty(oc.mc_samples)
    utilities = np.empty(oc.mc_samples)
    share_counts: dict[str, int] = {s.value: 0 for s in StrategyClass}
    response_cache: dict[tuple[int, float, float, float], StrategyEval] = {}

    for i, child in enumerate(children):
        rng = np.random.Generator(np.random.PCG64(child))
        u4 = rng.random(4)
        n_a = int(arrivals[np.searchsorted(a_cum, u4[0], side="right")])
        gamma = float(gammas[np.searchsorted(g_cum, u4[1], side="right")])
        delta = float(deltas[np.searchsorted(d_cum, u4[2], side="right")])
        v = market.sample_value(pop, delta, u4[3])
        user = UserType(n_a, delta, gamma, v)
        key = (n_a, delta, gamma, v)
        strat = response_cache.get(key)
        if strat is None:
            strat = best_response(user, p, cfg)
            response_cache[key] = strat
        horizon = auto_horizon(user, cfg, oc.tail_tol)
        w, rho = simulate_user(user, p, strat, cfg, rng, horizon)
        payments[i] = rho
        utilities[i] = v * w - rho
        share_counts[strat.strategy.value] += 1

    n = oc.mc_samples
    rev_se = float(payments.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    ut_se = float(utilities.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    shares = {k: c / n for k, c in share_counts.items()}
    return SimResult(float(payments.mean()), rev_se, float(utilities.mean()), ut_se, shares, n)
