"""Permit exchange: reaction-function pricing, the sellers' supply game, matching, payoffs.

Quantities inside the game are normalized by aggregate demand ``D`` so that the
price is ``P * reaction(submitted / D)``. A seller's payoff depends on its rivals
only through their total submission, which gives two independent routes to the
equilibrium: iterating best responses, or solving the one-dimensional
aggregate fixed point ``sum_i x_i(s) = s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .config import Tech

_XTOL = 1e-15
_RTOL = 4 * np.finfo(float).eps


class SolverError(RuntimeError):
    """The supply game did not converge or failed its equilibrium checks."""

    def __init__(self, message: str, profile: Sequence[float] | None = None):
        super().__init__(message)
        self.profile = None if profile is None else np.asarray(profile, dtype=float)


def reaction(x: float, a: float = 1.0) -> float:
    """Bump-tail reaction function: 1 at ``x = 0``, decaying smoothly to 0 at ``x = a``."""
    if a <= 0:
        raise ValueError("a > 0 required")
    if x < 0:
        raise ValueError("x >= 0 required")
    if x >= a:
        return 0.0
    return math.exp(x * x / (x * x - a * a))


def price(submitted: float, demand: float, penalty: float) -> float:
    """Exchange value of a permit when ``submitted`` permits meet ``demand``."""
    if demand <= 0:
        raise ValueError("no market: demand must be positive to form a price")
    if submitted < 0:
        raise ValueError("submitted >= 0 required")
    return penalty * reaction(submitted / demand)


def marginal_revenue(k1: float, x: float) -> float:
    """d/dx of ``x * reaction(k1 + x)``, i.e. a seller's marginal revenue over ``P``."""
    s = k1 + x
    if s >= 1.0:
        return 0.0
    w = s * s - 1.0
    return math.exp(s * s / w) * (1.0 - 2.0 * x * s / (w * w))


def foc_quartic(k1: float, x: float) -> float:
    """Quartic whose root on ``(0, 1 - k1)`` is the unconstrained best response."""
    s = k1 + x
    return s**4 - 4.0 * s * s + 2.0 * k1 * s + 1.0


def _support_ratio(tech: Tech, penalty: float, price_support: float) -> float:
    return price_support / penalty if tech is Tech.NEW and price_support > 0 else 0.0


def best_response(k1: float, cap: float, penalty: float, price_support: float = 0.0,
                  tech: Tech = Tech.OLD) -> float:
    """Payoff-maximizing submission given rivals' total ``k1`` (all normalized by D).

    Old technology (or no price support): the root of the quartic, capped. New
    technology with support ``P_g``: the point where marginal revenue falls to
    ``P_g / P``, or 0 if it starts below that level.
    """
    if k1 < 0 or cap <= 0:
        raise ValueError("k1 >= 0 and cap > 0 required")
    if k1 >= 1.0:
        return 0.0
    room = 1.0 - k1
    x_star = brentq(lambda x: foc_quartic(k1, x), 0.0, room, xtol=_XTOL, rtol=_RTOL)
    ratio = _support_ratio(tech, penalty, price_support)
    if ratio == 0.0:
        return min(x_star, cap)
    if marginal_revenue(k1, 0.0) <= ratio:
        return 0.0
    if marginal_revenue(k1, x_star) >= ratio:
        return min(x_star, cap)  # ratio below the rounding error of MR at x_star
    root = brentq(lambda x: marginal_revenue(k1, x) - ratio, 0.0, x_star, xtol=_XTOL, rtol=_RTOL)
    return min(root, cap)


def seller_payoff(x: float, k1: float, cap: float, penalty: float, price_support: float = 0.0,
                  tech: Tech = Tech.OLD) -> float:
    """Normalized (D = 1) exchange revenue plus EC4P cash for a seller submitting ``x``."""
    s = k1 + x
    revenue = x * penalty * (reaction(s) if s < 1.0 else 0.0)
    if tech is Tech.NEW:
        revenue += price_support * (cap - x)
    return revenue


# ---------------------------------------------------------------------------
# the game
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MarketSides:
    """Firms split by the sign of their position; ``x == 0`` counts as a (zero) buyer."""

    seller_ids: tuple[int, ...]
    capacities: np.ndarray
    seller_techs: tuple[Tech, ...]
    buyer_ids: tuple[int, ...]
    needs: np.ndarray

    @property
    def supply(self) -> float:
        return float(self.capacities.sum())

    @property
    def demand(self) -> float:
        return float(self.needs.sum())


def market_sides(positions: Sequence[float], techs: Sequence[Tech]) -> MarketSides:
    x = np.asarray(positions, dtype=float)
    sell = np.flatnonzero(x < 0)
    buy = np.flatnonzero(x >= 0)
    return MarketSides(
        seller_ids=tuple(int(i) for i in sell),
        capacities=-x[sell],
        seller_techs=tuple(techs[i] for i in sell),
        buyer_ids=tuple(int(i) for i in buy),
        needs=x[buy],
    )


@dataclass(frozen=True)
class GameSolution:
    submissions: np.ndarray  # permits, aligned with MarketSides.seller_ids
    price: float
    rounds: int
    method: str
    br_gap: float  # max |x_i - BR_i(x_-i)| in normalized units
    kkt_residual: float

    @property
    def total(self) -> float:
        return float(self.submissions.sum())


def _aggregate_response(s: float, caps: np.ndarray, ratios: np.ndarray) -> np.ndarray:
    """Each seller's KKT-consistent submission when the market total is ``s`` (D = 1)."""
    if s >= 1.0:
        return np.zeros_like(caps)
    if s <= 0.0:
        return caps.copy()
    w = 1.0 - s * s
    base = w * w / (2.0 * s)
    eta = math.exp(-s * s / w)
    scale = np.where(ratios > 0, 1.0 - ratios / eta, 1.0) if eta > 0 else np.where(ratios > 0, -1.0, 1.0)
    return np.clip(scale * base, 0.0, caps)


def solve_aggregate(caps: np.ndarray, ratios: np.ndarray) -> tuple[np.ndarray, float]:
    """Equilibrium via the scalar equation ``sum_i x_i(s) = s`` (monotone, unique root)."""
    total_cap = float(caps.sum())
    if total_cap <= 0.0:
        return np.zeros_like(caps), 0.0

    def excess(s: float) -> float:
        return float(_aggregate_response(s, caps, ratios).sum()) - s

    s_star = brentq(excess, 0.0, 1.0, xtol=_XTOL, rtol=_RTOL)
    return _aggregate_response(s_star, caps, ratios), s_star


def _best_responses(x: np.ndarray, caps: np.ndarray, penalty: float, price_support: float,
                    techs: Sequence[Tech]) -> np.ndarray:
    total = float(x.sum())
    return np.array([
        best_response(max(total - x[i], 0.0), caps[i], penalty, price_support, techs[i])
        for i in range(len(x))
    ])


def kkt_residual(x: np.ndarray, caps: np.ndarray, ratios: np.ndarray, at_bound_tol: float = 1e-12) -> float:
    """Largest violation of the sellers' first-order/complementarity conditions (D = 1, per unit P)."""
    s = float(x.sum())
    worst = 0.0
    for xi, cap, ratio in zip(x, caps, ratios):
        d = marginal_revenue(s - xi, xi) - ratio
        if xi >= cap - at_bound_tol:
            viol = max(0.0, -d)  # profit must not decrease towards the cap
        elif xi <= at_bound_tol:
            viol = max(0.0, d)
        else:
            viol = abs(d)
        worst = max(worst, viol)
    return worst


def solve_game(sides: MarketSides, penalty: float, price_support: float = 0.0, *,
               method: str = "aggregate", tol: float = 1e-10, max_rounds: int = 10_000,
               verify_tol: float = 1e-8) -> GameSolution:
    """Nash equilibrium of the sellers' submission game.

    ``method="aggregate"`` solves the scalar fixed point directly;
    ``method="best_response"`` runs synchronous best-response rounds from the
    zero profile, damped whenever the step stops shrinking. Either way the
    result is checked against every seller's best response and the KKT
    conditions before it is returned.
    """
    D = sides.demand
    if D <= 0:
        raise ValueError("no market: demand must be positive")
    if not sides.seller_ids:
        raise ValueError("at least one seller required")
    caps = sides.capacities / D
    techs = sides.seller_techs
    ratios = np.array([_support_ratio(t, penalty, price_support) for t in techs])

    if method == "aggregate":
        x, _ = solve_aggregate(caps, ratios)
        rounds = 1
    elif method == "best_response":
        x = np.zeros_like(caps)
        omega, prev_gap = 1.0, math.inf
        for rounds in range(1, max_rounds + 1):
            br = _best_responses(x, caps, penalty, price_support, techs)
            gap = float(np.max(np.abs(br - x)))
            if gap < tol:
                x = br
                break
            if gap >= prev_gap:
                omega = max(omega / 2.0, 1.0 / 64.0)
            prev_gap = gap
            x = x + omega * (br - x)
        else:
            raise SolverError(f"best-response iteration did not converge in {max_rounds} rounds", x * D)
    else:
        raise ValueError(f"unknown method {method!r}")

    br_gap = float(np.max(np.abs(_best_responses(x, caps, penalty, price_support, techs) - x)))
    kkt = kkt_residual(x, caps, ratios)
    if br_gap > verify_tol or kkt > verify_tol:
        raise SolverError(f"equilibrium check failed (br gap {br_gap:.3g}, kkt {kkt:.3g})", x * D)
    total = float(x.sum())
    return GameSolution(x * D, penalty * reaction(min(total, 1.0)), rounds, method, br_gap, kkt)


# ---------------------------------------------------------------------------
# matching and payoffs
# ---------------------------------------------------------------------------


def match_orders(needs: Sequence[float], total_submitted: float, rng: np.random.Generator | None = None) -> np.ndarray:
    """Executed quantity per buyer.

    Without ``rng`` every buyer gets its demand share of the submitted permits.
    With ``rng`` the buyers' orders are laid around a circle of length D in random
    order and a random arc of length ``total_submitted`` is filled; every unit of
    demand is covered with probability ``total_submitted / D``, so the expected
    fill equals the proportional one.
    """
    needs = np.asarray(needs, dtype=float)
    D = float(needs.sum())
    if D <= 0 or total_submitted <= 0:
        return np.zeros_like(needs)
    filled = min(total_submitted, D)
    if rng is None:
        return needs / D * filled
    order = rng.permutation(len(needs))
    start = rng.uniform(0.0, D)
    executed = np.zeros_like(needs)
    lo = 0.0
    for i in order:
        hi = lo + needs[i]
        executed[i] = _arc_overlap(lo, hi, start, filled, D)
        lo = hi
    return np.minimum(executed, needs)


def _arc_overlap(lo: float, hi: float, start: float, length: float, circ: float) -> float:
    end = start + length
    out = max(0.0, min(hi, end) - max(lo, start))
    if end > circ:  # wrapped part of the arc covers [0, end - circ)
        out += max(0.0, min(hi, end - circ) - lo)
    return out


@dataclass(frozen=True)
class MarketOutcome:
    """One period's clearing, per firm (index = firm id)."""

    positions: np.ndarray
    techs: tuple[Tech, ...]
    submissions: np.ndarray  # sellers; every submitted permit is sold
    executed: np.ndarray  # buyers' matched purchases
    uncovered: np.ndarray
    cashed: np.ndarray
    payoffs: np.ndarray
    price: float  # nan when there is no market (D = 0)
    demand: float
    supply: float

    @property
    def has_market(self) -> bool:
        return self.demand > 0

    @property
    def total_submitted(self) -> float:
        return float(self.submissions.sum())

    @property
    def total_uncovered(self) -> float:
        return float(self.uncovered.sum())

    @property
    def total_cashed(self) -> float:
        return float(self.cashed.sum())


def period_payoffs(positions: np.ndarray, techs: Sequence[Tech], submissions: np.ndarray,
                   executed: np.ndarray, price_: float, profits: np.ndarray,
                   penalty: float, price_support: float) -> np.ndarray:
    """Per-firm payoff of one period.

    Sellers earn ``price * e`` plus ``P_g`` per unsold permit if on the new
    technology; buyers pay the price for what they get and the penalty on the
    rest. Production profit is added to everyone.
    """
    x = np.asarray(positions, dtype=float)
    new = np.array([t is Tech.NEW for t in techs])
    p = 0.0 if math.isnan(price_) else price_
    seller = x < 0
    cap = np.where(seller, -x, 0.0)
    out = np.asarray(profits, dtype=float).copy()
    out += np.where(seller, p * submissions, 0.0)
    out += np.where(seller & new, price_support * (cap - submissions), 0.0)
    out -= np.where(seller, 0.0, penalty * (x - executed) + p * executed)
    return out


def clear_market(positions: Sequence[float], techs: Sequence[Tech], penalty: float, price_support: float,
                 profits: Sequence[float], rng: np.random.Generator | None = None,
                 method: str = "aggregate") -> MarketOutcome:
    """Split firms into sides, solve the supply game, match orders and pay out."""
    x = np.asarray(positions, dtype=float)
    m = len(x)
    techs = tuple(techs)
    sides = market_sides(x, techs)
    D = sides.demand
    submissions = np.zeros(m)
    executed = np.zeros(m)
    if D > 0 and sides.seller_ids:
        sol = solve_game(sides, penalty, price_support, method=method)
        submissions[list(sides.seller_ids)] = sol.submissions
        executed[list(sides.buyer_ids)] = match_orders(sides.needs, sol.total, rng)
        p = sol.price
    elif D > 0:
        p = penalty  # nothing offered: scarcity ceiling, no trades
    else:
        p = math.nan
    need = np.where(x >= 0, x, 0.0)
    uncovered = need - executed
    new = np.array([t is Tech.NEW for t in techs])
    cashed = np.where((x < 0) & new & (price_support > 0), -x - submissions, 0.0)
    payoffs = period_payoffs(x, techs, submissions, executed, p, np.asarray(profits, dtype=float),
                             penalty, price_support)
    return MarketOutcome(x, techs, submissions, executed, uncovered, cashed, payoffs, p, D, sides.supply)
