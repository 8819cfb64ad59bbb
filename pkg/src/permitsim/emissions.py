"""Allocation schedule, binomial emission processes and profit streams."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import EconomyParams, FirmParams, PolicyParams, Shock, Tech, TechnologyVector


def allocation(alpha: float, beta: float, t: int) -> float:
    """Permits issued in period ``t``: ``beta * (t + 1) ** alpha``."""
    if t < 0:
        raise ValueError("t >= 0 required")
    return beta * (t + 1) ** alpha


def growth_factor(firm: FirmParams, tech: Tech, shock: Shock) -> float:
    if tech is Tech.OLD:
        return firm.u_old if shock is Shock.UP else firm.d_old
    return firm.u_new if shock is Shock.UP else firm.d_new


def expected_factor(firm: FirmParams, tech: Tech, q_t: float) -> float:
    if tech is Tech.OLD:
        u, d = firm.u_old, firm.d_old
    else:
        u, d = firm.u_new, firm.d_new
    return q_t * u + (1.0 - q_t) * d


def _tech_at(tau: int | None, s: int) -> Tech:
    return Tech.NEW if tau is not None and s >= tau else Tech.OLD


def expected_emission_level(
    firm: FirmParams,
    tau: int | None,
    t: int,
    q: Sequence[float],
    anchor: tuple[int, float] | None = None,
) -> float:
    """Deterministic expected cumulative emissions at ``t``.

    Multiplies one-period expected factors, old ones before ``tau`` and new ones
    from ``tau`` on. ``anchor=(t_a, Q_a)`` restarts the product from a known level
    ``Q_a`` at period ``t_a`` instead of ``q0`` at 0.
    """
    t_a, level = anchor if anchor is not None else (0, firm.q0)
    if t < t_a:
        raise ValueError("t precedes the anchor period")
    for s in range(t_a, t):
        level *= expected_factor(firm, _tech_at(tau, s), q[s])
    return level


def expected_increment(
    firm: FirmParams,
    tau: int | None,
    t: int,
    q: Sequence[float],
    anchor: tuple[int, float] | None = None,
) -> float:
    """Expected emissions over ``[t, t+1]``; the new factors apply already at ``t == tau``."""
    level = expected_emission_level(firm, tau, t, q, anchor)
    return level * (expected_factor(firm, _tech_at(tau, t), q[t]) - 1.0)


def realized_increment(firm: FirmParams, tech: Tech, shock: Shock, level: float) -> float:
    return level * (growth_factor(firm, tech, shock) - 1.0)


@dataclass(frozen=True)
class PositionTable:
    """Expected net positions for period ``t+1``: negative means permits to spare."""

    period: int  # t + 1
    tech: TechnologyVector
    positions: np.ndarray

    @property
    def demand(self) -> float:
        return float(self.positions[self.positions >= 0].sum())

    @property
    def supply(self) -> float:
        return float(-self.positions[self.positions < 0].sum())


def firm_permits(policy: PolicyParams, i: int, t: int) -> float:
    return policy.allocation.permits(i, t)


def expected_positions(
    firms: Sequence[FirmParams],
    policy: PolicyParams,
    adoption_times: Sequence[int | None],
    t: int,
    q: Sequence[float],
    anchors: Sequence[tuple[int, float]] | None = None,
) -> PositionTable:
    for tau in adoption_times:
        if tau is not None and tau < 0:
            raise ValueError("adoption times must be non-negative")
    x = np.array([
        expected_increment(f, tau, t, q, None if anchors is None else anchors[i])
        - firm_permits(policy, i, t)
        for i, (f, tau) in enumerate(zip(firms, adoption_times))
    ])
    return PositionTable(t + 1, TechnologyVector.from_adoption_times(adoption_times, t), x)


def period_profit(firm: FirmParams, economy: EconomyParams, t: int, shock: Shock | None = None) -> float:
    """Production profit over ``[t, t+1]``; ``shock=None`` gives the expectation."""
    growth = (1.0 + economy.rho) ** (t + 1)
    if shock is Shock.UP:
        return growth * firm.s_up
    if shock is Shock.DOWN:
        return growth * firm.s_down
    qt = economy.q[t]
    return growth * (qt * firm.s_up + (1.0 - qt) * firm.s_down)


class ExpectedPaths:
    """Precomputed expected levels and increments for every adoption time.

    ``increments[i][k][t]`` is firm ``i``'s expected increment in period ``t``
    when it adopts at ``k`` (``k == T`` encodes "never"). Anchoring works as in
    :func:`expected_emission_level`; levels before the anchor period are not used.
    """

    def __init__(self, firms: Sequence[FirmParams], q: Sequence[float], horizon: int,
                 anchor_period: int = 0, anchor_levels: Sequence[float] | None = None):
        T = horizon
        self.T = T
        self.anchor_period = anchor_period
        m = len(firms)
        inc = np.zeros((m, T + 1, T))
        for i, f in enumerate(firms):
            base = f.q0 if anchor_levels is None else anchor_levels[i]
            for k in range(T + 1):
                tau = None if k == T else k
                level = base
                for s in range(anchor_period, T):
                    e = expected_factor(f, _tech_at(tau, s), q[s])
                    inc[i, k, s] = level * (e - 1.0)
                    level *= e
        self.increments = inc

    def increment(self, i: int, tau: int | None, t: int) -> float:
        k = self.T if tau is None else min(tau, self.T)
        return float(self.increments[i, k, t])


def telescoped_level(firm: FirmParams, tau: int | None, T: int, q: Sequence[float]) -> float:
    """``q0`` plus the sum of expected increments; equals the level at ``T``."""
    return firm.q0 + math.fsum(expected_increment(firm, tau, t, q) for t in range(T))
