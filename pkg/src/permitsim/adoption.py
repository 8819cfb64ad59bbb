"""Technology-adoption engine: path matrices, scenario payoffs, ratings, the adoption loop.

A path matrix assigns every undecided firm one column of the residual horizon
``t0 .. T-1``; with ``H = T - t0`` columns, column ``c < H - 1`` means "adopts at
``t0 + c``" and the last column means "never adopts in this phase". Payoffs
depend on a matrix only through the firms' adoption times, so matrices are
represented as tuples of column indices and expected market solutions are
memoized per period on the adoption times that have already happened.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from scipy.special import logsumexp

from .config import EconomyPath, ModelParams, Tech, TechnologyVector
from .emissions import ExpectedPaths, growth_factor, period_profit
from .market import clear_market


class BudgetExceeded(RuntimeError):
    """Scenario enumeration would exceed the configured budget."""

    def __init__(self, required: int, budget: int):
        super().__init__(f"scenario enumeration needs {required} path matrices, budget is {budget}")
        self.required = required
        self.budget = budget


def count_scenarios(undecided: int, horizon: int) -> tuple[int, int]:
    """Sizes of the adopt-now and wait classes for one deciding firm."""
    if undecided < 1 or horizon < 1:
        raise ValueError("undecided >= 1 and horizon >= 1 required")
    n = horizon ** (undecided - 1)
    return n, horizon**undecided - n


def path_matrices(undecided: int, horizon: int) -> Iterator[tuple[int, ...]]:
    """All path matrices as column-index tuples (mixed-radix counter order)."""
    return itertools.product(range(horizon), repeat=undecided)


def column_to_time(col: int, t0: int, horizon: int) -> int | None:
    if horizon == 1:
        return t0  # single column: the only scenario is "adopt now"
    return None if col == horizon - 1 else t0 + col


def as_matrix(cols: Sequence[int], horizon: int) -> np.ndarray:
    """Dense one-hot view of a path matrix (rows = undecided firms)."""
    M = np.zeros((len(cols), horizon), dtype=int)
    M[np.arange(len(cols)), list(cols)] = 1
    return M


# ---------------------------------------------------------------------------
# utility
# ---------------------------------------------------------------------------


def cara_utility(w, gamma: float):
    """``(1 - exp(-gamma w)) / gamma``; linear when ``gamma == 0``."""
    w = np.asarray(w, dtype=float)
    if gamma == 0:
        return w
    return -np.expm1(-gamma * w) / gamma


def rating(payoffs: Sequence[float], gamma: float) -> float:
    """Expected utility over equiprobable scenario payoffs."""
    w = np.asarray(payoffs, dtype=float)
    if w.size == 0:
        raise ValueError("empty payoff vector")
    if gamma == 0:
        return float(w.mean())
    log_mean = logsumexp(-gamma * w) - math.log(w.size)
    with np.errstate(over="ignore"):
        return float(-np.expm1(log_mean) / gamma)  # -inf once utility underflows the float range


def certainty_equivalent(payoffs: Sequence[float], gamma: float) -> float:
    """Sure payoff with the same rating; monotone in the rating, overflow-free."""
    w = np.asarray(payoffs, dtype=float)
    if gamma == 0:
        return float(w.mean())
    return float(-(logsumexp(-gamma * w) - math.log(w.size)) / gamma)


# ---------------------------------------------------------------------------
# scenario payoffs
# ---------------------------------------------------------------------------


class ScenarioEvaluator:
    """Expected per-period payoffs for every firm under given adoption times.

    The market in period ``t`` depends on adoption times only through which
    firms have switched by ``t`` and when, so results are cached on
    ``(t, truncated adoption times)``.
    """

    def __init__(self, params: ModelParams, paths: ExpectedPaths, use_cache: bool = True):
        self.params = params
        self.paths = paths
        self.use_cache = use_cache
        self._cache: dict[tuple, np.ndarray] = {}
        self.solves = 0
        pol, eco = params.policy, params.economy
        self._permits = np.array([[pol.allocation.permits(i, t) for t in range(params.T)] for i in range(params.m)])
        self._profits = np.array([[period_profit(f, eco, t) for t in range(params.T)] for f in params.firms])
        T = params.T
        r = eco.r
        self._weights = np.array([(1 + r) ** (T - t - 1) if params.options.compound_payoffs else 1.0
                                  for t in range(T)])

    def _solve(self, t: int, taus: tuple[int, ...]) -> tuple[np.ndarray, float]:
        m = self.params.m
        x = np.array([self.paths.increments[i, taus[i] if taus[i] >= 0 else self.paths.T, t] for i in range(m)])
        x = x - self._permits[:, t]
        techs = tuple(Tech.NEW if k >= 0 else Tech.OLD for k in taus)
        pol = self.params.policy
        self.solves += 1
        out = clear_market(x, techs, pol.penalty, pol.price_support, self._profits[:, t])
        return out.payoffs, out.price

    def market(self, t: int, adoption_times: Sequence[int | None]) -> tuple[np.ndarray, float]:
        """Per-firm expected payoffs and the expected price in period ``t``."""
        key = (t, tuple(tau if tau is not None and tau <= t else -1 for tau in adoption_times))
        if not self.use_cache:
            return self._solve(*key)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._cache[key] = self._solve(*key)
        return hit

    def payoff_stream(self, t0: int, adoption_times: Sequence[int | None]) -> np.ndarray:
        """Sum of (optionally compounded) per-period payoffs over ``t0 .. T-1``, per firm."""
        total = np.zeros(self.params.m)
        for t in range(t0, self.params.T):
            total += self._weights[t] * self.market(t, adoption_times)[0]
        return total

    def cost(self, i: int, tau: int | None) -> float:
        if tau is None:
            return 0.0
        T = self.params.T
        return (1.0 + self.params.economy.r) ** (T - tau) * self.params.firms[i].cost_new

    def scenario_payoff(self, i: int, adoption_times: Sequence[int | None], t0: int) -> float:
        """Payoff of firm ``i`` over ``t0 .. T-1`` if adoptions happen at ``adoption_times``."""
        return float(self.payoff_stream(t0, adoption_times)[i]) - self.cost(i, adoption_times[i])


# ---------------------------------------------------------------------------
# the adoption loop
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StepRecord:
    period: int
    undecided: tuple[int, ...]
    rating_new: dict[int, float]
    rating_old: dict[int, float]
    adopters: tuple[int, ...]
    scenarios: int


@dataclass(frozen=True)
class AdoptionTrajectory:
    adoption_times: tuple[int | None, ...]
    expected_prices: tuple[float, ...]  # expected clearing price per period, nan if no market
    steps: tuple[StepRecord, ...]
    price_support: float

    @property
    def horizon(self) -> int:
        return len(self.expected_prices)

    def tech(self, t: int) -> TechnologyVector:
        return TechnologyVector.from_adoption_times(self.adoption_times, t)

    @property
    def vectors(self) -> list[TechnologyVector]:
        return [self.tech(t) for t in range(self.horizon)]

    def adopters(self, t: int) -> int:
        return self.tech(t).n_new

    @property
    def cumulative_adopters(self) -> list[int]:
        return [self.adopters(t) for t in range(self.horizon)]

    @property
    def first_adoption(self) -> int | None:
        times = [tau for tau in self.adoption_times if tau is not None]
        return min(times) if times else None

    def to_csv(self, path: str | Path) -> None:
        """Columns: period, firm, status, expected_price."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["period", "firm", "status", "expected_price"])
            for t in range(self.horizon):
                h = self.tech(t)
                for i in range(len(h)):
                    w.writerow([t, i, h[i].value, repr(self.expected_prices[t])])


def adoption_step(params: ModelParams, evaluator: ScenarioEvaluator, t0: int,
                  adoption_times: Sequence[int | None], undecided: Sequence[int]) -> StepRecord:
    """Rate adopt-now against wait for every undecided firm; all qualifying firms adopt at ``t0``."""
    k = len(undecided)
    H = params.T - t0
    total = H**k
    if total > params.options.scenario_budget:
        raise BudgetExceeded(total, params.options.scenario_budget)
    base = list(adoption_times)
    rn: dict[int, float] = {}
    ro: dict[int, float] = {}
    adopters = []

    if H == 1:
        # no later column exists: compare adopting now (rivals never) with never adopting
        for i in undecided:
            times_n = list(base)
            times_n[i] = t0
            w_n = [evaluator.scenario_payoff(i, times_n, t0)]
            w_o = [evaluator.scenario_payoff(i, base, t0)]
            gamma = params.firms[i].risk_aversion
            rn[i], ro[i] = rating(w_n, gamma), rating(w_o, gamma)
            if certainty_equivalent(w_n, gamma) >= certainty_equivalent(w_o, gamma):
                adopters.append(i)
        return StepRecord(t0, tuple(undecided), rn, ro, tuple(adopters), 2 * k)

    cols = np.array(list(path_matrices(k, H)), dtype=int).reshape(total, k)
    streams = np.empty((total, params.m))
    taus_all = np.empty((total, k), dtype=object)
    for s, row in enumerate(cols):
        times = list(base)
        for j, c in zip(undecided, row):
            times[j] = column_to_time(int(c), t0, H)
        taus_all[s] = [times[j] for j in undecided]
        streams[s] = evaluator.payoff_stream(t0, times)

    for pos, i in enumerate(undecided):
        costs = np.array([evaluator.cost(i, tau) for tau in taus_all[:, pos]])
        w = streams[:, i] - costs
        now = cols[:, pos] == 0
        gamma = params.firms[i].risk_aversion
        w_n, w_o = w[now], w[~now]
        rn[i], ro[i] = rating(w_n, gamma), rating(w_o, gamma)
        if certainty_equivalent(w_n, gamma) >= certainty_equivalent(w_o, gamma):
            adopters.append(i)
    return StepRecord(t0, tuple(undecided), rn, ro, tuple(adopters), total)


def realized_levels(params: ModelParams, adoption_times: Sequence[int | None], path: EconomyPath,
                    t: int) -> list[float]:
    """Cumulative emissions at ``t`` along a realized path."""
    levels = []
    for i, f in enumerate(params.firms):
        q = f.q0
        for s in range(t):
            tau = adoption_times[i]
            tech = Tech.NEW if tau is not None and tau <= s else Tech.OLD
            q *= growth_factor(f, tech, path.shocks[s])
        levels.append(q)
    return levels


def run_adoption(params: ModelParams, path: EconomyPath | None = None, use_cache: bool = True,
                 mode: str | None = None) -> AdoptionTrajectory:
    """Period-by-period adoption decisions over the whole phase.

    In ``expected`` mode firms project emissions from ``q0`` with expected
    factors, so the trajectory does not depend on any realization. In
    ``conditional`` mode projections restart each period from the emission
    levels realized along ``path``.
    """
    mode = mode or params.options.mode
    T, m = params.T, params.m
    q = params.economy.q
    if mode == "conditional" and path is None:
        raise ValueError("conditional mode needs a realized economy path")
    if mode not in ("expected", "conditional"):
        raise ValueError(f"unknown mode {mode!r}")

    times: list[int | None] = [None] * m
    steps = []
    prices = [math.nan] * T
    evaluator = ScenarioEvaluator(params, ExpectedPaths(params.firms, q, T), use_cache)
    for t0 in range(T):
        if mode == "conditional":
            levels = realized_levels(params, times, path, t0)
            evaluator = ScenarioEvaluator(params, ExpectedPaths(params.firms, q, T, t0, levels), use_cache)
        undecided = [i for i in range(m) if times[i] is None]
        if undecided:
            step = adoption_step(params, evaluator, t0, times, undecided)
            steps.append(step)
            for i in step.adopters:
                times[i] = t0
        prices[t0] = evaluator.market(t0, times)[1]
    return AdoptionTrajectory(tuple(times), tuple(prices), tuple(steps), params.policy.price_support)
