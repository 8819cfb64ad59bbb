"""Realized phases along economy paths and the Monte Carlo ensemble over them."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .adoption import AdoptionTrajectory, run_adoption
from .config import EconomyPath, ModelParams, Shock, Tech
from .emissions import growth_factor, period_profit
from .market import MarketOutcome, SolverError, clear_market


def path_probability(path: EconomyPath, q: Sequence[float]) -> float:
    if len(path) != len(q):
        raise ValueError("path length differs from the q sequence")
    p = 1.0
    for shock, qt in zip(path.shocks, q):
        p *= qt if shock is Shock.UP else 1.0 - qt
    return p


def seed_stream(seed: int, index: int) -> np.random.Generator:
    """Generator for path ``index``; depends only on ``(seed, index)``, never on run order."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def draw_path(rng: np.random.Generator, q: Sequence[float]) -> EconomyPath:
    u = rng.random(len(q))
    return EconomyPath(tuple(Shock.UP if ui < qt else Shock.DOWN for ui, qt in zip(u, q)))


@dataclass(frozen=True)
class PhaseSample:
    path: EconomyPath
    outcomes: tuple[MarketOutcome, ...]
    payoffs: np.ndarray  # per firm, summed over the phase
    x_in: float  # penalty receipts
    x_out: float  # EC4P outlay

    @property
    def net(self) -> float:
        return self.x_in - self.x_out


def simulate_phase(params: ModelParams, trajectory: AdoptionTrajectory, path: EconomyPath,
                   rng: np.random.Generator | None = None) -> PhaseSample:
    """Play the phase on a realized path with the technology trajectory held fixed.

    ``rng`` drives the stochastic order matcher; pass ``None`` for proportional matching.
    """
    T, m = params.T, params.m
    if len(path) != T:
        raise ValueError(f"path has {len(path)} periods, horizon is {T}")
    pol, eco = params.policy, params.economy
    levels = np.array([f.q0 for f in params.firms])
    outcomes = []
    payoffs = np.zeros(m)
    x_in = x_out = 0.0
    for t in range(T):
        shock = path.shocks[t]
        techs = tuple(Tech.NEW if tau is not None and tau <= t else Tech.OLD for tau in trajectory.adoption_times)
        factors = np.array([growth_factor(f, techs[i], shock) for i, f in enumerate(params.firms)])
        increments = levels * (factors - 1.0)
        positions = increments - np.array([pol.allocation.permits(i, t) for i in range(m)])
        profits = [period_profit(f, eco, t, shock) for f in params.firms]
        try:
            out = clear_market(positions, techs, pol.penalty, pol.price_support, profits, rng)
        except SolverError as exc:
            raise SolverError(f"period {t} on path {path}: {exc}", exc.profile) from exc
        outcomes.append(out)
        payoffs += out.payoffs
        x_in += pol.penalty * out.total_uncovered
        x_out += pol.price_support * out.total_cashed
        levels = levels * factors
    return PhaseSample(path, tuple(outcomes), payoffs, x_in, x_out)


@dataclass(frozen=True)
class EnsembleResult:
    seed: int
    paths: tuple[str, ...]
    x_in: np.ndarray
    x_out: np.ndarray

    @property
    def count(self) -> int:
        return len(self.paths)

    @property
    def nets(self) -> np.ndarray:
        return self.x_in - self.x_out

    def summary(self) -> dict:
        nets = self.nets
        return {
            "count": self.count,
            "seed": self.seed,
            "mean": float(nets.mean()),
            "std": float(nets.std(ddof=1)) if self.count > 1 else 0.0,
            "min": float(nets.min()),
            "max": float(nets.max()),
        }

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["path_index", "x_in", "x_out", "net"])
            for k in range(self.count):
                w.writerow([k, repr(float(self.x_in[k])), repr(float(self.x_out[k])), repr(float(self.nets[k]))])

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"


def _run_range(params: ModelParams, trajectory: AdoptionTrajectory | None, seed: int,
               indices: Sequence[int]) -> list[tuple[str, float, float]]:
    stochastic = params.options.matching == "stochastic"
    conditional = params.options.mode == "conditional"
    cache: dict[str, tuple[float, float]] = {}
    out = []
    for k in indices:
        rng = seed_stream(seed, k)
        path = draw_path(rng, params.economy.q)
        key = str(path)
        if not stochastic and key in cache:
            out.append((key, *cache[key]))
            continue
        traj = run_adoption(params, path) if conditional else trajectory
        sample = simulate_phase(params, traj, path, rng if stochastic else None)
        cache[key] = (sample.x_in, sample.x_out)
        out.append((key, sample.x_in, sample.x_out))
    return out


def monte_carlo(params: ModelParams, n: int, seed: int, trajectory: AdoptionTrajectory | None = None,
                workers: int = 1) -> EnsembleResult:
    """``n`` independent phases; results are identical for any ``workers`` count.

    In expected mode the adoption trajectory is computed once (or taken from
    ``trajectory``) and reused on every path; conditional mode recomputes it per path.
    """
    if n < 1:
        raise ValueError("n >= 1 required")
    if params.options.mode == "expected" and trajectory is None:
        trajectory = run_adoption(params)
    if workers <= 1:
        rows = _run_range(params, trajectory, seed, range(n))
    else:
        chunk = math.ceil(n / workers)
        ranges = [range(s, min(s + chunk, n)) for s in range(0, n, chunk)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_run_range, [params] * len(ranges), [trajectory] * len(ranges),
                             [seed] * len(ranges), ranges)
            rows = [r for part in parts for r in part]
    return EnsembleResult(
        seed=seed,
        paths=tuple(r[0] for r in rows),
        x_in=np.array([r[1] for r in rows]),
        x_out=np.array([r[2] for r in rows]),
    )


def path_frequencies(q: Sequence[float], n: int, seed: int) -> dict[str, int]:
    """Counts of each drawn path over ``n`` streams (used to check the path law)."""
    counts: dict[str, int] = {}
    for k in range(n):
        key = str(draw_path(seed_stream(seed, k), q))
        counts[key] = counts.get(key, 0) + 1
    return counts
