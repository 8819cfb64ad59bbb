"""Empirical quantiles, V@R, AV@R and the self-financing assessment of a policy."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

LEVELS = (0.10, 0.05, 0.01)


def _sorted(sample: Sequence[float]) -> np.ndarray:
    y = np.sort(np.asarray(sample, dtype=float).ravel())
    if y.size == 0:
        raise ValueError("empty sample")
    return y


def upper_quantile(sample: Sequence[float], t: float) -> float:
    """Upper quantile of the empirical law: the smallest value whose CDF exceeds ``t``.

    Right-continuous in ``t``; jumps at ``k / n``.
    """
    if not 0.0 < t < 1.0:
        raise ValueError("t must lie in (0, 1)")
    y = _sorted(sample)
    n = y.size
    k = int(np.searchsorted(np.arange(1, n + 1) / n, t, side="right"))
    return float(y[min(k, n - 1)])


def var(sample: Sequence[float], lam: float, convention: str = "standard") -> float:
    """Value at risk at level ``lam``.

    ``standard`` returns ``-q(lam)``, the cash that makes the position acceptable;
    ``raw`` returns the raw quantile ``q(lam)``.
    """
    if not 0.0 < lam <= 1.0:
        raise ValueError("lambda must lie in (0, 1]")
    y = _sorted(sample)
    q = float(y[-1]) if lam == 1.0 else upper_quantile(y, lam)
    return _signed(q, convention)


def avar(sample: Sequence[float], lam: float, convention: str = "standard") -> float:
    """Average value at risk, ``-(1/lam) * integral_0^lam q(t) dt``, integrated exactly.

    The empirical quantile equals ``y[k]`` on ``[k/n, (k+1)/n)``, so the integral
    is a weighted sum of the lowest order statistics. The definition already
    carries its minus sign, so both conventions give the same number.
    """
    if not 0.0 < lam <= 1.0:
        raise ValueError("lambda must lie in (0, 1]")
    _signed(0.0, convention)
    y = _sorted(sample)
    n = y.size
    units = lam * n  # tail length counted in sample points
    full = min(int(np.floor(units + 1e-12)), n)
    total = y[:full].sum()
    if units > full and full < n:
        total += (units - full) * y[full]
    return float(-total / units)


def _signed(q: float, convention: str) -> float:
    if convention == "standard":
        return -q
    if convention == "raw":
        return q
    raise ValueError(f"unknown convention {convention!r}")


@dataclass(frozen=True)
class Assessment:
    measure: str
    lam: float
    value: float
    acceptable: bool


def assess_self_financing(nets: Sequence[float], measure: str = "var", lam: float = 0.10,
                          convention: str = "standard") -> Assessment:
    """Risk of the regulator's net position; acceptable when it is at most 0."""
    funcs = {"var": var, "avar": avar}
    if measure not in funcs:
        raise ValueError(f"unknown measure {measure!r}")
    value = funcs[measure](nets, lam, convention)
    return Assessment(measure, lam, value, value <= 0.0)


def empirical_cdf_pdf(sample: Sequence[float], bins: int = 50) -> dict[str, list[float]]:
    """CDF at the distinct support points and a density histogram over ``[min, max]``."""
    if bins < 1:
        raise ValueError("bins >= 1 required")
    y = _sorted(sample)
    support, counts = np.unique(y, return_counts=True)
    cdf = np.cumsum(counts) / y.size
    lo, hi = float(y[0]), float(y[-1])
    if hi > lo:
        density, edges = np.histogram(y, bins=bins, range=(lo, hi), density=True)
    else:
        # degenerate law: one unit-width bin holding all the mass
        density, edges = np.array([1.0]), np.array([lo - 0.5, lo + 0.5])
    return {
        "support": support.tolist(),
        "cdf": cdf.tolist(),
        "bin_edges": edges.tolist(),
        "density": density.tolist(),
    }


def risk_report(nets: Sequence[float], levels: Sequence[float] = LEVELS) -> dict:
    """Both measures under both sign conventions at each level, with acceptability flags."""
    out = {}
    for lam in levels:
        entry = {}
        for measure in ("var", "avar"):
            for conv in ("standard", "raw"):
                a = assess_self_financing(nets, measure, lam, conv)
                entry[f"{measure}_{conv}"] = a.value
            entry[f"{measure}_acceptable"] = assess_self_financing(nets, measure, lam).acceptable
        out[f"{lam:.2f}"] = entry
    return out


def risk_report_json(nets: Sequence[float], levels: Sequence[float] = LEVELS) -> str:
    return json.dumps(risk_report(nets, levels), indent=2, sort_keys=True) + "\n"
