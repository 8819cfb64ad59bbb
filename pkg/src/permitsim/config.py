"""Model primitives, policy parameters and their validation.

Everything here is an immutable value object. ``validate`` reports every
violated invariant as data instead of raising, so callers can decide how
loudly to fail; ``load_config`` is the strict entry point used by the CLI.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Sequence


class Tech(str, enum.Enum):
    OLD = "old"
    NEW = "new"


class Shock(str, enum.Enum):
    UP = "up"
    DOWN = "down"


NEVER = None  # adoption time of a firm that never switches


class ConfigError(ValueError):
    """Raised when a configuration document is malformed or invalid."""

    def __init__(self, message: str, violations: Sequence[str] = ()):
        super().__init__(message)
        self.violations = list(violations)


@dataclass(frozen=True)
class Allocation:
    """Per-firm permit schedule.

    Either a parametric pair per firm (``N(t) = beta * (t + 1) ** alpha``) or an
    explicit ``schedule[firm][t]`` table.
    """

    alpha: tuple[float, ...] = ()
    beta: tuple[float, ...] = ()
    schedule: tuple[tuple[float, ...], ...] | None = None

    def permits(self, firm: int, t: int) -> float:
        if self.schedule is not None:
            return self.schedule[firm][t]
        return self.beta[firm] * (t + 1) ** self.alpha[firm]

    @property
    def n_firms(self) -> int:
        if self.schedule is not None:
            return len(self.schedule)
        return len(self.alpha)


@dataclass(frozen=True)
class PolicyParams:
    """The regulator's choice variables: horizon, allocation, penalty, price support."""

    horizon: int
    penalty: float
    price_support: float
    allocation: Allocation

    @property
    def ec4p(self) -> bool:
        return self.price_support > 0.0

    def with_price_support(self, price_support: float) -> PolicyParams:
        return replace(self, price_support=float(price_support))


@dataclass(frozen=True)
class FirmParams:
    q0: float
    u_old: float
    d_old: float
    u_new: float
    d_new: float
    cost_new: float
    s_up: float
    s_down: float
    risk_aversion: float = 0.0


@dataclass(frozen=True)
class EconomyParams:
    q: tuple[float, ...]
    r: float
    rho: float


@dataclass(frozen=True)
class TechnologyVector:
    statuses: tuple[Tech, ...]

    @classmethod
    def from_adoption_times(cls, times: Sequence[int | None], t: int) -> TechnologyVector:
        return cls(tuple(Tech.NEW if tau is not None and tau <= t else Tech.OLD for tau in times))

    @property
    def n_new(self) -> int:
        return sum(s is Tech.NEW for s in self.statuses)

    def __len__(self) -> int:
        return len(self.statuses)

    def __getitem__(self, i: int) -> Tech:
        return self.statuses[i]


@dataclass(frozen=True)
class EconomyPath:
    shocks: tuple[Shock, ...]

    @classmethod
    def from_string(cls, s: str) -> EconomyPath:
        """Parse ``"uudu"``-style strings."""
        table = {"u": Shock.UP, "d": Shock.DOWN}
        try:
            return cls(tuple(table[c] for c in s.strip().lower()))
        except KeyError as exc:
            raise ValueError(f"bad shock symbol {exc.args[0]!r} in path {s!r}") from None

    def __str__(self) -> str:
        return "".join("u" if s is Shock.UP else "d" for s in self.shocks)

    def __len__(self) -> int:
        return len(self.shocks)


@dataclass(frozen=True)
class Options:
    """Runtime switches for the places where the model admits two readings."""

    mode: str = "expected"  # or "conditional"
    matching: str = "proportional"  # or "stochastic"
    compound_payoffs: bool = False
    scenario_budget: int = 10**7
    risk_convention: str = "standard"  # or "raw"


@dataclass(frozen=True)
class ModelParams:
    policy: PolicyParams
    firms: tuple[FirmParams, ...]
    economy: EconomyParams
    options: Options = field(default_factory=Options)

    @property
    def m(self) -> int:
        return len(self.firms)

    @property
    def T(self) -> int:
        return self.policy.horizon

    def with_price_support(self, price_support: float) -> ModelParams:
        return replace(self, policy=self.policy.with_price_support(price_support))

    def with_options(self, **changes: Any) -> ModelParams:
        return replace(self, options=replace(self.options, **changes))

    def to_dict(self) -> dict[str, Any]:
        return to_document(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def _check_firm(path: str, f: FirmParams) -> list[str]:
    out = []
    if not f.u_old > f.d_old:
        out.append(f"{path}.u_old: u_old > d_old required")
    if not f.d_old >= 1.0:
        out.append(f"{path}.d_old: d_old >= 1 required")
    if not f.u_new > f.d_new:
        out.append(f"{path}.u_new: u_new > d_new required")
    if not f.d_new >= 1.0:
        out.append(f"{path}.d_new: d_new >= 1 required")
    if not f.u_new <= f.u_old:
        out.append(f"{path}.u_new: new technology must not raise the up factor (u_new <= u_old)")
    if not f.d_new <= f.d_old:
        out.append(f"{path}.d_new: new technology must not raise the down factor (d_new <= d_old)")
    if not f.q0 > 0:
        out.append(f"{path}.q0: initial emissions must be positive")
    if not f.cost_new >= 0:
        out.append(f"{path}.cost_new: adoption cost must be non-negative")
    if not f.s_up > 0:
        out.append(f"{path}.s_up: profits must be positive")
    if not f.s_down > 0:
        out.append(f"{path}.s_down: profits must be positive")
    if not f.risk_aversion >= 0:
        out.append(f"{path}.risk_aversion: must be non-negative")
    return out


def validate(
    policy: PolicyParams,
    firms: Sequence[FirmParams],
    economy: EconomyParams,
) -> ValidationReport:
    """Check every model invariant; returns the full list of violations."""
    v: list[str] = []
    T = policy.horizon
    if not (isinstance(T, int) and T >= 1):
        v.append("policy.horizon: T >= 1 required")
    if not policy.penalty > 0:
        v.append("policy.penalty: penalty must be positive")
    if not policy.price_support >= 0:
        v.append("policy.price_support: price_support must be non-negative")
    if not policy.price_support < policy.penalty:
        v.append("policy.price_support: price_support must be strictly below penalty")

    alloc = policy.allocation
    if alloc.schedule is not None:
        if len(alloc.schedule) != len(firms):
            v.append("policy.allocation.schedule: one row per firm required")
        for i, row in enumerate(alloc.schedule):
            if isinstance(T, int) and len(row) < T:
                v.append(f"policy.allocation.schedule[{i}]: needs at least T={T} entries")
            if any(not x >= 0 for x in row):
                v.append(f"policy.allocation.schedule[{i}]: permits must be non-negative")
    else:
        if len(alloc.alpha) != len(firms) or len(alloc.beta) != len(firms):
            v.append("policy.allocation: one (alpha, beta) pair per firm required")
        for i, a in enumerate(alloc.alpha):
            if not a <= 0:
                v.append(f"policy.allocation.alpha[{i}]: alpha <= 0 required (non-increasing schedule)")
        for i, b in enumerate(alloc.beta):
            if not b > 0:
                v.append(f"policy.allocation.beta[{i}]: beta > 0 required")

    if not firms:
        v.append("firms: at least one firm required")
    for i, f in enumerate(firms):
        v.extend(_check_firm(f"firms[{i}]", f))

    if isinstance(T, int) and len(economy.q) != T:
        v.append(f"economy.q: length {len(economy.q)} differs from horizon {T}")
    for t, qt in enumerate(economy.q):
        if not 0.0 <= qt <= 1.0:
            v.append(f"economy.q[{t}]: probability must lie in [0, 1]")
    if not economy.r >= 0:
        v.append("economy.r: riskless rate must be non-negative")
    if not economy.rho > economy.r:
        v.append("economy.rho: rho > r required")
    return ValidationReport(tuple(v))


def validate_options(options: Options) -> list[str]:
    v = []
    if options.mode not in ("expected", "conditional"):
        v.append(f"options.mode: unknown mode {options.mode!r}")
    if options.matching not in ("proportional", "stochastic"):
        v.append(f"options.matching: unknown matching {options.matching!r}")
    if options.risk_convention not in ("standard", "raw"):
        v.append(f"options.risk_convention: unknown convention {options.risk_convention!r}")
    if options.scenario_budget < 1:
        v.append("options.scenario_budget: must be positive")
    return v


# ---------------------------------------------------------------------------
# heterogeneity by interpolation
# ---------------------------------------------------------------------------

_FIRM_FIELDS = tuple(f.name for f in fields(FirmParams))


def interpolate(hi: float, lo: float, m: int) -> list[float]:
    """``m`` points from ``hi`` (index 0) to ``lo`` (index m-1)."""
    if m < 1:
        raise ValueError("m >= 1 required")
    if m == 1:
        return [float(hi)]
    return [hi + (lo - hi) * i / (m - 1) for i in range(m)]


def firm_interpolate(lo: dict[str, float], hi: dict[str, float], m: int) -> list[FirmParams]:
    """Build ``m`` firms whose fields run linearly from ``hi`` (firm 0) to ``lo`` (firm m-1).

    Fields missing from both endpoints fall back to the dataclass defaults.
    """
    if m < 1:
        raise ValueError("m >= 1 required")
    unknown = (set(lo) | set(hi)) - set(_FIRM_FIELDS)
    if unknown:
        raise ValueError(f"unknown firm fields: {sorted(unknown)}")
    columns = {}
    for name in _FIRM_FIELDS:
        if name in hi or name in lo:
            a = hi.get(name, lo.get(name))
            b = lo.get(name, hi.get(name))
            columns[name] = interpolate(a, b, m)
    return [FirmParams(**{k: v[i] for k, v in columns.items()}) for i in range(m)]


# ---------------------------------------------------------------------------
# JSON documents
# ---------------------------------------------------------------------------


def _float_list(x: Any, n: int | None = None, name: str = "") -> tuple[float, ...]:
    if isinstance(x, (int, float)):
        if n is None:
            raise ConfigError(f"{name}: scalar given where a list is required")
        return tuple(float(x) for _ in range(n))
    try:
        return tuple(float(v) for v in x)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected a number or list of numbers") from None


def _parse_allocation(doc: dict[str, Any], m: int) -> Allocation:
    if "schedule" in doc:
        return Allocation(schedule=tuple(_float_list(row, name="allocation.schedule") for row in doc["schedule"]))
    if "alpha_bounds" in doc or "beta_bounds" in doc:
        try:
            a_hi, a_lo = doc["alpha_bounds"]
            b_hi, b_lo = doc["beta_bounds"]
        except (KeyError, ValueError):
            raise ConfigError("allocation: alpha_bounds and beta_bounds must both be [first, last] pairs") from None
        return Allocation(alpha=tuple(interpolate(a_hi, a_lo, m)), beta=tuple(interpolate(b_hi, b_lo, m)))
    if "alpha" in doc and "beta" in doc:
        return Allocation(alpha=_float_list(doc["alpha"], m, "allocation.alpha"),
                          beta=_float_list(doc["beta"], m, "allocation.beta"))
    raise ConfigError("allocation: give schedule, alpha/beta, or alpha_bounds/beta_bounds")


def _parse_firms(doc: dict[str, Any]) -> list[FirmParams]:
    if "explicit" in doc:
        try:
            return [FirmParams(**{k: float(v) for k, v in f.items()}) for f in doc["explicit"]]
        except TypeError as exc:
            raise ConfigError(f"firms.explicit: {exc}") from None
    if "bounds" in doc:
        if "count" not in doc:
            raise ConfigError("firms: bounds requires count")
        b = doc["bounds"]
        if "hi" not in b or "lo" not in b:
            raise ConfigError("firms.bounds: needs 'hi' (first firm) and 'lo' (last firm) records")
        try:
            return firm_interpolate(b["lo"], b["hi"], int(doc["count"]))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"firms.bounds: {exc}") from None
    raise ConfigError("firms: give either 'explicit' or 'bounds' + 'count'")


def from_document(doc: dict[str, Any], strict: bool = True) -> ModelParams:
    """Build :class:`ModelParams` from a parsed JSON configuration document."""
    for key in ("policy", "economy", "firms"):
        if key not in doc:
            raise ConfigError(f"missing top-level key {key!r}")
    firms = _parse_firms(doc["firms"])
    m = len(firms)
    pol = doc["policy"]
    try:
        T = int(pol["horizon"])
        policy = PolicyParams(
            horizon=T,
            penalty=float(pol["penalty"]),
            price_support=float(pol.get("price_support", 0.0)),
            allocation=_parse_allocation(pol["allocation"], m),
        )
    except KeyError as exc:
        raise ConfigError(f"policy: missing {exc.args[0]!r}") from None
    eco = doc["economy"]
    try:
        economy = EconomyParams(q=_float_list(eco["q"], T, "economy.q"), r=float(eco["r"]), rho=float(eco["rho"]))
    except KeyError as exc:
        raise ConfigError(f"economy: missing {exc.args[0]!r}") from None
    opt_doc = doc.get("options", {})
    try:
        options = Options(**opt_doc)
    except TypeError as exc:
        raise ConfigError(f"options: {exc}") from None
    params = ModelParams(policy, tuple(firms), economy, options)
    if strict:
        report = validate(params.policy, params.firms, params.economy)
        problems = list(report.violations) + validate_options(options)
        if problems:
            raise ConfigError("invalid configuration:\n  " + "\n  ".join(problems), problems)
    return params


def load_config(path: str | Path, strict: bool = True) -> ModelParams:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return from_document(doc, strict=strict)


def to_document(params: ModelParams) -> dict[str, Any]:
    """Fully resolved (explicit) document; round-trips through :func:`from_document`."""
    alloc = params.policy.allocation
    if alloc.schedule is not None:
        alloc_doc: dict[str, Any] = {"schedule": [list(r) for r in alloc.schedule]}
    else:
        alloc_doc = {"alpha": list(alloc.alpha), "beta": list(alloc.beta)}
    return {
        "policy": {
            "horizon": params.policy.horizon,
            "penalty": params.policy.penalty,
            "price_support": params.policy.price_support,
            "allocation": alloc_doc,
        },
        "economy": {"q": list(params.economy.q), "r": params.economy.r, "rho": params.economy.rho},
        "firms": {"explicit": [asdict(f) for f in params.firms]},
        "options": asdict(params.options),
    }


# ---------------------------------------------------------------------------
# the five-firm, eight-period reference scenario
# ---------------------------------------------------------------------------

REFERENCE_BOUNDS = {
    # firm 0: higher emissions, higher adoption cost; firm m-1: the opposite
    "hi": {"q0": 100.0, "u_old": 1.15, "d_old": 1.07, "u_new": 1.10, "d_new": 1.04,
           "cost_new": 100.0, "s_up": 10.0, "s_down": 5.0, "risk_aversion": 0.01},
    "lo": {"q0": 100.0, "u_old": 1.13, "d_old": 1.05, "u_new": 1.08, "d_new": 1.02,
           "cost_new": 80.0, "s_up": 10.0, "s_down": 5.0, "risk_aversion": 0.01},
}


def reference_document(price_support: float = 5.0, m: int = 5, horizon: int = 8) -> dict[str, Any]:
    return {
        "policy": {
            "horizon": horizon,
            "penalty": 10.0,
            "price_support": price_support,
            "allocation": {"alpha_bounds": [-0.4, -1.5], "beta_bounds": [25.0, 20.0]},
        },
        "economy": {"q": 0.5, "r": 0.02, "rho": 0.05},
        "firms": {"bounds": REFERENCE_BOUNDS, "count": m},
    }


def reference_scenario(price_support: float = 5.0, **options: Any) -> ModelParams:
    """Five heterogeneous firms over eight periods, P = 10, Q(0) = 100, q = 0.5."""
    params = from_document(reference_document(price_support))
    return params.with_options(**options) if options else params
