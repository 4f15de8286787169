"""Expert rule-based battery strategies and the reference-selection protocol.

Three fixed schedules mirror the strategies the as-built batteries run on:
self-consumption (charge on net export, discharge on net import), time-of-use
peak reduction (morning charge window, constant-rate evening discharge) and
time-of-use rate optimization (evening charge, midday discharge at the power
limit). The reference strategy is the one whose simulated battery consumption
best matches measurements, scored community-wide by RMSE.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Community, HourlySeries
from .devices import BatteryState
from .env import DistrictEnv

SELF_CONSUMPTION = "self_consumption"
TOU_PEAK_REDUCTION = "tou_peak_reduction"
TOU_RATE_OPTIMIZATION = "tou_rate_optimization"
VARIANT_ORDER = (SELF_CONSUMPTION, TOU_PEAK_REDUCTION, TOU_RATE_OPTIMIZATION)


@dataclass(frozen=True)
class RbcStrategy:
    """A schedule variant plus its window/rate parameters.

    ``charge_rate_kwh`` of None means the variant's own rule decides (peak
    reduction fills a third of capacity per window hour; rate optimization
    charges up to remaining headroom).
    """

    variant: str
    charge_start: int = 0
    charge_end: int = 0
    discharge_start: int = 0
    discharge_end: int = 0
    charge_rate_kwh: float | None = None
    discharge_rate_kwh: float | None = None

    def __post_init__(self) -> None:
        if self.variant not in VARIANT_ORDER:
            raise ValueError(f"unknown variant {self.variant!r}")
        for name in ("charge_start", "charge_end", "discharge_start", "discharge_end"):
            v = getattr(self, name)
            if not 0 <= v <= 24:
                raise ValueError(f"{name}={v} outside [0, 24]")


def self_consumption() -> RbcStrategy:
    return RbcStrategy(variant=SELF_CONSUMPTION)


def tou_peak_reduction() -> RbcStrategy:
    """Charge 09:00-12:00, discharge from 18:00 at a constant 2 kWh/h until
    the battery reaches its floor."""
    return RbcStrategy(
        variant=TOU_PEAK_REDUCTION,
        charge_start=9,
        charge_end=12,
        discharge_start=18,
        discharge_end=24,
        discharge_rate_kwh=2.0,
    )


def tou_rate_optimization() -> RbcStrategy:
    """Charge from 19:00 at up to 4.5 kWh/h, discharge from 12:00 at the
    power limit until the floor."""
    return RbcStrategy(
        variant=TOU_RATE_OPTIMIZATION,
        charge_start=19,
        charge_end=24,
        discharge_start=12,
        discharge_end=19,
        charge_rate_kwh=4.5,
    )


def strategy(variant: str) -> RbcStrategy:
    factories = {
        SELF_CONSUMPTION: self_consumption,
        TOU_PEAK_REDUCTION: tou_peak_reduction,
        TOU_RATE_OPTIMIZATION: tou_rate_optimization,
    }
    if variant not in factories:
        raise ValueError(f"unknown RBC variant {variant!r}; choose from {VARIANT_ORDER}")
    return factories[variant]()


def reference_rbc() -> RbcStrategy:
    """The strategy used as expert baseline and exploration guide."""
    return tou_peak_reduction()


def _in_window(hour: int, start: int, end: int) -> bool:
    return start <= hour < end


def rbc_action(
    strat: RbcStrategy, hour: int, net_export_kwh: float, state: BatteryState
) -> float:
    """Action fraction in [-1, 1] for one building at one hour."""
    if not 0 <= hour < 24:
        raise ValueError(f"hour must be in [0, 24), got {hour}")
    cap = state.spec.capacity_kwh
    if strat.variant == SELF_CONSUMPTION:
        # charge exactly the surplus, discharge exactly the net import
        return min(max(net_export_kwh / cap, -1.0), 1.0)
    if strat.variant == TOU_PEAK_REDUCTION:
        if _in_window(hour, strat.charge_start, strat.charge_end):
            rate = strat.charge_rate_kwh if strat.charge_rate_kwh is not None else cap / 3.0
            return min(rate / cap, 1.0)
        if _in_window(hour, strat.discharge_start, strat.discharge_end):
            rate = strat.discharge_rate_kwh if strat.discharge_rate_kwh is not None else 2.0
            return max(-rate / cap, -1.0)
        return 0.0
    # TOU rate optimization
    if _in_window(hour, strat.charge_start, strat.charge_end):
        headroom = (cap - state.stored_kwh) / state.spec.one_way_efficiency
        rate = strat.charge_rate_kwh if strat.charge_rate_kwh is not None else 4.5
        return min(min(rate, headroom) / cap, 1.0)
    if _in_window(hour, strat.discharge_start, strat.discharge_end):
        rate = (
            strat.discharge_rate_kwh
            if strat.discharge_rate_kwh is not None
            else state.spec.power_rating_kw
        )
        return max(-rate / cap, -1.0)
    return 0.0


def run_rbc(community: Community, strat: RbcStrategy) -> np.ndarray:
    """Simulate a strategy over a community; returns the (hours, buildings)
    battery grid-side electricity consumption (charge positive)."""
    env = DistrictEnv(community, trace=True)
    env.reset()
    n_b = env.n_buildings
    for _ in range(env.horizon):
        actions = []
        for i in range(n_b):
            ctx = env.rbc_context(i)
            actions.append(rbc_action(strat, ctx.hour, ctx.net_export_kwh, ctx.battery))
        env.step(actions)
    battery = np.array([row.battery_kwh for row in env.trace_rows])
    return battery.reshape(env.horizon, n_b)


# ---------------------------------------------------------------------------
# Validation against measurements
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ErrorStats:
    """Residual statistics of simulated minus measured battery consumption."""

    rmse: float
    median: float
    variance: float
    n_hours: int
    excluded_days: int

    @property
    def empty(self) -> bool:
        return self.n_hours == 0

    def as_dict(self) -> dict:
        return {
            "rmse": self.rmse,
            "median": self.median,
            "variance": self.variance,
            "n_hours": self.n_hours,
            "excluded_days": self.excluded_days,
        }


def validate_rbc(
    simulated: HourlySeries, measured: HourlySeries, included_days: np.ndarray
) -> ErrorStats:
    """Residual stats on the hours of included days only.

    ``included_days`` is the mask from exclude_low_activity_days (True where
    the day counts). Returns nan statistics when every day is excluded.
    """
    if len(simulated) != len(measured):
        raise ValueError(
            f"length mismatch: simulated={len(simulated)} measured={len(measured)}"
        )
    n_days = len(simulated) // 24
    included_days = np.asarray(included_days, dtype=bool)
    if included_days.shape != (n_days,):
        raise ValueError(f"day mask must have shape ({n_days},), got {included_days.shape}")
    hour_mask = np.repeat(included_days, 24)
    residuals = (simulated.values - measured.values)[hour_mask[: len(simulated)]]
    excluded = int(n_days - included_days.sum())
    if residuals.size == 0:
        return ErrorStats(float("nan"), float("nan"), float("nan"), 0, excluded)
    return ErrorStats(
        rmse=float(np.sqrt(np.mean(residuals**2))),
        median=float(np.median(residuals)),
        variance=float(np.var(residuals)),
        n_hours=int(residuals.size),
        excluded_days=excluded,
    )


def community_rmse(stats: list[ErrorStats]) -> float:
    """Pooled RMSE across buildings, weighting each by its included hours."""
    total_hours = sum(s.n_hours for s in stats)
    if total_hours == 0:
        return float("inf")
    sq = sum(s.rmse**2 * s.n_hours for s in stats if s.n_hours > 0)
    return float(np.sqrt(sq / total_hours))


def community_variance(stats: list[ErrorStats]) -> float:
    total_hours = sum(s.n_hours for s in stats)
    if total_hours == 0:
        return float("inf")
    return float(
        sum(s.variance * s.n_hours for s in stats if s.n_hours > 0) / total_hours
    )


def write_validation_report(
    per_strategy: dict[str, dict[str, ErrorStats]], path
) -> None:
    """JSON report of per-building, per-strategy residual statistics."""
    import json
    from pathlib import Path

    payload = {
        variant: {bid: stats.as_dict() for bid, stats in buildings.items()}
        for variant, buildings in per_strategy.items()
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2))


def select_reference_rbc(per_strategy: dict[str, list[ErrorStats]]) -> RbcStrategy:
    """Pick the strategy minimizing community-pooled RMSE; ties broken by
    pooled variance, then by the fixed variant order."""
    if not per_strategy:
        raise ValueError("no strategies to select from")
    for variant in per_strategy:
        if variant not in VARIANT_ORDER:
            raise ValueError(f"unknown variant {variant!r}")
    ranked = sorted(
        per_strategy.items(),
        key=lambda kv: (
            community_rmse(kv[1]),
            community_variance(kv[1]),
            VARIANT_ORDER.index(kv[0]),
        ),
    )
    return strategy(ranked[0][0])
