"""Battery device model with capacity, power, efficiency and depth-of-discharge limits.

Transactions are pure: they take a state and a signed energy request (kWh,
charge positive) and return the new state plus the signed grid-side energy
that actually flowed. Requests are clipped, never rejected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

_STATE_TOL = 1e-9


@dataclass(frozen=True)
class BatterySpec:
    capacity_kwh: float = 6.4
    power_rating_kw: float = 5.0
    round_trip_efficiency: float = 0.90
    depth_of_discharge: float = 0.75

    def __post_init__(self) -> None:
        if self.capacity_kwh <= 0:
            raise ValueError(f"capacity_kwh must be > 0, got {self.capacity_kwh}")
        if self.power_rating_kw <= 0:
            raise ValueError(f"power_rating_kw must be > 0, got {self.power_rating_kw}")
        if not 0 < self.round_trip_efficiency <= 1:
            raise ValueError(f"round_trip_efficiency must be in (0, 1], got {self.round_trip_efficiency}")
        if not 0 < self.depth_of_discharge <= 1:
            raise ValueError(f"depth_of_discharge must be in (0, 1], got {self.depth_of_discharge}")

    @property
    def floor_kwh(self) -> float:
        """Lowest allowed stored energy: (1 - DoD) * capacity."""
        return (1.0 - self.depth_of_discharge) * self.capacity_kwh

    @property
    def one_way_efficiency(self) -> float:
        # sqrt split so that a full charge/discharge cycle loses exactly
        # (1 - round_trip_efficiency) of the AC-side energy
        return math.sqrt(self.round_trip_efficiency)

    def to_dict(self) -> dict:
        return {
            "capacity_kwh": self.capacity_kwh,
            "power_rating_kw": self.power_rating_kw,
            "round_trip_efficiency": self.round_trip_efficiency,
            "depth_of_discharge": self.depth_of_discharge,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BatterySpec":
        return cls(**d)


@dataclass(frozen=True)
class BatteryState:
    stored_kwh: float
    spec: BatterySpec

    def __post_init__(self) -> None:
        lo = self.spec.floor_kwh - _STATE_TOL
        hi = self.spec.capacity_kwh + _STATE_TOL
        if not lo <= self.stored_kwh <= hi:
            raise ValueError(
                f"stored_kwh {self.stored_kwh} outside [{self.spec.floor_kwh}, {self.spec.capacity_kwh}]"
            )


def initial_state(spec: BatterySpec) -> BatteryState:
    """Fresh battery at the discharge floor (the state it is reset to)."""
    return BatteryState(stored_kwh=spec.floor_kwh, spec=spec)


def soc(state: BatteryState) -> float:
    """Stored energy as a fraction of capacity; lives in [1 - DoD, 1]."""
    return state.stored_kwh / state.spec.capacity_kwh


def battery_transact(
    state: BatteryState, requested_kwh: float, dt_hours: float = 1.0
) -> tuple[BatteryState, float]:
    """Apply a signed grid-side energy request (charge positive) over ``dt_hours``.

    The request is clipped to the power rating and to the capacity/floor
    headroom. Charging stores ``e * sqrt(eta)`` per ``e`` drawn from the grid;
    discharging drains ``e / sqrt(eta)`` from storage per ``e`` delivered, so
    a full cycle returns exactly ``eta`` of the AC-side energy.

    Returns (new_state, grid_side_kwh) where grid_side is positive when the
    battery draws energy and negative when it supplies energy; it equals the
    clipped request, so its magnitude never exceeds power_rating * dt_hours.
    """
    if dt_hours <= 0:
        raise ValueError(f"dt_hours must be > 0, got {dt_hours}")
    spec = state.spec
    eta = spec.one_way_efficiency
    if requested_kwh >= 0:
        e = min(
            requested_kwh,
            spec.power_rating_kw * dt_hours,
            (spec.capacity_kwh - state.stored_kwh) / eta,
        )
        e = max(e, 0.0)
        stored = min(state.stored_kwh + e * eta, spec.capacity_kwh)
        return BatteryState(stored, spec), e
    delivered = min(
        -requested_kwh,
        spec.power_rating_kw * dt_hours,
        (state.stored_kwh - spec.floor_kwh) * eta,
    )
    delivered = max(delivered, 0.0)
    stored = max(state.stored_kwh - delivered / eta, spec.floor_kwh)
    return BatteryState(stored, spec), -delivered
