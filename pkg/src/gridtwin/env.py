"""Hourly district simulation with guarded battery control.

Each step takes one action fraction in [-1, 1] per building, converts it to a
battery energy request, clips it through the backup rules (loads are always
satisfied first; batteries never discharge more than the net building load),
applies the device limits, and returns per-building observations, rewards and
net electricity consumption. With all-zero actions the trajectory is exactly
the no-battery baseline.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import timedelta
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .data import Community, rate_series
from .devices import BatteryState, battery_transact, initial_state, soc

OBSERVATION_DIM = 21

# observation vector layout
_DAY_ONEHOT = slice(0, 7)       # day of week, Monday first
_HOUR_SIN, _HOUR_COS = 7, 8
_IRRADIANCE = slice(9, 13)      # at t, t+6h, t+12h, t+24h
_SOLAR_GEN = 13
_NET_CONSUMPTION = 14           # previous step's realized value
_NON_SHIFTABLE = 15
_SOC = 16
_CARBON = 17                    # previous step's realized value
_NET_PRICE = 18                 # previous step's realized value
_RATE_6, _RATE_12 = 19, 20

# min-max channel order inside ObservationBounds
BOUND_CHANNELS = (
    "irradiance",
    "solar_generation",
    "net_consumption",
    "non_shiftable",
    "soc",
    "carbon",
    "net_price",
    "rate",
)
_CH = {name: i for i, name in enumerate(BOUND_CHANNELS)}


def _sign(x: float) -> float:
    if x > 0:
        return 1.0
    if x < 0:
        return -1.0
    return 0.0


@dataclass(frozen=True)
class RewardParams:
    """Weights/exponents of the price+emission reward; defaults put all
    weight on price with linear exponents."""

    w1: float = 1.0
    w2: float = 0.0
    e1: int = 1
    e2: int = 1

    def __post_init__(self) -> None:
        if self.w1 < 0 or self.w2 < 0:
            raise ValueError(f"weights must be >= 0, got w1={self.w1} w2={self.w2}")
        for name in ("e1", "e2"):
            e = getattr(self, name)
            if not isinstance(e, (int, np.integer)) or e < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {e!r}")

    def to_dict(self) -> dict:
        return {"w1": self.w1, "w2": self.w2, "e1": self.e1, "e2": self.e2}

    @classmethod
    def from_dict(cls, d: dict) -> "RewardParams":
        return cls(**d)


def compute_reward(
    net_kwh: float,
    rate: float,
    intensity: float,
    soc_fraction: float,
    params: RewardParams,
) -> float:
    """Penalty-scaled cost magnitude.

    C = net * rate and G = net * intensity are the signed hourly price and
    emissions. The penalty p = -(1 + sign(C) * SOC) punishes importing while
    the battery holds charge and exporting while it has headroom; sign(0) = 0
    so a perfectly balanced hour is penalty-neutral.
    """
    c = net_kwh * rate
    g = net_kwh * intensity
    penalty = -(1.0 + _sign(c) * soc_fraction)
    return penalty * abs(params.w1 * c**params.e1 + params.w2 * g**params.e2)


def backup_clip(
    action_fraction: float,
    non_shiftable_kwh: float,
    pv_kwh: float,
    capacity_kwh: float,
) -> float:
    """Convert an action fraction into a feasible battery energy request (kWh).

    Discharge magnitude is clipped to the net positive building load so the
    battery can never export to the grid; charging passes through (the grid
    may charge the battery). Device power/headroom clipping happens later.
    """
    action = min(max(action_fraction, -1.0), 1.0)
    request = action * capacity_kwh
    if request >= 0:
        return request
    net_load = max(0.0, non_shiftable_kwh - pv_kwh)
    return -min(-request, net_load)


class RbcContext(NamedTuple):
    """What a rule-based policy needs to act for one building at one step."""

    hour: int
    net_export_kwh: float
    battery: BatteryState


@dataclass(frozen=True)
class ObservationBounds:
    """Frozen min-max bounds per continuous observation channel.

    Computed from the training split and reused at deployment (values outside
    the bounds are clipped), so transferred policies keep seeing the feature
    scaling they were trained with.
    """

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self) -> None:
        lo = np.asarray(self.lo, dtype=np.float64)
        hi = np.asarray(self.hi, dtype=np.float64)
        if lo.shape != (len(BOUND_CHANNELS),) or hi.shape != (len(BOUND_CHANNELS),):
            raise ValueError(f"bounds must have shape ({len(BOUND_CHANNELS)},)")
        if np.any(hi < lo):
            raise ValueError("bounds must satisfy hi >= lo")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def normalize(self, channel: str, value: float) -> float:
        i = _CH[channel]
        span = self.hi[i] - self.lo[i]
        if span <= 0:
            return 0.0
        x = (value - self.lo[i]) / span
        return min(max(x, 0.0), 1.0)

    def to_dict(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ObservationBounds":
        return cls(np.asarray(d["lo"]), np.asarray(d["hi"]))


@dataclass
class StepResult:
    observations: list[np.ndarray]
    rewards: np.ndarray
    net_consumption: np.ndarray
    done: bool


@dataclass
class TraceRow:
    h: int
    building_id: str
    action: float
    battery_kwh: float
    soc: float
    net_kwh: float
    reward: float


class DistrictEnv:
    """Stepped simulation of a community; one instance per simulation lane.

    Instances share no mutable state, so independent lanes (one per agent or
    experiment cell) can run in parallel processes and merge results by value.
    """

    def __init__(
        self,
        community: Community,
        reward_params: RewardParams | None = None,
        bounds: list[ObservationBounds] | None = None,
        bounds_window: tuple[int, int] | None = None,
        trace: bool = False,
    ):
        self.community = community
        self.reward_params = reward_params or RewardParams()
        self.n = community.hours
        self.n_buildings = len(community.buildings)
        start = community.start
        self.rates = rate_series(community.tariff, start, self.n)
        self.intensities = community.carbon.values
        self.irradiance = community.weather.values
        self._ns = [b.non_shiftable.values for b in community.buildings]
        self._pv = [b.pv_generation.values for b in community.buildings]
        self._baseline = [ns - pv for ns, pv in zip(self._ns, self._pv)]
        self._specs = [b.battery_spec for b in community.buildings]
        self.ids = community.building_ids()

        # calendar features, one row per hour
        hours = np.array([(start + timedelta(hours=h)).hour for h in range(self.n)])
        weekdays = np.array(
            [(start + timedelta(hours=h)).weekday() for h in range(self.n)]
        )
        cal = np.zeros((self.n, 9))
        cal[np.arange(self.n), weekdays] = 1.0
        cal[:, _HOUR_SIN] = np.sin(2 * np.pi * hours / 24.0)
        cal[:, _HOUR_COS] = np.cos(2 * np.pi * hours / 24.0)
        self._calendar = cal
        self._hour_of_day = hours

        if bounds is not None:
            if len(bounds) != self.n_buildings:
                raise ValueError("need one ObservationBounds per building")
            self._bounds = list(bounds)
        else:
            w = bounds_window or (0, self.n)
            self._bounds = [self._default_bounds(i, w) for i in range(self.n_buildings)]
        self._static_cache = [self._build_static_cache(i) for i in range(self.n_buildings)]

        self.trace_enabled = trace
        self.trace_rows: list[TraceRow] = []
        self.h = 0
        self._states: list[BatteryState] = []
        self._last_net = np.zeros(self.n_buildings)
        self._last_price = np.zeros(self.n_buildings)
        self._last_carbon = np.zeros(self.n_buildings)
        self._net_history: list[np.ndarray] = []
        self.reset()

    # -- bounds ------------------------------------------------------------

    def _default_bounds(self, i: int, window: tuple[int, int]) -> ObservationBounds:
        h0, h1 = window
        if not 0 <= h0 < h1 <= self.n:
            raise ValueError(f"bounds window [{h0}, {h1}) outside horizon {self.n}")
        sl = slice(h0, h1)
        base = self._baseline[i][sl]
        lo = np.empty(len(BOUND_CHANNELS))
        hi = np.empty(len(BOUND_CHANNELS))

        def put(channel: str, values: np.ndarray) -> None:
            lo[_CH[channel]] = values.min()
            hi[_CH[channel]] = values.max()

        put("irradiance", self.irradiance[sl])
        put("solar_generation", self._pv[i][sl])
        put("net_consumption", base)
        put("non_shiftable", self._ns[i][sl])
        lo[_CH["soc"]], hi[_CH["soc"]] = 0.0, 1.0
        put("carbon", base * self.intensities[sl])
        put("net_price", base * self.rates[sl])
        put("rate", self.rates[sl])
        return ObservationBounds(lo, hi)

    def observation_bounds(self, i: int) -> ObservationBounds:
        return self._bounds[i]

    def set_observation_bounds(self, i: int, bounds: ObservationBounds) -> None:
        """Replace one building's frozen normalization bounds (policy transfer
        keeps the source building's scaling)."""
        self._bounds[i] = bounds
        self._static_cache[i] = self._build_static_cache(i)

    def _build_static_cache(self, i: int) -> np.ndarray:
        """Per-hour normalized columns that do not depend on the trajectory:
        irradiance at t/+6/+12/+24, solar generation, non-shiftable load and
        the rate forecasts (+6, +12). Forecasts wrap modulo the horizon."""
        b = self._bounds[i]
        cache = np.empty((self.n, 8))
        idx = np.arange(self.n)
        for k, lag in enumerate((0, 6, 12, 24)):
            cache[:, k] = self._norm_array(b, "irradiance", self.irradiance[(idx + lag) % self.n])
        cache[:, 4] = self._norm_array(b, "solar_generation", self._pv[i])
        cache[:, 5] = self._norm_array(b, "non_shiftable", self._ns[i])
        cache[:, 6] = self._norm_array(b, "rate", self.rates[(idx + 6) % self.n])
        cache[:, 7] = self._norm_array(b, "rate", self.rates[(idx + 12) % self.n])
        return cache

    @staticmethod
    def _norm_array(b: ObservationBounds, channel: str, values: np.ndarray) -> np.ndarray:
        i = _CH[channel]
        span = b.hi[i] - b.lo[i]
        if span <= 0:
            return np.zeros_like(values)
        return np.clip((values - b.lo[i]) / span, 0.0, 1.0)

    # -- episode -----------------------------------------------------------

    @property
    def horizon(self) -> int:
        return self.n

    @property
    def done(self) -> bool:
        return self.h >= self.n

    def battery_state(self, i: int) -> BatteryState:
        return self._states[i]

    def reset(self) -> list[np.ndarray]:
        self.h = 0
        self._states = [initial_state(spec) for spec in self._specs]
        self._last_net[:] = 0.0
        self._last_price[:] = 0.0
        self._last_carbon[:] = 0.0
        self._net_history = []
        self.trace_rows = []
        return [self.encode_observation(i, 0) for i in range(self.n_buildings)]

    def encode_observation(self, i: int, h: int) -> np.ndarray:
        """21-dim observation for building i at hour h (wraps modulo horizon).

        Outcome components (net consumption, carbon, net price) are the
        previous step's realized values; everything continuous is min-max
        normalized into [0, 1] with the building's frozen bounds.
        """
        h = h % self.n
        b = self._bounds[i]
        obs = np.empty(OBSERVATION_DIM)
        obs[:9] = self._calendar[h]
        obs[9:14] = self._static_cache[i][h, :5]
        obs[_NET_CONSUMPTION] = b.normalize("net_consumption", self._last_net[i])
        obs[_NON_SHIFTABLE] = self._static_cache[i][h, 5]
        obs[_SOC] = b.normalize("soc", soc(self._states[i]))
        obs[_CARBON] = b.normalize("carbon", self._last_carbon[i])
        obs[_NET_PRICE] = b.normalize("net_price", self._last_price[i])
        obs[_RATE_6] = self._static_cache[i][h, 6]
        obs[_RATE_12] = self._static_cache[i][h, 7]
        return obs

    def rbc_context(self, i: int) -> RbcContext:
        if self.done:
            raise RuntimeError("episode is done; reset() before acting")
        h = self.h
        return RbcContext(
            hour=int(self._hour_of_day[h]),
            net_export_kwh=float(self._pv[i][h] - self._ns[i][h]),
            battery=self._states[i],
        )

    def step(self, actions) -> StepResult:
        if self.done:
            raise RuntimeError("step() called after episode end; reset() first")
        actions = np.asarray(actions, dtype=np.float64).reshape(-1)
        if actions.shape != (self.n_buildings,):
            raise ValueError(
                f"expected {self.n_buildings} actions, got shape {actions.shape}"
            )
        h = self.h
        rewards = np.empty(self.n_buildings)
        nets = np.empty(self.n_buildings)
        for i in range(self.n_buildings):
            ns = self._ns[i][h]
            pv = self._pv[i][h]
            request = backup_clip(float(actions[i]), ns, pv, self._specs[i].capacity_kwh)
            new_state, grid_side = battery_transact(self._states[i], request, 1.0)
            self._states[i] = new_state
            net = ns - pv + grid_side
            soc_after = soc(new_state)
            rewards[i] = compute_reward(
                net, self.rates[h], self.intensities[h], soc_after, self.reward_params
            )
            nets[i] = net
            self._last_net[i] = net
            self._last_price[i] = net * self.rates[h]
            self._last_carbon[i] = net * self.intensities[h]
            if self.trace_enabled:
                self.trace_rows.append(
                    TraceRow(
                        h=h,
                        building_id=self.ids[i],
                        action=float(actions[i]),
                        battery_kwh=grid_side,
                        soc=soc_after,
                        net_kwh=net,
                        reward=float(rewards[i]),
                    )
                )
        self._net_history.append(nets.copy())
        self.h += 1
        done = self.done
        observations = [self.encode_observation(i, self.h) for i in range(self.n_buildings)]
        return StepResult(
            observations=observations, rewards=rewards, net_consumption=nets, done=done
        )

    def episode_net(self) -> np.ndarray:
        """(steps_taken, n_buildings) net consumption so far this episode."""
        if not self._net_history:
            return np.zeros((0, self.n_buildings))
        return np.vstack(self._net_history)

    def write_trace(self, path: str | Path) -> None:
        write_trace_csv(self.trace_rows, path)


def write_trace_csv(rows: list[TraceRow], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["h", "building_id", "action", "battery_kWh", "soc", "net_kWh", "reward"])
        for row in rows:
            writer.writerow(
                [row.h, row.building_id, row.action, row.battery_kwh, row.soc, row.net_kwh, row.reward]
            )
