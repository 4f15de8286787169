"""Time-series ingestion, derivation and synthesis for the district digital twin.

Handles meter-resolution power-to-energy resampling, derivation of the
non-shiftable end-use load from main/battery/PV meter channels, the seasonal
time-of-use tariff, low-activity day masking, community CSV/JSON loading, and
a seeded synthetic community generator used when measured data is unavailable.

All series are immutable value objects wrapping float64 arrays; every function
here is pure and safe to call from any thread.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np
import pandas as pd

from .devices import BatterySpec

logger = logging.getLogger(__name__)

MINUTES_PER_HOUR = 60
HOURS_PER_DAY = 24
DEFAULT_EXCLUSION_THRESHOLD_KWH = 1.0


class SchemaError(ValueError):
    """An input file or series violates the expected schema."""


def _as_float_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise SchemaError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise SchemaError(f"{name} contains a non-finite value at index {bad}")
    return arr


@dataclass(frozen=True)
class MinuteSeries:
    """Power samples (kW) at 1-minute resolution."""

    values: np.ndarray
    start: datetime

    def __post_init__(self) -> None:
        arr = _as_float_array(self.values, "MinuteSeries.values")
        if len(arr) % MINUTES_PER_HOUR != 0:
            raise SchemaError(
                f"MinuteSeries length {len(arr)} is not divisible by {MINUTES_PER_HOUR}"
            )
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class HourlySeries:
    """Energy samples (kWh) at hourly resolution."""

    values: np.ndarray
    start: datetime

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _as_float_array(self.values, "HourlySeries.values"))

    def __len__(self) -> int:
        return len(self.values)

    def window(self, h0: int, h1: int) -> "HourlySeries":
        """Sub-series for hours [h0, h1), with the start timestamp shifted."""
        if not 0 <= h0 < h1 <= len(self):
            raise ValueError(f"window [{h0}, {h1}) outside series length {len(self)}")
        return HourlySeries(self.values[h0:h1].copy(), self.start + timedelta(hours=h0))


@dataclass(frozen=True)
class CarbonSeries:
    """Grid carbon intensity, kg CO2e per kWh, hourly."""

    values: np.ndarray
    start: datetime

    def __post_init__(self) -> None:
        arr = _as_float_array(self.values, "CarbonSeries.values")
        if np.any(arr < 0):
            raise SchemaError("CarbonSeries values must be >= 0")
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return len(self.values)

    def window(self, h0: int, h1: int) -> "CarbonSeries":
        return CarbonSeries(self.values[h0:h1].copy(), self.start + timedelta(hours=h0))


@dataclass(frozen=True)
class WeatherSeries:
    """Direct solar irradiance, W/m2, hourly."""

    values: np.ndarray
    start: datetime

    def __post_init__(self) -> None:
        arr = _as_float_array(self.values, "WeatherSeries.values")
        if np.any(arr < 0):
            raise SchemaError("WeatherSeries values must be >= 0")
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return len(self.values)

    def window(self, h0: int, h1: int) -> "WeatherSeries":
        return WeatherSeries(self.values[h0:h1].copy(), self.start + timedelta(hours=h0))


def resample_power_to_energy(p: MinuteSeries) -> HourlySeries:
    """Convert 1-minute power (kW) to hourly energy (kWh): E_h = sum(P_m / 60)."""
    blocks = p.values.reshape(-1, MINUTES_PER_HOUR)
    return HourlySeries(blocks.sum(axis=1) / MINUTES_PER_HOUR, p.start)


def derive_non_shiftable(
    main: HourlySeries, battery: HourlySeries, pv: HourlySeries
) -> HourlySeries:
    """Non-shiftable end-use load from raw meter channels.

    ``pv`` must be in the raw meter convention (supply negative). Elementwise
    the result is ``main - (battery + pv)``, clamped at zero; clamp events are
    logged because they indicate measurement noise.
    """
    if not len(main) == len(battery) == len(pv):
        raise SchemaError(
            f"series length mismatch: main={len(main)} battery={len(battery)} pv={len(pv)}"
        )
    raw = main.values - (battery.values + pv.values)
    clamped = np.flatnonzero(raw < 0)
    if clamped.size:
        logger.warning(
            "derive_non_shiftable clamped %d negative hours to 0 (first at h=%d, value %.6f)",
            clamped.size,
            int(clamped[0]),
            float(raw[clamped[0]]),
        )
    return HourlySeries(np.maximum(raw, 0.0), main.start)


def exclude_low_activity_days(
    battery: HourlySeries, threshold_kwh: float = DEFAULT_EXCLUSION_THRESHOLD_KWH
) -> np.ndarray:
    """Day mask over whole days: True where the day is INCLUDED.

    A day is excluded when the absolute sum of its battery electricity
    consumption is <= threshold_kwh (default 1.0).
    """
    n = len(battery)
    if n % HOURS_PER_DAY != 0:
        raise SchemaError(f"series length {n} is not a whole number of days")
    daily = np.abs(battery.values).reshape(-1, HOURS_PER_DAY).sum(axis=1)
    return daily > threshold_kwh


# ---------------------------------------------------------------------------
# Tariff
# ---------------------------------------------------------------------------

WEEKDAY = "weekday"
WEEKEND = "weekend"
_DAY_TYPES = (WEEKDAY, WEEKEND)


@dataclass(frozen=True)
class TariffBand:
    """One rate cell: a set of months, a day type and a half-open hour range.

    ``hour_start``/``hour_end`` wrap past midnight when end <= start
    (e.g. 21 -> 8 covers hours 21..23 and 0..7).
    """

    months: tuple[int, ...]
    day_type: str
    hour_start: int
    hour_end: int
    rate: float

    def __post_init__(self) -> None:
        if not self.months or any(m < 1 or m > 12 for m in self.months):
            raise SchemaError(f"invalid months {self.months}")
        if self.day_type not in _DAY_TYPES:
            raise SchemaError(f"day_type must be one of {_DAY_TYPES}, got {self.day_type!r}")
        if not (0 <= self.hour_start < 24 and 0 < self.hour_end <= 24):
            raise SchemaError(f"hours must lie in [0, 24], got [{self.hour_start}, {self.hour_end})")
        if self.rate <= 0:
            raise SchemaError(f"rate must be > 0, got {self.rate}")

    def hours(self) -> tuple[int, ...]:
        if self.hour_end > self.hour_start:
            return tuple(range(self.hour_start, self.hour_end))
        return tuple(range(self.hour_start, 24)) + tuple(range(0, self.hour_end))


@dataclass(frozen=True)
class Tariff:
    """Seasonal time-of-use rate plan; total over (month, day type, hour)."""

    bands: tuple[TariffBand, ...]
    _table: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        table = np.full((13, 2, 24), np.nan)
        for band in self.bands:
            di = _DAY_TYPES.index(band.day_type)
            for m in band.months:
                for h in band.hours():
                    if not np.isnan(table[m, di, h]):
                        raise SchemaError(
                            f"tariff overlap at month={m} {band.day_type} hour={h}"
                        )
                    table[m, di, h] = band.rate
        if np.any(np.isnan(table[1:])):
            m, di, h = [int(x[0]) for x in np.nonzero(np.isnan(table[1:]))]
            raise SchemaError(
                f"tariff is not total: no rate for month={m + 1} {_DAY_TYPES[di]} hour={h}"
            )
        object.__setattr__(self, "_table", table)

    def rate(self, month: int, is_weekend: bool, hour: int) -> float:
        return float(self._table[month, 1 if is_weekend else 0, hour])

    def to_dict(self) -> dict:
        return {
            "bands": [
                {
                    "months": list(b.months),
                    "day_type": b.day_type,
                    "hour_start": b.hour_start,
                    "hour_end": b.hour_end,
                    "rate": b.rate,
                }
                for b in self.bands
            ]
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tariff":
        try:
            bands = tuple(
                TariffBand(
                    months=tuple(b["months"]),
                    day_type=b["day_type"],
                    hour_start=b["hour_start"],
                    hour_end=b["hour_end"],
                    rate=b["rate"],
                )
                for b in d["bands"]
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed tariff: {exc}") from exc
        return cls(bands)


_SUMMER = (6, 7, 8, 9)
_WINTER = (10, 11, 12, 1, 2, 3, 4, 5)


def default_tariff() -> Tariff:
    """Residential-battery TOU plan: summer weekday peak 0.54, weekend 0.40;
    off-peak months 0.50 peak; shoulders 0.21/0.20 $/kWh."""
    bands = []
    for months, wd_rates, we_rates in (
        (_SUMMER, (0.21, 0.54, 0.21), (0.21, 0.40, 0.21)),
        (_WINTER, (0.20, 0.50, 0.20), (0.20, 0.50, 0.20)),
    ):
        for day_type, (mid, peak, off) in ((WEEKDAY, wd_rates), (WEEKEND, we_rates)):
            bands.append(TariffBand(months, day_type, 8, 16, mid))
            bands.append(TariffBand(months, day_type, 16, 21, peak))
            bands.append(TariffBand(months, day_type, 21, 8, off))
    return Tariff(tuple(bands))


def tariff_rate(tariff: Tariff, when: datetime) -> float:
    """$/kWh in effect at a calendar timestamp."""
    return tariff.rate(when.month, when.weekday() >= 5, when.hour)


def rate_series(tariff: Tariff, start: datetime, hours: int) -> np.ndarray:
    """Hourly $/kWh array for ``hours`` steps beginning at ``start``."""
    out = np.empty(hours)
    when = start
    step = timedelta(hours=1)
    for h in range(hours):
        out[h] = tariff.rate(when.month, when.weekday() >= 5, when.hour)
        when += step
    return out


# ---------------------------------------------------------------------------
# Community datasets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BuildingDataset:
    """One building's derived hourly series plus device specifications."""

    id: str
    non_shiftable: HourlySeries
    pv_generation: HourlySeries
    battery_spec: BatterySpec
    pv_capacity_kw: float

    def __post_init__(self) -> None:
        if len(self.non_shiftable) != len(self.pv_generation):
            raise SchemaError(
                f"building {self.id}: series lengths differ "
                f"({len(self.non_shiftable)} vs {len(self.pv_generation)})"
            )
        if np.any(self.non_shiftable.values < 0):
            raise SchemaError(f"building {self.id}: non_shiftable has negative values")
        if np.any(self.pv_generation.values < 0):
            raise SchemaError(
                f"building {self.id}: pv_generation must be generation-positive (>= 0)"
            )
        if self.pv_capacity_kw < 0:
            raise SchemaError(f"building {self.id}: pv_capacity_kw must be >= 0")

    def __len__(self) -> int:
        return len(self.non_shiftable)

    def window(self, h0: int, h1: int) -> "BuildingDataset":
        return replace(
            self,
            non_shiftable=self.non_shiftable.window(h0, h1),
            pv_generation=self.pv_generation.window(h0, h1),
        )


@dataclass(frozen=True)
class Community:
    """Everything the simulation needs: buildings plus shared exogenous series."""

    buildings: tuple[BuildingDataset, ...]
    tariff: Tariff
    carbon: CarbonSeries
    weather: WeatherSeries

    def __post_init__(self) -> None:
        if not self.buildings:
            raise SchemaError("community must contain at least one building")
        n = len(self.buildings[0])
        for b in self.buildings:
            if len(b) != n:
                raise SchemaError(f"building {b.id} length {len(b)} != {n}")
        if len(self.carbon) != n or len(self.weather) != n:
            raise SchemaError(
                f"carbon/weather lengths ({len(self.carbon)}, {len(self.weather)}) != horizon {n}"
            )

    @property
    def hours(self) -> int:
        return len(self.buildings[0])

    @property
    def start(self) -> datetime:
        return self.buildings[0].non_shiftable.start

    def building_ids(self) -> list[str]:
        return [b.id for b in self.buildings]

    def window(self, h0: int, h1: int) -> "Community":
        return Community(
            buildings=tuple(b.window(h0, h1) for b in self.buildings),
            tariff=self.tariff,
            carbon=self.carbon.window(h0, h1),
            weather=self.weather.window(h0, h1),
        )

    def subset(self, count: int) -> "Community":
        return replace(self, buildings=self.buildings[:count])


# ---------------------------------------------------------------------------
# Synthetic generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticCommunityConfig:
    """Shape parameters for the seeded synthetic community generator.

    Scalar per-building fields broadcast to all buildings; lists must have
    one entry per building. ``zero_pv_buildings`` marks buildings that do not
    generate electricity at all.
    """

    building_count: int = 2
    mean_daily_load_kwh: float | tuple[float, ...] = 24.0
    peak_hour: int | tuple[int, ...] = 19
    seasonal_amplitude: float = 0.15
    pv_capacity_kw: float | tuple[float, ...] = 4.0
    noise_level: float = 0.1
    seed: int = 0
    hours: int = 8760
    start: datetime = datetime(2016, 8, 1)
    diurnal_amplitude: float = 0.6
    zero_pv_buildings: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.building_count < 1:
            raise SchemaError(f"building_count must be >= 1, got {self.building_count}")
        if self.noise_level < 0:
            raise SchemaError(f"noise_level must be >= 0, got {self.noise_level}")
        if self.hours < HOURS_PER_DAY or self.hours % HOURS_PER_DAY != 0:
            raise SchemaError(f"hours must be a positive multiple of 24, got {self.hours}")
        for name in ("mean_daily_load_kwh", "peak_hour", "pv_capacity_kw"):
            v = getattr(self, name)
            if isinstance(v, (list, tuple)) and len(v) != self.building_count:
                raise SchemaError(f"{name} has {len(v)} entries for {self.building_count} buildings")

    def _per_building(self, name: str) -> list:
        v = getattr(self, name)
        if isinstance(v, (list, tuple)):
            return list(v)
        return [v] * self.building_count

    def to_dict(self) -> dict:
        d = {
            "building_count": self.building_count,
            "mean_daily_load_kwh": self.mean_daily_load_kwh,
            "peak_hour": self.peak_hour,
            "seasonal_amplitude": self.seasonal_amplitude,
            "pv_capacity_kw": self.pv_capacity_kw,
            "noise_level": self.noise_level,
            "seed": self.seed,
            "hours": self.hours,
            "start": self.start.isoformat(),
            "diurnal_amplitude": self.diurnal_amplitude,
            "zero_pv_buildings": list(self.zero_pv_buildings),
        }
        for k in ("mean_daily_load_kwh", "peak_hour", "pv_capacity_kw"):
            if isinstance(d[k], tuple):
                d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticCommunityConfig":
        d = dict(d)
        if "start" in d and isinstance(d["start"], str):
            d["start"] = datetime.fromisoformat(d["start"])
        for k in ("mean_daily_load_kwh", "peak_hour", "pv_capacity_kw", "zero_pv_buildings"):
            if k in d and isinstance(d[k], list):
                d[k] = tuple(d[k])
        return cls(**d)


def _calendar_arrays(start: datetime, hours: int) -> tuple[np.ndarray, np.ndarray]:
    """(hour-of-day, day-of-year) for each step."""
    t = np.arange(hours)
    hod = (start.hour + t) % 24
    doy0 = start.timetuple().tm_yday - 1
    doy = (doy0 + (start.hour + t) // 24) % 365
    return hod, doy


def _clear_sky_irradiance(start: datetime, hours: int) -> np.ndarray:
    """Daylight bell curve in W/m2: zero outside 06:00-18:00, seasonal swing."""
    hod, doy = _calendar_arrays(start, hours)
    bell = np.where(
        (hod >= 6) & (hod < 18), np.sin(np.pi * (hod - 6) / 12.0) ** 2, 0.0
    )
    seasonal = 1.0 + 0.2 * np.cos(2 * np.pi * (doy - 172) / 365.0)
    return 950.0 * bell * seasonal


def synthetic_weather(cfg: SyntheticCommunityConfig) -> WeatherSeries:
    return WeatherSeries(_clear_sky_irradiance(cfg.start, cfg.hours), cfg.start)


def synthetic_carbon(cfg: SyntheticCommunityConfig) -> CarbonSeries:
    """Evening-peaking grid intensity in kg CO2e/kWh."""
    hod, doy = _calendar_arrays(cfg.start, cfg.hours)
    values = 0.25 + 0.08 * np.cos(2 * np.pi * (hod - 20) / 24.0) + 0.03 * np.cos(
        2 * np.pi * doy / 365.0
    )
    return CarbonSeries(np.maximum(values, 0.0), cfg.start)


def generate_synthetic_community(cfg: SyntheticCommunityConfig) -> list[BuildingDataset]:
    """Seeded synthetic buildings: sinusoidal diurnal/seasonal load with
    lognormal multiplicative noise, and clear-sky-shaped PV generation."""
    hod, doy = _calendar_arrays(cfg.start, cfg.hours)
    irradiance = _clear_sky_irradiance(cfg.start, cfg.hours)
    means = cfg._per_building("mean_daily_load_kwh")
    peaks = cfg._per_building("peak_hour")
    pv_caps = cfg._per_building("pv_capacity_kw")
    buildings = []
    for b in range(cfg.building_count):
        rng = np.random.default_rng([cfg.seed, b])
        diurnal = 1.0 + cfg.diurnal_amplitude * np.cos(2 * np.pi * (hod - peaks[b]) / 24.0)
        seasonal = 1.0 + cfg.seasonal_amplitude * np.cos(2 * np.pi * (doy - 15) / 365.0)
        base = (means[b] / 24.0) * diurnal * seasonal
        sigma = cfg.noise_level
        noise = rng.lognormal(mean=-0.5 * sigma * sigma, sigma=sigma, size=cfg.hours)
        load = np.maximum(base * noise, 0.0)
        pv_cap = 0.0 if b in cfg.zero_pv_buildings else pv_caps[b]
        pv = pv_cap * (irradiance / 1000.0) * 0.9
        buildings.append(
            BuildingDataset(
                id=f"b{b}",
                non_shiftable=HourlySeries(load, cfg.start),
                pv_generation=HourlySeries(pv, cfg.start),
                battery_spec=BatterySpec(),
                pv_capacity_kw=pv_cap,
            )
        )
    return buildings


def synthetic_community(cfg: SyntheticCommunityConfig) -> Community:
    """Full simulation bundle: synthetic buildings + weather + carbon + the
    default tariff."""
    return Community(
        buildings=tuple(generate_synthetic_community(cfg)),
        tariff=default_tariff(),
        carbon=synthetic_carbon(cfg),
        weather=synthetic_weather(cfg),
    )


# ---------------------------------------------------------------------------
# File IO
# ---------------------------------------------------------------------------

_BUILDING_COLUMNS = ("timestamp", "non_shiftable_kWh", "pv_kWh")


def _read_hourly_csv(path: Path, value_columns: tuple[str, ...]) -> tuple[dict[str, np.ndarray], datetime]:
    if not path.exists():
        raise SchemaError(f"{path}: file not found")
    try:
        df = pd.read_csv(path)
    except pd.errors.EmptyDataError as exc:
        raise SchemaError(f"{path}: file is empty") from exc
    missing = [c for c in ("timestamp",) + value_columns if c not in df.columns]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}")
    if len(df) == 0:
        raise SchemaError(f"{path}: file has no rows")
    for col in value_columns:
        vals = pd.to_numeric(df[col], errors="coerce")
        bad = vals.index[vals.isna()].tolist()
        if bad:
            raise SchemaError(f"{path}: non-numeric or NaN {col} at rows {bad[:10]}")
        df[col] = vals
    stamps = pd.to_datetime(df["timestamp"], errors="coerce")
    bad = stamps.index[stamps.isna()].tolist()
    if bad:
        raise SchemaError(f"{path}: unparseable timestamp at rows {bad[:10]}")
    deltas = stamps.diff().dropna()
    irregular = deltas.index[deltas != pd.Timedelta(hours=1)].tolist()
    if irregular:
        raise SchemaError(f"{path}: non-hourly timestamp step at rows {irregular[:10]}")
    start = stamps.iloc[0].to_pydatetime()
    return {c: df[c].to_numpy(dtype=np.float64) for c in value_columns}, start


def load_community(manifest_path: str | Path) -> list[BuildingDataset]:
    """Load and validate the per-building datasets named by a community manifest."""
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise SchemaError(f"{manifest_path}: manifest not found")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{manifest_path}: invalid JSON ({exc})") from exc
    entries = manifest.get("buildings")
    if not entries:
        raise SchemaError(f"{manifest_path}: manifest lists no buildings")
    root = manifest_path.parent
    buildings = []
    length = None
    for entry in entries:
        try:
            bid = str(entry["id"])
            csv_path = root / entry["file"]
            spec = BatterySpec.from_dict(entry["battery"])
            pv_capacity = float(entry["pv_capacity_kw"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{manifest_path}: malformed building entry ({exc})") from exc
        cols, start = _read_hourly_csv(csv_path, _BUILDING_COLUMNS[1:])
        ds = BuildingDataset(
            id=bid,
            non_shiftable=HourlySeries(cols["non_shiftable_kWh"], start),
            pv_generation=HourlySeries(cols["pv_kWh"], start),
            battery_spec=spec,
            pv_capacity_kw=pv_capacity,
        )
        if length is None:
            length = len(ds)
        elif len(ds) != length:
            raise SchemaError(
                f"{csv_path}: building {bid} has {len(ds)} rows, expected {length}"
            )
        buildings.append(ds)
    return buildings


def load_community_bundle(manifest_path: str | Path) -> Community:
    """Load buildings plus the tariff/carbon/weather files named by the manifest."""
    manifest_path = Path(manifest_path)
    buildings = load_community(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    root = manifest_path.parent
    try:
        tariff = Tariff.from_dict(json.loads((root / manifest["tariff_file"]).read_text()))
    except KeyError:
        tariff = default_tariff()
    except FileNotFoundError as exc:
        raise SchemaError(f"tariff file missing: {exc}") from exc
    n = len(buildings[0])
    start = buildings[0].non_shiftable.start
    if "carbon_file" in manifest:
        cols, cstart = _read_hourly_csv(root / manifest["carbon_file"], ("kg_per_kWh",))
        carbon = CarbonSeries(cols["kg_per_kWh"], cstart)
    else:
        carbon = synthetic_carbon(
            SyntheticCommunityConfig(hours=n, start=start, building_count=len(buildings))
        )
    if "weather_file" in manifest:
        cols, wstart = _read_hourly_csv(root / manifest["weather_file"], ("dsi_wm2",))
        weather = WeatherSeries(cols["dsi_wm2"], wstart)
    else:
        weather = synthetic_weather(
            SyntheticCommunityConfig(hours=n, start=start, building_count=len(buildings))
        )
    return Community(tuple(buildings), tariff, carbon, weather)


def _timestamps(start: datetime, hours: int) -> list[str]:
    return [(start + timedelta(hours=h)).isoformat() for h in range(hours)]


def write_community(community: Community, out_dir: str | Path) -> Path:
    """Write a community to disk in the manifest + CSV layout; returns the
    manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stamps = _timestamps(community.start, community.hours)
    entries = []
    for b in community.buildings:
        fname = f"{b.id}.csv"
        pd.DataFrame(
            {
                "timestamp": stamps,
                "non_shiftable_kWh": b.non_shiftable.values,
                "pv_kWh": b.pv_generation.values,
            }
        ).to_csv(out / fname, index=False)
        entries.append(
            {
                "id": b.id,
                "file": fname,
                "battery": b.battery_spec.to_dict(),
                "pv_capacity_kw": b.pv_capacity_kw,
            }
        )
    pd.DataFrame({"timestamp": stamps, "kg_per_kWh": community.carbon.values}).to_csv(
        out / "carbon.csv", index=False
    )
    pd.DataFrame({"timestamp": stamps, "dsi_wm2": community.weather.values}).to_csv(
        out / "weather.csv", index=False
    )
    (out / "tariff.json").write_text(json.dumps(community.tariff.to_dict(), indent=2))
    manifest = {
        "buildings": entries,
        "carbon_file": "carbon.csv",
        "weather_file": "weather.csv",
        "tariff_file": "tariff.json",
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2))
    return manifest_path
