"""The seven flexibility KPIs, district aggregation and baseline normalization.

Building-level KPIs (consumption D, price C, emissions G, zero-net-energy Z)
are computed on each building's hourly net electricity consumption and
averaged to district level. Grid-level KPIs (average daily peak P, ramping R,
1 - load factor) are computed on the summed district series. All KPIs are
to be minimized; reports normalize against a no-battery baseline.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

HOURS_PER_DAY = 24
LOAD_FACTOR_BLOCK_HOURS = 730


def kpi_consumption(net: np.ndarray) -> float:
    """Sum of non-negative hourly net consumption (exports earn nothing)."""
    return float(np.maximum(np.asarray(net, dtype=np.float64), 0.0).sum())


def kpi_price(net: np.ndarray, rates: np.ndarray) -> float:
    """Sum of non-negative hourly net electricity price, $."""
    net = np.asarray(net, dtype=np.float64)
    rates = np.asarray(rates, dtype=np.float64)
    if net.shape != rates.shape:
        raise ValueError(f"net/rates length mismatch: {net.shape} vs {rates.shape}")
    return float(np.maximum(net * rates, 0.0).sum())


def kpi_emissions(net: np.ndarray, intensities: np.ndarray) -> float:
    """Sum of non-negative hourly carbon emissions, kg CO2e."""
    net = np.asarray(net, dtype=np.float64)
    intensities = np.asarray(intensities, dtype=np.float64)
    if net.shape != intensities.shape:
        raise ValueError(f"net/intensities length mismatch: {net.shape} vs {intensities.shape}")
    return float(np.maximum(net * intensities, 0.0).sum())


def kpi_zne(net: np.ndarray) -> float:
    """Signed sum of net consumption: zero for a perfectly net-zero building."""
    return float(np.asarray(net, dtype=np.float64).sum())


def kpi_avg_daily_peak(net_district: np.ndarray) -> float:
    """Mean of daily maxima of the district series.

    The divisor is the actual number of day blocks so that sub-year windows
    are scoreable; a trailing partial day counts as its own block.
    """
    net = np.asarray(net_district, dtype=np.float64)
    if len(net) == 0:
        raise ValueError("empty series")
    peaks = [
        net[i : i + HOURS_PER_DAY].max() for i in range(0, len(net), HOURS_PER_DAY)
    ]
    return float(np.mean(peaks))


def kpi_ramping(net_district: np.ndarray) -> float:
    """Sum of absolute hour-to-hour changes in the district series."""
    net = np.asarray(net_district, dtype=np.float64)
    if len(net) < 2:
        raise ValueError(f"ramping needs >= 2 hours, got {len(net)}")
    return float(np.abs(np.diff(net)).sum())


def kpi_one_minus_load_factor(net_district: np.ndarray) -> float:
    """Mean over 730-hour blocks of (1 - block mean / block max).

    Blocks whose maximum is not positive are skipped and logged; a trailing
    partial block counts as its own block. Returns nan if every block is
    degenerate.
    """
    net = np.asarray(net_district, dtype=np.float64)
    if len(net) == 0:
        raise ValueError("empty series")
    terms = []
    skipped = []
    for i in range(0, len(net), LOAD_FACTOR_BLOCK_HOURS):
        block = net[i : i + LOAD_FACTOR_BLOCK_HOURS]
        peak = block.max()
        if peak <= 0:
            skipped.append(i // LOAD_FACTOR_BLOCK_HOURS)
            continue
        terms.append(1.0 - block.mean() / peak)
    if skipped:
        logger.warning(
            "load factor skipped %d degenerate block(s) (non-positive peak): %s",
            len(skipped),
            skipped,
        )
    if not terms:
        return float("nan")
    return float(np.mean(terms))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

BUILDING_KPI_NAMES = ("consumption", "price", "emissions", "zero_net_energy")
DISTRICT_KPI_NAMES = BUILDING_KPI_NAMES + (
    "avg_daily_peak",
    "ramping",
    "one_minus_load_factor",
)


@dataclass(frozen=True)
class BuildingKpis:
    consumption: float
    price: float
    emissions: float
    zero_net_energy: float

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class DistrictKpis:
    consumption: float
    price: float
    emissions: float
    zero_net_energy: float
    avg_daily_peak: float
    ramping: float
    one_minus_load_factor: float
    # signed sum of the summed district series, reported for transparency
    # alongside the building-mean zero_net_energy
    district_series_zne: float = float("nan")

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class KpiReport:
    buildings: dict[str, BuildingKpis]
    district: DistrictKpis

    def as_dict(self) -> dict:
        return {
            "buildings": {k: v.as_dict() for k, v in self.buildings.items()},
            "district": self.district.as_dict(),
        }


@dataclass(frozen=True)
class NormalizedKpiReport:
    buildings: dict[str, BuildingKpis]
    district: DistrictKpis
    # (scope, kpi) pairs whose baseline was zero and are therefore undefined
    flags: tuple[tuple[str, str], ...] = ()

    def as_dict(self) -> dict:
        return {
            "buildings": {k: v.as_dict() for k, v in self.buildings.items()},
            "district": self.district.as_dict(),
            "undefined": [list(f) for f in self.flags],
        }


def building_kpis(net: np.ndarray, rates: np.ndarray, intensities: np.ndarray) -> BuildingKpis:
    return BuildingKpis(
        consumption=kpi_consumption(net),
        price=kpi_price(net, rates),
        emissions=kpi_emissions(net, intensities),
        zero_net_energy=kpi_zne(net),
    )


def district_aggregate(
    per_building: dict[str, BuildingKpis], district_series: np.ndarray
) -> KpiReport:
    """District report: building KPIs averaged, grid KPIs on the summed series."""
    if not per_building:
        raise ValueError("district_aggregate needs at least one building")
    reports = list(per_building.values())
    district = DistrictKpis(
        consumption=float(np.mean([r.consumption for r in reports])),
        price=float(np.mean([r.price for r in reports])),
        emissions=float(np.mean([r.emissions for r in reports])),
        zero_net_energy=float(np.mean([r.zero_net_energy for r in reports])),
        avg_daily_peak=kpi_avg_daily_peak(district_series),
        ramping=kpi_ramping(district_series),
        one_minus_load_factor=kpi_one_minus_load_factor(district_series),
        district_series_zne=kpi_zne(district_series),
    )
    return KpiReport(buildings=dict(per_building), district=district)


def build_report(
    net: np.ndarray, rates: np.ndarray, intensities: np.ndarray, ids: list[str]
) -> KpiReport:
    """Score an (hours, buildings) net-consumption matrix into a full report."""
    net = np.asarray(net, dtype=np.float64)
    if net.ndim != 2 or net.shape[1] != len(ids):
        raise ValueError(f"net must be (hours, {len(ids)}), got {net.shape}")
    per_building = {
        bid: building_kpis(net[:, i], rates, intensities) for i, bid in enumerate(ids)
    }
    return district_aggregate(per_building, net.sum(axis=1))


def _ratio(control: float, baseline: float, scope: str, name: str, flags: list) -> float:
    if baseline == 0 or not np.isfinite(baseline):
        flags.append((scope, name))
        return float("nan")
    return control / baseline


def normalize(report: KpiReport, baseline: KpiReport) -> NormalizedKpiReport:
    """Elementwise control/baseline ratios; zero-baseline entries are flagged
    undefined rather than reported as infinities."""
    if set(report.buildings) != set(baseline.buildings):
        raise ValueError("report and baseline cover different buildings")
    flags: list[tuple[str, str]] = []
    buildings = {}
    for bid, kpis in report.buildings.items():
        base = baseline.buildings[bid]
        buildings[bid] = BuildingKpis(
            **{
                name: _ratio(getattr(kpis, name), getattr(base, name), bid, name, flags)
                for name in BUILDING_KPI_NAMES
            }
        )
    district = DistrictKpis(
        **{
            name: _ratio(
                getattr(report.district, name),
                getattr(baseline.district, name),
                "district",
                name,
                flags,
            )
            for name in DISTRICT_KPI_NAMES
        },
        district_series_zne=_ratio(
            report.district.district_series_zne,
            baseline.district.district_series_zne,
            "district",
            "district_series_zne",
            flags,
        ),
    )
    return NormalizedKpiReport(buildings=buildings, district=district, flags=tuple(flags))


def report_rows(
    report: KpiReport, normalized: NormalizedKpiReport | None = None
) -> pd.DataFrame:
    """Tabular view: one row per building plus a district row; raw columns and,
    when provided, normalized columns."""
    rows = []
    for bid, kpis in report.buildings.items():
        row = {"scope": bid, **kpis.as_dict()}
        if normalized is not None:
            row.update(
                {f"norm_{k}": v for k, v in normalized.buildings[bid].as_dict().items()}
            )
        rows.append(row)
    row = {"scope": "district", **report.district.as_dict()}
    if normalized is not None:
        row.update({f"norm_{k}": v for k, v in normalized.district.as_dict().items()})
    rows.append(row)
    return pd.DataFrame(rows)


def write_report(
    report: KpiReport,
    normalized: NormalizedKpiReport | None,
    path: str | Path,
) -> None:
    """Write a report as JSON (full structure) and CSV (tabular) side by side."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"raw": report.as_dict()}
    if normalized is not None:
        payload["normalized"] = normalized.as_dict()
    path.with_suffix(".json").write_text(json.dumps(payload, indent=2))
    report_rows(report, normalized).to_csv(path.with_suffix(".csv"), index=False)
