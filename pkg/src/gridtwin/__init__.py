"""gridtwin: district energy-flexibility workbench.

Simulates communities of PV+battery buildings hour by hour, controls each
battery with rule-based or soft actor-critic policies, transfers policies
across buildings, and scores results with seven flexibility KPIs normalized
against a no-battery baseline.
"""

__version__ = "0.1.0"

from .devices import BatterySpec, BatteryState, battery_transact, soc
from .data import (
    BuildingDataset,
    Community,
    HourlySeries,
    MinuteSeries,
    SchemaError,
    SyntheticCommunityConfig,
    Tariff,
    default_tariff,
    synthetic_community,
    tariff_rate,
)

__all__ = [
    "BatterySpec",
    "BatteryState",
    "BuildingDataset",
    "Community",
    "HourlySeries",
    "MinuteSeries",
    "SchemaError",
    "SyntheticCommunityConfig",
    "Tariff",
    "battery_transact",
    "default_tariff",
    "soc",
    "synthetic_community",
    "tariff_rate",
]
