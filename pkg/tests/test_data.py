"""Series derivation, tariff lookup, synthetic generation and community IO."""
import json
from datetime import datetime

import numpy as np
import pytest

from gridtwin.data import (
    CarbonSeries,
    HourlySeries,
    MinuteSeries,
    SchemaError,
    SyntheticCommunityConfig,
    Tariff,
    default_tariff,
    derive_non_shiftable,
    exclude_low_activity_days,
    generate_synthetic_community,
    load_community,
    load_community_bundle,
    rate_series,
    resample_power_to_energy,
    synthetic_community,
    tariff_rate,
    write_community,
)

T0 = datetime(2016, 8, 1)


# -- resampling --------------------------------------------------------------


def test_resample_constant_power():
    series = MinuteSeries(np.full(60, 1.0), T0)
    out = resample_power_to_energy(series)
    assert out.values.tolist() == [1.0]


def test_resample_step_profile():
    # (30 * 2 + 30 * 4) / 60 = 3.0 kWh
    series = MinuteSeries(np.concatenate([np.full(30, 2.0), np.full(30, 4.0)]), T0)
    assert resample_power_to_energy(series).values.tolist() == [3.0]


def test_resample_zeros():
    assert resample_power_to_energy(MinuteSeries(np.zeros(60), T0)).values.tolist() == [0.0]


def test_resample_rejects_partial_hours():
    with pytest.raises(SchemaError):
        MinuteSeries(np.ones(90), T0)


def test_resample_conserves_energy():
    rng = np.random.default_rng(0)
    minutes = rng.uniform(0, 10, size=60 * 48)
    hourly = resample_power_to_energy(MinuteSeries(minutes, T0))
    assert hourly.values.sum() == pytest.approx(minutes.sum() / 60.0, rel=1e-12)
    assert len(hourly) == 48


# -- non-shiftable derivation -------------------------------------------------


def test_derive_with_supply_negative_pv():
    main = HourlySeries(np.array([5.0]), T0)
    battery = HourlySeries(np.array([1.0]), T0)
    pv = HourlySeries(np.array([-2.0]), T0)
    assert derive_non_shiftable(main, battery, pv).values.tolist() == [6.0]


def test_derive_pass_through():
    main = HourlySeries(np.array([3.0]), T0)
    zero = HourlySeries(np.array([0.0]), T0)
    assert derive_non_shiftable(main, zero, zero).values.tolist() == [3.0]


def test_derive_clamps_and_logs(caplog):
    main = HourlySeries(np.array([1.0]), T0)
    battery = HourlySeries(np.array([2.0]), T0)
    zero = HourlySeries(np.array([0.0]), T0)
    with caplog.at_level("WARNING", logger="gridtwin.data"):
        out = derive_non_shiftable(main, battery, zero)
    assert out.values.tolist() == [0.0]
    assert "clamped" in caplog.text


def test_derive_recomposition_identity():
    rng = np.random.default_rng(3)
    main = HourlySeries(rng.uniform(1, 5, 100), T0)
    battery = HourlySeries(rng.uniform(-0.5, 0.5, 100), T0)
    pv = HourlySeries(-rng.uniform(0, 0.4, 100), T0)
    ns = derive_non_shiftable(main, battery, pv)
    recomposed = ns.values + battery.values + pv.values
    unclamped = ns.values > 0
    np.testing.assert_allclose(recomposed[unclamped], main.values[unclamped], rtol=1e-12)


def test_derive_length_mismatch():
    with pytest.raises(SchemaError):
        derive_non_shiftable(
            HourlySeries(np.ones(2), T0),
            HourlySeries(np.ones(3), T0),
            HourlySeries(np.ones(2), T0),
        )


# -- tariff -------------------------------------------------------------------


@pytest.mark.parametrize(
    "when,expected",
    [
        (datetime(2017, 7, 5, 17), 0.54),   # July weekday peak
        (datetime(2017, 6, 18, 18), 0.40),  # June weekend peak (Sunday)
        (datetime(2016, 12, 10, 10), 0.20),  # December weekend mid-day
        (datetime(2017, 7, 5, 10), 0.21),
        (datetime(2017, 1, 4, 18), 0.50),
        (datetime(2017, 1, 7, 18), 0.50),
        (datetime(2017, 7, 5, 23), 0.21),
        (datetime(2017, 1, 4, 3), 0.20),
    ],
)
def test_tariff_table_cells(when, expected):
    assert tariff_rate(default_tariff(), when) == expected


def test_tariff_is_total_and_pure():
    tariff = default_tariff()
    allowed = {0.20, 0.21, 0.40, 0.50, 0.54}
    for month in range(1, 13):
        for weekend in (False, True):
            for hour in range(24):
                assert tariff.rate(month, weekend, hour) in allowed


def test_tariff_rejects_overlap_and_gaps():
    base = default_tariff().to_dict()
    overlapping = json.loads(json.dumps(base))
    overlapping["bands"].append(
        {"months": [7], "day_type": "weekday", "hour_start": 9, "hour_end": 10, "rate": 0.3}
    )
    with pytest.raises(SchemaError):
        Tariff.from_dict(overlapping)
    gappy = json.loads(json.dumps(base))
    gappy["bands"] = gappy["bands"][:-1]
    with pytest.raises(SchemaError):
        Tariff.from_dict(gappy)


def test_tariff_json_round_trip():
    tariff = default_tariff()
    again = Tariff.from_dict(json.loads(json.dumps(tariff.to_dict())))
    for month in range(1, 13):
        for weekend in (False, True):
            for hour in range(24):
                assert again.rate(month, weekend, hour) == tariff.rate(month, weekend, hour)


def test_rate_series_follows_calendar():
    rates = rate_series(default_tariff(), datetime(2016, 8, 1), 48)
    # Aug 1 2016 is a Monday: weekday peak at hours 16-20
    assert rates[17] == 0.54
    assert rates[10] == 0.21
    assert rates[24 + 17] == 0.54


# -- exclusion mask -------------------------------------------------------------


def test_low_activity_day_excluded():
    series = HourlySeries(np.full(24, 0.02), T0)
    assert exclude_low_activity_days(series).tolist() == [False]


def test_active_day_included():
    series = HourlySeries(np.full(24, 0.5), T0)
    assert exclude_low_activity_days(series).tolist() == [True]


def test_all_zero_days_excluded():
    series = HourlySeries(np.zeros(48), T0)
    assert exclude_low_activity_days(series).tolist() == [False, False]


def test_exclusion_requires_whole_days():
    with pytest.raises(SchemaError):
        exclude_low_activity_days(HourlySeries(np.ones(30), T0))


def test_exclusion_threshold_configurable():
    series = HourlySeries(np.full(24, 0.1), T0)  # daily absolute sum 2.4
    assert exclude_low_activity_days(series, threshold_kwh=3.0).tolist() == [False]
    assert exclude_low_activity_days(series, threshold_kwh=1.0).tolist() == [True]


# -- synthetic generation --------------------------------------------------------


def test_synthetic_is_bit_reproducible():
    cfg = SyntheticCommunityConfig(building_count=3, hours=240, seed=7)
    a = generate_synthetic_community(cfg)
    b = generate_synthetic_community(cfg)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.non_shiftable.values, y.non_shiftable.values)
        np.testing.assert_array_equal(x.pv_generation.values, y.pv_generation.values)


def test_synthetic_zero_pv_building():
    cfg = SyntheticCommunityConfig(building_count=2, hours=48, zero_pv_buildings=(1,))
    buildings = generate_synthetic_community(cfg)
    assert buildings[1].pv_generation.values.max() == 0.0
    assert buildings[0].pv_generation.values.max() > 0.0


def test_synthetic_zero_capacity_means_zero_generation():
    cfg = SyntheticCommunityConfig(building_count=1, hours=48, pv_capacity_kw=0.0)
    buildings = generate_synthetic_community(cfg)
    assert buildings[0].pv_generation.values.max() == 0.0


def test_synthetic_noiseless_is_periodic():
    cfg = SyntheticCommunityConfig(
        building_count=1, hours=8 * 24, noise_level=0.0, seasonal_amplitude=0.0
    )
    load = generate_synthetic_community(cfg)[0].non_shiftable.values
    np.testing.assert_allclose(load[:24], load[24:48], rtol=1e-12)
    np.testing.assert_allclose(load[:24], load[-24:], rtol=1e-12)


def test_synthetic_loads_non_negative_and_pv_dark_at_night():
    cfg = SyntheticCommunityConfig(building_count=2, hours=72, noise_level=0.5, seed=11)
    for b in generate_synthetic_community(cfg):
        assert (b.non_shiftable.values >= 0).all()
        night = np.array([(h % 24) < 6 or (h % 24) >= 18 for h in range(72)])
        assert b.pv_generation.values[night].max() == 0.0


def test_synthetic_config_validation():
    with pytest.raises(SchemaError):
        SyntheticCommunityConfig(building_count=0)
    with pytest.raises(SchemaError):
        SyntheticCommunityConfig(noise_level=-0.1)
    with pytest.raises(SchemaError):
        SyntheticCommunityConfig(building_count=2, mean_daily_load_kwh=(1.0, 2.0, 3.0))


# -- community IO -----------------------------------------------------------------


def test_write_then_load_round_trip(tmp_path):
    cfg = SyntheticCommunityConfig(building_count=2, hours=48, seed=5)
    community = synthetic_community(cfg)
    manifest = write_community(community, tmp_path / "demo")
    loaded = load_community_bundle(manifest)
    assert loaded.building_ids() == community.building_ids()
    for orig, back in zip(community.buildings, loaded.buildings):
        np.testing.assert_allclose(back.non_shiftable.values, orig.non_shiftable.values)
        np.testing.assert_allclose(back.pv_generation.values, orig.pv_generation.values)
        assert back.battery_spec == orig.battery_spec
    np.testing.assert_allclose(loaded.carbon.values, community.carbon.values)
    np.testing.assert_allclose(loaded.weather.values, community.weather.values)
    assert loaded.start == community.start


def test_load_names_nan_rows(tmp_path):
    cfg = SyntheticCommunityConfig(building_count=1, hours=24, seed=1)
    manifest = write_community(synthetic_community(cfg), tmp_path)
    csv_path = tmp_path / "b0.csv"
    lines = csv_path.read_text().splitlines()
    parts = lines[3].split(",")
    parts[1] = "nan"
    lines[3] = ",".join(parts)
    csv_path.write_text("\n".join(lines) + "\n")
    with pytest.raises(SchemaError) as err:
        load_community(manifest)
    assert "rows [2]" in str(err.value)


def test_load_rejects_missing_columns(tmp_path):
    cfg = SyntheticCommunityConfig(building_count=1, hours=24, seed=1)
    manifest = write_community(synthetic_community(cfg), tmp_path)
    csv_path = tmp_path / "b0.csv"
    content = csv_path.read_text().replace("pv_kWh", "pv")
    csv_path.write_text(content)
    with pytest.raises(SchemaError) as err:
        load_community(manifest)
    assert "pv_kWh" in str(err.value)


def test_load_rejects_empty_file(tmp_path):
    cfg = SyntheticCommunityConfig(building_count=1, hours=24, seed=1)
    manifest = write_community(synthetic_community(cfg), tmp_path)
    (tmp_path / "b0.csv").write_text("")
    with pytest.raises(SchemaError):
        load_community(manifest)


def test_load_rejects_length_mismatch(tmp_path):
    cfg = SyntheticCommunityConfig(building_count=2, hours=48, seed=1)
    manifest = write_community(synthetic_community(cfg), tmp_path)
    csv_path = tmp_path / "b1.csv"
    lines = csv_path.read_text().splitlines()
    csv_path.write_text("\n".join(lines[:-10]) + "\n")
    with pytest.raises(SchemaError) as err:
        load_community(manifest)
    assert "b1" in str(err.value)


def test_series_window_shifts_start():
    cfg = SyntheticCommunityConfig(building_count=1, hours=96, seed=2)
    community = synthetic_community(cfg)
    sliced = community.window(24, 72)
    assert sliced.hours == 48
    assert sliced.start == datetime(2016, 8, 2)
    np.testing.assert_array_equal(
        sliced.buildings[0].non_shiftable.values,
        community.buildings[0].non_shiftable.values[24:72],
    )


def test_carbon_series_rejects_negative():
    with pytest.raises(SchemaError):
        CarbonSeries(np.array([-0.1]), T0)
