import numpy as np
import pytest

from gridtwin.kpi import (
    build_report,
    district_aggregate,
    building_kpis,
    kpi_avg_daily_peak,
    kpi_consumption,
    kpi_emissions,
    kpi_one_minus_load_factor,
    kpi_price,
    kpi_ramping,
    kpi_zne,
    normalize,
    report_rows,
    write_report,
)


def test_consumption_clips_exports():
    assert kpi_consumption(np.array([1.0, -2.0, 3.0])) == 4.0
    assert kpi_consumption(np.array([-1.0, -2.0])) == 0.0
    assert kpi_consumption(np.zeros(5)) == 0.0


def test_price_positive_part_only():
    assert kpi_price(np.array([2.0]), np.array([0.54])) == pytest.approx(1.08)
    assert kpi_price(np.array([-5.0]), np.array([0.54])) == 0.0
    assert kpi_price(np.array([2.0, 3.0]), np.zeros(2)) == 0.0
    with pytest.raises(ValueError):
        kpi_price(np.ones(3), np.ones(2))


def test_emissions():
    assert kpi_emissions(np.array([2.0]), np.array([0.3])) == pytest.approx(0.6)
    assert kpi_emissions(np.array([-2.0, -1.0]), np.array([0.3, 0.3])) == 0.0
    assert kpi_emissions(np.array([2.0]), np.array([0.0])) == 0.0


def test_zne_is_signed_sum():
    assert kpi_zne(np.array([1.0, -2.0, 3.0])) == 2.0
    assert kpi_zne(np.array([5.0, -5.0])) == 0.0
    assert kpi_zne(np.zeros(3)) == 0.0


def test_avg_daily_peak():
    assert kpi_avg_daily_peak(np.full(365 * 24, 2.0)) == 2.0
    one_spike = np.concatenate([np.zeros(23), [10.0], np.ones(364 * 24)])
    assert kpi_avg_daily_peak(one_spike) == pytest.approx((10 + 364) / 365)
    assert kpi_avg_daily_peak(np.arange(48.0)) == pytest.approx((23 + 47) / 2)


def test_avg_daily_peak_partial_tail_day():
    series = np.concatenate([np.full(24, 1.0), np.full(12, 3.0)])
    assert kpi_avg_daily_peak(series) == pytest.approx(2.0)


def test_ramping():
    assert kpi_ramping(np.full(10, 4.2)) == 0.0
    assert kpi_ramping(np.array([1.0, 3.0, 2.0])) == 3.0
    k = 17
    assert kpi_ramping(np.arange(k + 1.0)) == k
    with pytest.raises(ValueError):
        kpi_ramping(np.array([1.0]))


def test_one_minus_load_factor():
    assert kpi_one_minus_load_factor(np.full(730, 3.3)) == pytest.approx(0.0)
    block = np.zeros(730)
    block[0] = 2.0
    assert kpi_one_minus_load_factor(block) == pytest.approx(1 - (2 / 730) / 2)


def test_load_factor_skips_degenerate_blocks(caplog):
    series = np.concatenate([np.full(730, 2.0), np.zeros(730)])
    with caplog.at_level("WARNING", logger="gridtwin.kpi"):
        value = kpi_one_minus_load_factor(series)
    assert value == pytest.approx(0.0)
    assert "degenerate" in caplog.text
    assert np.isnan(kpi_one_minus_load_factor(np.zeros(730)))


def test_load_factor_partial_tail_block():
    series = np.concatenate([np.full(730, 2.0), np.full(365, 4.0)])
    # second (partial) block is constant: term 0; first block constant: term 0
    assert kpi_one_minus_load_factor(series) == pytest.approx(0.0)


def test_district_aggregation_averages_building_kpis():
    rates = np.full(48, 0.2)
    intensities = np.full(48, 0.3)
    net = np.stack([np.full(48, 2.0), np.full(48, 4.0)], axis=1)
    report = build_report(net, rates, intensities, ["a", "b"])
    assert report.district.consumption == pytest.approx(
        (report.buildings["a"].consumption + report.buildings["b"].consumption) / 2
    )
    assert report.district.consumption == pytest.approx((96.0 + 192.0) / 2)


def test_identical_buildings_average_to_themselves():
    rates = np.full(24, 0.2)
    intensities = np.full(24, 0.3)
    net = np.stack([np.ones(24), np.ones(24)], axis=1)
    report = build_report(net, rates, intensities, ["a", "b"])
    assert report.district.consumption == report.buildings["a"].consumption


def test_peak_computed_on_summed_series_not_mean():
    # two buildings with offset peaks: the district peak is smaller than the
    # sum of individual peaks, which only holds if P uses the summed series
    a = np.concatenate([np.array([10.0]), np.zeros(23)])
    b = np.concatenate([np.zeros(12), np.array([10.0]), np.zeros(11)])
    net = np.stack([a, b], axis=1)
    report = build_report(net, np.full(24, 0.2), np.full(24, 0.3), ["a", "b"])
    individual = kpi_avg_daily_peak(a) + kpi_avg_daily_peak(b)
    assert report.district.avg_daily_peak == pytest.approx(10.0)
    assert report.district.avg_daily_peak < individual


def test_district_aggregate_rejects_empty():
    with pytest.raises(ValueError):
        district_aggregate({}, np.ones(24))


def test_normalize_baseline_against_itself_is_all_ones():
    rng = np.random.default_rng(0)
    net = rng.uniform(-1, 3, size=(48, 3))
    report = build_report(net, rng.uniform(0.1, 0.5, 48), rng.uniform(0.1, 0.4, 48), ["a", "b", "c"])
    normalized = normalize(report, report)
    for kpis in normalized.buildings.values():
        for value in kpis.as_dict().values():
            assert value == 1.0
    for name, value in normalized.district.as_dict().items():
        assert value == 1.0, name
    assert normalized.flags == ()


def test_normalize_ratio_and_zero_baseline_flag():
    rates = np.full(24, 0.2)
    intensities = np.full(24, 0.3)
    base = build_report(np.full((24, 1), 2.0), rates, intensities, ["a"])
    half = build_report(np.full((24, 1), 1.0), rates, intensities, ["a"])
    normalized = normalize(half, base)
    assert normalized.buildings["a"].consumption == pytest.approx(0.5)

    balanced = np.concatenate([np.ones(12), -np.ones(12)]).reshape(24, 1)
    zne_base = build_report(balanced, rates, intensities, ["a"])
    normalized = normalize(zne_base, zne_base)
    assert ("a", "zero_net_energy") in normalized.flags
    assert np.isnan(normalized.buildings["a"].zero_net_energy)


def test_consumption_dominates_zne():
    rng = np.random.default_rng(5)
    for _ in range(50):
        net = rng.uniform(-4, 4, size=100)
        assert kpi_consumption(net) >= kpi_zne(net)
        assert kpi_consumption(net) >= 0.0


def test_price_homogeneity_in_rates():
    rng = np.random.default_rng(6)
    net = rng.uniform(-2, 5, size=200)
    rates = rng.uniform(0.1, 0.6, size=200)
    assert kpi_price(net, 3.0 * rates) == pytest.approx(3.0 * kpi_price(net, rates), rel=1e-12)


def test_report_rows_and_write(tmp_path):
    rates = np.full(24, 0.2)
    intensities = np.full(24, 0.3)
    report = build_report(np.full((24, 2), 1.0), rates, intensities, ["a", "b"])
    normalized = normalize(report, report)
    df = report_rows(report, normalized)
    assert list(df["scope"]) == ["a", "b", "district"]
    assert "norm_consumption" in df.columns
    write_report(report, normalized, tmp_path / "out" / "kpi")
    assert (tmp_path / "out" / "kpi.json").exists()
    assert (tmp_path / "out" / "kpi.csv").exists()
