import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nilmtransfer.errors import (
    AlignmentError,
    DataError,
    DomainError,
    EmptyOverlapError,
    OrderingError,
    ParseError,
)
from nilmtransfer.timeseries import (
    ApplianceTrace,
    HouseholdRecord,
    PowerSeries,
    Readings,
    State,
    align,
    derive_states,
    load_csv,
    load_household,
    load_readings,
    resample,
    save_household,
    write_csv,
)

NAN = math.nan


def write(tmp_path, text, name="series.csv"):
    p = tmp_path / name
    p.write_bytes(text.encode("utf-8"))
    return p


def brute_bucket(readings, interval):
    """Reference bucketing: one pass per output bucket."""
    first = readings[0][0] // interval
    last = readings[-1][0] // interval
    out = []
    for k in range(first, last + 1):
        vals = [v for t, v in readings if t // interval == k and not math.isnan(v)]
        out.append(sum(vals) / len(vals) if vals else NAN)
    return first * interval, out


# --------------------------------------------------------------------------
# load_csv


def test_load_csv_uniform_rows(tmp_path):
    p = write(tmp_path, "timestamp,power_w\n0,100\n10,120\n20,110\n")
    s = load_csv(p)
    assert (s.start, s.interval) == (0, 10)
    assert s.values.tolist() == [100, 120, 110]


def test_load_csv_crlf_and_no_header(tmp_path):
    p = write(tmp_path, "0,100\r\n10,120\r\n20,110\r\n")
    assert load_csv(p).values.tolist() == [100, 120, 110]


def test_load_csv_custom_columns(tmp_path):
    p = write(tmp_path, "watts,ts\n5,0\n7,10\n")
    s = load_csv(p, columns=("ts", "watts"))
    assert s.values.tolist() == [5, 7]


def test_load_csv_empty_file(tmp_path):
    with pytest.raises(ParseError):
        load_csv(write(tmp_path, ""))


def test_load_csv_header_only(tmp_path):
    with pytest.raises(ParseError):
        load_csv(write(tmp_path, "timestamp,power_w\n"))


def test_load_csv_negative_power(tmp_path):
    with pytest.raises(DomainError):
        load_csv(write(tmp_path, "timestamp,power_w\n0,100\n10,-5\n"))


def test_load_csv_malformed_row_reports_line(tmp_path):
    p = write(tmp_path, "timestamp,power_w\n0,100\n10,abc\n")
    with pytest.raises(ParseError) as exc:
        load_csv(p)
    assert exc.value.line == 3
    assert "line 3" in str(exc.value)


def test_load_csv_non_monotonic(tmp_path):
    with pytest.raises(OrderingError):
        load_csv(write(tmp_path, "timestamp,power_w\n0,1\n20,2\n10,3\n"))


def test_load_csv_duplicate_timestamp(tmp_path):
    with pytest.raises(OrderingError):
        load_csv(write(tmp_path, "timestamp,power_w\n0,1\n0,2\n"))


def test_load_csv_missing_values(tmp_path):
    p = write(tmp_path, "timestamp,power_w\n0,100\n10,\n20,nan\n30,4\n")
    s = load_csv(p)
    assert np.isnan(s.values[1]) and np.isnan(s.values[2])
    assert s.values[3] == 4


def test_load_csv_single_reading_needs_interval(tmp_path):
    p = write(tmp_path, "timestamp,power_w\n100,5\n")
    with pytest.raises(DataError):
        load_csv(p)
    assert load_csv(p, interval=10).values.tolist() == [5]


def test_write_csv_round_trip(tmp_path):
    s = PowerSeries(20, 10, [1.5, NAN, 0.1 + 0.2])
    write_csv(s, tmp_path / "x.csv")
    assert load_csv(tmp_path / "x.csv") == s


# --------------------------------------------------------------------------
# resample


def test_resample_mean_of_one_bucket():
    r = Readings(np.array([0, 5]), np.array([100.0, 200.0]))
    assert resample(r, 10).values.tolist() == [150]


def test_resample_identity_on_native_interval():
    s = PowerSeries(0, 10, [1.0, 2.0, 3.0])
    assert resample(s, 10) == s


def test_resample_gap_becomes_missing():
    readings = [(0, 100.0), (25, 300.0)]
    start, expected = brute_bucket(readings, 10)
    out = resample(Readings(np.array([0, 25]), np.array([100.0, 300.0])), 10)
    assert out.start == start == 0
    np.testing.assert_array_equal(out.values, expected)
    np.testing.assert_array_equal(out.values, [100, NAN, 300])


def test_resample_rejects_bad_interval():
    s = PowerSeries(0, 10, [1.0])
    for bad in (0, -10):
        with pytest.raises(DomainError):
            resample(s, bad)


readings_strategy = st.lists(
    st.tuples(st.integers(0, 50), st.one_of(st.floats(0, 5000), st.just(NAN))),
    min_size=1,
    max_size=60,
).map(lambda steps: list(zip(np.cumsum([1 + d for d, _ in steps]).tolist(), [v for _, v in steps])))


@given(readings_strategy, st.integers(1, 40))
def test_resample_matches_brute_force(readings, interval):
    r = Readings(np.array([t for t, _ in readings]), np.array([v for _, v in readings]))
    start, expected = brute_bucket(readings, interval)
    out = resample(r, interval)
    assert out.start == start
    np.testing.assert_allclose(out.values, expected, rtol=1e-12, equal_nan=True)


@given(readings_strategy, st.integers(1, 40))
def test_resample_idempotent(readings, interval):
    r = Readings(np.array([t for t, _ in readings]), np.array([v for _, v in readings]))
    once = resample(r, interval)
    assert resample(once, interval) == once


@given(
    st.lists(st.floats(0, 5000), min_size=1, max_size=30),
    st.integers(1, 6),
    st.integers(1, 20),
    st.integers(0, 100),
)
def test_resample_preserves_mean_on_aligned_coarsening(chunk, factor, native, k0):
    values = np.tile(np.asarray(chunk), factor)
    s = PowerSeries(k0 * native * factor, native, values)
    coarse = resample(s, native * factor)
    assert len(coarse) * factor == len(s)
    assert math.isclose(coarse.values.mean(), values.mean(), rel_tol=1e-9, abs_tol=1e-9)


# --------------------------------------------------------------------------
# align


def test_align_identical():
    a = PowerSeries(0, 10, [1.0, 2.0, 3.0])
    assert align(a, a) == (a, a)


def test_align_intersection():
    a = PowerSeries(0, 10, np.arange(10.0))
    b = PowerSeries(50, 10, np.arange(10.0))
    a2, b2 = align(a, b)
    assert (a2.start, a2.end) == (b2.start, b2.end) == (50, 100)
    assert a2.values.tolist() == [5, 6, 7, 8, 9]
    assert b2.values.tolist() == [0, 1, 2, 3, 4]


def test_align_propagates_missing():
    values = np.arange(10.0)
    values[6] = NAN
    a = PowerSeries(0, 10, values)
    b = PowerSeries(0, 10, np.ones(10))
    a2, b2 = align(a, b)
    assert np.isnan(a2.values[6]) and np.isnan(b2.values[6])
    assert np.count_nonzero(np.isnan(b2.values)) == 1


def test_align_errors():
    with pytest.raises(AlignmentError):
        align(PowerSeries(0, 10, [1.0]), PowerSeries(0, 5, [1.0]))
    with pytest.raises(EmptyOverlapError):
        align(PowerSeries(0, 10, [1.0]), PowerSeries(100, 10, [1.0]))
    with pytest.raises(AlignmentError):
        align(PowerSeries(0, 10, [1.0, 2.0]), PowerSeries(5, 10, [1.0]))


@given(st.integers(-20, 20), st.integers(1, 30), st.integers(1, 30))
def test_align_symmetric_coverage(offset, na, nb):
    a = PowerSeries(0, 10, np.ones(na))
    b = PowerSeries(offset * 10, 10, np.ones(nb))
    try:
        a2, b2 = align(a, b)
    except EmptyOverlapError:
        assert offset >= na or offset + nb <= 0
        return
    b3, a3 = align(b, a)
    assert (a2.start, a2.interval, len(a2)) == (b2.start, b2.interval, len(b2))
    assert a2 == a3 and b2 == b3


# --------------------------------------------------------------------------
# states


def test_derive_states_threshold():
    t = ApplianceTrace("x", PowerSeries(0, 10, [0.0, 20.0, 14.9]), 15.0)
    assert derive_states(t).tolist() == [State.OFF, State.ON, State.OFF]


def test_derive_states_all_zero_and_boundary():
    assert set(derive_states(ApplianceTrace("x", PowerSeries(0, 1, np.zeros(5)))).tolist()) == {State.OFF}
    assert derive_states(ApplianceTrace("x", PowerSeries(0, 1, [15.0]), 15.0)).tolist() == [State.ON]


def test_derive_states_missing():
    t = ApplianceTrace("x", PowerSeries(0, 1, [NAN, 30.0]))
    assert derive_states(t).tolist() == [State.MISSING, State.ON]


@given(st.lists(st.floats(0, 500), min_size=1, max_size=50), st.floats(0.1, 400), st.floats(0, 100))
def test_derive_states_monotone_in_threshold(values, th, bump):
    s = PowerSeries(0, 1, values)
    low = derive_states(ApplianceTrace("x", s, th))
    high = derive_states(ApplianceTrace("x", s, th + bump))
    assert not np.any((low == State.OFF) & (high == State.ON))


def test_trace_rejects_non_positive_threshold():
    with pytest.raises(DomainError):
        ApplianceTrace("x", PowerSeries(0, 1, [1.0]), 0.0)


# --------------------------------------------------------------------------
# types and bundles


def test_power_series_invariants():
    with pytest.raises(DomainError):
        PowerSeries(0, 0, [1.0])
    with pytest.raises(DomainError):
        PowerSeries(0, 10, [])
    with pytest.raises(DomainError):
        PowerSeries(0, 10, [-1.0])
    with pytest.raises(DomainError):
        PowerSeries(0, 10, [math.inf])
    s = PowerSeries(30, 10, [1.0, 2.0])
    assert s.timestamps.tolist() == [30, 40]
    with pytest.raises(ValueError):
        s.values[0] = 5.0


def test_household_invariants():
    agg = PowerSeries(0, 10, [1.0, 2.0])
    ok = ApplianceTrace("a", PowerSeries(0, 10, [0.0, 1.0]))
    with pytest.raises(DomainError):
        HouseholdRecord("h", "d", agg, ())
    with pytest.raises(DomainError):
        HouseholdRecord("h", "d", agg, (ok, ok))
    with pytest.raises(AlignmentError):
        HouseholdRecord("h", "d", agg, (ApplianceTrace("b", PowerSeries(10, 10, [0.0, 1.0])),))


def test_household_bundle_round_trip(tmp_path):
    agg = PowerSeries(0, 10, [100.0, 220.0, NAN, 5.0])
    rec = HouseholdRecord(
        "h1",
        "synthetic",
        agg,
        (
            ApplianceTrace("fridge", PowerSeries(0, 10, [0.0, 120.0, 120.0, 0.0]), 20.0),
            ApplianceTrace("tv", PowerSeries(0, 10, [100.0, 100.0, 0.0, 0.0])),
        ),
    )
    save_household(rec, tmp_path / "h1")
    back = load_household(tmp_path / "h1")
    assert back == rec
    over = load_household(tmp_path / "h1", thresholds={"tv": 50.0})
    assert over.appliance("tv").on_threshold == 50.0
    assert over.appliance("fridge").on_threshold == 20.0


def test_household_bundle_aligns_ranges(tmp_path):
    d = tmp_path / "h"
    d.mkdir()
    (d / "house.json").write_text('{"house_id": "h", "dataset_id": "x", "appliances": [{"appliance_id": "a"}]}')
    (d / "aggregate.csv").write_text("timestamp,power_w\n0,1\n10,2\n20,3\n30,4\n")
    (d / "a.csv").write_text("timestamp,power_w\n10,0\n20,1\n30,1\n40,1\n")
    rec = load_household(d)
    assert (rec.aggregate.start, len(rec.aggregate)) == (10, 3)
    assert rec.appliance("a").series.values.tolist() == [0, 1, 1]


def test_household_bundle_missing_manifest(tmp_path):
    with pytest.raises(DataError):
        load_household(tmp_path)


def test_load_readings_slow_path_matches_fast(tmp_path):
    fast = load_readings(write(tmp_path, "timestamp,power_w\n0,1.5\n7,2\n"))
    slow = load_readings(write(tmp_path, "timestamp,power_w\n0,1.5\n\n\"7\",2\n", "b.csv"))
    np.testing.assert_array_equal(fast.timestamps, slow.timestamps)
    np.testing.assert_array_equal(fast.values, slow.values)
