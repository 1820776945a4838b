import json

import pytest
from hypothesis import given, strategies as st

from detourlab.errors import DataFormatError, InputError
from detourlab.network import LatLng
from detourlab.simulate import SimConfig, generate_network, generate_trips
from detourlab.trips import (
    REJECT_DESTINATION,
    REJECT_MALFORMED,
    REJECT_SPEED,
    REJECT_TIME,
    FilterRules,
    destination_change_probability,
    filter_dataset,
    load_drivers,
    load_trips,
    save_drivers,
    save_trips,
    trajectory_distance_km,
    trajectory_minutes,
    trip_from_dict,
    trip_to_dict,
)

from conftest import KM_PER_DEG, line_network, make_trip

T0 = 1543622400.0


def equator_point_at_km(km: float) -> LatLng:
    return LatLng(0.0, km / KM_PER_DEG)


def chain_trip(net, n_segments, duration_s, trip_id="t0", recorded=None, actual=None):
    """Trip across the first ``n_segments`` of a line network, arriving on the
    next segment; evenly spaced timestamps."""
    seg_times = [(f"e{i}", T0 + duration_s * i / n_segments) for i in range(n_segments)]
    seg_times.append((f"e{n_segments}", T0 + duration_s))
    dist = sum(net.segment(f"e{i}").length for i in range(n_segments))
    return make_trip(net, seg_times, [s for s, _ in seg_times[:-1]], dist,
                     duration_s / 60.0, trip_id=trip_id, recorded=recorded, actual=actual)


def test_trajectory_totals_cover_entry_to_entry():
    net = line_network([4.0, 6.0, 2.0])
    trip = chain_trip(net, 2, 600.0)
    assert trajectory_distance_km(net, trip.atr) == 10.0  # final entry not counted
    assert trajectory_minutes(trip.atr) == 10.0


def test_epsilon_same_destination_is_one():
    net = line_network([4.0, 6.0, 2.0])
    trip = chain_trip(net, 2, 600.0)
    assert destination_change_probability(net, trip) == 1.0


def test_epsilon_zero_when_gap_equals_distance():
    net = line_network([4.0, 6.0, 2.0])
    actual = equator_point_at_km(10.0)
    recorded = equator_point_at_km(20.0)  # 10 km straight-line gap = trip distance
    trip = chain_trip(net, 2, 600.0, recorded=recorded, actual=actual)
    assert destination_change_probability(net, trip) == pytest.approx(0.0, abs=1e-9)


def test_epsilon_hand_value():
    net = line_network([4.0, 6.0, 2.0])
    actual = equator_point_at_km(10.0)
    recorded = equator_point_at_km(10.05)  # 50 m gap on a 10 km trip
    trip = chain_trip(net, 2, 600.0, recorded=recorded, actual=actual)
    assert destination_change_probability(net, trip) == pytest.approx(0.995, abs=1e-9)


def test_epsilon_zero_length_trajectory_rejected():
    net = line_network([4.0, 6.0, 2.0])
    trip = make_trip(net, [("e0", T0)], ["e0"], 4.0, 4.0)
    with pytest.raises(InputError):
        destination_change_probability(net, trip)


@given(scale=st.floats(0.1, 40.0))
def test_epsilon_scale_consistency(scale):
    # scaling both the gap and the trip distance leaves epsilon unchanged
    base_net = line_network([4.0, 6.0, 2.0])
    scaled_net = line_network([4.0 * scale, 6.0 * scale, 2.0 * scale])
    gap = 2.0
    base = chain_trip(base_net, 2, 600.0, recorded=equator_point_at_km(10.0 + gap),
                      actual=equator_point_at_km(10.0))
    scaled = chain_trip(scaled_net, 2, 600.0,
                        recorded=equator_point_at_km((10.0 + gap) * scale),
                        actual=equator_point_at_km(10.0 * scale))
    assert destination_change_probability(base_net, base) == pytest.approx(
        destination_change_probability(scaled_net, scaled), abs=1e-7
    )


@pytest.fixture(scope="module")
def filter_fixture():
    """Six trips exercising each screening rule plus three clean ones."""
    net = line_network([1.0] * 12)
    too_short = chain_trip(net, 1, 50.0, trip_id="short")  # 50 s
    too_fast = chain_trip(net, 10, 10.0 / 130.0 * 3600.0, trip_id="fast")  # 130 km/h
    changed = chain_trip(net, 10, 900.0, trip_id="changed",
                         actual=equator_point_at_km(10.0),
                         recorded=equator_point_at_km(10.0 + 0.995 * 10.0))  # eps=0.005
    clean = [chain_trip(net, 10, 900.0, trip_id=f"ok{i}") for i in range(3)]
    return net, [too_short, too_fast, changed] + clean


def test_filter_reasons_and_partition(filter_fixture):
    net, trips = filter_fixture
    kept, rejected = filter_dataset(net, trips)
    assert [t.trip_id for t in kept] == ["ok0", "ok1", "ok2"]
    assert [(t.trip_id, reason) for t, reason in rejected] == [
        ("short", REJECT_TIME),
        ("fast", REJECT_SPEED),
        ("changed", REJECT_DESTINATION),
    ]


def test_filter_rule_order_is_fixed(filter_fixture):
    net, _ = filter_fixture
    # 50 s AND 130 km/h: the duration rule wins because it is checked first
    wild = chain_trip(net, 10, 50.0, trip_id="wild")
    _, rejected = filter_dataset(net, [wild])
    assert rejected[0][1] == REJECT_TIME


def test_filter_idempotent(filter_fixture):
    net, trips = filter_fixture
    kept, _ = filter_dataset(net, trips)
    kept2, rejected2 = filter_dataset(net, kept)
    assert kept2 == kept
    assert rejected2 == []


def test_filter_malformed_trip(filter_fixture):
    net, _ = filter_fixture
    one_step = make_trip(net, [("e0", T0)], ["e0"], 1.0, 1.0, trip_id="stub")
    _, rejected = filter_dataset(net, [one_step])
    assert rejected[0][1] == REJECT_MALFORMED


def test_filter_rules_validation():
    with pytest.raises(InputError):
        FilterRules(min_travel_time=0.0)
    with pytest.raises(InputError):
        FilterRules(epsilon_bar=0.0)
    with pytest.raises(InputError):
        FilterRules(epsilon_bar=1.5)


def test_trip_roundtrip_via_dict():
    net = line_network([1.0] * 3)
    trip = chain_trip(net, 2, 300.0)
    assert trip_from_dict(json.loads(json.dumps(trip_to_dict(trip)))) == trip


def test_save_load_simulated_trips(tmp_path):
    cfg = SimConfig(seed=13, grid_dims=(8, 8), n_trips=1000, gps_period_s=20.0)
    net = generate_network(cfg)
    sim_trips, drivers = generate_trips(net, cfg)
    path = tmp_path / "trips.jsonl"
    save_trips(sim_trips, path)
    loaded = load_trips(path)
    assert len(loaded) == len(sim_trips)
    for got, want in zip(loaded, sim_trips):
        assert trip_to_dict(got) == trip_to_dict(want)

    dpath = tmp_path / "drivers.jsonl"
    save_drivers(drivers, dpath)
    assert load_drivers(dpath) == drivers
    trip_ids = {t.trip_id for t in sim_trips}
    assert all(tid in trip_ids for d in drivers for tid in d.trips)


def test_load_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("", encoding="utf-8")
    assert load_trips(path) == []


def test_truncated_line_names_line_number(tmp_path):
    net = line_network([1.0] * 3)
    trip = chain_trip(net, 2, 300.0)
    line = json.dumps(trip_to_dict(trip), sort_keys=True)
    path = tmp_path / "trips.jsonl"
    path.write_text("\n".join([line] * 6 + [line[: len(line) // 2]]) + "\n", encoding="utf-8")
    with pytest.raises(DataFormatError) as err:
        load_trips(path)
    assert err.value.line == 7
    assert "line 7" in str(err.value)


def test_load_missing_trips_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_trips(tmp_path / "nope.jsonl")
