"""Trip data model, destination-change screening, filtering, persistence.

Datasets are JSONL: one trip or one driver per line, canonical key order,
segment ids referencing a separately stored network file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import DataFormatError, InputError
from .matching import AbstractTrajectory, TrajStep
from .network import GpsPoint, LatLng, RoadNetwork, haversine_km
from .routing import RoutePlanStep

LABELS = ("detour", "normal", "unlabeled")


@dataclass(frozen=True)
class TripRecord:
    """One recorded trip.

    ``plans`` holds the route recommendations issued while the trip ran,
    aligned with the leading ``atr`` steps; at minimum the initial plan is
    present (the stored list may be a prefix of the full per-step set, which
    the online detector re-derives live).  ``recorded_destination`` is the
    booked drop-off; ``actual_destination`` is where the trip really ended,
    the end geometry of the final segment.
    """

    trip_id: str
    driver_id: str
    atr: AbstractTrajectory
    plans: tuple[RoutePlanStep, ...]
    recorded_destination: LatLng
    actual_destination: LatLng
    start_time: float
    label: str = "unlabeled"
    raw_gps: tuple[GpsPoint, ...] | None = None
    behavior: str | None = None

    def __post_init__(self):
        if self.label not in LABELS:
            raise InputError(f"trip {self.trip_id!r}: unknown label {self.label!r}")
        if not self.plans:
            raise InputError(f"trip {self.trip_id!r}: missing initial route plan")
        for i, plan in enumerate(self.plans):
            if i < len(self.atr.steps):
                if plan.planned_at != self.atr.steps[i].t:
                    raise InputError(f"trip {self.trip_id!r}: plan {i} not aligned with its step")
                if plan.path and plan.path[0] != self.atr.steps[i].segment:
                    raise InputError(
                        f"trip {self.trip_id!r}: plan {i} does not start on its step's segment"
                    )


@dataclass(frozen=True)
class DriverRecord:
    driver_id: str
    trips: tuple[str, ...]
    interval_income: tuple[tuple[str, float], ...] = ()


@dataclass(frozen=True)
class FilterRules:
    min_travel_time: float = 60.0  # seconds
    max_speed: float = 120.0  # km/h, mean over the trip
    epsilon_bar: float = 0.01

    def __post_init__(self):
        if self.min_travel_time <= 0 or self.max_speed <= 0:
            raise InputError("filter thresholds must be positive")
        if not (0.0 < self.epsilon_bar <= 1.0):
            raise InputError("epsilon_bar must lie in (0, 1]")


def trajectory_distance_km(net: RoadNetwork, atr: AbstractTrajectory) -> float:
    """Distance covered by a trajectory, from network segment lengths.

    Steps record segment entries and the final step only marks arrival, so
    the total runs from entering the first segment to entering the last:
    the last segment's length is not part of the trip.
    """
    total = 0.0
    for step in atr.steps[:-1]:
        total += net.segment(step.segment).length
    return total


def trajectory_minutes(atr: AbstractTrajectory) -> float:
    """Elapsed minutes between the first and last segment entries."""
    return (atr.steps[-1].t - atr.steps[0].t) / 60.0


def destination_change_probability(net: RoadNetwork, trip: TripRecord) -> float:
    """1 - (straight-line gap between actual and booked drop-off) / trip distance.

    Near 1 when the trip ended where it was booked to; can go negative when
    the gap exceeds the distance travelled, which is returned as-is.
    """
    dist = trajectory_distance_km(net, trip.atr)
    if dist <= 0.0:
        raise InputError(f"trip {trip.trip_id!r}: zero-length trajectory")
    gap = haversine_km(trip.actual_destination, trip.recorded_destination)
    return 1.0 - gap / dist


REJECT_MALFORMED = "malformed"
REJECT_TIME = "min_travel_time"
REJECT_SPEED = "max_speed"
REJECT_DESTINATION = "destination_change"


def filter_dataset(net, trips, rules: FilterRules = FilterRules()):
    """Screen trips; returns (kept, rejected) with one reason per rejection.

    Rules apply in a fixed order (duration, then mean speed, then
    destination change), so each rejected trip carries exactly one primary
    reason.  Input order is preserved on both sides.
    """
    kept: list[TripRecord] = []
    rejected: list[tuple[TripRecord, str]] = []
    for trip in trips:
        reason = _rejection_reason(net, trip, rules)
        if reason is None:
            kept.append(trip)
        else:
            rejected.append((trip, reason))
    return kept, rejected


def _rejection_reason(net, trip, rules) -> str | None:
    if len(trip.atr.steps) < 2:
        return REJECT_MALFORMED
    seconds = trip.atr.steps[-1].t - trip.atr.steps[0].t
    dist = trajectory_distance_km(net, trip.atr)
    if seconds <= 0.0 or dist <= 0.0:
        return REJECT_MALFORMED
    if seconds < rules.min_travel_time:
        return REJECT_TIME
    if dist / (seconds / 3600.0) > rules.max_speed:
        return REJECT_SPEED
    if destination_change_probability(net, trip) < rules.epsilon_bar:
        return REJECT_DESTINATION
    return None


# ---------------------------------------------------------------------------
# persistence


def _plan_to_dict(plan: RoutePlanStep) -> dict:
    return {
        "path": list(plan.path),
        "planned_at": plan.planned_at,
        "distance_km": plan.distance,
        "est_time_min": plan.est_time,
    }


def _plan_from_dict(d: dict) -> RoutePlanStep:
    return RoutePlanStep(
        tuple(str(s) for s in d["path"]),
        float(d["planned_at"]),
        float(d["distance_km"]),
        float(d["est_time_min"]),
    )


def trip_to_dict(trip: TripRecord) -> dict:
    out = {
        "trip_id": trip.trip_id,
        "driver_id": trip.driver_id,
        "start_time": trip.start_time,
        "label": trip.label,
        "recorded_destination": {"lat": trip.recorded_destination.lat,
                                 "lng": trip.recorded_destination.lng},
        "actual_destination": {"lat": trip.actual_destination.lat,
                               "lng": trip.actual_destination.lng},
        "atr": [{"segment": s.segment, "t": s.t} for s in trip.atr.steps],
        "plans": [_plan_to_dict(p) for p in trip.plans],
    }
    if trip.raw_gps is not None:
        out["raw_gps"] = [{"lat": p.lat, "lng": p.lng, "t": p.t} for p in trip.raw_gps]
    if trip.behavior is not None:
        out["behavior"] = trip.behavior
    return out


def trip_from_dict(d: dict) -> TripRecord:
    atr = AbstractTrajectory(
        str(d["trip_id"]),
        tuple(TrajStep(str(s["segment"]), float(s["t"])) for s in d["atr"]),
    )
    raw = d.get("raw_gps")
    return TripRecord(
        trip_id=str(d["trip_id"]),
        driver_id=str(d["driver_id"]),
        atr=atr,
        plans=tuple(_plan_from_dict(p) for p in d["plans"]),
        recorded_destination=LatLng(float(d["recorded_destination"]["lat"]),
                                    float(d["recorded_destination"]["lng"])),
        actual_destination=LatLng(float(d["actual_destination"]["lat"]),
                                  float(d["actual_destination"]["lng"])),
        start_time=float(d["start_time"]),
        label=str(d["label"]),
        raw_gps=None if raw is None else tuple(
            GpsPoint(float(p["lat"]), float(p["lng"]), float(p["t"])) for p in raw
        ),
        behavior=None if d.get("behavior") is None else str(d["behavior"]),
    )


def _write_jsonl(path, dicts) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for d in dicts:
            fh.write(json.dumps(d, sort_keys=True) + "\n")


def _read_jsonl(path, parse, what: str):
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"{what} file not found: {p}")
    out = []
    with p.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(parse(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError, InputError) as exc:
                raise DataFormatError(
                    f"{p}: bad {what} record on line {lineno}: {exc}", line=lineno
                ) from exc
    return out


def save_trips(trips, path) -> None:
    _write_jsonl(path, (trip_to_dict(t) for t in trips))


def load_trips(path) -> list[TripRecord]:
    return _read_jsonl(path, trip_from_dict, "trip")


def driver_to_dict(driver: DriverRecord) -> dict:
    return {
        "driver_id": driver.driver_id,
        "trips": list(driver.trips),
        "interval_income": {k: v for k, v in driver.interval_income},
    }


def driver_from_dict(d: dict) -> DriverRecord:
    income = d.get("interval_income", {})
    return DriverRecord(
        driver_id=str(d["driver_id"]),
        trips=tuple(str(t) for t in d["trips"]),
        interval_income=tuple(sorted((str(k), float(v)) for k, v in income.items())),
    )


def save_drivers(drivers, path) -> None:
    _write_jsonl(path, (driver_to_dict(d) for d in drivers))


def load_drivers(path) -> list[DriverRecord]:
    return _read_jsonl(path, driver_from_dict, "driver")
