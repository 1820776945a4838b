"""Seeded synthetic road networks and labeled trips with planted behaviors.

Everything is reproducible from (seed, config): node geometry, segment
lengths and speeds, trip origins, driver behavior, and GPS noise all come
from independent deterministic substreams of the one seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NoRouteError
from .matching import AbstractTrajectory, TrajStep
from .network import (
    EARTH_RADIUS_KM,
    GpsPoint,
    LatLng,
    Node,
    RoadNetwork,
    Segment,
    haversine_km,
    minute_of_day,
    segment_travel_time,
)
from .routing import RoutingWeights, route_plan
from .trips import DriverRecord, TripRecord

BEHAVIORS = ("normal", "detour", "avoid_congestion", "shortcut")

BASE_EPOCH = 1543622400.0  # 2018-12-01T00:00:00Z, start of the simulated day
_BASE_LAT = 39.90
_BASE_LNG = 116.40
_KM_PER_DEG_LAT = EARTH_RADIUS_KM * math.pi / 180.0


@dataclass
class SimConfig:
    seed: int = 0
    grid_dims: tuple[int, int] = (8, 8)
    n_trips: int = 500
    behavior_mix: dict[str, float] = field(
        default_factory=lambda: {"normal": 0.7, "detour": 0.1,
                                 "avoid_congestion": 0.1, "shortcut": 0.1}
    )
    detour_inflation: float = 0.3  # planted extra-distance fraction
    gps_period_s: float = 10.0  # 0 disables raw GPS emission
    gps_noise_m: float = 10.0
    n_drivers: int = 40
    full_plans: bool = False  # also store the per-step re-plans on each trip
    # Scales the detour share of trips starting in the small hours (00:00 to
    # 06:00), when prolonging a trip pays best; 0 keeps the mix flat across
    # the day.  Gives the per-interval detour ratio a real dependence on the
    # tariff, which the long-term pricing fit needs to say anything.
    night_detour_boost: float = 0.0

    def validate(self) -> None:
        rows, cols = self.grid_dims
        if rows < 2 or cols < 2:
            raise InputError("grid_dims must be at least (2, 2)")
        if self.n_trips <= 0 or self.n_drivers <= 0:
            raise InputError("counts must be positive")
        if self.detour_inflation < 0:
            raise InputError("detour_inflation must be non-negative")
        if self.night_detour_boost < 0:
            raise InputError("night_detour_boost must be non-negative")
        unknown = set(self.behavior_mix) - set(BEHAVIORS)
        if unknown:
            raise InputError(f"unknown behaviors in mix: {sorted(unknown)}")
        total = sum(self.behavior_mix.values())
        if abs(total - 1.0) > 1e-9:
            raise InputError(f"behavior_mix must sum to 1, got {total}")


@dataclass(frozen=True)
class SimulatedTrip(TripRecord):
    """TripRecord plus the planted ground truth."""

    truth_segments: tuple[str, ...] = ()


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream]))


def _demand_weights() -> np.ndarray:
    """Per-minute trip demand over the day: morning and evening peaks over a
    base level, with the small hours quiet."""
    hours = (np.arange(1440) + 0.5) / 60.0
    w = (
        0.30
        + np.exp(-0.5 * ((hours - 8.5) / 1.5) ** 2)
        + 0.9 * np.exp(-0.5 * ((hours - 18.0) / 1.8) ** 2)
    )
    return w / w.sum()


_DEMAND = _demand_weights()


def generate_network(cfg: SimConfig) -> RoadNetwork:
    """Grid road network with bidirectional segment pairs.

    Row/column spacings are drawn uniformly so that every segment's
    great-circle length lands in [0.2, 1.5] km; day and night speeds are
    drawn per directed segment (three buckets: night until 06:00, day until
    22:00, night again).  A fraction of segments is congested during the
    day, which is what makes longer-but-faster bypasses exist at all.
    """
    cfg.validate()
    rows, cols = cfg.grid_dims
    rng = _rng(cfg.seed, 1)

    dy = rng.uniform(0.25, 1.45, size=rows - 1)
    dx = rng.uniform(0.25, 1.45, size=cols - 1)
    lat = [_BASE_LAT]
    for g in dy:
        lat.append(lat[-1] + g / _KM_PER_DEG_LAT)
    lng = [_BASE_LNG]
    km_per_deg_lng = _KM_PER_DEG_LAT * math.cos(math.radians(_BASE_LAT))
    for g in dx:
        lng.append(lng[-1] + g / km_per_deg_lng)

    nodes = [
        Node(f"n{r}_{c}", lat[r], lng[c]) for r in range(rows) for c in range(cols)
    ]
    node_by_id = {n.id: n for n in nodes}

    pairs: list[tuple[str, str]] = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                pairs.append((f"n{r}_{c}", f"n{r}_{c + 1}"))
            if r + 1 < rows:
                pairs.append((f"n{r}_{c}", f"n{r + 1}_{c}"))
    pairs.sort()

    segments = []
    for a, b in pairs:
        length = haversine_km(node_by_id[a], node_by_id[b])
        for frm, to in ((a, b), (b, a)):
            congested = rng.uniform() < 0.15
            day = rng.uniform(8.0, 18.0) if congested else rng.uniform(25.0, 55.0)
            night = rng.uniform(40.0, 80.0)
            segments.append(
                Segment(
                    f"{frm}>{to}",
                    frm,
                    to,
                    length,
                    ((0.0, night), (360.0, day), (1320.0, night)),
                )
            )
    return RoadNetwork(nodes, segments)


def _walk_times(net: RoadNetwork, segs, t_start: float) -> list[float]:
    """Entry times along a segment walk; one extra entry for the arrival."""
    times = [t_start]
    t = t_start
    for sid in segs:
        t += 60.0 * segment_travel_time(net.segment(sid), minute_of_day(t))
        times.append(t)
    return times


def _cheapest_loop(net: RoadNetwork, node_id: str) -> tuple[str, str] | None:
    """Shortest out-and-back segment pair at a node, if any."""
    best = None
    best_len = math.inf
    for out in net.outgoing(node_id):
        for back in net.outgoing(out.to_node):
            if back.to_node != node_id:
                continue
            total = out.length + back.length
            if total < best_len:
                best_len = total
                best = (out.id, back.id)
    return best


def _plant_detour(net, plan, inflation, rng) -> list[str] | None:
    base = list(plan.path)
    half = max(1, len(base) // 2)
    k = int(rng.integers(1, half + 1))  # loop starts somewhere in the first half
    node = net.segment(base[k - 1]).to_node
    loop = _cheapest_loop(net, node)
    if loop is None:
        return None
    target = inflation * plan.distance
    loop_len = net.segment(loop[0]).length + net.segment(loop[1]).length
    repeats = math.ceil(target / loop_len) if target > 0 else 0
    return base[:k] + list(loop) * repeats + base[k:]


def _plant_avoid(net, plan, t_start) -> list[str] | None:
    """Longer-but-faster variant: bypass one slow planned segment.

    Tries u-shaped three-segment bypasses around each planned segment after
    the first (the pickup segment is where the recommendation was issued, so
    deviation can only start beyond it) and keeps the first bypass that makes
    the whole trip strictly longer in distance and strictly faster end to
    end.
    """
    base = list(plan.path)
    entries = _walk_times(net, base, t_start)
    for i, sid in enumerate(base):
        if i == 0:
            continue
        seg = net.segment(sid)
        t_entry = entries[i]
        direct = segment_travel_time(seg, minute_of_day(t_entry))
        for first in net.outgoing(seg.from_node):
            if first.to_node == seg.to_node:
                continue
            for second in net.outgoing(first.to_node):
                if second.to_node == seg.from_node:
                    continue
                for third in net.outgoing(second.to_node):
                    if third.to_node != seg.to_node:
                        continue
                    local = (
                        segment_travel_time(first, minute_of_day(t_entry))
                        + segment_travel_time(second, minute_of_day(t_entry))
                        + segment_travel_time(third, minute_of_day(t_entry))
                    )
                    extra_km = first.length + second.length + third.length - seg.length
                    if local >= direct or extra_km <= 1e-9:
                        continue
                    candidate = base[:i] + [first.id, second.id, third.id] + base[i + 1:]
                    total_min = (_walk_times(net, candidate, t_start)[-1] - t_start) / 60.0
                    if total_min < plan.est_time - 1e-9:
                        return candidate
    return None


def _plant_shortcut(net, plan, origin, dest, t_start) -> list[str] | None:
    """Shorter-but-slower variant: the distance-optimal route, when it is
    strictly shorter than the recommendation and strictly slower."""
    alt = route_plan(net, origin, dest, t_start, RoutingWeights(1.0, 0.0))
    ok = alt.distance < plan.distance - 1e-9 and alt.est_time > plan.est_time + 1e-9
    return list(alt.path) if ok else None


def _noisy(lat, lng, cfg, rng) -> tuple[float, float]:
    if cfg.gps_noise_m > 0:
        scale = 1.0 / (_KM_PER_DEG_LAT * 1000.0)
        ny, nx = rng.normal(0.0, cfg.gps_noise_m, size=2)
        lat += ny * scale
        lng += nx * scale / math.cos(math.radians(lat))
    return lat, lng


def _sample_gps(net, segs, dest, times, cfg, rng) -> tuple[GpsPoint, ...]:
    """GPS fixes along the driven path plus a drop-off fix.

    Sampling starts half a period into the trip and the drop-off point sits
    a few metres into the destination segment: real pickups and drop-offs
    happen on road segments, and fixes exactly on an intersection node are
    ambiguous between every segment that touches it.
    """
    points: list[GpsPoint] = []
    t = times[0] + cfg.gps_period_s / 2.0
    if t >= times[-1]:
        t = times[0]  # degenerately short trip: fall back to the pickup time
    idx = 0
    while t < times[-1]:
        while times[idx + 1] <= t:
            idx += 1
        seg = net.segment(segs[idx])
        a = net.node(seg.from_node)
        b = net.node(seg.to_node)
        frac = (t - times[idx]) / (times[idx + 1] - times[idx])
        lat, lng = _noisy(a.lat + frac * (b.lat - a.lat),
                          a.lng + frac * (b.lng - a.lng), cfg, rng)
        points.append(GpsPoint(lat, lng, t))
        t = t + cfg.gps_period_s
    d = net.segment(dest)
    a = net.node(d.from_node)
    b = net.node(d.to_node)
    frac = min(0.015 / d.length, 0.25)
    lat, lng = _noisy(a.lat + frac * (b.lat - a.lat),
                      a.lng + frac * (b.lng - a.lng), cfg, rng)
    points.append(GpsPoint(lat, lng, times[-1]))
    return tuple(points)


def generate_trips(
    net: RoadNetwork, cfg: SimConfig, weights: RoutingWeights = RoutingWeights()
) -> tuple[list[SimulatedTrip], list[DriverRecord]]:
    """Simulate labeled trips with planted driver behaviors.

    Normal drivers follow the initial recommendation; detour drivers insert
    out-and-back loops until the planted extra distance is reached;
    avoid-congestion drivers take a longer-but-faster alternative and
    shortcut drivers a shorter-but-slower one, falling back to normal when
    the network offers no such alternative (the fallback is recorded in the
    trip's ground truth).  Start times follow a peaked daily demand curve,
    which is what gives the per-interval income and opportunity-cost numbers
    their shape.
    """
    cfg.validate()
    rng = _rng(cfg.seed, 2)
    gps_rng = _rng(cfg.seed, 3)

    names = [b for b in BEHAVIORS if cfg.behavior_mix.get(b, 0.0) > 0.0]
    probs = np.array([cfg.behavior_mix[b] for b in names])
    probs = probs / probs.sum()
    seg_ids = sorted(net.segments.keys())

    trips: list[SimulatedTrip] = []
    driver_trips: dict[str, list[str]] = {}

    for j in range(cfg.n_trips):
        driver = f"d{int(rng.integers(cfg.n_drivers))}"
        minute = float(rng.choice(1440, p=_DEMAND)) + float(rng.uniform(0.0, 1.0))
        t_start = BASE_EPOCH + 60.0 * minute
        p = probs
        if cfg.night_detour_boost > 0 and "detour" in names and minute < 360.0:
            p = probs.copy()
            p[names.index("detour")] *= 1.0 + cfg.night_detour_boost
            p = p / p.sum()
        requested = str(rng.choice(names, p=p))

        plan = None
        origin = dest = ""
        for _ in range(10):
            origin = seg_ids[int(rng.integers(len(seg_ids)))]
            dest = seg_ids[int(rng.integers(len(seg_ids)))]
            if origin == dest:
                continue
            try:
                candidate = route_plan(net, origin, dest, t_start, weights)
            except NoRouteError:
                continue
            plan = candidate
            if len(plan.path) >= 3:
                break
        if plan is None:
            raise InputError("could not find a routable origin/destination pair")

        behavior = requested
        if requested == "detour":
            segs = _plant_detour(net, plan, cfg.detour_inflation, rng)
        elif requested == "avoid_congestion":
            segs = _plant_avoid(net, plan, t_start)
        elif requested == "shortcut":
            segs = _plant_shortcut(net, plan, origin, dest, t_start)
        else:
            segs = list(plan.path)
        if segs is None:
            behavior = "normal"
            segs = list(plan.path)

        times = _walk_times(net, segs, t_start)
        steps = tuple(
            [TrajStep(sid, times[i]) for i, sid in enumerate(segs)]
            + [TrajStep(dest, times[-1])]
        )
        trip_id = f"t{j:06d}"
        atr = AbstractTrajectory(trip_id, steps)

        plans = [plan]
        if cfg.full_plans:
            for i in range(1, len(steps)):
                plans.append(route_plan(net, steps[i].segment, dest, steps[i].t, weights))

        end = net.segment_end(dest)
        raw = _sample_gps(net, segs, dest, times, cfg, gps_rng) if cfg.gps_period_s > 0 else None

        trip = SimulatedTrip(
            trip_id=trip_id,
            driver_id=driver,
            atr=atr,
            plans=tuple(plans),
            recorded_destination=LatLng(end.lat, end.lng),
            actual_destination=LatLng(end.lat, end.lng),
            start_time=t_start,
            label="detour" if behavior == "detour" else "normal",
            raw_gps=raw,
            behavior=behavior,
            truth_segments=tuple(segs) + (dest,),
        )
        trips.append(trip)
        driver_trips.setdefault(driver, []).append(trip_id)

    drivers = [
        DriverRecord(driver_id=d, trips=tuple(ts))
        for d, ts in sorted(driver_trips.items())
    ]
    return trips, drivers
