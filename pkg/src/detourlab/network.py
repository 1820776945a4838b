"""Directed road network with per-segment lengths and time-of-day speeds.

Unit conventions used throughout the package:

* timestamps are floats in seconds since the Unix epoch,
* durations are minutes,
* distances are kilometres,
* speed buckets and tariff intervals are addressed by minute-of-day.

``minute_of_day`` bridges epoch timestamps and the daily buckets.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType

from .errors import InputError

EARTH_RADIUS_KM = 6371.0
DAY_MINUTES = 1440.0


@dataclass(frozen=True)
class Node:
    id: str
    lat: float
    lng: float


@dataclass(frozen=True)
class LatLng:
    """Bare coordinate pair, used for booked and actual trip destinations."""

    lat: float
    lng: float


@dataclass(frozen=True)
class GpsPoint:
    lat: float
    lng: float
    t: float  # seconds since epoch


@dataclass(frozen=True)
class Segment:
    """One directed road segment; (a->b) and (b->a) are distinct segments.

    ``speed_profile`` is a sorted tuple of ``(start_minute, speed_kmh)``
    buckets.  Each bucket runs until the next one starts and the last runs to
    minute 1440, so a profile whose first bucket starts at 0 covers the whole
    day with no gaps.
    """

    id: str
    from_node: str
    to_node: str
    length: float  # km
    speed_profile: tuple[tuple[float, float], ...]


def minute_of_day(t: float) -> float:
    """Minute-of-day in [0, 1440) for an epoch-seconds timestamp."""
    return (t / 60.0) % DAY_MINUTES


def check_coordinates(lat: float, lng: float, what: str = "point") -> None:
    if not (-90.0 <= lat <= 90.0) or not (-180.0 <= lng <= 180.0):
        raise InputError(f"{what} has out-of-range coordinates ({lat}, {lng})")


def haversine_km(p, q) -> float:
    """Great-circle distance in km between two objects carrying lat/lng.

    Earth is treated as a sphere of radius 6371.0 km; at city scale this is
    the distance metric for everything in the package (destination screening,
    GPS emission scoring, simulator geometry).
    """
    la1 = math.radians(p.lat)
    la2 = math.radians(q.lat)
    dla = la2 - la1
    dlo = math.radians(q.lng) - math.radians(p.lng)
    s = math.sin(dla / 2.0) ** 2 + math.cos(la1) * math.cos(la2) * math.sin(dlo / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(s)))


def _validate_profile(seg: Segment) -> None:
    prof = seg.speed_profile
    if not prof:
        raise InputError(f"segment {seg.id!r}: empty speed profile")
    if prof[0][0] != 0.0:
        raise InputError(
            f"segment {seg.id!r}: speed profile does not cover the day "
            f"(first bucket starts at {prof[0][0]}, not 0)"
        )
    prev = -1.0
    for start, kmh in prof:
        if not (0.0 <= start < DAY_MINUTES):
            raise InputError(f"segment {seg.id!r}: bucket start {start} outside [0, 1440)")
        if start <= prev:
            raise InputError(f"segment {seg.id!r}: speed buckets must be sorted and non-overlapping")
        if kmh <= 0.0:
            raise InputError(f"segment {seg.id!r}: non-positive speed {kmh}")
        prev = start


def segment_travel_time(seg: Segment, entry_minute: float) -> float:
    """Minutes to traverse ``seg`` when entered at ``entry_minute`` of the day.

    The speed bucket is sampled once at entry and held constant across the
    segment; there is no mid-segment re-bucketing.
    """
    speed = seg.speed_profile[0][1]
    for start, kmh in seg.speed_profile:
        if start <= entry_minute:
            speed = kmh
        else:
            break
    return seg.length / speed * 60.0


class RoadNetwork:
    """Immutable directed graph of nodes and segments.

    Instances never mutate after construction and are safe to share read-only
    across concurrent workers.  Malformed speed profiles and dangling segment
    endpoints are rejected here, at load time, not at query time.
    """

    def __init__(self, nodes, segments):
        node_map: dict[str, Node] = {}
        for n in nodes:
            check_coordinates(n.lat, n.lng, f"node {n.id!r}")
            if n.id in node_map:
                raise InputError(f"duplicate node id {n.id!r}")
            node_map[n.id] = n

        seg_map: dict[str, Segment] = {}
        out: dict[str, list[Segment]] = {nid: [] for nid in node_map}
        for s in segments:
            if s.id in seg_map:
                raise InputError(f"duplicate segment id {s.id!r}")
            if s.from_node not in node_map or s.to_node not in node_map:
                raise InputError(f"segment {s.id!r} references an unknown node")
            if s.length <= 0.0:
                raise InputError(f"segment {s.id!r} must have positive length")
            _validate_profile(s)
            seg_map[s.id] = s
            out[s.from_node].append(s)

        self._nodes = MappingProxyType(node_map)
        self._segments = MappingProxyType(seg_map)
        self._out = {nid: tuple(sorted(v, key=lambda s: s.id)) for nid, v in out.items()}

    @property
    def nodes(self):
        return self._nodes

    @property
    def segments(self):
        return self._segments

    def node(self, node_id: str) -> Node:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise InputError(f"unknown node id {node_id!r}") from None

    def segment(self, segment_id: str) -> Segment:
        try:
            return self._segments[segment_id]
        except KeyError:
            raise InputError(f"unknown segment id {segment_id!r}") from None

    def outgoing(self, node_id: str) -> tuple[Segment, ...]:
        """Outgoing segments of a node, sorted by segment id."""
        if node_id not in self._out:
            raise InputError(f"unknown node id {node_id!r}")
        return self._out[node_id]

    def segment_end(self, segment_id: str) -> LatLng:
        """Geometry of the segment's end node."""
        seg = self.segment(segment_id)
        node = self.node(seg.to_node)
        return LatLng(node.lat, node.lng)


def network_to_dict(net: RoadNetwork) -> dict:
    """Canonical dict form: nodes then segments, each sorted by id."""
    return {
        "nodes": [
            {"id": n.id, "lat": n.lat, "lng": n.lng}
            for n in sorted(net.nodes.values(), key=lambda n: n.id)
        ],
        "segments": [
            {
                "id": s.id,
                "from": s.from_node,
                "to": s.to_node,
                "length_km": s.length,
                "speed_profile": [
                    {"start_min": start, "speed_kmh": kmh} for start, kmh in s.speed_profile
                ],
            }
            for s in sorted(net.segments.values(), key=lambda s: s.id)
        ],
    }


def network_from_dict(data: dict) -> RoadNetwork:
    try:
        nodes = [Node(str(n["id"]), float(n["lat"]), float(n["lng"])) for n in data["nodes"]]
        segments = [
            Segment(
                str(s["id"]),
                str(s["from"]),
                str(s["to"]),
                float(s["length_km"]),
                tuple((float(b["start_min"]), float(b["speed_kmh"])) for b in s["speed_profile"]),
            )
            for s in data["segments"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed network data: {exc}") from exc
    return RoadNetwork(nodes, segments)


def save_network(net: RoadNetwork, path) -> None:
    text = json.dumps(network_to_dict(net), indent=2, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_network(path) -> RoadNetwork:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"network file not found: {p}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"network file {p} is not valid JSON: {exc}") from exc
    return network_from_dict(data)
