"""Dynamic route recommendation over a weighted distance/time objective.

A route plan answers "how should the trip continue from the segment being
entered right now?".  Trips are accounted from entering their first segment
to entering their last, so a plan's path starts with the origin segment and
stops just before the destination segment; the plan from a segment to itself
is empty.  This single convention makes the live per-step scores collapse to
the offline features on the final step with no special cases.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from weakref import WeakKeyDictionary

from .errors import InputError, NoRouteError
from .network import RoadNetwork, minute_of_day, segment_travel_time


@dataclass(frozen=True)
class RoutingWeights:
    """Linear weights of the route objective: cost = w1 * km + w2 * minutes."""

    w1: float = 0.5
    w2: float = 0.5

    def __post_init__(self):
        if self.w1 < 0.0 or self.w2 < 0.0 or self.w1 + self.w2 <= 0.0:
            raise InputError("routing weights must be non-negative with a positive sum")


@dataclass(frozen=True)
class RoutePlanStep:
    """One route recommendation issued at ``planned_at``.

    ``distance`` and ``est_time`` always equal ``path_distance(path)`` and
    ``path_est_time(path, planned_at)`` for the carried path.
    """

    path: tuple[str, ...]
    planned_at: float  # seconds since epoch
    distance: float  # km
    est_time: float  # minutes


def _check_contiguous(net: RoadNetwork, path) -> None:
    prev = None
    for i, sid in enumerate(path):
        seg = net.segment(sid)
        if prev is not None and prev.to_node != seg.from_node:
            raise InputError(f"path is not contiguous between positions {i - 1} and {i}")
        prev = seg


def path_distance(net: RoadNetwork, path) -> float:
    """Total length in km of a contiguous segment path; 0 for the empty path."""
    _check_contiguous(net, path)
    total = 0.0
    for sid in path:
        total += net.segment(sid).length
    return total


def path_est_time(net: RoadNetwork, path, depart: float) -> float:
    """Estimated minutes to traverse ``path`` departing at ``depart``.

    Entry times evolve forward: each segment is entered the moment the
    previous one finishes, and its speed bucket is sampled at that entry
    minute.
    """
    _check_contiguous(net, path)
    t = depart
    for sid in path:
        t += 60.0 * segment_travel_time(net.segment(sid), minute_of_day(t))
    return (t - depart) / 60.0


# Per-network cache of reverse lower-bound tables, keyed by goal node.  The
# network is immutable, so the tables never go stale.
_HEURISTICS: WeakKeyDictionary = WeakKeyDictionary()


def _reverse_adjacency(net: RoadNetwork) -> dict[str, list]:
    entry = _HEURISTICS.setdefault(net, {"_rev": None, "goals": {}})
    if entry["_rev"] is None:
        rev: dict[str, list] = {nid: [] for nid in net.nodes}
        for seg in net.segments.values():
            rev[seg.to_node].append(seg)
        entry["_rev"] = rev
    return entry["_rev"]


def _lower_bounds(net: RoadNetwork, goal: str) -> tuple[dict[str, float], dict[str, float]]:
    """Static per-node lower bounds on remaining km and remaining minutes.

    Distances use true segment lengths; times use each segment's fastest
    bucket, so both bounds are admissible and consistent for the
    time-dependent search whatever the departure time.
    """
    entry = _HEURISTICS.setdefault(net, {"_rev": None, "goals": {}})
    if goal in entry["goals"]:
        return entry["goals"][goal]
    rev = _reverse_adjacency(net)

    def dijkstra(edge_cost) -> dict[str, float]:
        dist = {goal: 0.0}
        heap = [(0.0, goal)]
        while heap:
            d, node = heapq.heappop(heap)
            if d > dist.get(node, float("inf")):
                continue
            for seg in rev[node]:
                nd = d + edge_cost(seg)
                if nd < dist.get(seg.from_node, float("inf")):
                    dist[seg.from_node] = nd
                    heapq.heappush(heap, (nd, seg.from_node))
        return dist

    km = dijkstra(lambda seg: seg.length)
    minutes = dijkstra(lambda seg: min(seg.length / kmh * 60.0 for _, kmh in seg.speed_profile))
    entry["goals"][goal] = (km, minutes)
    return km, minutes


def route_plan(
    net: RoadNetwork,
    origin: str,
    dest: str,
    depart: float,
    weights: RoutingWeights = RoutingWeights(),
) -> RoutePlanStep:
    """Best remaining route from ``origin`` (entered at ``depart``) to ``dest``.

    Minimizes ``w1 * distance + w2 * est_time`` with segment entry times
    evolving along the path.  The search is exact label-setting over
    (node, entry-time) states: labels at the same node with different entry
    times are distinct states, which keeps the result correct even when a
    later entry crosses into a faster speed bucket.  Static reverse shortest
    paths (km, and minutes at per-segment top speed) give a consistent A*
    bound that confines the search to the near-optimal corridor.  Equal-cost
    ties resolve toward the lexicographically smallest segment-id sequence.
    """
    o = net.segment(origin)
    d = net.segment(dest)
    if origin == dest:
        return RoutePlanStep((), depart, 0.0, 0.0)

    goal = d.from_node
    h_km, h_min = _lower_bounds(net, goal)
    w1, w2 = weights.w1, weights.w2

    def priority(dist_km: float, t_abs: float, node: str) -> float:
        g = w1 * dist_km + w2 * ((t_abs - depart) / 60.0)
        return g + w1 * h_km[node] + w2 * h_min[node]

    t0 = depart + 60.0 * segment_travel_time(o, minute_of_day(depart))
    if o.to_node not in h_km:
        raise NoRouteError(f"no route from segment {origin!r} to segment {dest!r}")

    start_path = (origin,)
    heap = [(priority(o.length, t0, o.to_node), start_path, o.to_node, o.length, t0)]
    # best label per exact (node, entry-time) state: (cost, path)
    best: dict[tuple[str, float], tuple[float, tuple[str, ...]]] = {
        (o.to_node, t0): (w1 * o.length + w2 * ((t0 - depart) / 60.0), start_path)
    }

    while heap:
        f, path, node, dist_km, t_abs = heapq.heappop(heap)
        if node == goal:
            return RoutePlanStep(
                path, depart, path_distance(net, path), path_est_time(net, path, depart)
            )
        state = (node, t_abs)
        cost = w1 * dist_km + w2 * ((t_abs - depart) / 60.0)
        recorded = best.get(state)
        if recorded is not None and (recorded[0], recorded[1]) != (cost, path):
            continue  # superseded by a better label for this exact state
        for seg in net.outgoing(node):
            if seg.to_node not in h_km:
                continue  # cannot reach the goal through this segment
            nt = t_abs + 60.0 * segment_travel_time(seg, minute_of_day(t_abs))
            nd = dist_km + seg.length
            npath = path + (seg.id,)
            ncost = w1 * nd + w2 * ((nt - depart) / 60.0)
            nstate = (seg.to_node, nt)
            known = best.get(nstate)
            if known is not None and (known[0] < ncost or (known[0] == ncost and known[1] <= npath)):
                continue
            best[nstate] = (ncost, npath)
            heapq.heappush(heap, (priority(nd, nt, seg.to_node), npath, seg.to_node, nd, nt))

    raise NoRouteError(f"no route from segment {origin!r} to segment {dest!r}")
