"""HMM map matching: raw GPS trajectories to segment sequences.

The decoder is a standard Viterbi pass: per-point candidate segments score a
Gaussian emission in perpendicular point-to-segment distance, transitions an
exponential penalty in the gap between on-network route distance and
great-circle displacement.  Defaults follow common map-matching practice
(sigma 25 m, beta 2.0, candidate radius 100 m); all three are configurable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InputError, MatchError, NoRouteError
from .network import EARTH_RADIUS_KM, RoadNetwork, Segment, haversine_km
from .routing import RoutingWeights, route_plan

_DISTANCE_ONLY = RoutingWeights(1.0, 0.0)


@dataclass(frozen=True)
class MatchConfig:
    emission_sigma: float = 25.0  # metres of GPS noise
    candidate_radius: float = 100.0  # metres
    transition_beta: float = 2.0  # km scale of the route/great-circle gap

    def __post_init__(self):
        if self.emission_sigma <= 0 or self.candidate_radius <= 0 or self.transition_beta <= 0:
            raise InputError("match parameters must all be positive")


@dataclass(frozen=True)
class TrajStep:
    """Entry onto one segment: (segment id, entry timestamp)."""

    segment: str
    t: float


@dataclass(frozen=True)
class AbstractTrajectory:
    """Ordered segment entries of one occupied trip.

    Steps record *entries*: the final step marks arrival on the destination
    segment.  Timestamps strictly increase and consecutive segments connect
    in the network (the connectivity half needs the network, see
    ``validate_trajectory``).
    """

    trip_id: str
    steps: tuple[TrajStep, ...]

    def __post_init__(self):
        if not self.steps:
            raise InputError(f"trajectory {self.trip_id!r} is empty")
        for i in range(1, len(self.steps)):
            if self.steps[i].t <= self.steps[i - 1].t:
                raise InputError(
                    f"trajectory {self.trip_id!r}: timestamps not increasing at step {i}"
                )


def validate_trajectory(net: RoadNetwork, atr: AbstractTrajectory) -> None:
    """Check the network-dependent half of the trajectory invariants."""
    prev = None
    for i, step in enumerate(atr.steps):
        seg = net.segment(step.segment)
        if prev is not None and net.segment(prev.segment).to_node != seg.from_node:
            raise InputError(
                f"trajectory {atr.trip_id!r}: segments {prev.segment!r} -> {step.segment!r} "
                f"are not connected (step {i})"
            )
        prev = step


def _project(net: RoadNetwork, point, seg: Segment) -> tuple[float, float]:
    """(distance_m, along_fraction) of a point against a straight segment.

    Uses a local equirectangular projection centred on the point; fine at the
    sub-kilometre scales where candidates live.  The fraction is clamped to
    the segment, 0 at its entry node and 1 at its exit node.
    """
    a = net.node(seg.from_node)
    b = net.node(seg.to_node)
    kx = EARTH_RADIUS_KM * 1000.0 * math.cos(math.radians(point.lat)) * math.pi / 180.0
    ky = EARTH_RADIUS_KM * 1000.0 * math.pi / 180.0
    ax = (a.lng - point.lng) * kx
    ay = (a.lat - point.lat) * ky
    bx = (b.lng - point.lng) * kx
    by = (b.lat - point.lat) * ky
    dx, dy = bx - ax, by - ay
    norm2 = dx * dx + dy * dy
    if norm2 == 0.0:
        return math.hypot(ax, ay), 0.0
    u = max(0.0, min(1.0, -(ax * dx + ay * dy) / norm2))
    return math.hypot(ax + u * dx, ay + u * dy), u


def point_segment_distance_m(net: RoadNetwork, point, seg: Segment) -> float:
    """Perpendicular distance in metres from a point to a straight segment."""
    return _project(net, point, seg)[0]


def along_track_km(net: RoadNetwork, point, seg: Segment) -> float:
    """Driving distance from the segment's entry node to the point's projection."""
    return _project(net, point, seg)[1] * seg.length


def emission_logprob(distance_m: float, cfg: MatchConfig) -> float:
    # Gaussian in perpendicular distance; the normalizing constant is shared
    # by every candidate and dropped.
    z = distance_m / cfg.emission_sigma
    return -0.5 * z * z


def transition_logprob(route_km: float | None, gc_km: float, cfg: MatchConfig) -> float:
    if route_km is None:
        return -math.inf
    return -abs(route_km - gc_km) / cfg.transition_beta


def candidates_for(net: RoadNetwork, point, radius_m: float) -> list[Segment]:
    """Segments within ``radius_m`` of the point, sorted by id."""
    found = [
        seg
        for seg in net.segments.values()
        if point_segment_distance_m(net, point, seg) <= radius_m
    ]
    found.sort(key=lambda s: s.id)
    return found


class RouteDistanceCache:
    """Memoized on-network distance between candidate segments.

    Distance-only routing is time-independent, so one value per ordered pair
    is enough for a whole trajectory.
    """

    def __init__(self, net: RoadNetwork):
        self.net = net
        self.cache: dict[tuple[str, str], float | None] = {}

    def km(self, a: str, b: str, t: float) -> float | None:
        key = (a, b)
        if key not in self.cache:
            try:
                self.cache[key] = route_plan(self.net, a, b, t, _DISTANCE_ONLY).distance
            except NoRouteError:
                self.cache[key] = None
        return self.cache[key]


def candidate_route_km(net, a: Segment, p_a, b: Segment, p_b, routes: RouteDistanceCache,
                       t: float) -> float | None:
    """Driving distance between two candidate projections.

    The segment-to-segment route covers ``a`` in full and stops on entering
    ``b``; the along-track corrections move both endpoints to the projected
    GPS positions.  Backward motion along a one-way segment has no forward
    driving distance, so negatives clamp to zero (and then pay the full
    great-circle gap in the transition score), which is what disambiguates a
    segment from its reverse twin.
    """
    if a.id == b.id:
        raw = along_track_km(net, p_b, b) - along_track_km(net, p_a, a)
    else:
        base = routes.km(a.id, b.id, t)
        if base is None:
            return None
        raw = base - along_track_km(net, p_a, a) + along_track_km(net, p_b, b)
    return max(0.0, raw)


def _check_points(tr) -> None:
    if len(tr) < 2:
        raise InputError("map matching needs at least 2 GPS points")
    for i in range(1, len(tr)):
        if tr[i].t <= tr[i - 1].t:
            raise InputError(f"GPS timestamps must strictly increase (point {i})")


def viterbi_decode(net: RoadNetwork, tr, cfg: MatchConfig = MatchConfig()) -> list[str]:
    """Most likely candidate segment per GPS point.

    Score ties are broken toward the lower segment id, which makes the decode
    equal to exhaustive enumeration of candidate sequences under the ordering
    (score desc, reversed id sequence asc).
    """
    _check_points(tr)
    cands: list[list[Segment]] = []
    for i, p in enumerate(tr):
        found = candidates_for(net, p, cfg.candidate_radius)
        if not found:
            raise MatchError(f"GPS point {i} has no candidate segment within "
                             f"{cfg.candidate_radius} m", point_index=i)
        cands.append(found)

    routes = RouteDistanceCache(net)
    # score[j] aligns with cands[k]; back[k][j] is the chosen predecessor index
    score = [emission_logprob(point_segment_distance_m(net, tr[0], c), cfg) for c in cands[0]]
    back: list[list[int]] = []

    for k in range(1, len(tr)):
        gc = haversine_km(tr[k - 1], tr[k])
        new_score: list[float] = []
        pointers: list[int] = []
        for c in cands[k]:
            emis = emission_logprob(point_segment_distance_m(net, tr[k], c), cfg)
            best = -math.inf
            best_j = -1
            for j, prev in enumerate(cands[k - 1]):
                if score[j] == -math.inf:
                    continue
                route = candidate_route_km(net, prev, tr[k - 1], c, tr[k], routes, tr[k - 1].t)
                cand = score[j] + transition_logprob(route, gc, cfg)
                if cand > best:  # strict: first (lowest-id) predecessor wins ties
                    best = cand
                    best_j = j
            new_score.append(best + emis if best > -math.inf else -math.inf)
            pointers.append(best_j)
        if all(s == -math.inf for s in new_score):
            raise MatchError(f"no feasible transition into GPS point {k}", point_index=k)
        score = new_score
        back.append(pointers)

    best_last = max(score)
    last = score.index(best_last)  # candidates are id-sorted: ties pick the lowest id
    states = [last]
    for pointers in reversed(back):
        states.append(pointers[states[-1]])
    states.reverse()
    return [cands[k][j].id for k, j in enumerate(states)]


def match_trajectory(
    net: RoadNetwork, tr, cfg: MatchConfig = MatchConfig(), trip_id: str = ""
) -> AbstractTrajectory:
    """Match raw GPS points onto the network as an abstract trajectory.

    Consecutive duplicate decodes collapse to one entry keeping the first
    timestamp.  Where the decode jumps between non-adjacent segments, the
    distance-optimal connecting segments are stitched in with entry times
    interpolated along the route, so the output always satisfies the
    trajectory invariants.
    """
    states = viterbi_decode(net, tr, cfg)

    collapsed: list[TrajStep] = []
    for sid, point in zip(states, tr):
        if not collapsed or collapsed[-1].segment != sid:
            collapsed.append(TrajStep(sid, point.t))

    steps: list[TrajStep] = []
    for i, cur in enumerate(collapsed):
        if i == 0:
            steps.append(cur)
            continue
        prev = steps[-1]
        a = net.segment(prev.segment)
        b = net.segment(cur.segment)
        if a.to_node != b.from_node:
            try:
                plan = route_plan(net, prev.segment, cur.segment, prev.t, _DISTANCE_ONLY)
            except NoRouteError:
                raise MatchError(
                    f"matched segments {prev.segment!r} -> {cur.segment!r} cannot be connected",
                    point_index=i,
                ) from None
            total = plan.distance
            span = cur.t - prev.t
            covered = a.length  # plan.path[0] is prev.segment itself
            for sid in plan.path[1:]:
                steps.append(TrajStep(sid, prev.t + span * covered / total))
                covered += net.segment(sid).length
        steps.append(cur)

    atr = AbstractTrajectory(trip_id, tuple(steps))
    validate_trajectory(net, atr)
    return atr
