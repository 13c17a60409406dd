"""Domain types for traffic scenes and lane maps.

A scene is a timestamped snapshot of traffic participants placed on a lane
map. Lanes are polyline centerlines with a width; relations between lanes
(successor, parallel, intersecting) are declared topology, not derived
from geometry. All types validate their invariants at construction and
are immutable afterwards.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "Vec2",
    "ObjectClass",
    "TrafficParticipant",
    "Lane",
    "LaneRelationKind",
    "LaneRelation",
    "LaneMap",
    "TrafficScene",
    "arclength_of",
    "point_along",
    "wrap_angle",
]


def wrap_angle(angle: float) -> float:
    """Map an angle in radians into [-pi, pi)."""
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class Vec2:
    """A planar point or displacement in meters."""

    x: float
    y: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"Vec2 components must be finite, got ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=np.float64)


class ObjectClass(Enum):
    CAR = "car"
    TRUCK = "truck"
    PEDESTRIAN = "pedestrian"
    BIKE = "bike"

    @property
    def one_hot_index(self) -> int:
        return _ONE_HOT_ORDER.index(self)


# Order of the one-hot block in node feature vectors.
_ONE_HOT_ORDER = (
    ObjectClass.CAR,
    ObjectClass.TRUCK,
    ObjectClass.PEDESTRIAN,
    ObjectClass.BIKE,
)


@dataclass(frozen=True)
class TrafficParticipant:
    """One tracked object at a single point in time."""

    id: str
    position: Vec2
    speed: float
    heading: float
    object_class: ObjectClass

    def __post_init__(self) -> None:
        object.__setattr__(self, "speed", float(self.speed))
        object.__setattr__(self, "heading", float(self.heading))
        if not self.id:
            raise ValueError("participant id must be non-empty")
        if not math.isfinite(self.speed) or self.speed < 0.0:
            raise ValueError(f"participant {self.id}: speed must be finite and >= 0, got {self.speed}")
        if not math.isfinite(self.heading) or not (-math.pi <= self.heading < math.pi):
            raise ValueError(
                f"participant {self.id}: heading must lie in [-pi, pi), got {self.heading}"
            )
        if not isinstance(self.object_class, ObjectClass):
            raise ValueError(f"participant {self.id}: bad object class {self.object_class!r}")


@dataclass(frozen=True)
class Lane:
    """A lane centerline polyline with constant width.

    Derived geometry (point array, cumulative arclengths) is precomputed
    here so projection code does not rebuild it per query.
    """

    id: str
    centerline: tuple[Vec2, ...]
    width: float

    points: np.ndarray = field(init=False, repr=False, compare=False)
    seg_lengths: np.ndarray = field(init=False, repr=False, compare=False)
    cum_arclengths: np.ndarray = field(init=False, repr=False, compare=False)
    length: float = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "width", float(self.width))
        object.__setattr__(self, "centerline", tuple(self.centerline))
        if not self.id:
            raise ValueError("lane id must be non-empty")
        if not math.isfinite(self.width) or self.width <= 0.0:
            raise ValueError(f"lane {self.id}: width must be finite and > 0, got {self.width}")
        if len(self.centerline) < 2:
            raise ValueError(f"lane {self.id}: centerline needs at least 2 points")
        pts = np.array([[p.x, p.y] for p in self.centerline], dtype=np.float64)
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if np.any(seg == 0.0):
            raise ValueError(f"lane {self.id}: consecutive centerline points must be distinct")
        cum = np.concatenate(([0.0], np.cumsum(seg)))
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "seg_lengths", seg)
        object.__setattr__(self, "cum_arclengths", cum)
        object.__setattr__(self, "length", float(cum[-1]))


def arclength_of(lane: Lane) -> float:
    """Total arclength of the lane centerline in meters."""
    return lane.length


def point_along(lane: Lane, s: float) -> tuple[Vec2, float]:
    """Point and tangent heading at arclength s, clamped to the lane extent."""
    s = float(min(max(s, 0.0), lane.length))
    k = int(np.searchsorted(lane.cum_arclengths[1:], s, side="left"))
    k = min(k, len(lane.seg_lengths) - 1)
    t = (s - lane.cum_arclengths[k]) / lane.seg_lengths[k]
    p = lane.points[k] + t * (lane.points[k + 1] - lane.points[k])
    dx, dy = lane.points[k + 1] - lane.points[k]
    return Vec2(float(p[0]), float(p[1])), wrap_angle(math.atan2(dy, dx))


class LaneRelationKind(Enum):
    SUCCESSOR = "successor"
    PARALLEL = "parallel"
    INTERSECTING = "intersecting"


@dataclass(frozen=True)
class LaneRelation:
    """A declared relation between two lanes.

    For SUCCESSOR, lane b continues lane a. For INTERSECTING both crossing
    arclengths must be given; they locate the shared conflict point along
    each lane.
    """

    kind: LaneRelationKind
    a: str
    b: str
    intersection_arclen_a: float | None = None
    intersection_arclen_b: float | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.kind, LaneRelationKind):
            raise ValueError(f"bad relation kind {self.kind!r}")
        if not self.a or not self.b:
            raise ValueError("relation endpoints must be non-empty lane ids")
        if self.kind in (LaneRelationKind.PARALLEL, LaneRelationKind.INTERSECTING) and self.a == self.b:
            raise ValueError(f"{self.kind.value} relation cannot relate lane {self.a} to itself")
        if self.kind is LaneRelationKind.INTERSECTING:
            for name, value in (
                ("intersection_arclen_a", self.intersection_arclen_a),
                ("intersection_arclen_b", self.intersection_arclen_b),
            ):
                if value is None or not math.isfinite(float(value)) or float(value) < 0.0:
                    raise ValueError(f"intersecting relation {self.a}/{self.b}: bad {name}={value!r}")
            object.__setattr__(self, "intersection_arclen_a", float(self.intersection_arclen_a))
            object.__setattr__(self, "intersection_arclen_b", float(self.intersection_arclen_b))
        elif self.intersection_arclen_a is not None or self.intersection_arclen_b is not None:
            raise ValueError(f"{self.kind.value} relation must not carry intersection arclengths")


@dataclass(frozen=True)
class LaneMap:
    """Lanes plus their declared relations, with lookup indices."""

    lanes: tuple[Lane, ...]
    relations: tuple[LaneRelation, ...] = ()

    lanes_by_id: dict = field(init=False, repr=False, compare=False)
    successors: dict = field(init=False, repr=False, compare=False)
    parallel_pairs: frozenset = field(init=False, repr=False, compare=False)
    intersections: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "lanes", tuple(self.lanes))
        object.__setattr__(self, "relations", tuple(self.relations))
        by_id: dict[str, Lane] = {}
        for lane in self.lanes:
            if lane.id in by_id:
                raise ValueError(f"duplicate lane id {lane.id}")
            by_id[lane.id] = lane

        successors: dict[str, tuple[str, ...]] = {}
        parallel: set[frozenset] = set()
        # (origin lane, other lane) -> crossing arclengths (on origin, on other)
        intersections: dict[tuple[str, str], tuple[tuple[float, float], ...]] = {}
        for rel in self.relations:
            for end in (rel.a, rel.b):
                if end not in by_id:
                    raise ValueError(f"relation references unknown lane {end}")
            if rel.kind is LaneRelationKind.SUCCESSOR:
                successors[rel.a] = successors.get(rel.a, ()) + (rel.b,)
            elif rel.kind is LaneRelationKind.PARALLEL:
                parallel.add(frozenset((rel.a, rel.b)))
            else:
                sa, sb = rel.intersection_arclen_a, rel.intersection_arclen_b
                if sa > by_id[rel.a].length or sb > by_id[rel.b].length:
                    raise ValueError(
                        f"intersection arclength outside lane extent for {rel.a}/{rel.b}"
                    )
                intersections[(rel.a, rel.b)] = intersections.get((rel.a, rel.b), ()) + ((sa, sb),)
                intersections[(rel.b, rel.a)] = intersections.get((rel.b, rel.a), ()) + ((sb, sa),)

        # successor chains must not loop back
        state: dict[str, int] = {}

        def visit(lane_id: str) -> None:
            state[lane_id] = 1
            for nxt in successors.get(lane_id, ()):
                if state.get(nxt) == 1:
                    raise ValueError(f"successor relations form a cycle through {nxt}")
                if state.get(nxt) != 2:
                    visit(nxt)
            state[lane_id] = 2

        for lane_id in successors:
            if state.get(lane_id) != 2:
                visit(lane_id)

        object.__setattr__(self, "lanes_by_id", by_id)
        object.__setattr__(self, "successors", successors)
        object.__setattr__(self, "parallel_pairs", frozenset(parallel))
        object.__setattr__(self, "intersections", intersections)

    def are_parallel(self, a: str, b: str) -> bool:
        return frozenset((a, b)) in self.parallel_pairs


@dataclass(frozen=True)
class TrafficScene:
    """A snapshot of participants referencing a lane map by id."""

    scene_id: str
    location_label: str
    participants: tuple[TrafficParticipant, ...]
    map_ref: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "participants", tuple(self.participants))
        if not self.scene_id:
            raise ValueError("scene_id must be non-empty")
        if not self.participants:
            raise ValueError(f"scene {self.scene_id}: needs at least one participant")
        seen: set[str] = set()
        for p in self.participants:
            if p.id in seen:
                raise ValueError(f"scene {self.scene_id}: duplicate participant id {p.id}")
            seen.add(p.id)
