"""Synthetic scene templates.

Five parametric templates cover the situations the embedding should tell
apart: free-flowing lane following, a stop-and-go queue, a merge with a
parallel ramp, a four-way intersection, and a mixed urban patch with all
relation types plus non-car participants. Each template owns a canonical
lane map; scenes are drawn per template with configurable count, gap and
speed ranges. Everything is deterministic in the provided seeds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .scene import (
    Lane,
    LaneMap,
    LaneRelation,
    LaneRelationKind,
    ObjectClass,
    TrafficParticipant,
    TrafficScene,
    Vec2,
    point_along,
)
from .seeds import derive_seed

__all__ = [
    "ScenarioTemplate",
    "TemplateParams",
    "DEFAULT_TEMPLATE_PARAMS",
    "generate_map",
    "generate_scene",
    "generate_dataset",
    "map_id_for",
]


class ScenarioTemplate(Enum):
    STRAIGHT_FOLLOWING = "straight_following"
    MERGE_LANE = "merge_lane"
    FOUR_WAY_INTERSECTION = "four_way_intersection"
    QUEUE_JAM = "queue_jam"
    MIXED = "mixed"


@dataclass(frozen=True)
class TemplateParams:
    """Sampling ranges for one template; gaps only apply to the
    single-lane car-chain templates."""

    count_min: int
    count_max: int
    speed_min: float
    speed_max: float
    gap_min: float | None = None
    gap_max: float | None = None

    def __post_init__(self) -> None:
        if not 1 <= self.count_min <= self.count_max:
            raise ValueError("bad participant count range")
        if not 0.0 <= self.speed_min <= self.speed_max:
            raise ValueError("bad speed range")
        if (self.gap_min is None) != (self.gap_max is None):
            raise ValueError("gap range must set both ends or neither")
        if self.gap_min is not None and not 0.0 < self.gap_min <= self.gap_max:
            raise ValueError("bad gap range")


# Fixed participant counts per template keep the templates separated in
# scene-composition space (the embedding readout sums over nodes, so count
# is the dominant scale); within-template variety comes from speeds, gaps,
# and lane placement.  MIXED keeps a count range so the corpus still spans
# intermediate sizes.
DEFAULT_TEMPLATE_PARAMS: dict[ScenarioTemplate, TemplateParams] = {
    ScenarioTemplate.STRAIGHT_FOLLOWING: TemplateParams(5, 5, 5.0, 11.0, 10.0, 14.0),
    ScenarioTemplate.MERGE_LANE: TemplateParams(10, 10, 3.0, 9.0),
    ScenarioTemplate.FOUR_WAY_INTERSECTION: TemplateParams(9, 9, 2.0, 8.0),
    ScenarioTemplate.QUEUE_JAM: TemplateParams(13, 13, 0.0, 1.0, 2.0, 4.0),
    ScenarioTemplate.MIXED: TemplateParams(3, 8, 1.0, 9.0),
}

LANE_WIDTH = 3.5


def map_id_for(template: ScenarioTemplate) -> str:
    return f"map-{template.value}"


def _straight(lane_id: str, start: tuple[float, float], end: tuple[float, float]) -> Lane:
    return Lane(lane_id, (Vec2(*start), Vec2(*end)), LANE_WIDTH)


def _intersection_lanes() -> tuple[Lane, ...]:
    # Two perpendicular roads, one directed lane per side, centerlines
    # offset 3 m from the road axis so opposing lanes sit 6 m apart
    # (outside the default projection gate of 5.25 m).
    return (
        _straight("ew", (-53.0, -3.0), (47.0, -3.0)),
        _straight("we", (53.0, 3.0), (-47.0, 3.0)),
        _straight("ns", (-3.0, 47.0), (-3.0, -53.0)),
        _straight("sn", (3.0, -47.0), (3.0, 53.0)),
    )


def _intersection_relations() -> tuple[LaneRelation, ...]:
    # True geometric crossing arclengths. The primary crossings sit at both
    # lane midpoints; the two skew pairs cross at 44/56.
    x = LaneRelationKind.INTERSECTING
    return (
        LaneRelation(x, "ew", "ns", 50.0, 50.0),
        LaneRelation(x, "we", "sn", 50.0, 50.0),
        LaneRelation(x, "ns", "we", 44.0, 56.0),
        LaneRelation(x, "sn", "ew", 44.0, 56.0),
    )


def generate_map(template: ScenarioTemplate) -> LaneMap:
    """Canonical lane map of a template; deterministic, no sampling."""
    if template is ScenarioTemplate.STRAIGHT_FOLLOWING:
        return LaneMap((_straight("main", (0.0, 0.0), (200.0, 0.0)),))
    if template is ScenarioTemplate.QUEUE_JAM:
        return LaneMap((_straight("queue", (0.0, 0.0), (150.0, 0.0)),))
    if template is ScenarioTemplate.MERGE_LANE:
        return LaneMap(
            (
                _straight("main", (0.0, 0.0), (100.0, 0.0)),
                _straight("ramp", (0.0, -3.5), (100.0, -3.5)),
            ),
            (
                LaneRelation(LaneRelationKind.PARALLEL, "main", "ramp"),
                LaneRelation(LaneRelationKind.SUCCESSOR, "ramp", "main"),
            ),
        )
    if template is ScenarioTemplate.FOUR_WAY_INTERSECTION:
        return LaneMap(_intersection_lanes(), _intersection_relations())
    if template is ScenarioTemplate.MIXED:
        lanes = _intersection_lanes() + (
            _straight("ew2", (-53.0, -6.5), (47.0, -6.5)),
            _straight("ramp", (-153.0, -6.5), (-53.0, -6.5)),
        )
        relations = _intersection_relations() + (
            LaneRelation(LaneRelationKind.INTERSECTING, "ns", "ew2", 53.5, 50.0),
            LaneRelation(LaneRelationKind.INTERSECTING, "sn", "ew2", 40.5, 56.0),
            LaneRelation(LaneRelationKind.PARALLEL, "ew", "ew2"),
            LaneRelation(LaneRelationKind.SUCCESSOR, "ramp", "ew2"),
        )
        return LaneMap(lanes, relations)
    raise ValueError(f"unknown template {template!r}")


def _car_on_lane(lane: Lane, pid: str, s: float, speed: float) -> TrafficParticipant:
    pos, heading = point_along(lane, s)
    return TrafficParticipant(pid, pos, speed, heading, ObjectClass.CAR)


def _on_lane(
    lane: Lane, pid: str, s: float, speed: float, object_class: ObjectClass
) -> TrafficParticipant:
    pos, heading = point_along(lane, s)
    return TrafficParticipant(pid, pos, speed, heading, object_class)


def _spaced_positions(
    rng: np.random.Generator, existing: list[float], lo: float, hi: float, min_gap: float = 2.0
) -> float:
    """One arclength in [lo, hi] at least min_gap from existing picks;
    gives up on the gap after a bounded number of retries."""
    s = float(rng.uniform(lo, hi))
    for _ in range(50):
        if all(abs(s - e) >= min_gap for e in existing):
            break
        s = float(rng.uniform(lo, hi))
    existing.append(s)
    return s


def _chain_scene(
    lane: Lane, rng: np.random.Generator, params: TemplateParams
) -> list[TrafficParticipant]:
    n = int(rng.integers(params.count_min, params.count_max + 1))
    s = float(rng.uniform(5.0, 15.0))
    parts = []
    for i in range(n):
        if i:
            s += float(rng.uniform(params.gap_min, params.gap_max))
        speed = float(rng.uniform(params.speed_min, params.speed_max))
        parts.append(_car_on_lane(lane, f"p{i}", s, speed))
    return parts


def generate_scene(
    template: ScenarioTemplate,
    lane_map: LaneMap,
    seed: int,
    scene_id: str | None = None,
    params: TemplateParams | None = None,
) -> TrafficScene:
    """Draw one scene of the given template on its canonical map."""
    rng = np.random.default_rng(seed)
    params = params or DEFAULT_TEMPLATE_PARAMS[template]
    lanes = {lane.id: lane for lane in lane_map.lanes}
    parts: list[TrafficParticipant]

    if template in (ScenarioTemplate.STRAIGHT_FOLLOWING, ScenarioTemplate.QUEUE_JAM):
        lane = lanes["main" if template is ScenarioTemplate.STRAIGHT_FOLLOWING else "queue"]
        parts = _chain_scene(lane, rng, params)

    elif template is ScenarioTemplate.MERGE_LANE:
        n = int(rng.integers(params.count_min, params.count_max + 1))
        taken: dict[str, list[float]] = {"main": [], "ramp": []}
        parts = []
        for i in range(n):
            lane_id = "main" if rng.random() < 0.6 else "ramp"
            s = _spaced_positions(rng, taken[lane_id], 5.0, 95.0)
            speed = float(rng.uniform(params.speed_min, params.speed_max))
            parts.append(_car_on_lane(lanes[lane_id], f"p{i}", s, speed))

    elif template is ScenarioTemplate.FOUR_WAY_INTERSECTION:
        n = int(rng.integers(params.count_min, params.count_max + 1))
        arms = ["ew", "we", "ns", "sn"]
        order = rng.permutation(len(arms))
        taken = {arm: [] for arm in arms}
        parts = []
        for i in range(n):
            arm = arms[int(order[i % 4])]
            # keep cars at least 8 m short of any conflict point so each
            # car projects onto exactly one lane
            s = _spaced_positions(rng, taken[arm], 10.0, 42.0)
            speed = float(rng.uniform(params.speed_min, params.speed_max))
            parts.append(_car_on_lane(lanes[arm], f"p{i}", s, speed))

    elif template is ScenarioTemplate.MIXED:
        n = int(rng.integers(params.count_min, params.count_max + 1))
        vehicle_lanes = ["ew", "we", "ns", "sn", "ew2"]
        ranges = {"ew": (10.0, 42.0), "we": (10.0, 42.0), "ns": (10.0, 42.0),
                  "sn": (10.0, 42.0), "ew2": (5.0, 60.0), "ramp": (10.0, 90.0)}
        taken = {lane_id: [] for lane_id in ranges}
        parts = []
        for i in range(n):
            roll = rng.random()
            if roll < 0.70:
                cls = ObjectClass.CAR
            elif roll < 0.80:
                cls = ObjectClass.TRUCK
            elif roll < 0.90:
                cls = ObjectClass.BIKE
            else:
                cls = ObjectClass.PEDESTRIAN
            if cls is ObjectClass.PEDESTRIAN:
                # off every lane: becomes an isolated node
                pos = Vec2(float(rng.uniform(15.0, 35.0)), float(rng.uniform(10.0, 30.0)))
                heading = float(rng.uniform(-math.pi, math.pi))
                speed = float(rng.uniform(0.5, 2.0))
                parts.append(TrafficParticipant(f"p{i}", pos, speed, heading, cls))
                continue
            if cls is ObjectClass.BIKE:
                lane_id = "ramp" if rng.random() < 0.5 else "ew2"
                speed = float(rng.uniform(2.0, 6.0))
            else:
                lane_id = vehicle_lanes[int(rng.integers(len(vehicle_lanes)))]
                speed = float(rng.uniform(params.speed_min, params.speed_max))
            lo, hi = ranges[lane_id]
            s = _spaced_positions(rng, taken[lane_id], lo, hi)
            parts.append(_on_lane(lanes[lane_id], f"p{i}", s, speed, cls))

    else:
        raise ValueError(f"unknown template {template!r}")

    return TrafficScene(
        scene_id=scene_id or f"{template.value}-s{seed & 0xFFFFFFFF:08x}",
        location_label=template.value,
        participants=tuple(parts),
        map_ref=map_id_for(template),
    )


def generate_dataset(
    counts: dict[ScenarioTemplate, int],
    seed: int,
    params: dict[ScenarioTemplate, TemplateParams] | None = None,
) -> tuple[list[TrafficScene], dict[str, LaneMap]]:
    """Scenes for each template plus the maps they reference.

    Scene ids are '<template>-NNNN'; per-scene seeds derive from (seed,
    template, index) so any scene can be regenerated in isolation.
    """
    total = sum(counts.values())
    if total < 10:
        raise ValueError(f"dataset needs at least 10 scenes, got {total}")
    scenes: list[TrafficScene] = []
    maps: dict[str, LaneMap] = {}
    for template in ScenarioTemplate:
        n = counts.get(template, 0)
        if n <= 0:
            continue
        lane_map = generate_map(template)
        maps[map_id_for(template)] = lane_map
        tpl_params = (params or {}).get(template)
        for i in range(n):
            scenes.append(
                generate_scene(
                    template,
                    lane_map,
                    derive_seed(seed, template.value, i),
                    scene_id=f"{template.value}-{i:04d}",
                    params=tpl_params,
                )
            )
    return scenes, maps
