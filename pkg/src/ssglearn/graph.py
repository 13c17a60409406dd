"""Semantic scene graph construction.

Every participant becomes a node; ordered participant pairs become at most
one directed edge that merges the evidence of all their projection
identity pairs. Relations come in three types with separate certainty
channels:

  longitudinal  same lane, or connected through successor lanes, within a
                path-distance horizon
  lateral       lanes declared parallel (arclengths treated as aligned)
  intersecting  lanes declared crossing, with known conflict arclengths

An identity pair contributes to exactly one type, checked in the order
above. Distances are signed: positive when the target sits ahead of
(downstream from) the origin. Certainty-gated features are exactly zero
when their certainty channel is zero.

Node features: [speed, car, truck, pedestrian, bike].
Edge features: [cert_lon, cert_lat, cert_int, path_distance,
int_path_distance, origin_centerline_distance, target_centerline_distance,
int_origin_centerline_distance, int_target_centerline_distance].
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import EmptyScene
from .projection import GATE_WIDTH_FACTOR, ProjectionIdentity, candidate_identities
from .scene import LaneMap, ObjectClass, TrafficScene, _ONE_HOT_ORDER

__all__ = [
    "RelationType",
    "SceneGraph",
    "GraphFeatures",
    "classify_pair",
    "build_scene_graph",
    "graph_level_features",
    "graph_to_dict",
    "graph_from_dict",
    "NODE_WIDTH",
    "EDGE_WIDTH",
    "DEFAULT_HORIZON",
]

NODE_WIDTH = 5
EDGE_WIDTH = 9

# Longitudinal relations beyond this path distance are dropped; bounds the
# edge count of dense straight-road scenes.
DEFAULT_HORIZON = 50.0


class RelationType(Enum):
    LONGITUDINAL = "longitudinal"
    LATERAL = "lateral"
    INTERSECTING = "intersecting"


@dataclass(frozen=True)
class SceneGraph:
    """Nodes, directed edges and their feature matrices for one scene."""

    scene_id: str
    location_label: str
    node_ids: tuple[str, ...]
    node_features: np.ndarray  # (n, NODE_WIDTH) float64
    edges: np.ndarray  # (m, 2) int64 rows of (origin, target) node indices
    edge_features: np.ndarray  # (m, EDGE_WIDTH) float64

    def __post_init__(self) -> None:
        nf = np.asarray(self.node_features, dtype=np.float64).reshape(-1, NODE_WIDTH)
        ed = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        ef = np.asarray(self.edge_features, dtype=np.float64).reshape(-1, EDGE_WIDTH)
        if ed.shape[0] != ef.shape[0]:
            raise ValueError(f"graph {self.scene_id}: edge/feature row count mismatch")
        if ed.size and (ed.min() < 0 or ed.max() >= nf.shape[0]):
            raise ValueError(f"graph {self.scene_id}: edge endpoint out of range")
        if ed.size and np.any(ed[:, 0] == ed[:, 1]):
            raise ValueError(f"graph {self.scene_id}: self-edges are not allowed")
        object.__setattr__(self, "node_features", nf)
        object.__setattr__(self, "edges", ed)
        object.__setattr__(self, "edge_features", ef)

    @property
    def n_nodes(self) -> int:
        return self.node_features.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]


def classify_pair(
    pi_o: ProjectionIdentity,
    pi_t: ProjectionIdentity,
    lane_map: LaneMap,
    horizon: float = DEFAULT_HORIZON,
) -> tuple[RelationType, float] | None:
    """Relation type and signed distance for one identity pair, or None.

    The returned distance is the path distance for longitudinal and
    lateral relations, and the origin's arclength distance to the conflict
    point for intersecting relations.
    """
    if pi_o.lane_id == pi_t.lane_id:
        dist = pi_t.s - pi_o.s
        if abs(dist) <= horizon:
            return RelationType.LONGITUDINAL, dist
        return None
    chained = _chain_distance(lane_map, pi_o, pi_t, horizon)
    if chained is not None:
        return RelationType.LONGITUDINAL, chained
    if lane_map.are_parallel(pi_o.lane_id, pi_t.lane_id):
        return RelationType.LATERAL, pi_t.s - pi_o.s
    crossings = lane_map.intersections.get((pi_o.lane_id, pi_t.lane_id))
    if crossings:
        dists = [s_on_origin - pi_o.s for s_on_origin, _ in crossings]
        return RelationType.INTERSECTING, min(dists, key=abs)
    return None


def _chain_distance(
    lane_map: LaneMap, pi_o: ProjectionIdentity, pi_t: ProjectionIdentity, horizon: float
) -> float | None:
    fwd = _directed_chain(lane_map, pi_o.lane_id, pi_t.lane_id)
    if fwd is not None:
        origin_lane = lane_map.lanes_by_id[pi_o.lane_id]
        dist = (origin_lane.length - pi_o.s) + fwd + pi_t.s
        return dist if abs(dist) <= horizon else None
    bwd = _directed_chain(lane_map, pi_t.lane_id, pi_o.lane_id)
    if bwd is not None:
        target_lane = lane_map.lanes_by_id[pi_t.lane_id]
        dist = -((target_lane.length - pi_t.s) + bwd + pi_o.s)
        return dist if abs(dist) <= horizon else None
    return None


def _directed_chain(lane_map: LaneMap, from_lane: str, to_lane: str) -> float | None:
    """Shortest cumulative length of intermediate lanes from from_lane to
    to_lane along successor relations; None if not reachable."""
    if to_lane in lane_map.successors.get(from_lane, ()):
        return 0.0
    best: dict[str, float] = {from_lane: 0.0}
    frontier = [from_lane]
    result: float | None = None
    while frontier:
        lane_id = frontier.pop(0)
        base = best[lane_id]
        for nxt in lane_map.successors.get(lane_id, ()):
            if nxt == to_lane:
                if result is None or base < result:
                    result = base
                continue
            via = base + lane_map.lanes_by_id[nxt].length
            if nxt not in best or via < best[nxt]:
                best[nxt] = via
                frontier.append(nxt)
    return result


_LONLAT = (RelationType.LONGITUDINAL, RelationType.LATERAL)


def build_scene_graph(
    scene: TrafficScene,
    lane_map: LaneMap,
    gate: float | None = None,
    horizon: float = DEFAULT_HORIZON,
    gate_width_factor: float = GATE_WIDTH_FACTOR,
) -> SceneGraph:
    """Build the semantic scene graph of a scene on its lane map.

    Deterministic: identities are ordered by lane id, node order follows
    the scene's participant order, and edges are emitted in (origin,
    target) index order. Both directions of a related pair are emitted.
    """
    if not scene.participants:
        raise EmptyScene(f"scene {scene.scene_id} has no participants")
    parts = scene.participants
    identities = [candidate_identities(p, lane_map, gate, gate_width_factor) for p in parts]

    node_features = np.zeros((len(parts), NODE_WIDTH), dtype=np.float64)
    for i, p in enumerate(parts):
        node_features[i, 0] = p.speed
        node_features[i, 1 + p.object_class.one_hot_index] = 1.0

    edge_rows: list[tuple[int, int]] = []
    feat_rows: list[np.ndarray] = []
    for oi in range(len(parts)):
        for ti in range(len(parts)):
            if oi == ti:
                continue
            feats = _merged_edge(identities[oi], identities[ti], lane_map, horizon)
            if feats is not None:
                edge_rows.append((oi, ti))
                feat_rows.append(feats)

    edges = np.array(edge_rows, dtype=np.int64).reshape(-1, 2)
    edge_features = (
        np.stack(feat_rows) if feat_rows else np.zeros((0, EDGE_WIDTH), dtype=np.float64)
    )
    return SceneGraph(
        scene_id=scene.scene_id,
        location_label=scene.location_label,
        node_ids=tuple(p.id for p in parts),
        node_features=node_features,
        edges=edges,
        edge_features=edge_features,
    )


def _merged_edge(
    idents_o: tuple[ProjectionIdentity, ...],
    idents_t: tuple[ProjectionIdentity, ...],
    lane_map: LaneMap,
    horizon: float,
) -> np.ndarray | None:
    """Merge all related identity pairs of one ordered participant pair
    into a single 9-feature edge row; None when no pair is related."""
    w_sum = {t: 0.0 for t in RelationType}
    wg_sum = {t: 0.0 for t in RelationType}
    best_o: dict[RelationType, ProjectionIdentity] = {}
    best_t: dict[RelationType, ProjectionIdentity] = {}
    related = False
    for po in idents_o:
        for pt in idents_t:
            hit = classify_pair(po, pt, lane_map, horizon)
            if hit is None:
                continue
            related = True
            rtype, geom = hit
            w = po.certainty * pt.certainty
            w_sum[rtype] += w
            wg_sum[rtype] += w * geom
            group = RelationType.INTERSECTING if rtype is RelationType.INTERSECTING else RelationType.LONGITUDINAL
            prev_o = best_o.get(group)
            if prev_o is None or po.certainty > prev_o.certainty:
                best_o[group] = po
            prev_t = best_t.get(group)
            if prev_t is None or pt.certainty > prev_t.certainty:
                best_t[group] = pt
    if not related:
        return None

    feats = np.zeros(EDGE_WIDTH, dtype=np.float64)
    feats[0] = min(1.0, w_sum[RelationType.LONGITUDINAL])
    feats[1] = min(1.0, w_sum[RelationType.LATERAL])
    feats[2] = min(1.0, w_sum[RelationType.INTERSECTING])

    w_lonlat = w_sum[RelationType.LONGITUDINAL] + w_sum[RelationType.LATERAL]
    if w_lonlat > 0.0:
        feats[3] = (wg_sum[RelationType.LONGITUDINAL] + wg_sum[RelationType.LATERAL]) / w_lonlat
        feats[5] = abs(best_o[RelationType.LONGITUDINAL].d)
        feats[6] = abs(best_t[RelationType.LONGITUDINAL].d)
    if w_sum[RelationType.INTERSECTING] > 0.0:
        feats[4] = wg_sum[RelationType.INTERSECTING] / w_sum[RelationType.INTERSECTING]
        feats[7] = abs(best_o[RelationType.INTERSECTING].d)
        feats[8] = abs(best_t[RelationType.INTERSECTING].d)
    return feats


@dataclass(frozen=True)
class GraphFeatures:
    """Per-graph summary statistics used for probing and template checks.

    Certainty totals are normalized by the car count (1 when the scene has
    no cars); edge and car counts are raw.
    """

    e_lon: float
    e_lat: float
    e_int: float
    n_edges: int
    n_cars: int
    mean_speed_cars: float

    def as_dict(self) -> dict:
        return {
            "e_lon": self.e_lon,
            "e_lat": self.e_lat,
            "e_int": self.e_int,
            "n_edges": self.n_edges,
            "n_cars": self.n_cars,
            "mean_speed_cars": self.mean_speed_cars,
        }

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.e_lon, self.e_lat, self.e_int, self.n_edges, self.n_cars, self.mean_speed_cars],
            dtype=np.float64,
        )


GRAPH_FEATURE_NAMES = ("e_lon", "e_lat", "e_int", "n_edges", "n_cars", "mean_speed_cars")


def graph_level_features(graph: SceneGraph) -> GraphFeatures:
    car_col = 1 + ObjectClass.CAR.one_hot_index
    car_mask = graph.node_features[:, car_col] == 1.0
    n_cars = int(car_mask.sum())
    norm = max(n_cars, 1)
    if graph.n_edges:
        cert_sums = graph.edge_features[:, 0:3].sum(axis=0)
    else:
        cert_sums = np.zeros(3)
    mean_speed = float(graph.node_features[car_mask, 0].mean()) if n_cars else 0.0
    return GraphFeatures(
        e_lon=float(cert_sums[0]) / norm,
        e_lat=float(cert_sums[1]) / norm,
        e_int=float(cert_sums[2]) / norm,
        n_edges=graph.n_edges,
        n_cars=n_cars,
        mean_speed_cars=mean_speed,
    )


def graph_to_dict(graph: SceneGraph) -> dict:
    """JSON-ready form: nodes as feature rows, edges as
    [origin, target, f0..f8] rows."""
    return {
        "scene_id": graph.scene_id,
        "location_label": graph.location_label,
        "nodes": graph.node_features.tolist(),
        "edges": [
            [int(o), int(t)] + feats.tolist()
            for (o, t), feats in zip(graph.edges, graph.edge_features)
        ],
    }


def graph_from_dict(data: dict) -> SceneGraph:
    nodes = np.array(data["nodes"], dtype=np.float64).reshape(-1, NODE_WIDTH)
    raw_edges = data.get("edges", [])
    edges = np.array([r[:2] for r in raw_edges], dtype=np.int64).reshape(-1, 2)
    feats = np.array([r[2:] for r in raw_edges], dtype=np.float64).reshape(-1, EDGE_WIDTH)
    return SceneGraph(
        scene_id=data["scene_id"],
        location_label=data["location_label"],
        node_ids=tuple(f"n{i}" for i in range(nodes.shape[0])),
        node_features=nodes,
        edges=edges,
        edge_features=feats,
    )
