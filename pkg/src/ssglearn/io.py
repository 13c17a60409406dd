"""File formats: lane maps, track CSVs, scene/graph bundles, checkpoints,
embedding tables and reports.

All writers are deterministic byte for byte: floats are serialized with
repr (shortest exact round-trip), dict keys keep a fixed order and no
timestamps are embedded. Every artifact carries the config hash it was
produced under so downstream commands can refuse stale inputs.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .encoder import EncoderParams, assign_encoder_params, encoder_param_arrays, init_encoder
from .errors import ConfigMismatch, DataFormatError
from .graph import SceneGraph, graph_from_dict, graph_to_dict
from .nn import AdamState
from .scene import (
    Lane,
    LaneMap,
    LaneRelation,
    LaneRelationKind,
    ObjectClass,
    TrafficParticipant,
    TrafficScene,
    Vec2,
    wrap_angle,
)

__all__ = [
    "lane_map_to_dict",
    "lane_map_from_dict",
    "load_lane_map",
    "save_lane_map",
    "scene_to_dict",
    "scene_from_dict",
    "TRACK_COLUMNS",
    "read_tracks_csv",
    "scenes_from_tracks",
    "write_tracks_csv",
    "write_scenes_artifact",
    "read_scenes_artifact",
    "write_graphs_artifact",
    "read_graphs_artifact",
    "write_checkpoint",
    "read_checkpoint",
    "write_history_csv",
    "write_embeddings_csv",
    "read_embeddings_csv",
    "write_assignments_csv",
    "read_assignments_csv",
    "write_report",
    "read_report",
    "check_config_hash",
]

TRACK_COLUMNS = [
    "track_id",
    "frame_id",
    "timestamp_ms",
    "agent_type",
    "x",
    "y",
    "vx",
    "vy",
    "psi_rad",
]

_AGENT_ALIASES = {"bicycle": "bike", "cyclist": "bike"}


def _dump_json(payload: dict, path: str | Path) -> None:
    text = json.dumps(payload, indent=2, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _load_json(path: str | Path) -> dict:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(payload, dict):
        raise DataFormatError(f"{path}: expected a JSON object at top level")
    return payload


def _expect(payload: dict, key: str, origin: str) -> Any:
    if key not in payload:
        raise DataFormatError(f"{origin}: missing required key {key!r}")
    return payload[key]


def check_config_hash(found: str, expected: str, force: bool, origin: str) -> None:
    """Refuse artifacts produced under a different configuration."""
    if found != expected and not force:
        raise ConfigMismatch(
            f"{origin}: artifact config hash {found[:12]} does not match current "
            f"config {expected[:12]} (pass --force to override)"
        )


# ---------------------------------------------------------------------------
# Lane maps


def lane_map_to_dict(lane_map: LaneMap) -> dict:
    lanes = [
        {
            "id": lane.id,
            "width": lane.width,
            "centerline": [[p.x, p.y] for p in lane.centerline],
        }
        for lane in lane_map.lanes
    ]
    relations = []
    for rel in lane_map.relations:
        row: dict[str, Any] = {"kind": rel.kind.value, "a": rel.a, "b": rel.b}
        if rel.kind is LaneRelationKind.INTERSECTING:
            row["s_a"] = rel.intersection_arclen_a
            row["s_b"] = rel.intersection_arclen_b
        relations.append(row)
    return {"lanes": lanes, "relations": relations}


def lane_map_from_dict(payload: dict, origin: str = "lane map") -> LaneMap:
    lanes = []
    for entry in _expect(payload, "lanes", origin):
        points = [Vec2(float(x), float(y)) for x, y in _expect(entry, "centerline", origin)]
        lanes.append(Lane(id=str(_expect(entry, "id", origin)), centerline=tuple(points),
                          width=float(_expect(entry, "width", origin))))
    relations = []
    for entry in payload.get("relations", []):
        kind_raw = str(_expect(entry, "kind", origin)).lower()
        try:
            kind = LaneRelationKind(kind_raw)
        except ValueError as exc:
            raise DataFormatError(f"{origin}: unknown relation kind {kind_raw!r}") from exc
        relations.append(
            LaneRelation(
                kind=kind,
                a=str(_expect(entry, "a", origin)),
                b=str(_expect(entry, "b", origin)),
                intersection_arclen_a=(
                    float(entry["s_a"]) if kind is LaneRelationKind.INTERSECTING else None
                ),
                intersection_arclen_b=(
                    float(entry["s_b"]) if kind is LaneRelationKind.INTERSECTING else None
                ),
            )
        )
    try:
        return LaneMap(lanes=tuple(lanes), relations=tuple(relations))
    except ValueError as exc:
        raise DataFormatError(f"{origin}: {exc}") from exc


def load_lane_map(path: str | Path) -> LaneMap:
    return lane_map_from_dict(_load_json(path), origin=str(path))


def save_lane_map(lane_map: LaneMap, path: str | Path) -> None:
    _dump_json(lane_map_to_dict(lane_map), path)


# ---------------------------------------------------------------------------
# Scenes


def scene_to_dict(scene: TrafficScene) -> dict:
    return {
        "scene_id": scene.scene_id,
        "location_label": scene.location_label,
        "map_ref": scene.map_ref,
        "participants": [
            {
                "id": p.id,
                "class": p.object_class.value,
                "x": p.position.x,
                "y": p.position.y,
                "speed": p.speed,
                "heading": p.heading,
            }
            for p in scene.participants
        ],
    }


def scene_from_dict(payload: dict, origin: str = "scene") -> TrafficScene:
    participants = []
    for entry in _expect(payload, "participants", origin):
        raw_class = str(_expect(entry, "class", origin)).lower()
        raw_class = _AGENT_ALIASES.get(raw_class, raw_class)
        try:
            object_class = ObjectClass(raw_class)
        except ValueError as exc:
            raise DataFormatError(f"{origin}: unknown object class {raw_class!r}") from exc
        participants.append(
            TrafficParticipant(
                id=str(_expect(entry, "id", origin)),
                position=Vec2(float(_expect(entry, "x", origin)), float(_expect(entry, "y", origin))),
                speed=float(_expect(entry, "speed", origin)),
                heading=float(_expect(entry, "heading", origin)),
                object_class=object_class,
            )
        )
    try:
        return TrafficScene(
            scene_id=str(_expect(payload, "scene_id", origin)),
            location_label=str(_expect(payload, "location_label", origin)),
            participants=tuple(participants),
            map_ref=str(_expect(payload, "map_ref", origin)),
        )
    except ValueError as exc:
        raise DataFormatError(f"{origin}: {exc}") from exc


# ---------------------------------------------------------------------------
# Track CSV ingestion


def read_tracks_csv(path: str | Path) -> list[dict]:
    """Parse the raw track table into typed row dicts, strictly validating
    the header and every record (the error names the offending line)."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        if header != TRACK_COLUMNS:
            raise DataFormatError(
                f"{path}: header {header} does not match required columns {TRACK_COLUMNS}"
            )
        for line_no, record in enumerate(reader, start=2):
            if len(record) != len(TRACK_COLUMNS):
                raise DataFormatError(
                    f"{path}:{line_no}: expected {len(TRACK_COLUMNS)} fields, got {len(record)}"
                )
            raw = dict(zip(TRACK_COLUMNS, record))
            try:
                agent = _AGENT_ALIASES.get(raw["agent_type"].lower(), raw["agent_type"].lower())
                row = {
                    "track_id": raw["track_id"],
                    "frame_id": int(raw["frame_id"]),
                    "timestamp_ms": int(raw["timestamp_ms"]),
                    "agent_type": ObjectClass(agent),
                    "x": float(raw["x"]),
                    "y": float(raw["y"]),
                    "vx": float(raw["vx"]),
                    "vy": float(raw["vy"]),
                    "psi_rad": float(raw["psi_rad"]),
                }
            except ValueError as exc:
                raise DataFormatError(f"{path}:{line_no}: {exc}") from exc
            if not all(math.isfinite(row[k]) for k in ("x", "y", "vx", "vy", "psi_rad")):
                raise DataFormatError(f"{path}:{line_no}: non-finite coordinate")
            rows.append(row)
    if not rows:
        raise DataFormatError(f"{path}: no track records")
    return rows


def scenes_from_tracks(
    rows: list[dict],
    location_label: str,
    map_ref: str,
    stride: int = 10,
) -> list[TrafficScene]:
    """Snapshot every stride-th frame into one scene.

    Velocity direction is dropped here: participants carry only the speed
    norm plus the heading needed for lane-geometry work.
    """
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    frames: dict[int, list[dict]] = {}
    for row in rows:
        frames.setdefault(row["frame_id"], []).append(row)
    scenes = []
    for frame_id in sorted(frames)[::stride]:
        participants = []
        seen = set()
        for row in frames[frame_id]:
            if row["track_id"] in seen:
                raise DataFormatError(
                    f"track {row['track_id']} appears twice in frame {frame_id}"
                )
            seen.add(row["track_id"])
            participants.append(
                TrafficParticipant(
                    id=row["track_id"],
                    position=Vec2(row["x"], row["y"]),
                    speed=math.hypot(row["vx"], row["vy"]),
                    heading=wrap_angle(row["psi_rad"]),
                    object_class=row["agent_type"],
                )
            )
        scenes.append(
            TrafficScene(
                scene_id=f"{location_label}-f{frame_id:06d}",
                location_label=location_label,
                participants=tuple(participants),
                map_ref=map_ref,
            )
        )
    return scenes


def write_tracks_csv(scenes: list[TrafficScene], path: str | Path) -> None:
    """Write scenes as a standard track table, one frame per scene.

    This is the bridge that lets generated data flow through the same
    ingestion path as recorded data; velocity components are rebuilt from
    speed and heading.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACK_COLUMNS)
        for frame_id, scene in enumerate(scenes):
            for p in scene.participants:
                writer.writerow(
                    [
                        p.id,
                        frame_id,
                        frame_id * 100,
                        p.object_class.value,
                        repr(p.position.x),
                        repr(p.position.y),
                        repr(p.speed * math.cos(p.heading)),
                        repr(p.speed * math.sin(p.heading)),
                        repr(p.heading),
                    ]
                )


# ---------------------------------------------------------------------------
# Scene / graph bundles


def write_scenes_artifact(
    scenes: list[TrafficScene],
    maps: dict[str, LaneMap],
    config_hash: str,
    path: str | Path,
) -> None:
    _dump_json(
        {
            "format": "scene-bundle",
            "version": 1,
            "config_hash": config_hash,
            "maps": {map_id: lane_map_to_dict(maps[map_id]) for map_id in sorted(maps)},
            "scenes": [scene_to_dict(s) for s in scenes],
        },
        path,
    )


def _read_bundle(path: str | Path, expected_format: str) -> dict:
    payload = _load_json(path)
    fmt = _expect(payload, "format", str(path))
    if fmt != expected_format:
        raise DataFormatError(f"{path}: format {fmt!r}, expected {expected_format!r}")
    version = _expect(payload, "version", str(path))
    if version != 1:
        raise DataFormatError(f"{path}: unsupported version {version}")
    return payload


def read_scenes_artifact(path: str | Path) -> tuple[list[TrafficScene], dict[str, LaneMap], str]:
    payload = _read_bundle(path, "scene-bundle")
    origin = str(path)
    maps = {
        map_id: lane_map_from_dict(entry, origin=f"{origin} map {map_id!r}")
        for map_id, entry in _expect(payload, "maps", origin).items()
    }
    scenes = [
        scene_from_dict(entry, origin=f"{origin} scene {i}")
        for i, entry in enumerate(_expect(payload, "scenes", origin))
    ]
    for scene in scenes:
        if scene.map_ref not in maps:
            raise DataFormatError(
                f"{origin}: scene {scene.scene_id} references unknown map {scene.map_ref!r}"
            )
    return scenes, maps, str(_expect(payload, "config_hash", origin))


def write_graphs_artifact(
    graphs: list[SceneGraph],
    scenes: list[TrafficScene],
    maps: dict[str, LaneMap],
    config_hash: str,
    path: str | Path,
) -> None:
    """Graphs plus the scenes and maps they came from.

    Training regenerates augmented positives from the underlying scenes
    every epoch, so the bundle must keep them next to the graphs.
    """
    _dump_json(
        {
            "format": "graph-bundle",
            "version": 1,
            "config_hash": config_hash,
            "maps": {map_id: lane_map_to_dict(maps[map_id]) for map_id in sorted(maps)},
            "scenes": [scene_to_dict(s) for s in scenes],
            "graphs": [graph_to_dict(g) for g in graphs],
        },
        path,
    )


def read_graphs_artifact(
    path: str | Path,
) -> tuple[list[SceneGraph], list[TrafficScene], dict[str, LaneMap], str]:
    payload = _read_bundle(path, "graph-bundle")
    origin = str(path)
    maps = {
        map_id: lane_map_from_dict(entry, origin=f"{origin} map {map_id!r}")
        for map_id, entry in _expect(payload, "maps", origin).items()
    }
    scenes = [
        scene_from_dict(entry, origin=f"{origin} scene {i}")
        for i, entry in enumerate(_expect(payload, "scenes", origin))
    ]
    try:
        graphs = [graph_from_dict(entry) for entry in _expect(payload, "graphs", origin)]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"{origin}: bad graph record ({exc})") from exc
    if len(graphs) != len(scenes):
        raise DataFormatError(
            f"{origin}: {len(graphs)} graphs for {len(scenes)} scenes"
        )
    for graph, scene in zip(graphs, scenes):
        if graph.scene_id != scene.scene_id:
            raise DataFormatError(
                f"{origin}: graph {graph.scene_id} out of step with scene {scene.scene_id}"
            )
    return graphs, scenes, maps, str(_expect(payload, "config_hash", origin))


# ---------------------------------------------------------------------------
# Checkpoints


def write_checkpoint(
    params: EncoderParams,
    adam: AdamState | None,
    config_hash: str,
    path: str | Path,
) -> None:
    payload: dict[str, Any] = {
        "format": "encoder-checkpoint",
        "version": 1,
        "config_hash": config_hash,
        "encoder": {
            "node_width": params.node_width,
            "edge_width": params.layer1.message.spec.widths[0] - 2 * params.node_width,
            "hidden_width": params.hidden_width,
            "embedding_dim": params.embedding_dim,
            "slope": params.layer1.message.spec.slope,
            "dropout": params.layer1.message.spec.dropout,
            "params": [arr.tolist() for arr in encoder_param_arrays(params)],
        },
    }
    if adam is not None:
        payload["adam"] = {
            "learning_rate": adam.learning_rate,
            "beta1": adam.beta1,
            "beta2": adam.beta2,
            "eps": adam.eps,
            "step": adam.step,
            "m": [arr.tolist() for arr in adam.m],
            "v": [arr.tolist() for arr in adam.v],
        }
    else:
        payload["adam"] = None
    _dump_json(payload, path)


def read_checkpoint(path: str | Path) -> tuple[EncoderParams, AdamState | None, str]:
    payload = _read_bundle(path, "encoder-checkpoint")
    origin = str(path)
    enc = _expect(payload, "encoder", origin)
    params = init_encoder(
        np.random.default_rng(0),
        node_width=int(_expect(enc, "node_width", origin)),
        edge_width=int(_expect(enc, "edge_width", origin)),
        hidden_width=int(_expect(enc, "hidden_width", origin)),
        embedding_dim=int(_expect(enc, "embedding_dim", origin)),
        slope=float(_expect(enc, "slope", origin)),
        dropout=float(_expect(enc, "dropout", origin)),
    )
    arrays = [np.asarray(a, dtype=np.float64) for a in _expect(enc, "params", origin)]
    try:
        assign_encoder_params(params, arrays)
    except Exception as exc:
        raise DataFormatError(f"{origin}: parameter tensors do not fit ({exc})") from exc
    adam_payload = payload.get("adam")
    adam = None
    if adam_payload is not None:
        adam = AdamState(
            learning_rate=float(_expect(adam_payload, "learning_rate", origin)),
            beta1=float(_expect(adam_payload, "beta1", origin)),
            beta2=float(_expect(adam_payload, "beta2", origin)),
            eps=float(_expect(adam_payload, "eps", origin)),
            step=int(_expect(adam_payload, "step", origin)),
            m=[np.asarray(a, dtype=np.float64) for a in _expect(adam_payload, "m", origin)],
            v=[np.asarray(a, dtype=np.float64) for a in _expect(adam_payload, "v", origin)],
        )
    return params, adam, str(_expect(payload, "config_hash", origin))


# ---------------------------------------------------------------------------
# CSV artifacts


def write_history_csv(history, config_hash: str, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss", "val_accuracy"])
        for row in history:
            writer.writerow(
                [row.epoch, repr(row.train_loss), repr(row.val_loss), repr(row.val_accuracy)]
            )


def write_embeddings_csv(
    ids: list[str],
    labels: list[str],
    embeddings: np.ndarray,
    config_hash: str,
    path: str | Path,
) -> None:
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if len(ids) != len(labels) or embeddings.shape[0] != len(ids):
        raise ValueError("ids, labels and embedding rows must align")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["scene_id", "location_label"] + [f"e{i}" for i in range(embeddings.shape[1])]
        )
        for scene_id, label, row in zip(ids, labels, embeddings):
            writer.writerow([scene_id, label] + [repr(float(v)) for v in row])


def read_embeddings_csv(path: str | Path) -> tuple[list[str], list[str], np.ndarray, str]:
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if not first.startswith("# config_hash="):
            raise DataFormatError(f"{path}: missing config hash line")
        config_hash = first.split("=", 1)[1]
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: missing header") from None
        if header[:2] != ["scene_id", "location_label"] or len(header) < 3:
            raise DataFormatError(f"{path}: unexpected header {header}")
        ids, labels, rows = [], [], []
        for line_no, record in enumerate(reader, start=3):
            if len(record) != len(header):
                raise DataFormatError(f"{path}:{line_no}: ragged row")
            ids.append(record[0])
            labels.append(record[1])
            try:
                rows.append([float(v) for v in record[2:]])
            except ValueError as exc:
                raise DataFormatError(f"{path}:{line_no}: {exc}") from exc
    if not rows:
        raise DataFormatError(f"{path}: no embedding rows")
    return ids, labels, np.array(rows, dtype=np.float64), config_hash


def write_assignments_csv(
    ids: list[str],
    labels: list[str],
    assignments: np.ndarray,
    config_hash: str,
    path: str | Path,
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["scene_id", "location_label", "cluster"])
        for scene_id, label, cluster in zip(ids, labels, assignments):
            writer.writerow([scene_id, label, int(cluster)])


def read_assignments_csv(path: str | Path) -> tuple[list[str], list[str], np.ndarray, str]:
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if not first.startswith("# config_hash="):
            raise DataFormatError(f"{path}: missing config hash line")
        config_hash = first.split("=", 1)[1]
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["scene_id", "location_label", "cluster"]:
            raise DataFormatError(f"{path}: unexpected header {header}")
        ids, labels, clusters = [], [], []
        for line_no, record in enumerate(reader, start=3):
            if len(record) != 3:
                raise DataFormatError(f"{path}:{line_no}: ragged row")
            ids.append(record[0])
            labels.append(record[1])
            try:
                clusters.append(int(record[2]))
            except ValueError as exc:
                raise DataFormatError(f"{path}:{line_no}: {exc}") from exc
    if not ids:
        raise DataFormatError(f"{path}: no assignment rows")
    return ids, labels, np.array(clusters, dtype=np.int64), config_hash


# ---------------------------------------------------------------------------
# JSON reports


def write_report(payload: dict, config_hash: str, path: str | Path) -> None:
    body = {"config_hash": config_hash}
    body.update(payload)
    _dump_json(body, path)


def read_report(path: str | Path) -> dict:
    return _load_json(path)
