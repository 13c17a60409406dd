"""Projection of participants onto lane centerlines.

A participant gets one projection identity per lane whose centerline lies
within a lateral gate. Each identity carries Frenet coordinates (s along
the lane, d signed lateral offset, left of travel positive) and a
certainty that decays with |d| under a Gaussian kernel whose width is
tied to the lane width. Certainties over a participant's identity set are
normalized to sum to one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scene import Lane, LaneMap, TrafficParticipant, Vec2

__all__ = [
    "ProjectionIdentity",
    "project_point",
    "certainty_kernel",
    "candidate_identities",
    "GATE_WIDTH_FACTOR",
]

# Default lateral gate, expressed as a multiple of the lane width.
GATE_WIDTH_FACTOR = 1.5


@dataclass(frozen=True)
class ProjectionIdentity:
    participant_id: str
    lane_id: str
    s: float
    d: float
    certainty: float


def project_point(lane: Lane, p: Vec2) -> tuple[float, float]:
    """Project a point onto the lane centerline.

    Returns (s, d): arclength of the closest centerline point, clamped to
    the polyline extent, and the signed lateral offset (positive left of
    the direction of travel). Beyond the endpoints, d keeps the full
    Euclidean distance to the clamped point so far-away points do not look
    deceptively close.
    """
    q = p.as_array()
    a = lane.points[:-1]
    ab = np.diff(lane.points, axis=0)
    seg_len2 = np.einsum("ij,ij->i", ab, ab)
    t = np.clip(np.einsum("ij,ij->i", q - a, ab) / seg_len2, 0.0, 1.0)
    closest = a + t[:, None] * ab
    delta = q - closest
    dist2 = np.einsum("ij,ij->i", delta, delta)
    k = int(np.argmin(dist2))  # first minimum: ties resolve to the smaller s
    s = float(lane.cum_arclengths[k] + t[k] * lane.seg_lengths[k])
    cross = ab[k, 0] * delta[k, 1] - ab[k, 1] * delta[k, 0]
    d = math.sqrt(float(dist2[k]))
    if cross < 0.0:
        d = -d
    return s, d


def certainty_kernel(d: float, lane_width: float) -> float:
    """Unnormalized lane-membership weight for a lateral offset d.

    Gaussian in d with sigma = lane_width / 4, so the kernel is ~0.6 at
    half a lane width and effectively zero beyond two widths.
    """
    if lane_width <= 0.0:
        raise ValueError(f"lane width must be > 0, got {lane_width}")
    sigma = lane_width / 4.0
    return math.exp(-(d * d) / (2.0 * sigma * sigma))


def candidate_identities(
    participant: TrafficParticipant,
    lane_map: LaneMap,
    gate: float | None = None,
    gate_width_factor: float = GATE_WIDTH_FACTOR,
) -> tuple[ProjectionIdentity, ...]:
    """All projection identities of a participant within the lateral gate.

    gate=None gates each lane at gate_width_factor * lane.width; a numeric
    gate applies the same absolute bound to every lane. Identities are
    ordered by lane id and their certainties sum to one. Participants off
    every lane get an empty identity set.
    """
    if gate is not None and gate <= 0.0:
        raise ValueError(f"gate must be > 0, got {gate}")
    hits: list[tuple[str, float, float, float]] = []
    for lane in sorted(lane_map.lanes, key=lambda ln: ln.id):
        s, d = project_point(lane, participant.position)
        bound = gate if gate is not None else gate_width_factor * lane.width
        if abs(d) <= bound:
            hits.append((lane.id, s, d, certainty_kernel(d, lane.width)))
    if not hits:
        return ()
    total = sum(h[3] for h in hits)
    if total == 0.0:
        # all kernels underflowed; fall back to an even split
        return tuple(
            ProjectionIdentity(participant.id, lane_id, s, d, 1.0 / len(hits))
            for lane_id, s, d, _ in hits
        )
    return tuple(
        ProjectionIdentity(participant.id, lane_id, s, d, k / total)
        for lane_id, s, d, k in hits
    )
