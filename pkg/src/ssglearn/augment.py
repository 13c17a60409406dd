"""Scene augmentation for contrastive positives.

Positives are produced by perturbing the object list of a scene, never
the graph: a Bernoulli-selected subset of participants is displaced along
their heading and has speed noise added (clamped at zero). Graph
construction then runs on the perturbed scene, so augmentation can change
lane assignments and edge topology, which is the point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .scene import TrafficScene, Vec2

__all__ = ["AugmentParams", "augment_scene"]


@dataclass(frozen=True)
class AugmentParams:
    """Perturbation settings; defaults are deliberately mild so a positive
    stays recognizably the same situation."""

    p_select: float = 0.5
    sigma_pos: float = 1.0
    sigma_speed: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_select <= 1.0:
            raise ValueError(f"p_select must lie in [0, 1], got {self.p_select}")
        if self.sigma_pos < 0.0 or not math.isfinite(self.sigma_pos):
            raise ValueError(f"sigma_pos must be finite and >= 0, got {self.sigma_pos}")
        if self.sigma_speed < 0.0 or not math.isfinite(self.sigma_speed):
            raise ValueError(f"sigma_speed must be finite and >= 0, got {self.sigma_speed}")


def augment_scene(
    scene: TrafficScene,
    params: AugmentParams,
    rng: np.random.Generator | None = None,
) -> TrafficScene:
    """A perturbed copy of the scene, deterministic in params.seed.

    Passing an explicit generator overrides the seed; batch code uses that
    to derive one independent stream per scene.
    """
    if rng is None:
        rng = np.random.default_rng(params.seed)
    out = []
    for p in scene.participants:
        if rng.random() >= params.p_select:
            out.append(p)
            continue
        shift = rng.normal(0.0, params.sigma_pos)
        dv = rng.normal(0.0, params.sigma_speed)
        position = Vec2(
            p.position.x + shift * math.cos(p.heading),
            p.position.y + shift * math.sin(p.heading),
        )
        out.append(replace(p, position=position, speed=max(0.0, p.speed + dv)))
    return replace(scene, participants=tuple(out))
