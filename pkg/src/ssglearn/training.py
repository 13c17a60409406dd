"""Contrastive training of the scene-graph encoder.

Each training example is a triplet: an anchor scene graph, a positive
built by re-running graph construction on an augmented copy of the same
scene, and a negative drawn uniformly from the other scenes of the batch.
The margin loss

    L = max(d(s0, s+) - d(s0, s-) + margin, 0)

with Euclidean embedding distance pulls augmented variants together and
pushes distinct scenes apart. Positives are redrawn each epoch; the
validation triplets use fixed seeds so epoch metrics stay comparable.
"""
from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .augment import AugmentParams, augment_scene
from .encoder import (
    EncoderParams,
    assign_encoder_params,
    encode,
    encode_backward,
    encode_with_tape,
    encoder_param_arrays,
    init_encoder,
    zero_encoder_grads,
)
from .errors import BatchTooSmall, NumericFailure, ShapeMismatch
from .graph import SceneGraph, build_scene_graph
from .projection import GATE_WIDTH_FACTOR
from .nn import AdamState, adam_init, adam_step
from .scene import LaneMap, TrafficScene
from .seeds import derive_seed

__all__ = [
    "TrainConfig",
    "Triplet",
    "SceneSplits",
    "EpochStats",
    "TrainResult",
    "euclidean_distance",
    "triplet_loss",
    "triplet_loss_with_grads",
    "split_scenes",
    "build_batch_triplets",
    "train",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    margin: float = 0.5
    batch_size: int = 400
    epochs: int = 400
    embedding_dim: int = 12
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0.0 or not math.isfinite(self.learning_rate):
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.margin <= 0.0 or not math.isfinite(self.margin):
            raise ValueError(f"margin must be > 0, got {self.margin}")
        if self.batch_size < 2:
            raise ValueError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.embedding_dim < 1:
            raise ValueError(f"embedding_dim must be >= 1, got {self.embedding_dim}")


@dataclass(frozen=True)
class Triplet:
    anchor: SceneGraph
    positive: SceneGraph
    negative: SceneGraph

    def __post_init__(self) -> None:
        if self.negative.scene_id == self.anchor.scene_id:
            raise ValueError(f"negative must differ from anchor {self.anchor.scene_id}")


def euclidean_distance(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"distance operands differ in shape: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(b - a))


def triplet_loss(s0: np.ndarray, sp: np.ndarray, sn: np.ndarray, margin: float) -> float:
    """Margin loss over three embeddings; zero once the negative is at
    least margin farther from the anchor than the positive."""
    return max(euclidean_distance(s0, sp) - euclidean_distance(s0, sn) + margin, 0.0)


def triplet_loss_with_grads(
    s0: np.ndarray, sp: np.ndarray, sn: np.ndarray, margin: float
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Loss plus exact gradients wrt the three embeddings.

    Uses the zero subgradient at coincident points and at the hinge."""
    s0 = np.asarray(s0, dtype=np.float64)
    sp = np.asarray(sp, dtype=np.float64)
    sn = np.asarray(sn, dtype=np.float64)
    d_pos = euclidean_distance(s0, sp)
    d_neg = euclidean_distance(s0, sn)
    loss = d_pos - d_neg + margin
    g0 = np.zeros_like(s0)
    gp = np.zeros_like(sp)
    gn = np.zeros_like(sn)
    if loss <= 0.0:
        return 0.0, g0, gp, gn
    if d_pos > 0.0:
        u = (sp - s0) / d_pos
        gp += u
        g0 -= u
    if d_neg > 0.0:
        u = (sn - s0) / d_neg
        gn -= u
        g0 += u
    return loss, g0, gp, gn


@dataclass(frozen=True)
class SceneSplits:
    """Disjoint, exhaustive partition of a scene list."""

    train: tuple[TrafficScene, ...]
    validation: tuple[TrafficScene, ...]
    holdout: tuple[TrafficScene, ...]


def split_scenes(
    scenes: list[TrafficScene],
    seed: int,
    holdout_fraction: float = 0.2,
    validation_fraction: float = 0.2,
) -> SceneSplits:
    """Shuffle once, carve off the holdout, then split the rest into
    train/validation. Deterministic in the seed."""
    if not 0.0 <= holdout_fraction < 1.0 or not 0.0 <= validation_fraction < 1.0:
        raise ValueError("split fractions must lie in [0, 1)")
    order = np.random.default_rng(derive_seed(seed, "split")).permutation(len(scenes))
    shuffled = [scenes[i] for i in order]
    n_holdout = int(round(holdout_fraction * len(shuffled)))
    holdout = shuffled[:n_holdout]
    rest = shuffled[n_holdout:]
    n_val = int(round(validation_fraction * len(rest)))
    return SceneSplits(
        train=tuple(rest[n_val:]),
        validation=tuple(rest[:n_val]),
        holdout=tuple(holdout),
    )


def build_batch_triplets(
    scenes: list[TrafficScene],
    anchors: list[SceneGraph],
    maps: dict[str, LaneMap],
    aug: AugmentParams,
    rng: np.random.Generator,
    gate: float | None = None,
    horizon: float = 50.0,
    gate_width_factor: float = GATE_WIDTH_FACTOR,
) -> list[Triplet]:
    """One triplet per scene: fresh augmented positive, negative anchor
    drawn uniformly from the rest of the batch."""
    if len(scenes) < 2:
        raise BatchTooSmall(f"triplet batches need >= 2 scenes, got {len(scenes)}")
    if len(scenes) != len(anchors):
        raise ShapeMismatch("scenes and anchor graphs must align")
    triplets = []
    for i, scene in enumerate(scenes):
        scene_aug = replace(aug, seed=int(rng.integers(0, 2**63 - 1)))
        positive = build_scene_graph(
            augment_scene(scene, scene_aug), maps[scene.map_ref], gate, horizon, gate_width_factor
        )
        j = int(rng.integers(0, len(scenes) - 1))
        if j >= i:
            j += 1
        triplets.append(Triplet(anchors[i], positive, anchors[j]))
    return triplets


def _triplet_losses(
    params: EncoderParams,
    triplets: list[Triplet],
    margin: float,
    training: bool,
    rng: np.random.Generator | None,
    want_grads: bool,
) -> tuple[float, float, list[np.ndarray] | None]:
    """Mean loss, hinge accuracy and (optionally) mean parameter gradients.

    Each distinct graph object is encoded once; gradient contributions
    from every loss term it appears in are accumulated before its single
    backward pass, so shared negatives are handled exactly.
    """
    encoded: dict[int, tuple] = {}
    order: list[SceneGraph] = []

    def get(graph: SceneGraph):
        key = id(graph)
        if key not in encoded:
            if want_grads:
                emb, tape = encode_with_tape(params, graph, training, rng)
                encoded[key] = (emb, tape, np.zeros_like(emb))
            else:
                encoded[key] = (encode(params, graph, training, rng), None, None)
            order.append(graph)
        return encoded[key]

    total = 0.0
    correct = 0
    scale = 1.0 / len(triplets)
    for t in triplets:
        e0 = get(t.anchor)[0]
        ep = get(t.positive)[0]
        en = get(t.negative)[0]
        loss, g0, gp, gn = triplet_loss_with_grads(e0, ep, en, margin)
        total += loss
        if euclidean_distance(e0, ep) < euclidean_distance(e0, en):
            correct += 1
        if want_grads:
            encoded[id(t.anchor)][2][:] += g0 * scale
            encoded[id(t.positive)][2][:] += gp * scale
            encoded[id(t.negative)][2][:] += gn * scale

    grads = None
    if want_grads:
        grads = zero_encoder_grads(params)
        for graph in order:
            _, tape, d_emb = encoded[id(graph)]
            if np.any(d_emb):
                for acc, g in zip(grads, encode_backward(params, tape, d_emb)):
                    acc += g
    return total * scale, correct / len(triplets), grads


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float


@dataclass
class TrainResult:
    params: EncoderParams  # best validation checkpoint
    final_params: EncoderParams
    history: list[EpochStats] = field(default_factory=list)
    best_epoch: int = 0
    optimizer: AdamState | None = None  # state after the last step


def train(
    train_scenes: list[TrafficScene],
    val_scenes: list[TrafficScene],
    maps: dict[str, LaneMap],
    config: TrainConfig,
    aug: AugmentParams,
    params: EncoderParams | None = None,
    gate: float | None = None,
    horizon: float = 50.0,
    gate_width_factor: float = GATE_WIDTH_FACTOR,
    on_epoch=None,
    on_improvement=None,
) -> TrainResult:
    """Run the triplet training loop.

    Anchor graphs are built once; positives are regenerated every epoch.
    The best checkpoint is the epoch with the highest validation triplet
    accuracy, ties broken by lower validation loss (earlier epoch wins
    remaining ties). With epochs=0 the initial parameters come back
    unchanged with an empty history.
    """
    if params is None:
        params = init_encoder(
            np.random.default_rng(derive_seed(config.seed, "init")),
            embedding_dim=config.embedding_dim,
        )
    anchors = [
        build_scene_graph(s, maps[s.map_ref], gate, horizon, gate_width_factor)
        for s in train_scenes
    ]
    val_anchors = [
        build_scene_graph(s, maps[s.map_ref], gate, horizon, gate_width_factor)
        for s in val_scenes
    ]

    # Fixed seeds: the validation set sees the same positives/negatives
    # every epoch, so metric changes reflect the model alone.
    val_aug = replace(aug, seed=derive_seed(config.seed, "val-aug"))
    val_rng = np.random.default_rng(derive_seed(config.seed, "val-neg"))
    val_triplets = build_batch_triplets(
        list(val_scenes), val_anchors, maps, val_aug, val_rng, gate, horizon, gate_width_factor
    )

    opt = adam_init(encoder_param_arrays(params), learning_rate=config.learning_rate)
    history: list[EpochStats] = []
    best = copy.deepcopy(params)
    best_key = (-1.0, math.inf)
    best_epoch = 0

    for epoch in range(1, config.epochs + 1):
        rng = np.random.default_rng(derive_seed(config.seed, "epoch", epoch))
        order = rng.permutation(len(train_scenes))
        loss_sum = 0.0
        n_seen = 0
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo : lo + config.batch_size]
            if len(batch) < 2:
                log.warning("epoch %d: skipping size-1 batch", epoch)
                continue
            scenes_b = [train_scenes[i] for i in batch]
            anchors_b = [anchors[i] for i in batch]
            triplets = build_batch_triplets(
                scenes_b, anchors_b, maps, aug, rng, gate, horizon, gate_width_factor
            )
            loss, _, grads = _triplet_losses(params, triplets, config.margin, True, rng, True)
            if not math.isfinite(loss):
                raise NumericFailure(f"non-finite training loss at epoch {epoch}")
            loss_sum += loss * len(batch)
            n_seen += len(batch)
            assign_encoder_params(params, adam_step(opt, encoder_param_arrays(params), grads))

        train_loss = loss_sum / n_seen if n_seen else math.nan
        val_loss, val_acc, _ = _triplet_losses(params, val_triplets, config.margin, False, None, False)
        if not math.isfinite(val_loss):
            raise NumericFailure(f"non-finite validation loss at epoch {epoch}")
        stats = EpochStats(epoch, train_loss, val_loss, val_acc)
        history.append(stats)
        if on_epoch is not None:
            on_epoch(stats)
        key = (val_acc, -val_loss)
        if key > best_key:
            best_key = key
            best = copy.deepcopy(params)
            best_epoch = epoch
            if on_improvement is not None:
                on_improvement(epoch, params)

    return TrainResult(
        params=best,
        final_params=params,
        history=history,
        best_epoch=best_epoch,
        optimizer=opt,
    )
