"""Embedding-space evaluation.

Covers the whole downstream story: triplet accuracy against fresh
augmented positives, small regression probes from embeddings onto
graph-level features, PCA and a simplified neighbor-embedding for 2-d
views, and Ward agglomerative clustering with silhouette-based model
selection. Everything here is read-only over the embeddings and
deterministic under fixed seeds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .augment import AugmentParams, augment_scene
from .encoder import EncoderParams, encode
from .errors import BadK, DegenerateData, ShapeMismatch, SingleCluster, TooFewSamples
from .graph import build_scene_graph
from .projection import GATE_WIDTH_FACTOR
from .nn import MlpSpec, adam_init, adam_step, init_mlp, mlp_backward, mlp_forward, mlp_grad_arrays, mlp_param_arrays
from .scene import LaneMap, TrafficScene
from .seeds import derive_seed
from .training import euclidean_distance

__all__ = [
    "LocationStats",
    "AccuracyReport",
    "triplet_accuracy",
    "ProbeConfig",
    "ProbeMetrics",
    "probe_regress",
    "PcaResult",
    "pca_fit_transform",
    "umap_lite",
    "agglomerative_cluster",
    "silhouette_score",
    "ClusterReport",
    "select_clusters",
]


# ---------------------------------------------------------------------------
# Triplet accuracy


@dataclass(frozen=True)
class LocationStats:
    location: str
    n_triplets: int
    accuracy: float
    mean_dist_positive: float
    mean_dist_negative: float


@dataclass(frozen=True)
class AccuracyReport:
    per_location: tuple[LocationStats, ...]
    total: LocationStats


def triplet_accuracy(
    params: EncoderParams,
    scenes: list[TrafficScene],
    maps: dict[str, LaneMap],
    aug: AugmentParams,
    seed: int,
    gate: float | None = None,
    horizon: float = 50.0,
    gate_width_factor: float = GATE_WIDTH_FACTOR,
    repeats: int = 1,
) -> AccuracyReport:
    """Fraction of holdout triplets whose positive lands closer than the
    negative, with mean distances, split by location label.

    Each scene anchors `repeats` triplets with independently drawn
    positives and uniformly drawn negatives from the other scenes.
    """
    if not scenes:
        raise ValueError("holdout must be non-empty")
    if len(scenes) < 2:
        raise ValueError("need >= 2 scenes to draw negatives")
    anchors = [
        build_scene_graph(s, maps[s.map_ref], gate, horizon, gate_width_factor) for s in scenes
    ]
    anchor_emb = np.stack([encode(params, g) for g in anchors])
    neg_rng = np.random.default_rng(derive_seed(seed, "negatives"))

    by_loc: dict[str, list[tuple[float, float]]] = {}
    for r in range(repeats):
        for i, scene in enumerate(scenes):
            pos_aug = replace(aug, seed=derive_seed(seed, "aug", scene.scene_id, r))
            pos_graph = build_scene_graph(
                augment_scene(scene, pos_aug), maps[scene.map_ref], gate, horizon,
                gate_width_factor,
            )
            pos_emb = encode(params, pos_graph)
            j = int(neg_rng.integers(0, len(scenes) - 1))
            if j >= i:
                j += 1
            d_pos = euclidean_distance(anchor_emb[i], pos_emb)
            d_neg = euclidean_distance(anchor_emb[i], anchor_emb[j])
            by_loc.setdefault(scene.location_label, []).append((d_pos, d_neg))

    def stats(location: str, pairs: list[tuple[float, float]]) -> LocationStats:
        dp = np.array([p[0] for p in pairs])
        dn = np.array([p[1] for p in pairs])
        return LocationStats(
            location=location,
            n_triplets=len(pairs),
            accuracy=float(np.mean(dp < dn)),
            mean_dist_positive=float(dp.mean()),
            mean_dist_negative=float(dn.mean()),
        )

    per_location = tuple(stats(loc, by_loc[loc]) for loc in sorted(by_loc))
    all_pairs = [p for loc in sorted(by_loc) for p in by_loc[loc]]
    return AccuracyReport(per_location=per_location, total=stats("total", all_pairs))


# ---------------------------------------------------------------------------
# Regression probes


@dataclass(frozen=True)
class ProbeConfig:
    hidden_width: int = 30
    depth: int = 4  # number of affine layers
    dropout: float = 0.1
    epochs: int = 2500
    learning_rate: float = 0.001
    test_fraction: float = 0.2

    def __post_init__(self) -> None:
        if self.hidden_width < 1 or self.depth < 1:
            raise ValueError("probe widths must be positive")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class ProbeMetrics:
    """Test-set regression metrics plus target statistics, one probe run."""

    mse: float
    mae: float
    target_mean: float
    target_std: float
    target_min: float
    target_max: float
    n_train: int
    n_test: int


def probe_regress(
    embeddings: np.ndarray,
    targets: np.ndarray,
    config: ProbeConfig = ProbeConfig(),
    seed: int = 0,
) -> ProbeMetrics:
    """Train a small MLP from embeddings onto one scalar feature.

    Targets are z-scored internally using train-split statistics (metrics
    are reported in raw units); that keeps ADAM step sizes sane across
    features with wildly different scales.
    """
    X = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ShapeMismatch(f"embeddings {X.shape} vs targets {y.shape}")
    n = X.shape[0]
    if n < 10:
        raise TooFewSamples(f"probe needs >= 10 samples, got {n}")

    rng = np.random.default_rng(derive_seed(seed, "probe"))
    order = rng.permutation(n)
    n_test = max(1, int(round(config.test_fraction * n)))
    test_idx, train_idx = order[:n_test], order[n_test:]
    X_train, y_train = X[train_idx], y[train_idx]
    X_test, y_test = X[test_idx], y[test_idx]

    mu = float(y_train.mean())
    sd = float(y_train.std())
    scale = sd if sd > 1e-12 else 1.0
    y_z = ((y_train - mu) / scale).reshape(-1, 1)

    widths = (X.shape[1],) + (config.hidden_width,) * (config.depth - 1) + (1,)
    mlp = init_mlp(MlpSpec(widths, dropout=config.dropout), rng)
    opt = adam_init(mlp_param_arrays(mlp), learning_rate=config.learning_rate)
    inv_n = 1.0 / len(train_idx)
    for _ in range(config.epochs):
        pred, tape = mlp_forward(mlp, X_train, training=True, rng=rng)
        grads, _ = mlp_backward(mlp, tape, 2.0 * (pred - y_z) * inv_n)
        new = adam_step(opt, mlp_param_arrays(mlp), mlp_grad_arrays(grads))
        for layer in range(mlp.spec.n_layers):
            mlp.weights[layer] = new[2 * layer]
            mlp.biases[layer] = new[2 * layer + 1]

    pred_test, _ = mlp_forward(mlp, X_test)
    pred_raw = pred_test.reshape(-1) * scale + mu
    err = pred_raw - y_test
    return ProbeMetrics(
        mse=float(np.mean(err**2)),
        mae=float(np.mean(np.abs(err))),
        target_mean=float(y_test.mean()),
        target_std=float(y_test.std()),
        target_min=float(y_test.min()),
        target_max=float(y_test.max()),
        n_train=len(train_idx),
        n_test=len(test_idx),
    )


# ---------------------------------------------------------------------------
# PCA


@dataclass(frozen=True)
class PcaResult:
    points: np.ndarray  # (n, out_dim)
    explained_variance_ratio: np.ndarray  # (out_dim,)
    components: np.ndarray  # (out_dim, d) orthonormal rows
    mean: np.ndarray  # (d,)


def pca_fit_transform(embeddings: np.ndarray, out_dim: int) -> PcaResult:
    """Project centered data onto its top principal directions.

    Components are sign-fixed (largest-magnitude entry positive) so the
    result is deterministic and stable under duplicating points.
    """
    X = np.asarray(embeddings, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeMismatch(f"expected 2-d data, got shape {X.shape}")
    n, d = X.shape
    if not 1 <= out_dim <= d:
        raise ValueError(f"out_dim must lie in [1, {d}], got {out_dim}")
    if n < out_dim:
        raise TooFewSamples(f"need >= {out_dim} samples, got {n}")
    mean = X.mean(axis=0)
    Xc = X - mean
    _, svals, vt = np.linalg.svd(Xc, full_matrices=False)
    total_var = float((svals**2).sum())
    if total_var == 0.0:
        raise DegenerateData("data has zero variance in every direction")
    components = vt[:out_dim]
    for i in range(components.shape[0]):
        pivot = int(np.argmax(np.abs(components[i])))
        if components[i, pivot] < 0.0:
            components[i] = -components[i]
    ratios = (svals[:out_dim] ** 2) / total_var
    return PcaResult(
        points=Xc @ components.T,
        explained_variance_ratio=ratios,
        components=components,
        mean=mean,
    )


# ---------------------------------------------------------------------------
# Simplified neighbor embedding


def umap_lite(
    embeddings: np.ndarray,
    n_neighbors: int = 5,
    min_dist: float = 0.0,
    out_dim: int = 2,
    seed: int = 0,
    epochs: int = 300,
) -> np.ndarray:
    """Small deterministic cousin of UMAP for 2-d visualization.

    Builds the fuzzy k-NN graph exactly like the reference (per-point
    rho/sigma calibrated to log2(k), symmetrized by probabilistic union),
    then optimizes a PCA-initialized layout with sampled attractive edges
    and uniform repulsive negatives under the Cauchy kernel 1/(1+d^2).
    min_dist is accepted for interface parity; layouts are tuned for the
    tight-packing regime (min_dist ~ 0) and make no claim of matching the
    reference library's output.
    """
    X = np.asarray(embeddings, dtype=np.float64)
    n = X.shape[0]
    if n_neighbors < 1:
        raise ValueError(f"n_neighbors must be >= 1, got {n_neighbors}")
    if n <= n_neighbors:
        raise TooFewSamples(f"need more than {n_neighbors} samples, got {n}")

    diff = X[:, None, :] - X[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(dist, np.inf)
    knn = np.argsort(dist, axis=1)[:, :n_neighbors]
    knn_dist = np.take_along_axis(dist, knn, axis=1)

    # calibrate per-point bandwidths to hit log2(k) total membership
    rho = knn_dist[:, 0]
    target = math.log2(n_neighbors)
    sigma = np.ones(n)
    for i in range(n):
        lo, hi = 1e-12, 1e4
        gaps = np.maximum(knn_dist[i] - rho[i], 0.0)
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            if np.exp(-gaps / mid).sum() > target:
                hi = mid
            else:
                lo = mid
        sigma[i] = 0.5 * (lo + hi)

    W = np.zeros((n, n))
    rows = np.repeat(np.arange(n), n_neighbors)
    cols = knn.reshape(-1)
    W[rows, cols] = np.exp(
        -np.maximum(knn_dist - rho[:, None], 0.0) / sigma[:, None]
    ).reshape(-1)
    W = W + W.T - W * W.T

    rng = np.random.default_rng(derive_seed(seed, "umap"))
    try:
        pca = pca_fit_transform(X, min(out_dim, X.shape[1]))
        Y = np.zeros((n, out_dim))
        Y[:, : pca.points.shape[1]] = pca.points
        spread = np.abs(Y).max()
        if spread > 0.0:
            Y *= 10.0 / spread
    except DegenerateData:
        Y = rng.normal(0.0, 1e-4, size=(n, out_dim))

    ei, ej = np.nonzero(np.triu(W, 1))
    w = W[ei, ej]
    neg_rate = 5
    for epoch in range(epochs):
        alpha = 1.0 * (1.0 - epoch / epochs)
        sampled = rng.random(len(w)) < w
        si, sj = ei[sampled], ej[sampled]
        if si.size:
            delta = Y[si] - Y[sj]
            d2 = np.einsum("ij,ij->i", delta, delta)
            coeff = -2.0 / (1.0 + d2)
            step = np.clip(coeff[:, None] * delta, -4.0, 4.0)
            np.add.at(Y, si, alpha * step)
            np.add.at(Y, sj, -alpha * step)
            negs = rng.integers(0, n, size=(si.size, neg_rate))
            for col in range(neg_rate):
                nk = negs[:, col]
                delta = Y[si] - Y[nk]
                d2 = np.einsum("ij,ij->i", delta, delta)
                coeff = 2.0 / ((0.001 + d2) * (1.0 + d2))
                mask = nk != si
                step = np.clip(coeff[:, None] * delta, -4.0, 4.0)
                np.add.at(Y, si, alpha * step * mask[:, None])
    return Y


# ---------------------------------------------------------------------------
# Ward agglomerative clustering


def _ward_merge_sequence(points: np.ndarray) -> list[tuple[int, int]]:
    """Full merge order under Ward linkage via the Lance-Williams update.

    Slots keep their original index: merging (i, j) with i < j stores the
    union in slot i and retires slot j, so the row-major argmin realizes
    the documented lowest-pair-index tie breaking.
    """
    n = points.shape[0]
    diff = points[:, None, :] - points[None, :, :]
    D = np.einsum("ijk,ijk->ij", diff, diff)  # squared distances
    np.fill_diagonal(D, np.inf)
    sizes = np.ones(n)
    merges: list[tuple[int, int]] = []
    for _ in range(n - 1):
        flat = int(np.argmin(D))
        i, j = divmod(flat, n)
        if i > j:  # unreachable for symmetric D, kept as a guard
            i, j = j, i
        dij = D[i, j]
        ni, nj = sizes[i], sizes[j]
        mask = np.isfinite(D[i]) | np.isfinite(D[j])
        mask[i] = mask[j] = False
        nm = sizes[mask]
        D_new = ((ni + nm) * D[i, mask] + (nj + nm) * D[j, mask] - nm * dij) / (ni + nj + nm)
        D[i, mask] = D_new
        D[mask, i] = D_new
        D[j, :] = np.inf
        D[:, j] = np.inf
        sizes[i] = ni + nj
        merges.append((i, j))
    return merges


def _labels_from_merges(n: int, merges: list[tuple[int, int]], k: int) -> np.ndarray:
    parent = np.arange(n)

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in merges[: n - k]:
        parent[find(j)] = find(i)
    roots = [find(x) for x in range(n)]
    relabel: dict[int, int] = {}
    labels = np.zeros(n, dtype=np.int64)
    for x, root in enumerate(roots):
        if root not in relabel:
            relabel[root] = len(relabel)
        labels[x] = relabel[root]
    return labels


def agglomerative_cluster(points: np.ndarray, k: int) -> np.ndarray:
    """Ward-linkage clustering into k groups.

    Deterministic: distance ties merge the lowest (i, j) slot pair first;
    labels are numbered by first point occurrence.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if not 2 <= k <= n:
        raise BadK(f"k must lie in [2, {n}], got {k}")
    return _labels_from_merges(n, _ward_merge_sequence(points), k)


def silhouette_score(points: np.ndarray, assignments: np.ndarray) -> float:
    """Mean silhouette (b - a) / max(a, b) over all points.

    Points in singleton clusters score 0, as does the 0/0 case of
    coincident points; both conventions keep degenerate partitions finite.
    """
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(assignments)
    uniq = np.unique(labels)
    if uniq.size < 2:
        raise SingleCluster(f"need >= 2 clusters, got {uniq.size}")
    diff = points[:, None, :] - points[None, :, :]
    D = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    n = points.shape[0]
    scores = np.zeros(n)
    masks = {c: labels == c for c in uniq}
    counts = {c: int(masks[c].sum()) for c in uniq}
    for idx in range(n):
        own = labels[idx]
        if counts[own] == 1:
            continue  # singleton convention: score 0
        a = D[idx, masks[own]].sum() / (counts[own] - 1)
        b = min(D[idx, masks[c]].mean() for c in uniq if c != own)
        denom = max(a, b)
        scores[idx] = (b - a) / denom if denom > 0.0 else 0.0
    return float(scores.mean())


@dataclass(frozen=True)
class ClusterReport:
    assignments: np.ndarray
    candidate_counts: tuple[int, ...]
    silhouettes: tuple[float, ...]
    selected_count: int


def select_clusters(points: np.ndarray, k_min: int = 2, k_max: int = 25) -> ClusterReport:
    """Silhouette curve over candidate cluster counts; argmax wins, ties
    go to the smaller count."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n < k_max + 1:
        raise TooFewSamples(f"need >= {k_max + 1} points to scan k up to {k_max}, got {n}")
    merges = _ward_merge_sequence(points)
    counts = tuple(range(k_min, k_max + 1))
    scores = []
    labelings = []
    for k in counts:
        labels = _labels_from_merges(n, merges, k)
        labelings.append(labels)
        scores.append(silhouette_score(points, labels))
    best = 0
    for i in range(1, len(counts)):
        if scores[i] > scores[best]:
            best = i
    return ClusterReport(
        assignments=labelings[best],
        candidate_counts=counts,
        silhouettes=tuple(scores),
        selected_count=counts[best],
    )
