# Probe what a trained scene embedding actually encodes.
#
# Two readouts of the same 12-dim embedding space:
#   1. small regression probes trained on frozen embeddings, asked to
#      recover interpretable scene statistics (car count, mean speed)
#   2. PCA down to 2-d, written out as a scatter colored by mean speed
#
# If the probes beat a shuffled-target control, the embedding carries the
# feature; if PCA needs few components, the space is low-dimensional.

import numpy as np

from ssglearn import (
    AugmentParams,
    ScenarioTemplate,
    TrainConfig,
    build_scene_graph,
    encode_batch,
    generate_dataset,
    graph_level_features,
    pca_fit_transform,
    probe_regress,
    split_scenes,
    train,
)
from ssglearn.plotting import scatter_svg

# Corpus and a quick training run, same recipe as the training demo but
# with more scenes so the probes have something to chew on.
scenes, maps = generate_dataset({t: 25 for t in ScenarioTemplate}, seed=0)
splits = split_scenes(scenes, seed=0)
result = train(splits.train, splits.validation, maps, TrainConfig(epochs=40, batch_size=32, seed=0), AugmentParams())
print(f"encoder trained on {len(splits.train)} scenes")

# Freeze the encoder and embed every scene (train + val + holdout); the
# probes do their own train/test split internally.
graphs = [build_scene_graph(s, maps[s.map_ref]) for s in scenes]
X = encode_batch(result.final_params, graphs)
feats = [graph_level_features(g) for g in graphs]
n_cars = np.array([f.n_cars for f in feats], dtype=np.float64)
speed = np.array([f.mean_speed_cars for f in feats], dtype=np.float64)
print(f"embedded {X.shape[0]} scenes into {X.shape[1]} dims")

# Probe 1: number of cars in the scene.
m = probe_regress(X, n_cars, seed=3)
print()
print(f"car-count probe:  MAE {m.mae:.3f} cars  (target std {n_cars.std():.2f})")

# Probe 2: mean speed over the cars.
m = probe_regress(X, speed, seed=3)
print(f"mean-speed probe: MAE {m.mae:.3f} m/s   (target std {speed.std():.2f})")

# Control: same probe, targets shuffled. This should land far above the
# real probe; if it does not, the probe is memorizing rather than reading
# the embedding.
shuffled = np.random.default_rng(5).permutation(speed)
m = probe_regress(X, shuffled, seed=3)
print(f"shuffled control: MAE {m.mae:.3f} m/s   (unlearnable, so much worse)")

# PCA: how much of the embedding variance do two directions carry?
pca = pca_fit_transform(X, out_dim=2)
print()
print(f"explained variance ratios: {np.round(pca.explained_variance_ratio, 3)}")
print(f"first two components carry {pca.explained_variance_ratio.sum():.1%} of the variance")

scatter_svg(
    pca.points,
    speed,
    "embedding_pca.svg",
    title="scene embeddings, PCA to 2-d",
    value_label="mean car speed [m/s]",
)
print("wrote embedding_pca.svg (color = mean car speed)")
