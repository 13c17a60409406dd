# Train a small contrastive scene encoder on synthetic traffic scenes.
#
# Each training triplet is (scene, augmented copy, different scene); the
# encoder learns to place a scene and its perturbation closer together
# than two unrelated scenes. Holdout quality is the fraction of triplets
# where that ordering holds.

import time

import numpy as np

from ssglearn import (
    AugmentParams,
    ScenarioTemplate,
    TrainConfig,
    generate_dataset,
    split_scenes,
    train,
    triplet_accuracy,
)

# A small mixed corpus: 12 scenes per template, 60 total. Scene counts per
# map family stay balanced so no single layout dominates the batches.
scenes, maps = generate_dataset({t: 12 for t in ScenarioTemplate}, seed=0)
print(f"{len(scenes)} scenes across {len(maps)} maps")

# 20% holdout first, then 80/20 train/validation on the rest.
splits = split_scenes(scenes, seed=0)
print(f"train {len(splits.train)} / val {len(splits.validation)} / holdout {len(splits.holdout)}")

config = TrainConfig(epochs=30, batch_size=32, seed=0)
aug = AugmentParams()

t0 = time.perf_counter()
result = train(splits.train, splits.validation, maps, config, aug)
print(f"trained {config.epochs} epochs in {time.perf_counter() - t0:.1f} s")

# The history carries one row per epoch; print a coarse trace. Train loss
# stays spiky (only violated triplets contribute to the hinge) while the
# validation side saturates almost immediately on data this separable.
print()
print("epoch   train_loss   val_loss   val_acc")
for row in result.history[:: max(1, len(result.history) // 10)]:
    print(f"{row.epoch:5d}   {row.train_loss:10.4f}   {row.val_loss:8.4f}   {row.val_accuracy:7.3f}")
print(f"best validation epoch: {result.best_epoch}")

# Holdout evaluation. repeats > 1 draws several independent triplet sets
# per scene so the estimate does not hinge on one augmentation draw.
report = triplet_accuracy(result.final_params, splits.holdout, maps, aug, seed=1, repeats=5)
total = report.total
print()
print(f"holdout triplet accuracy: {total.accuracy:.3f} over {total.n_triplets} triplets")
print(f"mean distance to positive: {total.mean_dist_positive:.3f}")
print(f"mean distance to negative: {total.mean_dist_negative:.3f}")

print()
print("per-location accuracy")
for stats in report.per_location:
    print(f"  {stats.location:22s} {stats.accuracy:.3f}  ({stats.n_triplets} triplets)")

# Margin check: the gap between the negative and positive mean distances
# should comfortably exceed the training margin.
gap = total.mean_dist_negative - total.mean_dist_positive
print()
print(f"distance gap {gap:.3f} vs training margin {config.margin}")
assert np.isfinite(gap)
