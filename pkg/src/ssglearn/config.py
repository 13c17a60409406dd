"""Pipeline configuration: one nested mapping drives every command.

The shipped default config names every tunable in the pipeline; user
files are deep-merged over it and unknown keys are rejected loudly
(silent typos in experiment configs are how results stop being
reproducible). The canonical-JSON hash of the merged config is embedded
in every artifact so stale inputs are caught downstream.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import yaml

from .augment import AugmentParams
from .analysis import ProbeConfig
from .synthetic import ScenarioTemplate, TemplateParams
from .training import TrainConfig

__all__ = [
    "DEFAULT_CONFIG",
    "load_config",
    "apply_overrides",
    "config_hash",
    "augment_params_from",
    "train_config_from",
    "probe_config_from",
    "template_params_from",
    "template_counts_from",
]

DEFAULT_CONFIG: dict = {
    "seed": 0,
    "ingest": {
        "stride": 10,
    },
    "projection": {
        "gate_width_factor": 1.5,
        "gate": None,
    },
    "graph": {
        "horizon": 50.0,
    },
    "augmentation": {
        "p_select": 0.5,
        "sigma_pos": 1.0,
        "sigma_speed": 0.5,
    },
    "encoder": {
        "hidden_width": 60,
        "embedding_dim": 12,
        "slope": 0.01,
        "dropout": 0.1,
    },
    "training": {
        "learning_rate": 0.001,
        "margin": 0.5,
        "batch_size": 400,
        "epochs": 400,
        "holdout_fraction": 0.2,
        "validation_fraction": 0.2,
    },
    "probe": {
        "hidden_width": 30,
        "depth": 4,
        "dropout": 0.1,
        "epochs": 2500,
        "learning_rate": 0.001,
        "test_fraction": 0.2,
    },
    "analysis": {
        "accuracy_repeats": 1,
        "reduction": "pca",
        "reduction_dim": 2,
        "umap_neighbors": 5,
        "umap_min_dist": 0.0,
        "umap_epochs": 300,
        "cluster_k_min": 2,
        "cluster_k_max": 25,
    },
    "synthetic": {
        "counts": {
            "straight_following": 40,
            "merge_lane": 40,
            "four_way_intersection": 40,
            "queue_jam": 40,
            "mixed": 40,
        },
        "templates": {
            "straight_following": {
                "count_min": 5,
                "count_max": 5,
                "speed_min": 5.0,
                "speed_max": 11.0,
                "gap_min": 10.0,
                "gap_max": 14.0,
            },
            "merge_lane": {
                "count_min": 10,
                "count_max": 10,
                "speed_min": 3.0,
                "speed_max": 9.0,
                "gap_min": None,
                "gap_max": None,
            },
            "four_way_intersection": {
                "count_min": 9,
                "count_max": 9,
                "speed_min": 2.0,
                "speed_max": 8.0,
                "gap_min": None,
                "gap_max": None,
            },
            "queue_jam": {
                "count_min": 13,
                "count_max": 13,
                "speed_min": 0.0,
                "speed_max": 1.0,
                "gap_min": 2.0,
                "gap_max": 4.0,
            },
            "mixed": {
                "count_min": 3,
                "count_max": 8,
                "speed_min": 1.0,
                "speed_max": 9.0,
                "gap_min": None,
                "gap_max": None,
            },
        },
    },
}


def _merge(base: dict, override: dict, path: str) -> dict:
    merged = dict(base)
    for key, value in override.items():
        here = f"{path}.{key}" if path else str(key)
        if key not in base:
            raise ValueError(f"unknown config key {here!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ValueError(f"config key {here!r} must be a section")
            merged[key] = _merge(base[key], value, here)
        else:
            merged[key] = value
    return merged


def load_config(path: str | Path | None = None) -> dict:
    """Defaults, optionally overlaid with a YAML file.

    Every key in the file must already exist in the defaults; sections
    merge recursively, scalars replace.
    """
    if path is None:
        return json.loads(json.dumps(DEFAULT_CONFIG))
    loaded = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if loaded is None:
        loaded = {}
    if not isinstance(loaded, dict):
        raise ValueError(f"{path}: config must be a mapping")
    return _merge(DEFAULT_CONFIG, loaded, "")


def apply_overrides(config: dict, overrides: list[str]) -> dict:
    """Apply dotted key=value overrides, e.g. training.epochs=100.

    Values parse as YAML scalars so numbers, booleans and null keep their
    types.
    """
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r} must look like section.key=value")
        dotted, raw = item.split("=", 1)
        keys = dotted.strip().split(".")
        node = config
        for key in keys[:-1]:
            if not isinstance(node.get(key), dict):
                raise ValueError(f"unknown config section {dotted!r}")
            node = node[key]
        leaf = keys[-1]
        if leaf not in node:
            raise ValueError(f"unknown config key {dotted!r}")
        if isinstance(node[leaf], dict):
            raise ValueError(f"config key {dotted!r} is a section, not a value")
        node[leaf] = yaml.safe_load(raw)
    return config


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Typed views


def augment_params_from(config: dict, seed: int | None = None) -> AugmentParams:
    aug = config["augmentation"]
    return AugmentParams(
        p_select=aug["p_select"],
        sigma_pos=aug["sigma_pos"],
        sigma_speed=aug["sigma_speed"],
        seed=config["seed"] if seed is None else seed,
    )


def train_config_from(config: dict) -> TrainConfig:
    tr = config["training"]
    return TrainConfig(
        learning_rate=tr["learning_rate"],
        margin=tr["margin"],
        batch_size=tr["batch_size"],
        epochs=tr["epochs"],
        embedding_dim=config["encoder"]["embedding_dim"],
        seed=config["seed"],
    )


def probe_config_from(config: dict) -> ProbeConfig:
    pr = config["probe"]
    return ProbeConfig(
        hidden_width=pr["hidden_width"],
        depth=pr["depth"],
        dropout=pr["dropout"],
        epochs=pr["epochs"],
        learning_rate=pr["learning_rate"],
        test_fraction=pr["test_fraction"],
    )


def template_params_from(config: dict) -> dict[ScenarioTemplate, TemplateParams]:
    out = {}
    for name, entry in config["synthetic"]["templates"].items():
        template = ScenarioTemplate(name)
        out[template] = TemplateParams(
            count_min=entry["count_min"],
            count_max=entry["count_max"],
            speed_min=entry["speed_min"],
            speed_max=entry["speed_max"],
            gap_min=entry["gap_min"],
            gap_max=entry["gap_max"],
        )
    return out


def template_counts_from(config: dict) -> dict[ScenarioTemplate, int]:
    return {
        ScenarioTemplate(name): int(count)
        for name, count in config["synthetic"]["counts"].items()
        if int(count) > 0
    }
