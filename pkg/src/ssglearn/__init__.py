"""Semantic scene graphs for traffic scenes and a contrastive graph
encoder that embeds them, with analysis tools for the embedding space."""

from .scene import (
    Lane,
    LaneMap,
    LaneRelation,
    LaneRelationKind,
    ObjectClass,
    TrafficParticipant,
    TrafficScene,
    Vec2,
)
from .projection import ProjectionIdentity, candidate_identities, certainty_kernel, project_point
from .graph import RelationType, SceneGraph, build_scene_graph, graph_level_features
from .augment import AugmentParams, augment_scene
from .encoder import EncoderParams, encode, encode_batch, init_encoder
from .training import TrainConfig, TrainResult, euclidean_distance, split_scenes, train, triplet_loss
from .analysis import (
    AccuracyReport,
    ClusterReport,
    PcaResult,
    ProbeConfig,
    ProbeMetrics,
    agglomerative_cluster,
    pca_fit_transform,
    probe_regress,
    select_clusters,
    silhouette_score,
    triplet_accuracy,
    umap_lite,
)
from .synthetic import ScenarioTemplate, TemplateParams, generate_dataset, generate_map, generate_scene
from .config import DEFAULT_CONFIG, config_hash, load_config

__version__ = "0.1.0"

__all__ = [
    "Lane",
    "LaneMap",
    "LaneRelation",
    "LaneRelationKind",
    "ObjectClass",
    "TrafficParticipant",
    "TrafficScene",
    "Vec2",
    "ProjectionIdentity",
    "candidate_identities",
    "certainty_kernel",
    "project_point",
    "RelationType",
    "SceneGraph",
    "build_scene_graph",
    "graph_level_features",
    "AugmentParams",
    "augment_scene",
    "EncoderParams",
    "encode",
    "encode_batch",
    "init_encoder",
    "TrainConfig",
    "TrainResult",
    "euclidean_distance",
    "split_scenes",
    "train",
    "triplet_loss",
    "AccuracyReport",
    "ClusterReport",
    "PcaResult",
    "ProbeConfig",
    "ProbeMetrics",
    "agglomerative_cluster",
    "pca_fit_transform",
    "probe_regress",
    "select_clusters",
    "silhouette_score",
    "triplet_accuracy",
    "umap_lite",
    "ScenarioTemplate",
    "TemplateParams",
    "generate_dataset",
    "generate_map",
    "generate_scene",
    "DEFAULT_CONFIG",
    "config_hash",
    "load_config",
    "__version__",
]
