"""Command line pipeline.

generate/ingest -> build-graphs -> train -> embed -> eval | cluster | plot,
all driven by one config file. Outputs are deterministic byte for byte
under a fixed config and seed; every artifact records the config hash it
was produced with and later stages refuse mismatched inputs unless
--force is given.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .analysis import (
    pca_fit_transform,
    probe_regress,
    select_clusters,
    triplet_accuracy,
    umap_lite,
)
from .config import (
    apply_overrides,
    augment_params_from,
    config_hash,
    load_config,
    probe_config_from,
    template_counts_from,
    template_params_from,
    train_config_from,
)
from .encoder import encode_batch
from .errors import DataFormatError, NumericFailure, SsgError
from .graph import GRAPH_FEATURE_NAMES, build_scene_graph, graph_level_features
from .io import (
    check_config_hash,
    load_lane_map,
    read_assignments_csv,
    read_checkpoint,
    read_embeddings_csv,
    read_graphs_artifact,
    read_scenes_artifact,
    read_tracks_csv,
    save_lane_map,
    scenes_from_tracks,
    write_assignments_csv,
    write_checkpoint,
    write_embeddings_csv,
    write_graphs_artifact,
    write_history_csv,
    write_report,
    write_scenes_artifact,
    write_tracks_csv,
)
from .plotting import scatter_svg
from .synthetic import generate_dataset, map_id_for
from .training import split_scenes, train

log = logging.getLogger("ssglearn")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the pipeline reserves 2 for
    data errors, so usage problems are remapped to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="YAML config overlaying the defaults")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="dotted config override, e.g. training.epochs=100 (repeatable)",
    )


def _load(args) -> tuple[dict, str]:
    config = apply_overrides(load_config(args.config), args.overrides)
    return config, config_hash(config)


def _graph_kwargs(config: dict) -> dict:
    return {
        "gate": config["projection"]["gate"],
        "horizon": config["graph"]["horizon"],
        "gate_width_factor": config["projection"]["gate_width_factor"],
    }


def _reduce(X: np.ndarray, config: dict) -> tuple[np.ndarray, str]:
    analysis = config["analysis"]
    method = analysis["reduction"]
    if method == "pca":
        return pca_fit_transform(X, analysis["reduction_dim"]).points, "pca"
    if method in ("umap-lite", "umap_lite"):
        points = umap_lite(
            X,
            n_neighbors=analysis["umap_neighbors"],
            min_dist=analysis["umap_min_dist"],
            out_dim=analysis["reduction_dim"],
            seed=config["seed"],
            epochs=analysis["umap_epochs"],
        )
        return points, "umap-lite"
    raise ValueError(f"unknown reduction {method!r} (expected pca or umap-lite)")


# ---------------------------------------------------------------------------
# Commands


def cmd_generate(args) -> int:
    config, chash = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scenes, maps = generate_dataset(
        template_counts_from(config), config["seed"], template_params_from(config)
    )
    write_scenes_artifact(scenes, maps, chash, out / "scenes.json")
    for template in template_counts_from(config):
        sub = out / template.value
        sub.mkdir(exist_ok=True)
        save_lane_map(maps[map_id_for(template)], sub / "map.json")
        write_tracks_csv(
            [s for s in scenes if s.map_ref == map_id_for(template)], sub / "tracks.csv"
        )
    print(f"wrote {len(scenes)} scenes over {len(maps)} maps to {out / 'scenes.json'}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    config, chash = _load(args)
    lane_map = load_lane_map(args.map)
    rows = read_tracks_csv(args.tracks)
    scenes = scenes_from_tracks(
        rows, args.location, args.location, stride=config["ingest"]["stride"]
    )
    if not scenes:
        raise DataFormatError(f"{args.tracks}: no frames survive stride")
    write_scenes_artifact(scenes, {args.location: lane_map}, chash, args.out)
    print(f"ingested {len(rows)} records into {len(scenes)} scenes at {args.out}")
    return EXIT_OK


def cmd_build_graphs(args) -> int:
    config, chash = _load(args)
    scenes, maps, found = read_scenes_artifact(args.scenes)
    check_config_hash(found, chash, args.force, args.scenes)
    kwargs = _graph_kwargs(config)
    graphs, kept, failures = [], [], []
    for i, scene in enumerate(scenes):
        try:
            graphs.append(build_scene_graph(scene, maps[scene.map_ref], **kwargs))
            kept.append(scene)
        except SsgError as err:
            failures.append((scene.scene_id, str(err)))
            log.error("scene %s: %s", scene.scene_id, err)
        if (i + 1) % 200 == 0:
            log.info("built %d/%d graphs", i + 1, len(scenes))
    if failures:
        error_log = Path(str(args.out) + ".errors.log")
        error_log.write_text(
            "".join(f"{scene_id}\t{msg}\n" for scene_id, msg in failures), encoding="utf-8"
        )
        log.warning("%d scenes failed; see %s", len(failures), error_log)
    if not graphs:
        raise DataFormatError(f"{args.scenes}: every scene failed graph construction")
    write_graphs_artifact(graphs, kept, maps, chash, args.out)
    print(f"built {len(graphs)} graphs ({len(failures)} failures) at {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    config, chash = _load(args)
    graphs, scenes, maps, found = read_graphs_artifact(args.graphs)
    check_config_hash(found, chash, args.force, args.graphs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    tr = config["training"]
    splits = split_scenes(
        list(scenes),
        config["seed"],
        holdout_fraction=tr["holdout_fraction"],
        validation_fraction=tr["validation_fraction"],
    )
    result = train(
        list(splits.train),
        list(splits.validation),
        maps,
        train_config_from(config),
        augment_params_from(config),
        on_epoch=lambda s: log.info(
            "epoch %d train %.4f val %.4f acc %.3f",
            s.epoch, s.train_loss, s.val_loss, s.val_accuracy,
        ),
        **_graph_kwargs(config),
    )

    write_history_csv(result.history, chash, out / "history.csv")
    write_checkpoint(result.params, None, chash, out / "checkpoint.json")
    write_checkpoint(result.final_params, result.optimizer, chash, out / "checkpoint_final.json")
    by_id = {g.scene_id: g for g in graphs}
    holdout_graphs = [by_id[s.scene_id] for s in splits.holdout]
    write_graphs_artifact(holdout_graphs, list(splits.holdout), maps, chash, out / "holdout.json")
    best = result.history[result.best_epoch - 1] if result.history else None
    if best is not None:
        print(
            f"trained {len(result.history)} epochs; best epoch {best.epoch} "
            f"(val accuracy {best.val_accuracy:.3f}); artifacts in {out}"
        )
    else:
        print(f"no epochs run; initial parameters checkpointed in {out}")
    return EXIT_OK


def cmd_embed(args) -> int:
    config, chash = _load(args)
    params, _, ckpt_hash = read_checkpoint(args.checkpoint)
    check_config_hash(ckpt_hash, chash, args.force, args.checkpoint)
    graphs, _, _, found = read_graphs_artifact(args.graphs)
    check_config_hash(found, chash, args.force, args.graphs)
    embeddings = encode_batch(params, graphs)
    write_embeddings_csv(
        [g.scene_id for g in graphs],
        [g.location_label for g in graphs],
        embeddings,
        chash,
        args.out,
    )
    print(f"embedded {len(graphs)} graphs to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    config, chash = _load(args)
    params, _, ckpt_hash = read_checkpoint(args.checkpoint)
    check_config_hash(ckpt_hash, chash, args.force, args.checkpoint)
    graphs, scenes, maps, found = read_graphs_artifact(args.graphs)
    check_config_hash(found, chash, args.force, args.graphs)

    accuracy = triplet_accuracy(
        params,
        list(scenes),
        maps,
        augment_params_from(config),
        seed=config["seed"],
        repeats=config["analysis"]["accuracy_repeats"],
        **_graph_kwargs(config),
    )
    embeddings = encode_batch(params, graphs)
    feats = [graph_level_features(g) for g in graphs]
    probe_config = probe_config_from(config)
    probes = {}
    for name, values in (
        ("n_cars", np.array([f.n_cars for f in feats], dtype=np.float64)),
        ("mean_speed_cars", np.array([f.mean_speed_cars for f in feats])),
    ):
        probes[name] = asdict(
            probe_regress(embeddings, values, probe_config, seed=config["seed"])
        )

    report = {
        "accuracy": {
            "per_location": [asdict(row) for row in accuracy.per_location],
            "total": asdict(accuracy.total),
        },
        "probes": probes,
    }
    write_report(report, chash, args.out)
    total = accuracy.total
    print(
        f"holdout accuracy {total.accuracy:.3f} over {total.n_triplets} triplets "
        f"(mean d+ {total.mean_dist_positive:.3f}, mean d- {total.mean_dist_negative:.3f}); "
        f"report at {args.out}"
    )
    return EXIT_OK


def cmd_cluster(args) -> int:
    config, chash = _load(args)
    ids, labels, X, found = read_embeddings_csv(args.embeddings)
    check_config_hash(found, chash, args.force, args.embeddings)
    points, method = _reduce(X, config)
    report = select_clusters(
        points,
        k_min=config["analysis"]["cluster_k_min"],
        k_max=config["analysis"]["cluster_k_max"],
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_assignments_csv(ids, labels, report.assignments, chash, out / "assignments.csv")
    write_report(
        {
            "reduction": method,
            "selected_count": report.selected_count,
            "candidate_counts": list(report.candidate_counts),
            "silhouettes": list(report.silhouettes),
        },
        chash,
        out / "report.json",
    )
    best = report.silhouettes[report.candidate_counts.index(report.selected_count)]
    print(f"selected {report.selected_count} clusters (silhouette {best:.3f}); artifacts in {out}")
    return EXIT_OK


def cmd_plot(args) -> int:
    config, chash = _load(args)
    ids, labels, X, found = read_embeddings_csv(args.embeddings)
    check_config_hash(found, chash, args.force, args.embeddings)
    points, method = _reduce(X, config)

    color_by = args.color_by
    if color_by == "location":
        values = np.array(labels)
        categorical = True
    elif color_by == "cluster":
        if args.assignments is None:
            raise ValueError("--assignments is required with --color-by cluster")
        a_ids, _, clusters, a_hash = read_assignments_csv(args.assignments)
        check_config_hash(a_hash, chash, args.force, args.assignments)
        by_id = dict(zip(a_ids, clusters))
        missing = [i for i in ids if i not in by_id]
        if missing:
            raise DataFormatError(f"{args.assignments}: no cluster for scene {missing[0]}")
        values = np.array([by_id[i] for i in ids])
        categorical = True
    elif color_by in GRAPH_FEATURE_NAMES:
        if args.graphs is None:
            raise ValueError(f"--graphs is required with --color-by {color_by}")
        graphs, _, _, g_hash = read_graphs_artifact(args.graphs)
        check_config_hash(g_hash, chash, args.force, args.graphs)
        by_id = {g.scene_id: getattr(graph_level_features(g), color_by) for g in graphs}
        missing = [i for i in ids if i not in by_id]
        if missing:
            raise DataFormatError(f"{args.graphs}: no graph for scene {missing[0]}")
        values = np.array([by_id[i] for i in ids], dtype=np.float64)
        categorical = False
    else:
        raise ValueError(
            f"unknown --color-by {color_by!r}; choose location, cluster or one of "
            f"{', '.join(GRAPH_FEATURE_NAMES)}"
        )
    scatter_svg(
        points,
        values,
        args.out,
        title=f"scene embeddings ({method})",
        value_label=color_by,
        categorical=categorical,
    )
    print(f"plotted {len(ids)} scenes to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ssglearn", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("generate", help="sample synthetic scenes from the built-in templates")
    p.add_argument("--out", required=True, help="output directory")
    _add_common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("ingest", help="snapshot a track table into scenes")
    p.add_argument("--tracks", required=True, help="track CSV")
    p.add_argument("--map", required=True, help="lane map JSON")
    p.add_argument("--location", required=True, help="location label for all scenes")
    p.add_argument("--out", required=True, help="output scene bundle (JSON)")
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build-graphs", help="turn scenes into semantic scene graphs")
    p.add_argument("--scenes", required=True, help="scene bundle from generate/ingest")
    p.add_argument("--out", required=True, help="output graph bundle (JSON)")
    p.add_argument("--force", action="store_true", help="accept mismatched config hashes")
    _add_common(p)
    p.set_defaults(func=cmd_build_graphs)

    p = sub.add_parser("train", help="train the triplet encoder")
    p.add_argument("--graphs", required=True, help="graph bundle")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--force", action="store_true", help="accept mismatched config hashes")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("embed", help="write embeddings for every graph")
    p.add_argument("--checkpoint", required=True, help="encoder checkpoint")
    p.add_argument("--graphs", required=True, help="graph bundle")
    p.add_argument("--out", required=True, help="output embeddings CSV")
    p.add_argument("--force", action="store_true", help="accept mismatched config hashes")
    _add_common(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("eval", help="triplet accuracy and probe report on holdout graphs")
    p.add_argument("--checkpoint", required=True, help="encoder checkpoint")
    p.add_argument("--graphs", required=True, help="holdout graph bundle")
    p.add_argument("--out", required=True, help="output report JSON")
    p.add_argument("--force", action="store_true", help="accept mismatched config hashes")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cluster", help="reduce, cluster and score embeddings")
    p.add_argument("--embeddings", required=True, help="embeddings CSV")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--force", action="store_true", help="accept mismatched config hashes")
    _add_common(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("plot", help="scatter the reduced embedding space as SVG")
    p.add_argument("--embeddings", required=True, help="embeddings CSV")
    p.add_argument("--out", required=True, help="output SVG")
    p.add_argument(
        "--color-by",
        default="location",
        help="location, cluster, or a graph feature "
        f"({', '.join(GRAPH_FEATURE_NAMES)})",
    )
    p.add_argument("--assignments", default=None, help="assignments CSV (for cluster coloring)")
    p.add_argument("--graphs", default=None, help="graph bundle (for feature coloring)")
    p.add_argument("--force", action="store_true", help="accept mismatched config hashes")
    _add_common(p)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except NumericFailure as err:
        sys.stderr.write(f"numeric failure: {err}\n")
        return EXIT_NUMERIC
    except DataFormatError as err:
        sys.stderr.write(f"data error: {err}\n")
        return EXIT_DATA
    except SsgError as err:
        sys.stderr.write(f"data error: {err}\n")
        return EXIT_DATA
    except (ValueError, OSError, KeyError) as err:
        sys.stderr.write(f"error: {err}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
