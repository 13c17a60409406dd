"""Command-line pipeline: artifact flow, exit codes, reproducibility."""
import json

import pytest

from ssglearn.cli import main

# small corpus and model so the full pipeline stays in the sub-minute range
SETTINGS = [
    "synthetic.counts.straight_following=4",
    "synthetic.counts.merge_lane=4",
    "synthetic.counts.four_way_intersection=4",
    "synthetic.counts.queue_jam=4",
    "synthetic.counts.mixed=4",
    "training.epochs=2",
    "training.batch_size=8",
    "encoder.hidden_width=10",
    "encoder.embedding_dim=4",
    "probe.epochs=40",
    "probe.hidden_width=6",
    "probe.depth=2",
    "analysis.cluster_k_max=5",
]


def run(*argv):
    return main(list(argv))


def settings(extra=()):
    out = []
    for item in list(SETTINGS) + list(extra):
        out += ["--set", item]
    return out


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    ws = tmp_path_factory.mktemp("pipeline")
    data = ws / "data"
    model = ws / "model"
    assert run("generate", "--out", str(data), *settings()) == 0
    assert (data / "scenes.json").is_file()
    assert run(
        "build-graphs", "--scenes", str(data / "scenes.json"),
        "--out", str(ws / "graphs.json"), *settings(),
    ) == 0
    assert run(
        "train", "--graphs", str(ws / "graphs.json"), "--out", str(model), *settings()
    ) == 0
    for name in ("history.csv", "checkpoint.json", "checkpoint_final.json", "holdout.json"):
        assert (model / name).is_file()
    assert run(
        "embed", "--checkpoint", str(model / "checkpoint_final.json"),
        "--graphs", str(ws / "graphs.json"), "--out", str(ws / "emb.csv"), *settings(),
    ) == 0
    return ws


class TestPipeline:
    def test_eval_writes_report(self, pipeline):
        out = pipeline / "report.json"
        code = run(
            "eval", "--checkpoint", str(pipeline / "model" / "checkpoint_final.json"),
            "--graphs", str(pipeline / "graphs.json"), "--out", str(out), *settings(),
        )
        assert code == 0
        report = json.loads(out.read_text())
        assert 0.0 <= report["accuracy"]["total"]["accuracy"] <= 1.0
        assert set(report["probes"]) == {"n_cars", "mean_speed_cars"}

    def test_cluster_writes_assignments(self, pipeline):
        out = pipeline / "clusters"
        code = run(
            "cluster", "--embeddings", str(pipeline / "emb.csv"), "--out", str(out), *settings()
        )
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["candidate_counts"] == list(range(2, 6))
        assert 2 <= report["selected_count"] <= 5
        lines = (out / "assignments.csv").read_text().splitlines()
        assert len(lines) == 2 + 20  # hash line + header + one row per scene

    def test_plot_by_location_is_deterministic(self, pipeline):
        a, b = pipeline / "a.svg", pipeline / "b.svg"
        for out in (a, b):
            assert run(
                "plot", "--embeddings", str(pipeline / "emb.csv"), "--out", str(out), *settings()
            ) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_plot_colored_by_cluster_and_feature(self, pipeline):
        clusters = pipeline / "clusters" / "assignments.csv"
        assert run(
            "plot", "--embeddings", str(pipeline / "emb.csv"),
            "--out", str(pipeline / "c.svg"), "--color-by", "cluster",
            "--assignments", str(clusters), *settings(),
        ) == 0
        assert run(
            "plot", "--embeddings", str(pipeline / "emb.csv"),
            "--out", str(pipeline / "d.svg"), "--color-by", "e_lon",
            "--graphs", str(pipeline / "graphs.json"), *settings(),
        ) == 0

    def test_ingest_round_trip(self, pipeline, tmp_path):
        data = pipeline / "data" / "straight_following"
        out = tmp_path / "ingested.json"
        code = run(
            "ingest", "--tracks", str(data / "tracks.csv"), "--map", str(data / "map.json"),
            "--location", "site-a", "--out", str(out),
            *settings(["ingest.stride=1"]),
        )
        assert code == 0
        assert run(
            "build-graphs", "--scenes", str(out), "--out", str(tmp_path / "g.json"),
            *settings(["ingest.stride=1"]),
        ) == 0

    def test_train_reruns_are_byte_identical(self, pipeline, tmp_path):
        outs = [tmp_path / "m1", tmp_path / "m2"]
        for out in outs:
            assert run(
                "train", "--graphs", str(pipeline / "graphs.json"),
                "--out", str(out), *settings(),
            ) == 0
        for name in ("history.csv", "checkpoint.json", "checkpoint_final.json"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


class TestExitCodes:
    def test_usage_errors(self, tmp_path):
        assert run("no-such-command") == 1
        assert run("generate") == 1  # missing --out
        assert run("generate", "--out", str(tmp_path / "x"), "--set", "nope=1") == 1

    def test_bad_color_by_is_usage(self, pipeline):
        assert run(
            "plot", "--embeddings", str(pipeline / "emb.csv"),
            "--out", str(pipeline / "x.svg"), "--color-by", "bogus", *settings(),
        ) == 1

    def test_missing_input_file(self, tmp_path):
        assert run(
            "build-graphs", "--scenes", str(tmp_path / "absent.json"),
            "--out", str(tmp_path / "g.json"),
        ) == 1

    def test_corrupt_artifact_is_data_error(self, tmp_path):
        bad = tmp_path / "scenes.json"
        bad.write_text("{ not json")
        assert run("build-graphs", "--scenes", str(bad), "--out", str(tmp_path / "g.json")) == 2

    def test_hash_mismatch_refused_then_forced(self, pipeline, tmp_path):
        # change any config knob: the embedded hash no longer matches
        changed = settings(["graph.horizon=40.0"])
        code = run(
            "embed", "--checkpoint", str(pipeline / "model" / "checkpoint_final.json"),
            "--graphs", str(pipeline / "graphs.json"),
            "--out", str(tmp_path / "emb.csv"), *changed,
        )
        assert code == 2
        code = run(
            "embed", "--checkpoint", str(pipeline / "model" / "checkpoint_final.json"),
            "--graphs", str(pipeline / "graphs.json"),
            "--out", str(tmp_path / "emb.csv"), "--force", *changed,
        )
        assert code == 0

    def test_probe_needs_enough_scenes(self, pipeline, tmp_path):
        # the holdout bundle has only 4 scenes; probes refuse < 10 samples
        code = run(
            "eval", "--checkpoint", str(pipeline / "model" / "checkpoint_final.json"),
            "--graphs", str(pipeline / "model" / "holdout.json"),
            "--out", str(tmp_path / "r.json"), *settings(),
        )
        assert code == 2
