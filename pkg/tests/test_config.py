"""Config loading, overrides, hashing and the typed parameter views."""
from importlib import resources

import pytest
import yaml

from ssglearn.config import (
    DEFAULT_CONFIG,
    apply_overrides,
    augment_params_from,
    config_hash,
    load_config,
    probe_config_from,
    template_counts_from,
    template_params_from,
    train_config_from,
)
from ssglearn.synthetic import DEFAULT_TEMPLATE_PARAMS, ScenarioTemplate


class TestLoading:
    def test_shipped_yaml_matches_builtin_defaults(self):
        text = resources.files("ssglearn").joinpath("default_config.yaml").read_text()
        assert yaml.safe_load(text) == DEFAULT_CONFIG

    def test_none_path_returns_deep_copy(self):
        cfg = load_config(None)
        assert cfg == DEFAULT_CONFIG
        cfg["training"]["epochs"] = -99
        assert DEFAULT_CONFIG["training"]["epochs"] != -99

    def test_partial_file_merges(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("training:\n  epochs: 7\n")
        cfg = load_config(path)
        assert cfg["training"]["epochs"] == 7
        assert cfg["training"]["margin"] == DEFAULT_CONFIG["training"]["margin"]

    def test_unknown_key_rejected_with_dotted_path(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("training:\n  epohcs: 7\n")
        with pytest.raises(ValueError, match="training.epohcs"):
            load_config(path)

    def test_scalar_where_section_expected(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("training: 3\n")
        with pytest.raises(ValueError, match="section"):
            load_config(path)

    def test_empty_file_equals_defaults(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("")
        assert load_config(path) == DEFAULT_CONFIG

    def test_non_mapping_rejected(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("- a\n- b\n")
        with pytest.raises(ValueError, match="mapping"):
            load_config(path)


class TestOverrides:
    def test_typed_values(self):
        cfg = load_config(None)
        apply_overrides(
            cfg,
            ["training.epochs=9", "training.learning_rate=0.25", "projection.gate=null"],
        )
        assert cfg["training"]["epochs"] == 9
        assert cfg["training"]["learning_rate"] == 0.25
        assert cfg["projection"]["gate"] is None

    def test_bad_shapes_rejected(self):
        cfg = load_config(None)
        with pytest.raises(ValueError, match="section.key=value"):
            apply_overrides(cfg, ["training.epochs"])
        with pytest.raises(ValueError, match="unknown config key"):
            apply_overrides(cfg, ["training.epohcs=9"])
        with pytest.raises(ValueError, match="unknown config section"):
            apply_overrides(cfg, ["trainign.epochs=9"])
        with pytest.raises(ValueError, match="is a section"):
            apply_overrides(cfg, ["training=9"])


class TestHash:
    def test_stable_and_order_independent(self):
        a = {"x": 1, "y": {"b": 2, "a": 3}}
        b = {"y": {"a": 3, "b": 2}, "x": 1}
        assert config_hash(a) == config_hash(b)
        assert len(config_hash(a)) == 64

    def test_value_changes_move_the_hash(self):
        cfg = load_config(None)
        base = config_hash(cfg)
        apply_overrides(cfg, ["training.epochs=123456"])
        assert config_hash(cfg) != base

    def test_default_hash_is_reproducible(self):
        assert config_hash(load_config(None)) == config_hash(load_config(None))


class TestTypedViews:
    def test_template_params_match_builtin_defaults(self):
        assert template_params_from(load_config(None)) == DEFAULT_TEMPLATE_PARAMS

    def test_counts_skip_non_positive(self):
        cfg = load_config(None)
        cfg["synthetic"]["counts"]["mixed"] = 0
        counts = template_counts_from(cfg)
        assert ScenarioTemplate.MIXED not in counts
        assert all(v > 0 for v in counts.values())

    def test_train_config_view(self):
        cfg = load_config(None)
        apply_overrides(cfg, ["training.epochs=3", "encoder.embedding_dim=5", "seed=42"])
        tc = train_config_from(cfg)
        assert tc.epochs == 3 and tc.embedding_dim == 5 and tc.seed == 42

    def test_augment_view_seed_precedence(self):
        cfg = load_config(None)
        apply_overrides(cfg, ["seed=11"])
        assert augment_params_from(cfg).seed == 11
        assert augment_params_from(cfg, seed=99).seed == 99

    def test_probe_view(self):
        pc = probe_config_from(load_config(None))
        assert pc.hidden_width == 30 and pc.depth == 4
        assert pc.epochs == 2500 and pc.test_fraction == 0.2
