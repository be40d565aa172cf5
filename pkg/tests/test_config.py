"""Config loading, validation paths, and dotted overrides."""

import json
from importlib import resources

import pytest

from nearcrash.config import DEFAULTS, ConfigError, build_config, load_config, override_flags


class TestDefaults:
    def test_defaults_build(self):
        cfg = build_config()
        assert cfg.rules.delta == 3.0
        assert cfg.rules.phi == 6.75
        assert cfg.rules.alpha == -0.75
        assert cfg.rules.beta == 0.05
        assert cfg.rules.cooldown == 10.0
        assert cfg.tracker.confidence_min == 0.4
        assert cfg.tracker.iou_min == 0.3
        assert cfg.tracker.max_age == 5
        assert cfg.tracker.min_hits == 3
        assert cfg.regression.size_window_len == 12
        assert cfg.regression.center_window_len == 18
        assert cfg.pipeline.mode == "offline"
        assert cfg.gps.affine.lat_offset == -31.30174
        assert cfg.gps.sample_period == 3.0

    def test_window_capacity(self):
        cfg = build_config({"regression": {"size_window_len": 20}})
        assert cfg.window_capacity == 20
        assert build_config().window_capacity == 18

    def test_c_los_defaults_to_principal(self):
        cfg = build_config()
        assert cfg.rules.c_los is None
        assert cfg.camera.principal_x == 640.0

    def test_bundled_template_matches_defaults(self):
        text = resources.files("nearcrash").joinpath("configs/default.json").read_text()
        assert json.loads(text) == DEFAULTS


class TestValidation:
    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="detector"):
            build_config({"detector": {}})

    def test_unknown_field_path(self):
        with pytest.raises(ConfigError, match=r"tracker\.max_misses"):
            build_config({"tracker": {"max_misses": 3}})

    def test_rule_violation_reports_path(self):
        with pytest.raises(ConfigError, match="rules"):
            build_config({"rules": {"delta": 9.0}})  # delta >= phi

    def test_numeric_bounds(self):
        with pytest.raises(ConfigError, match=r"tracker\.iou_min"):
            build_config({"tracker": {"iou_min": 1.5}})
        with pytest.raises(ConfigError, match=r"camera\.fps"):
            build_config({"camera": {"fps": 0}})
        with pytest.raises(ConfigError, match=r"regression\.size_window_len"):
            build_config({"regression": {"size_window_len": 1}})
        with pytest.raises(ConfigError, match=r"pipeline\.mode"):
            build_config({"pipeline": {"mode": "batch"}})

    def test_type_errors(self):
        with pytest.raises(ConfigError, match=r"tracker\.max_age"):
            build_config({"tracker": {"max_age": 2.5}})
        with pytest.raises(ConfigError, match=r"rules\.delta"):
            build_config({"rules": {"delta": "fast"}})


class TestLoadAndOverride:
    def test_load_file_with_overrides(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"rules": {"delta": 2.0, "phi": 5.0}}))
        cfg = load_config(str(path), overrides={"rules.beta": 0.08})
        assert cfg.rules.delta == 2.0
        assert cfg.rules.beta == 0.08

    def test_override_unknown_field(self):
        with pytest.raises(ConfigError, match=r"rules\.gamma"):
            load_config(None, overrides={"rules.gamma": 1.0})

    def test_invalid_json_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_config(str(path))

    def test_override_flags_cover_all_leaves(self):
        flags = override_flags()
        assert "rules.delta" in flags
        assert "tracker.confidence_min" in flags
        assert "gps.sample_period" in flags
        assert len(flags) == 24
