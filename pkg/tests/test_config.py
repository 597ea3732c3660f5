import json

import pytest

from regretlab.config import RunConfig, apply_overrides, from_dict, load_config
from regretlab.errors import ConfigError


class TestDefaults:
    def test_empty_file_yields_reference_defaults(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text("")
        cfg = load_config(str(path))
        assert cfg.max_path_length == 300
        assert cfg.trajectory_batch == 16
        assert cfg.replay_capacity == 3_000_000
        assert cfg.option_dim == 2
        assert cfg.lr_common == 1e-4
        assert cfg.lr_phi == 1e-3
        assert cfg.model_layers == 2
        assert cfg.gamma == 0.99
        assert cfg.batch_size == 1024
        assert cfg.dual_slack == 0.001
        assert cfg.alpha1 == 5.0
        assert cfg.alpha2 == 1.0
        assert cfg.pop_max_size == 15
        assert cfg.steps_per_stage == 50

    def test_no_path_yields_defaults(self):
        assert load_config(None) == RunConfig()

    def test_reference_width_one_override_away(self):
        cfg = load_config(None, ["model_dim=1024"])
        assert cfg.model_dim == 1024
        assert RunConfig().model_dim == 256  # desk-scale default


class TestOverrides:
    def test_regularizer_weights_match_defaults(self):
        cfg = load_config(None, ["alpha1=5", "alpha2=1"])
        assert cfg.alpha1 == 5.0 and cfg.alpha2 == 1.0

    def test_gamma_out_of_range_rejected(self):
        with pytest.raises(ConfigError, match="gamma"):
            load_config(None, ["gamma=1.5"])

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="stepz_per_stage"):
            load_config(None, ["stepz_per_stage=3"])

    def test_bad_syntax_rejected(self):
        with pytest.raises(ConfigError, match="key=value"):
            load_config(None, ["alpha1"])

    def test_type_coercion(self):
        cfg = load_config(None, ["seed=7", "lr_phi=5e-4", "record_wall_clock=true",
                                 "mode=uniform-baseline"])
        assert cfg.seed == 7
        assert cfg.lr_phi == 5e-4
        assert cfg.record_wall_clock is True
        assert cfg.mode == "uniform-baseline"

    def test_non_integer_rejected_for_int_field(self):
        with pytest.raises(ConfigError, match="seed"):
            load_config(None, ["seed=1.5"])


class TestFileLoading:
    def test_json_values_applied(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"layout": "large", "stages": 7, "v_max": 0.5}))
        cfg = load_config(str(path))
        assert cfg.layout == "large" and cfg.stages == 7 and cfg.v_max == 0.5

    def test_unknown_file_key_rejected_with_source(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"no_such_knob": 1}))
        with pytest.raises(ConfigError, match="no_such_knob"):
            load_config(str(path))

    def test_invalid_json_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_config(str(path))

    def test_missing_file_rejected(self):
        with pytest.raises(ConfigError):
            load_config("/no/such/config.json")

    def test_non_object_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("[1,2,3]")
        with pytest.raises(ConfigError, match="object"):
            load_config(str(path))

    def test_type_error_names_field_path(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"stages": "many"}))
        with pytest.raises(ConfigError, match="stages"):
            load_config(str(path))


class TestValidation:
    def test_mode_must_be_declared(self):
        with pytest.raises(ConfigError, match="mode"):
            from_dict({"mode": "freestyle"})

    def test_positive_fields_enforced(self):
        with pytest.raises(ConfigError, match="batch_size"):
            from_dict({"batch_size": 0})

    def test_floor_feasibility(self):
        with pytest.raises(ConfigError, match="p_min"):
            from_dict({"p_min": 0.2, "pop_max_size": 15})

    def test_hash_is_stable_and_sensitive(self):
        a, b = RunConfig(), RunConfig()
        assert a.hash() == b.hash()
        b.seed = 1
        assert a.hash() != b.hash()

    def test_apply_overrides_does_not_mutate(self):
        cfg = RunConfig()
        out = apply_overrides(cfg, ["seed=9"])
        assert cfg.seed == 0 and out.seed == 9
