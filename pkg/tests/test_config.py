import dataclasses

import pytest

from cellfuse.config import ConfigError, RunConfig, parse_config, read_config


GOOD = """\
# training run, small model
manifest = data/manifest.txt
d_c = 35.0
seed = 7

mode = transformer
cnn_kind = plain
ratio = none
lr_max = 1e-3
lr_min = 1e-5
dropout = 0.2
"""


class TestParse:
    def test_values_and_defaults(self):
        cfg = parse_config(GOOD)
        assert cfg.manifest == "data/manifest.txt"
        assert cfg.d_c == 35.0
        assert cfg.seed == 7
        assert cfg.mode == "transformer"
        assert cfg.cnn_kind == "plain"
        assert cfg.ratio is None
        assert cfg.lr_max == 1e-3
        assert cfg.dropout == 0.2
        # untouched keys keep their defaults
        assert cfg.out_dir == "runs"
        assert cfg.gnn_kind == "gin"
        assert cfg.n_bins == 32
        assert cfg.feature_norm == "standardize"

    def test_blank_and_comment_lines_skipped(self):
        cfg = parse_config("\n# comment\nd_c = 1.0\n\n")
        assert cfg.d_c == 1.0

    def test_inline_whitespace_tolerated(self):
        cfg = parse_config("d_c=2.5\nseed =  3\n")
        assert cfg.d_c == 2.5
        assert cfg.seed == 3

    def test_frozen(self):
        cfg = parse_config("d_c = 1.0\n")
        with pytest.raises(dataclasses.FrozenInstanceError):
            cfg.seed = 1

    def test_manifest_optional_until_training(self):
        assert parse_config("d_c = 1.0\n").manifest is None


class TestErrors:
    def test_unknown_key_names_line(self):
        with pytest.raises(ConfigError, match=r"line 2: unknown key 'lr'"):
            parse_config("d_c = 1.0\nlr = 3e-4\n")

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config("just some words\n")

    def test_duplicate_names_first_line(self):
        with pytest.raises(ConfigError, match=r"line 3: duplicate key 'seed'.*line 1"):
            parse_config("seed = 1\nd_c = 1.0\nseed = 2\n")

    def test_bad_value_names_key_and_line(self):
        with pytest.raises(ConfigError, match=r"line 1: key 'seed'"):
            parse_config("seed = abc\n")

    def test_bad_enum_lists_choices(self):
        with pytest.raises(ConfigError, match="gcn"):
            parse_config("d_c = 1.0\ngnn_kind = sage\n")

    def test_lr_order_checked(self):
        with pytest.raises(ConfigError, match="lr_min"):
            parse_config("d_c = 1.0\nlr_max = 1e-6\nlr_min = 1e-3\n")

    def test_ratio_range(self):
        with pytest.raises(ConfigError):
            parse_config("d_c = 1.0\nratio = 1.5\n")
        with pytest.raises(ConfigError):
            parse_config("d_c = 1.0\nratio = 0\n")

    def test_dropout_range(self):
        with pytest.raises(ConfigError):
            parse_config("d_c = 1.0\ndropout = 1.0\n")

    def test_nonpositive_sizes_rejected(self):
        for line in ("batch_size = 0", "max_epochs = -1", "d_c = 0",
                     "cnn_width = 0", "t_max = 0"):
            with pytest.raises(ConfigError):
                parse_config(line + "\n" + ("d_c = 1.0\n" if "d_c" not in line else ""))

    def test_source_label_in_message(self):
        with pytest.raises(ConfigError, match="my.cfg"):
            parse_config("wat\n", source="my.cfg")


class TestReadConfig:
    def test_round_trip(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text(GOOD)
        assert read_config(p) == parse_config(GOOD)

    def test_missing_file_is_config_error(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            read_config(tmp_path / "nope.cfg")


class TestModelKwargs:
    def test_matches_fields(self):
        cfg = parse_config("d_c = 1.0\nratio = none\npredefined_dim = 64\n")
        kw = cfg.model_kwargs()
        assert kw["ratio"] is None
        assert kw["predefined_dim"] == 64
        assert kw["mode"] == "mlp"
        # every kwarg mirrors a config field of the same name
        for key, val in kw.items():
            assert getattr(cfg, key) == val

    def test_builds_a_model(self):
        from cellfuse.pipeline import build_model

        cfg = parse_config(
            "d_c = 1.0\ncnn_width = 2\nd_image = 8\ngnn_hidden = 8\n"
            "d_graph = 4\nmlp_embed = 8\n"
        )
        model = build_model(0, **cfg.model_kwargs())
        assert len(model.image_branches) == 1
        assert len(model.graph_branches) == 1


class TestRunConfigDirect:
    def test_default_construction(self):
        cfg = RunConfig()
        assert cfg.manifest is None
        assert cfg.mode == "mlp"
