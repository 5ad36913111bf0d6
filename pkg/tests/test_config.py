from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from pugnn.config import ConfigError, dump_config, from_mapping, load_config, parse_kv_text
from pugnn.synth_data import PRESETS, GeneratorConfig
from pugnn.training import TrainConfig

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_parse_comments_and_blanks():
    assert parse_kv_text("# c\n\n a = 1 \nb=x y\n") == {"a": "1", "b": "x y"}


@pytest.mark.parametrize("text, needle", [("a = 1\na = 2\n", ":2: duplicate"), ("a\n", ":1: expected"), ("= 3\n", "empty key")])
def test_parse_errors_carry_line(text, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_kv_text(text, "f.cfg")


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="lr_rate"):
        from_mapping(TrainConfig, {"lr_rate": "0.1"})


def test_bad_value():
    with pytest.raises(ConfigError, match="patience"):
        from_mapping(TrainConfig, {"patience": "ten"})
    with pytest.raises(ConfigError, match="split_fractions"):
        from_mapping(GeneratorConfig, {"split_fractions": "0.5, 0.5"})


def test_optional_and_bool():
    cfg = from_mapping(TrainConfig, {"class_prior": "None", "smote_enabled": "no"})
    assert cfg.class_prior is None and cfg.smote_enabled is False
    assert from_mapping(TrainConfig, {"class_prior": "0.25"}).class_prior == 0.25


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_shipped_presets_match(name):
    assert load_config(GeneratorConfig, CONFIGS / f"{name}.cfg") == PRESETS[name]


@pytest.mark.parametrize("name", ["train.cfg", "benchmark_train.cfg"])
def test_shipped_train_configs_valid(name):
    load_config(TrainConfig, CONFIGS / name).validate()


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(TrainConfig, tmp_path / "none.cfg")


@settings(max_examples=50, deadline=None)
@given(
    st.floats(1e-5, 1.0), st.integers(1, 50), st.booleans(),
    st.one_of(st.none(), st.floats(0.01, 0.99)), st.sampled_from(["nnpu", "upu", "ce"]),
)
def test_dump_round_trip(lr, patience, smote, prior, mode):
    cfg = TrainConfig(lr=lr, patience=patience, smote_enabled=smote, class_prior=prior, loss_mode=mode)
    assert from_mapping(TrainConfig, parse_kv_text(dump_config(cfg))) == cfg


def test_overrides_win(tmp_path):
    (tmp_path / "c.cfg").write_text("seed = 3\n")
    assert load_config(TrainConfig, tmp_path / "c.cfg", seed=8).seed == 8
