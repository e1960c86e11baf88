import math

import pytest

from decaylab.core.errors import ConfigError
from decaylab.services.config_loader import load_config, nest, parse_lines, validate


def test_parse_lines_skips_comments_and_blanks():
    flat = parse_lines("# run\n\nmodel.kind = wave1d  # inline\nfeedback.name=power\n")
    assert flat == {"model.kind": "wave1d", "feedback.name": "power"}


def test_duplicate_keys_are_rejected():
    with pytest.raises(ConfigError) as err:
        parse_lines("model.n = 8\nmodel.n = 16\n", source="dup.cfg")
    assert err.value.field == "model.n"
    assert "dup.cfg:2" in str(err.value)


def test_line_without_equals_sign():
    with pytest.raises(ConfigError):
        parse_lines("model.kind wave1d\n")


def test_nest_detects_value_section_clash():
    with pytest.raises(ConfigError):
        nest({"model": "wave1d", "model.kind": "wave1d"})


def test_feedback_name_is_required():
    with pytest.raises(ConfigError) as err:
        validate({"model.kind": "wave1d"})
    assert err.value.field == "feedback.name"
    assert err.value.exit_code == 2


def test_unknown_key_names_its_path():
    with pytest.raises(ConfigError) as err:
        validate({"feedback.name": "linear", "model.bogus": "1"})
    assert err.value.field == "model.bogus"


def test_bad_literal_names_its_path():
    with pytest.raises(ConfigError) as err:
        validate({"feedback.name": "linear", "model.kind": "plate2d"})
    assert err.value.field == "model.kind"


def test_text_values_are_coerced():
    config = validate({
        "feedback.name": "power",
        "feedback.p": "3",
        "model.n": "32",
        "model.damping.support": "0.1:0.3, 0.6:0.8",
        "sweep.viscosity": "on,off",
        "sweep.meshes": "16,32,64",
        "sweep.exponent_band": "-1.4:-0.7",
        "record.snapshots": "5",
        "initial.window": "0.5:0.9",
        "gramian.include_viscosity": "true",
    })
    assert config.feedback.p == 3.0
    assert config.model.n == 32
    assert config.model.damping.support == [(0.1, 0.3), (0.6, 0.8)]
    assert config.sweep.viscosity == [True, False]
    assert config.sweep.meshes == [16, 32, 64]
    assert config.sweep.exponent_band == (-1.4, -0.7)
    assert config.record.snapshots == 5
    assert config.initial.window == (0.5, 0.9)
    assert config.gramian.include_viscosity is True


def test_support_keywords():
    everywhere = validate({"feedback.name": "linear", "model.damping.support": "all"})
    assert everywhere.model.damping.support == [(-math.inf, math.inf)]
    nowhere = validate({"feedback.name": "linear", "model.damping.support": "none"})
    assert nowhere.model.damping.support == []


def test_empty_interval_is_rejected():
    with pytest.raises(ConfigError) as err:
        validate({"feedback.name": "linear", "initial.window": "0.9:0.1"})
    assert err.value.field == "initial.window"


def test_snapshot_stride_must_be_positive():
    with pytest.raises(ConfigError):
        validate({"feedback.name": "linear", "record.snapshots": "0"})


def test_load_config_applies_overrides(write_config):
    path = write_config(["feedback.name = linear", "output.dir = first"])
    config = load_config(path, overrides={"output.dir": "second", "seed": None})
    assert config.output.dir == "second"
    assert config.seed is None
    assert load_config(path, overrides={"seed": 7}).seed == 7


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError) as err:
        load_config(tmp_path / "nope.cfg")
    assert err.value.field == "--config"
