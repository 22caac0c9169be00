"""
⚙️ Configuration tests - presets, config files and flag precedence
"""

import json

import pytest

from src.cli import build_parser, resolve_config
from src.core.enums import Variant
from src.utils.config import (
    SYNTH_PRESETS,
    TRAIN_PRESETS,
    BandGenConfig,
    ModelConfig,
    RunConfig,
    SynthSpec,
    TrainConfig,
    load_config_file,
    to_jsonable,
    update_section,
)
from src.utils.errors import InvalidArgumentError


def test_presets():
    full = SYNTH_PRESETS["paper-shape"]
    assert (full.n_classes, full.trials_per_class, full.channels, full.samples) == (13, 35, 30, 10000)
    desk = SYNTH_PRESETS["desk"]
    assert (desk.n_classes, desk.trials_per_class, desk.samples) == (4, 20, 2000)
    assert TRAIN_PRESETS["desk"].epochs == 50
    assert TRAIN_PRESETS["paper-shape"] == TrainConfig()
    assert (TrainConfig().epochs, TrainConfig().batch_size, TrainConfig().lr) == (500, 39, 1e-4)


def test_config_file_merges_over_the_base(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(
        json.dumps(
            {
                "bands": {"window_lengths": [2, 4], "increment_g": 2},
                "model": {"variant": "oescn_a1", "fc_hidden": [32], "dropout": 0},
                "train": {"epochs": 7},
                "synth": {"signatures": [[{"center_hz": 12, "bandwidth_hz": 1, "amplitude": 2, "channels": [0]}]],
                          "n_classes": 1},
            }
        )
    )
    config = load_config_file(path, RunConfig(train=TRAIN_PRESETS["desk"]))
    assert config.model.bands == BandGenConfig(window_lengths=(2, 4), increment_g=2)
    assert config.model.variant is Variant.OESCN_A1
    assert config.model.fc_hidden == (32,)
    assert isinstance(config.model.dropout, float)
    assert config.train.epochs == 7
    assert config.train.batch_size == 39
    assert config.synth.resolved_signatures()[0][0].channels == (0,)
    assert config.welch == RunConfig().welch


@pytest.mark.parametrize(
    "content",
    [
        '{"training": {}}',
        '{"train": {"epoch": 3}}',
        '{"model": {"variant": "OESCN_a9"}}',
        "[1, 2]",
        "{not json",
    ],
)
def test_bad_config_files(tmp_path, content):
    path = tmp_path / "bad.json"
    path.write_text(content)
    with pytest.raises(InvalidArgumentError):
        load_config_file(path)


def test_missing_config_file(tmp_path):
    with pytest.raises(InvalidArgumentError):
        load_config_file(tmp_path / "absent.json")


def test_snapshots_load_back_into_the_same_config():
    cfg = ModelConfig(variant=Variant.OESCN_A2, branch_kernels=(3, 5), attention_scale=2.0)
    snapshot = json.loads(json.dumps(to_jsonable(cfg)))
    assert snapshot["variant"] == "OESCN_a2"
    assert update_section(ModelConfig(), snapshot) == cfg
    synth = SynthSpec(n_classes=2)
    assert update_section(SynthSpec(), json.loads(json.dumps(to_jsonable(synth)))) == synth


def test_precedence_is_preset_then_file_then_flags(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"train": {"epochs": 9, "lr": 0.01}, "synth": {"channels": 6}}))
    parser = build_parser()

    config = resolve_config(parser.parse_args(["train", "--preset", "desk"]))
    assert config.train.epochs == 50
    assert config.synth.channels == 8

    config = resolve_config(parser.parse_args(["train", "--config", str(path)]))
    assert (config.train.epochs, config.train.lr, config.synth.channels) == (9, 0.01, 6)

    config = resolve_config(
        parser.parse_args(["train", "--config", str(path), "--epochs", "3", "--no-stratify", "--variant", "OESCN_a1"])
    )
    assert (config.train.epochs, config.train.lr) == (3, 0.01)
    assert config.train.stratified is False
    assert config.model.variant is Variant.OESCN_A1


def test_invalid_settings_are_rejected():
    with pytest.raises(InvalidArgumentError):
        TrainConfig(batch_size=1).validate()
    with pytest.raises(InvalidArgumentError):
        ModelConfig(n_classes=1).validate()
    with pytest.raises(InvalidArgumentError):
        BandGenConfig(window_lengths=()).validate()
    with pytest.raises(InvalidArgumentError):
        ModelConfig(dropout=0.75, dropout_keep_literal=True, attention_scale=-1.0).validate()
