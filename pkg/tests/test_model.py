"""
🏗️ Network assembly tests - shapes, variants, end-to-end gradients and checkpoints
"""

import json
from dataclasses import replace

import numpy as np
import pytest

from src.core.checkpoint import load_checkpoint, manifest_path, save_checkpoint
from src.core.enums import Mode, Variant
from src.core.model import attention_weights, build_model, input_width, layer_shapes, mean_attention
from src.core.nn import CrossEntropyLoss
from src.core.optim import AdamState, adam_step
from src.utils.config import ModelConfig
from src.utils.errors import InvalidArgumentError, InvalidDataError
from tests.conftest import numeric_grad, variant_of


def test_default_classifier_shapes():
    shapes = dict(layer_shapes(ModelConfig()))
    assert shapes["input"] == (1, 30, 299)
    assert shapes["concat"] == (24, 30, 299)
    assert shapes["pool1"] == (24, 15, 149)
    assert shapes["pool2"] == (16, 7, 74)
    assert shapes["flatten"] == (8288,)
    assert shapes["fc3"] == (13,)


def test_psd_variant_is_narrower():
    cfg = ModelConfig(variant=Variant.OESCN_A2)
    assert input_width(cfg) == 70
    assert dict(layer_shapes(cfg))["flatten"] == (1904,)


def test_literal_kernels_and_dropout_reading():
    cfg = ModelConfig(literal_kernels=True, dropout_keep_literal=True)
    assert cfg.kernels == (3, 8, 15)
    assert cfg.drop_probability == pytest.approx(0.75)
    assert dict(layer_shapes(cfg))["flatten"] == (8288,)


def test_maps_too_small_to_pool_are_rejected(mini_model):
    with pytest.raises(InvalidArgumentError):
        layer_shapes(replace(mini_model, channels=1))
    with pytest.raises(InvalidArgumentError):
        build_model(replace(mini_model, channels=3))


def test_attention_only_adds_its_own_parameters(mini_model):
    full = build_model(mini_model, seed=4)
    plain = build_model(variant_of(mini_model, Variant.OESCN_A1), seed=4)
    counts = full.layout.per_scale_counts
    attention = 3 * full.layout.total_k ** 2 + sum(3 * b * b for b in counts) + 3
    assert full.parameter_count() == plain.parameter_count() + attention


def test_zeroed_attention_collapses_onto_the_plain_classifier(mini_model, rng):
    full = build_model(mini_model, seed=11)
    plain = build_model(variant_of(mini_model, Variant.OESCN_A1), seed=11)
    for grid in full.attention.params():
        grid.value[...] = 0.0
    x = rng.normal(size=(12, 4, 27))
    np.testing.assert_array_equal(full.logits(x, Mode.EVAL), plain.logits(x, Mode.EVAL))


def test_probabilities_are_row_stochastic(mini_model, rng):
    for variant in Variant:
        cfg = variant_of(mini_model, variant)
        network = build_model(cfg, seed=2)
        x = rng.normal(size=(5, 4, input_width(cfg)))
        probs = network.forward(x)
        assert probs.shape == (5, 3)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)


def test_wrong_input_shapes_are_rejected(mini_model):
    network = build_model(variant_of(mini_model, Variant.OESCN_A2))
    with pytest.raises(InvalidArgumentError):
        network.logits(np.zeros((2, 4, 27)), Mode.EVAL)
    with pytest.raises(InvalidArgumentError):
        network.logits(np.zeros((4, 12)), Mode.EVAL)


def test_same_seed_same_network(mini_model, rng):
    x = rng.normal(size=(3, 4, 27))
    a, b = build_model(mini_model, seed=8), build_model(mini_model, seed=8)
    np.testing.assert_array_equal(a.forward(x), b.forward(x))
    assert not np.array_equal(a.forward(x), build_model(mini_model, seed=9).forward(x))


@pytest.mark.parametrize("variant", list(Variant))
def test_end_to_end_gradients(variant, mini_model):
    cfg = variant_of(mini_model, variant)
    network = build_model(cfg, seed=21)
    rng = np.random.default_rng(5)
    x = rng.normal(size=(4, 4, input_width(cfg)))
    targets = np.array([0, 1, 2, 1])
    head = CrossEntropyLoss()

    def loss() -> float:
        return head.forward(network.logits(x, Mode.TRAIN), targets)[0]

    def routing() -> np.ndarray:
        if network.attention is None:
            return np.zeros(1)
        heads = network.attention.last_heads
        return heads.h_glo >= heads.h_loc

    loss()
    network.zero_grad()
    dx = network.backward(head.backward())
    for _ in range(4):
        i = tuple(rng.integers(0, n) for n in x.shape)
        assert dx[i] == pytest.approx(numeric_grad(loss, x, i, branch=routing), rel=1e-4, abs=1e-7)
    for grid in network.trainable():
        index = tuple(rng.integers(0, n) for n in grid.shape)
        numeric = numeric_grad(loss, grid.value, index, branch=routing)
        assert grid.grad[index] == pytest.approx(numeric, rel=1e-4, abs=1e-7), grid.name


def test_attention_weights_for_one_sample(mini_model, rng):
    network = build_model(mini_model, seed=3)
    heads = attention_weights(network, rng.normal(size=(4, 27)))
    assert heads.h_glo.shape == (4, 27)
    assert heads.global_weights.shape == (27, 27)
    assert [w.shape for w in heads.local_weights] == [(11, 11), (9, 9), (7, 7)]
    with pytest.raises(InvalidArgumentError):
        attention_weights(network, rng.normal(size=(1, 4, 27)))
    with pytest.raises(InvalidArgumentError):
        attention_weights(build_model(variant_of(mini_model, Variant.OESCN_A1)), rng.normal(size=(4, 27)))


def test_mean_attention_averages_over_chunks(mini_model, rng):
    network = build_model(mini_model, seed=3)
    x = rng.normal(size=(7, 4, 27))
    whole = mean_attention(network, x, chunk=32)
    pieces = mean_attention(network, x, chunk=3)
    assert len(whole) == 4
    for a, b in zip(whole, pieces):
        np.testing.assert_allclose(a, b, rtol=1e-12)
        np.testing.assert_allclose(a.sum(axis=0), 1.0, atol=1e-12)
    one_by_one = np.mean([attention_weights(network, sample).global_weights for sample in x], axis=0)
    np.testing.assert_allclose(whole[0], one_by_one, rtol=1e-10)


def trained_network(cfg, rng):
    network = build_model(cfg, seed=6)
    adam = AdamState(lr=1e-2)
    head = CrossEntropyLoss()
    x = rng.normal(size=(6, 4, input_width(cfg)))
    for _ in range(2):
        network.zero_grad()
        head.forward(network.logits(x, Mode.TRAIN), [0, 1, 2, 0, 1, 2])
        network.backward(head.backward())
        adam_step(network.trainable(), adam)
    return network, adam, x


def test_checkpoint_round_trip_is_exact(mini_model, rng, tmp_path):
    network, adam, x = trained_network(mini_model, rng)
    extra = {"norm_mean": np.arange(3.0), "train_indices": np.array([0, 2, 5])}
    path = save_checkpoint(tmp_path / "model", network, adam, extra, manifest={"fold": 1})
    assert path.suffix == ".npz"

    loaded, loaded_adam, loaded_extra, manifest = load_checkpoint(path)
    assert manifest["fold"] == 1
    assert loaded.cfg == network.cfg
    for name, value in network.state_dict().items():
        np.testing.assert_array_equal(loaded.state_dict()[name], value)
    assert loaded_adam.t == adam.t == 2
    for name in adam.m:
        np.testing.assert_array_equal(loaded_adam.m[name], adam.m[name])
        np.testing.assert_array_equal(loaded_adam.v[name], adam.v[name])
    np.testing.assert_array_equal(loaded_extra["train_indices"], [0, 2, 5])
    np.testing.assert_array_equal(loaded.forward(x), network.forward(x))


def test_checkpoint_bytes_are_deterministic(mini_model, tmp_path):
    first, _, _ = trained_network(mini_model, np.random.default_rng(0))
    second, _, _ = trained_network(mini_model, np.random.default_rng(0))
    a = save_checkpoint(tmp_path / "a", first)
    b = save_checkpoint(tmp_path / "b", second)
    assert a.read_bytes() == b.read_bytes()
    assert manifest_path(a).read_text() == manifest_path(b).read_text()


def test_broken_checkpoints_are_data_errors(mini_model, tmp_path):
    path = save_checkpoint(tmp_path / "model", build_model(mini_model))
    document = json.loads(manifest_path(path).read_text())
    document["format_version"] = 99
    manifest_path(path).write_text(json.dumps(document))
    with pytest.raises(InvalidDataError):
        load_checkpoint(path)
    with pytest.raises(InvalidDataError):
        load_checkpoint(tmp_path / "missing")
