"""
🧪 Shared fixtures - small datasets and configs that train in seconds
"""

from dataclasses import replace
from typing import Callable, Optional

import numpy as np
import pytest

from src.core.enums import Variant
from src.core.training import fit_model_config
from src.data.synth import synth_dataset
from src.models.recording import Dataset
from src.utils.config import BandGenConfig, ModelConfig, SynthSpec, TrainConfig, WelchConfig

TINY_SYNTH = SynthSpec(n_classes=3, trials_per_class=6, channels=4, samples=400, noise_sigma=0.5, subject_id="tiny")


def numeric_grad(
    f: Callable[[], float],
    values: np.ndarray,
    index: tuple,
    step: float = 1e-4,
    branch: Optional[Callable[[], np.ndarray]] = None,
) -> float:
    """
    Central difference of f with respect to values[index]; values is changed in place and restored.

    `branch` reports which side of a kink (max routing) the last call took; if the two
    probes disagree the step shrinks a hundredfold, once.
    """
    original = values[index]
    for attempt in (step, step / 100):
        values[index] = original + attempt
        plus = f()
        side = branch() if branch is not None else None
        values[index] = original - attempt
        minus = f()
        same = branch is None or np.array_equal(side, branch())
        values[index] = original
        if same:
            break
    return (plus - minus) / (2 * attempt)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def welch() -> WelchConfig:
    return WelchConfig()


@pytest.fixture(scope="session")
def tiny_dataset() -> Dataset:
    return synth_dataset(TINY_SYNTH, seed=3)


@pytest.fixture
def tiny_model(tiny_dataset: Dataset) -> ModelConfig:
    cfg = ModelConfig(
        variant=Variant.OESCN,
        bands=BandGenConfig(window_lengths=(10, 20, 30)),
        branch_kernels=(3,),
        branch_filters=2,
        trunk_filters=2,
        fc_hidden=(8,),
    )
    return fit_model_config(cfg, tiny_dataset, WelchConfig())


@pytest.fixture
def tiny_train() -> TrainConfig:
    return TrainConfig(epochs=2, batch_size=5, lr=1e-3, seed=5, fold_seed=9, folds=3)


@pytest.fixture
def mini_model() -> ModelConfig:
    """A model small enough for finite-difference checks over every grid"""
    return ModelConfig(
        variant=Variant.OESCN,
        n_classes=3,
        channels=4,
        n_bins=12,
        bands=BandGenConfig(window_lengths=(1, 3, 5)),
        branch_kernels=(3, 4),
        branch_filters=2,
        trunk_filters=2,
        fc_hidden=(5,),
        dropout=0.0,
    )


def variant_of(cfg: ModelConfig, variant: Variant) -> ModelConfig:
    return replace(cfg, variant=variant)
