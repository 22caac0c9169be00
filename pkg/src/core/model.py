"""
🏗️ Network assembly - OESCN and its two ablations

OESCN:    S -> band attention (+ fusion, skip) -> CNN classifier
OESCN_a1: S -> CNN classifier
OESCN_a2: F -> CNN classifier

The classifier treats its input as a one-deep C x W image: parallel
same-padded conv branches (each conv -> ELU -> BN) stacked on depth, 2x2
average pooling, a 3x3 trunk conv -> ELU -> BN, pooling again, then three
fully connected layers with ELU and dropout between them and a softmax.
"""

import logging
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.core.attention import BandAttention, HeadOutputs, init_attention_params
from src.core.bandgen import band_counts
from src.core.enums import Mode, Padding
from src.core.nn import (
    ELU,
    AvgPool2d,
    BatchNorm,
    Conv2d,
    DepthConcat,
    Dense,
    Dropout,
    Flatten,
    Grid,
    Layer,
    Sequential,
    collect_grids,
    pool_output_size,
    same_padding,
    softmax,
)
from src.models.bands import BandLayout
from src.utils.config import ModelConfig
from src.utils.errors import InvalidArgumentError


def input_layout(cfg: ModelConfig) -> Optional[BandLayout]:
    """The band layout for band variants, None for OESCN_a2"""
    return band_counts(cfg.n_bins, cfg.bands) if cfg.variant.uses_bands else None


def input_width(cfg: ModelConfig) -> int:
    layout = input_layout(cfg)
    return layout.total_k if layout is not None else cfg.n_bins


def layer_shapes(cfg: ModelConfig) -> List[Tuple[str, Tuple[int, ...]]]:
    """
    📐 Per-sample output shape of every classifier stage

    Raises:
        InvalidArgumentError: If a kernel or pool does not fit its input
    """
    cfg.validate()
    height, width = cfg.channels, input_width(cfg)
    shapes: List[Tuple[str, Tuple[int, ...]]] = [("input", (1, height, width))]

    for kernel in cfg.kernels:
        before, after = same_padding(kernel)
        if kernel > height + before + after or kernel > width + before + after:
            raise InvalidArgumentError(f"{kernel}x{kernel} kernel does not fit a {height}x{width} input")
        shapes.append((f"branch{kernel}", (cfg.branch_filters, height, width)))
    depth = cfg.branch_filters * len(cfg.kernels)
    shapes.append(("concat", (depth, height, width)))

    for stage in ("pool1", "trunk", "pool2"):
        if stage == "trunk":
            shapes.append(("trunk", (cfg.trunk_filters, height, width)))
            depth = cfg.trunk_filters
            continue
        ph, pw = cfg.pool
        if ph > height or pw > width:
            raise InvalidArgumentError(f"{ph}x{pw} pooling does not fit a {height}x{width} map at {stage}")
        height, width = pool_output_size(height, ph, ph), pool_output_size(width, pw, pw)
        shapes.append((stage, (depth, height, width)))

    flat = depth * height * width
    shapes.append(("flatten", (flat,)))
    for i, size in enumerate(cfg.fc_sizes):
        shapes.append((f"fc{i + 1}", (size,)))
    return shapes


class OescnNetwork:
    """
    🧠 One network instance: optional band attention plus the CNN classifier

    Args:
        cfg: Model configuration
        seed: Seed for parameter initialisation and dropout masks
    """

    def __init__(self, cfg: ModelConfig, seed: int = 0):
        shapes = layer_shapes(cfg)
        self.cfg = cfg
        self.seed = seed
        self.layout = input_layout(cfg)
        self.width = input_width(cfg)

        classifier_seed, attention_seed, dropout_seed = np.random.SeedSequence(seed).spawn(3)
        rng = np.random.default_rng(classifier_seed)
        self.dropout_rng = np.random.default_rng(dropout_seed)

        self.attention: Optional[BandAttention] = None
        if cfg.variant.uses_attention:
            assert self.layout is not None
            params = init_attention_params(self.layout, np.random.default_rng(attention_seed))
            self.attention = BandAttention("attention", self.layout, params, cfg.scale)

        branches = [
            Sequential(
                f"branch{kernel}",
                [
                    Conv2d(f"branch{kernel}.conv", 1, cfg.branch_filters, (kernel, kernel), rng, Padding.SAME),
                    ELU(f"branch{kernel}.elu"),
                    BatchNorm(f"branch{kernel}.bn", cfg.branch_filters),
                ],
            )
            for kernel in cfg.kernels
        ]
        depth = cfg.branch_filters * len(cfg.kernels)
        flat = dict(shapes)["flatten"][0]
        k = cfg.trunk_kernel

        layers: List[Layer] = [
            DepthConcat("branches", branches),
            AvgPool2d("pool1", cfg.pool),
            Conv2d("trunk.conv", depth, cfg.trunk_filters, (k, k), rng, Padding.SAME),
            ELU("trunk.elu"),
            BatchNorm("trunk.bn", cfg.trunk_filters),
            AvgPool2d("pool2", cfg.pool),
            Flatten("flatten"),
        ]
        sizes = (flat,) + cfg.fc_sizes
        for i in range(len(cfg.fc_sizes)):
            layers.append(Dense(f"fc{i + 1}", sizes[i], sizes[i + 1], rng))
            if i < len(cfg.fc_sizes) - 1:
                layers.append(ELU(f"fc{i + 1}.elu"))
                layers.append(Dropout(f"fc{i + 1}.dropout", cfg.drop_probability, self.dropout_rng))
        self.classifier = Sequential("classifier", layers)

        logging.debug(f"🏗️ Built {cfg.variant.value} with {self.parameter_count()} parameters")

    # --- parameters -----------------------------------------------------

    def layers(self) -> List[Layer]:
        return ([self.attention] if self.attention is not None else []) + [self.classifier]

    def grids(self) -> Dict[str, Grid]:
        """Every parameter and buffer grid by name"""
        return collect_grids(self.layers())

    def trainable(self) -> List[Grid]:
        return [grid for layer in self.layers() for grid in layer.params()]

    def parameter_count(self) -> int:
        return sum(grid.value.size for grid in self.trainable())

    def zero_grad(self) -> None:
        for grid in self.trainable():
            grid.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: grid.value.copy() for name, grid in self.grids().items()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        """
        📥 Copies values into the grids

        Raises:
            InvalidArgumentError: On missing names or shape mismatch
        """
        grids = self.grids()
        missing = set(grids) - set(state)
        if missing:
            raise InvalidArgumentError(f"state is missing {sorted(missing)[:5]}")
        for name, grid in grids.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != grid.value.shape:
                raise InvalidArgumentError(f"{name}: shape {value.shape} != {grid.value.shape}")
            grid.value[...] = value

    # --- computation ----------------------------------------------------

    def logits(self, x: np.ndarray, mode: Mode) -> np.ndarray:
        """
        🧮 Raw class scores for a batch (b, C, W)

        Raises:
            InvalidArgumentError: If the input shape does not match the variant
        """
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[1:] != (self.cfg.channels, self.width):
            raise InvalidArgumentError(
                f"{self.cfg.variant.value} expects (b, {self.cfg.channels}, {self.width}), got {x.shape}"
            )
        if self.attention is not None:
            x = self.attention.forward(x, mode)
        return self.classifier.forward(x[:, None, :, :], mode)

    def forward(self, x: np.ndarray, mode: Mode = Mode.EVAL) -> np.ndarray:
        """
        🎯 Class probabilities (b, n_classes); rows sum to 1
        """
        return softmax(self.logits(x, mode), axis=1)

    def backward(self, dlogits: np.ndarray) -> np.ndarray:
        """
        ↩️ Back-propagates d loss / d logits through the whole network

        Returns:
            np.ndarray: Gradient with respect to the network input (b, C, W)
        """
        dx = self.classifier.backward(dlogits)[:, 0, :, :]
        if self.attention is not None:
            dx = self.attention.backward(dx)
        return dx

    def attention_heads(self, x: np.ndarray) -> HeadOutputs:
        """
        🔭 Head outputs and softmax weights for a batch, eval mode

        Raises:
            InvalidArgumentError: For variants without attention
        """
        if self.attention is None:
            raise InvalidArgumentError(f"{self.cfg.variant.value} has no attention heads")
        self.logits(x, Mode.EVAL)
        assert self.attention.last_heads is not None
        return self.attention.last_heads


def build_model(cfg: ModelConfig, seed: int = 0) -> OescnNetwork:
    """
    🏗️ Builds a freshly initialised network for `cfg`

    Raises:
        InvalidArgumentError: If the configuration is invalid or a layer does not fit
    """
    return OescnNetwork(cfg, seed)


def attention_weights(network: OescnNetwork, sample: np.ndarray) -> HeadOutputs:
    """
    🔭 Head outputs and softmax matrices of one normalised sample (C, K)

    Raises:
        InvalidArgumentError: For variants without attention or a wrong sample shape
    """
    sample = np.asarray(sample, dtype=np.float64)
    if sample.ndim != 2:
        raise InvalidArgumentError(f"expected one (C, K) sample, got {sample.shape}")
    heads = network.attention_heads(sample[None])
    return HeadOutputs(
        h_glo=heads.h_glo[0],
        h_loc=heads.h_loc[0],
        global_weights=heads.global_weights[0],
        local_weights=[weights[0] for weights in heads.local_weights],
    )


def mean_attention(network: OescnNetwork, x: np.ndarray, chunk: int = 32) -> List[np.ndarray]:
    """
    📊 Softmax matrices averaged over a batch of samples (b, C, K)

    Returns:
        List[np.ndarray]: Global matrix first, then one matrix per local head
    """
    if x.shape[0] < 1:
        raise InvalidArgumentError("need at least one sample to average attention over")
    totals: Optional[List[np.ndarray]] = None
    for start in range(0, x.shape[0], chunk):
        weights = [w.sum(axis=0) for w in network.attention_heads(x[start : start + chunk]).attn_weights]
        totals = weights if totals is None else [t + w for t, w in zip(totals, weights)]
    assert totals is not None
    return [t / x.shape[0] for t in totals]
