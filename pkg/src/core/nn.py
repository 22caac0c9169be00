"""
🧮 Dense-grid neural network kernel - layers with hand-written gradients

Every layer caches what it needs during `forward` and turns an upstream
gradient into a downstream one in `backward`, accumulating parameter
gradients into its `Grid`s on the way. Containers chain layers, so running
`backward` on the outermost container is reverse-mode differentiation of the
whole network. All arithmetic is float64 with a fixed reduction order.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.core.enums import Mode, Padding
from src.utils.config import BN_EPS, BN_MOMENTUM
from src.utils.errors import InvalidArgumentError, InvalidStateError

# Upper bound on im2col elements materialised at once
IM2COL_CHUNK = 1 << 24


@dataclass(eq=False)
class Grid:
    """
    🔢 A named numeric grid carrying values and, for trainable grids, gradients

    Attributes:
        name: Unique name inside a model (used as the checkpoint key)
        value: The values (up to 4 axes, row-major)
        trainable: False for buffers such as BN running statistics
    """

    name: str
    value: np.ndarray
    trainable: bool = True
    grad: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.value = np.ascontiguousarray(self.value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.value.shape)

    @property
    def flat(self) -> np.ndarray:
        return self.value.reshape(-1)

    def zero_grad(self) -> None:
        self.grad.fill(0.0)


def uniform_init(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int) -> np.ndarray:
    """Scaled-uniform values in [-1/sqrt(fan_in), +1/sqrt(fan_in)]"""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def same_padding(kernel: int) -> Tuple[int, int]:
    """(before, after) padding that keeps the extent; asymmetric for even kernels"""
    before = (kernel - 1) // 2
    return before, kernel - 1 - before


class Layer:
    """
    🧩 Base class: forward caches, backward consumes the cache
    """

    def __init__(self, name: str):
        self.name = name
        self._cache: Optional[tuple] = None

    def params(self) -> List[Grid]:
        return []

    def buffers(self) -> List[Grid]:
        return []

    def forward(self, x: np.ndarray, mode: Mode) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _take_cache(self) -> tuple:
        if self._cache is None:
            raise InvalidStateError(f"{self.name}: backward called without a recorded forward pass")
        cache, self._cache = self._cache, None
        return cache


# ---------------------------------------------------------------------------
# Functional kernels
# ---------------------------------------------------------------------------


def _correlate(xp: np.ndarray, kernels: np.ndarray) -> np.ndarray:
    """
    Valid cross-correlation of a padded batch (b, cin, H, W) with
    kernels (cout, cin, kh, kw), im2col style in batch chunks.
    """
    b, cin, height, width = xp.shape
    cout, kcin, kh, kw = kernels.shape
    if kcin != cin:
        raise InvalidArgumentError(f"kernel expects {kcin} input channels, input has {cin}")
    out_h, out_w = height - kh + 1, width - kw + 1
    if out_h < 1 or out_w < 1:
        raise InvalidArgumentError(f"kernel {kh}x{kw} is larger than padded input {height}x{width}")

    per_sample = cin * out_h * out_w * kh * kw
    chunk = max(1, IM2COL_CHUNK // max(per_sample, 1))
    out = np.empty((b, cout, out_h, out_w), dtype=np.float64)
    for start in range(0, b, chunk):
        cols = sliding_window_view(xp[start : start + chunk], (kh, kw), axis=(2, 3))
        part = np.tensordot(cols, kernels, axes=([1, 4, 5], [1, 2, 3]))  # (b, h, w, cout)
        out[start : start + chunk] = part.transpose(0, 3, 1, 2)
    return out


def _padding_amounts(kernels: np.ndarray, padding: Padding) -> Tuple[Tuple[int, int], Tuple[int, int]]:
    kh, kw = kernels.shape[2:]
    if padding is Padding.SAME:
        return same_padding(kh), same_padding(kw)
    return (0, 0), (0, 0)


def conv2d(x: np.ndarray, kernels: np.ndarray, bias: np.ndarray, padding: Padding = Padding.SAME) -> np.ndarray:
    """
    🌀 2-D cross-correlation with zero padding (no kernel flip)

    Args:
        x: Input (b, cin, h, w)
        kernels: Weights (cout, cin, kh, kw)
        bias: Per-output-channel bias (cout,)
        padding: SAME keeps (h, w); VALID shrinks by kernel - 1

    Raises:
        InvalidArgumentError: On shape mismatch or a kernel larger than the input
    """
    if x.ndim != 4 or kernels.ndim != 4 or bias.shape != (kernels.shape[0],):
        raise InvalidArgumentError(
            f"conv2d shapes do not line up: input {x.shape}, kernels {kernels.shape}, bias {bias.shape}"
        )
    (pt, pb), (pl, pr) = _padding_amounts(kernels, padding)
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    return _correlate(xp, kernels) + bias[None, :, None, None]


def conv2d_backward(
    dy: np.ndarray, x: np.ndarray, kernels: np.ndarray, padding: Padding
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    ↩️ Gradients of conv2d with respect to input, kernels and bias
    """
    cout, cin, kh, kw = kernels.shape
    (pt, pb), (pl, pr) = _padding_amounts(kernels, padding)
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))

    dkernels = np.zeros_like(kernels)
    out_h, out_w = dy.shape[2:]
    per_sample = cin * out_h * out_w * kh * kw
    chunk = max(1, IM2COL_CHUNK // max(per_sample, 1))
    for start in range(0, x.shape[0], chunk):
        cols = sliding_window_view(xp[start : start + chunk], (kh, kw), axis=(2, 3))
        dkernels += np.tensordot(dy[start : start + chunk], cols, axes=([0, 2, 3], [0, 2, 3]))
    dbias = dy.sum(axis=(0, 2, 3))

    # Input gradient: full correlation of dy with the rotated, transposed kernels
    dyp = np.pad(dy, ((0, 0), (0, 0), (kh - 1 - pt, kh - 1 - pb), (kw - 1 - pl, kw - 1 - pr)))
    rotated = np.ascontiguousarray(kernels[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    dx = _correlate(dyp, rotated)
    return dx, dkernels, dbias


def elu(x: np.ndarray) -> np.ndarray:
    """
    ⚡ ELU with alpha = 1: x for x > 0, exp(x) - 1 otherwise
    """
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def pool_output_size(extent: int, pool: int, stride: int) -> int:
    return (extent - pool) // stride + 1


def avg_pool2d(x: np.ndarray, pool: Tuple[int, int], stride: Optional[Tuple[int, int]] = None) -> np.ndarray:
    """
    🏊 Average pooling over the last two axes, floor semantics

    Raises:
        InvalidArgumentError: If the pool window is larger than the input
    """
    ph, pw = pool
    sh, sw = stride if stride is not None else pool
    height, width = x.shape[-2:]
    if ph > height or pw > width or min(ph, pw, sh, sw) < 1:
        raise InvalidArgumentError(f"pool {pool} with stride {(sh, sw)} does not fit input {height}x{width}")
    out_h, out_w = pool_output_size(height, ph, sh), pool_output_size(width, pw, sw)
    total = np.zeros(x.shape[:-2] + (out_h, out_w), dtype=np.float64)
    for u in range(ph):
        for v in range(pw):
            total += x[..., u : u + sh * (out_h - 1) + 1 : sh, v : v + sw * (out_w - 1) + 1 : sw]
    return total / (ph * pw)


def avg_pool2d_backward(
    dy: np.ndarray, input_shape: Tuple[int, ...], pool: Tuple[int, int], stride: Tuple[int, int]
) -> np.ndarray:
    ph, pw = pool
    sh, sw = stride
    out_h, out_w = dy.shape[-2:]
    dx = np.zeros(input_shape, dtype=np.float64)
    share = dy / (ph * pw)
    for u in range(ph):
        for v in range(pw):
            dx[..., u : u + sh * (out_h - 1) + 1 : sh, v : v + sw * (out_w - 1) + 1 : sw] += share
    return dx


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """
    🎯 Numerically stable softmax (max subtraction) along `axis`
    """
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    exps = np.exp(shifted)
    return exps / np.sum(exps, axis=axis, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, targets: Sequence[int]) -> Tuple[float, np.ndarray]:
    """
    📉 Mean cross-entropy of softmax(logits) against class indices

    Args:
        logits: (b, n_classes)
        targets: b class indices

    Returns:
        (loss, probs): The batch-mean loss and the row-stochastic probabilities

    Raises:
        InvalidArgumentError: If a target is out of range or shapes disagree
    """
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2 or targets.shape != (logits.shape[0],):
        raise InvalidArgumentError(f"logits {logits.shape} do not match targets {targets.shape}")
    n_classes = logits.shape[1]
    if np.any(targets < 0) or np.any(targets >= n_classes):
        raise InvalidArgumentError(f"targets must be in [0, {n_classes})")
    shifted = logits - np.max(logits, axis=1, keepdims=True)
    log_norm = np.log(np.sum(np.exp(shifted), axis=1))
    log_probs = shifted - log_norm[:, None]
    rows = np.arange(logits.shape[0])
    loss = float(-np.mean(log_probs[rows, targets]))
    return loss, np.exp(log_probs)


# ---------------------------------------------------------------------------
# Layers
# ---------------------------------------------------------------------------


class Conv2d(Layer):
    """
    🌀 Convolution layer with scaled-uniform initialisation
    """

    def __init__(
        self,
        name: str,
        in_channels: int,
        out_channels: int,
        kernel: Tuple[int, int],
        rng: np.random.Generator,
        padding: Padding = Padding.SAME,
    ):
        super().__init__(name)
        kh, kw = kernel
        fan_in = in_channels * kh * kw
        self.padding = padding
        self.weight = Grid(f"{name}.weight", uniform_init(rng, (out_channels, in_channels, kh, kw), fan_in))
        self.bias = Grid(f"{name}.bias", uniform_init(rng, (out_channels,), fan_in))

    def params(self) -> List[Grid]:
        return [self.weight, self.bias]

    def forward(self, x: np.ndarray, mode: Mode) -> np.ndarray:
        self._cache = (x,)
        return conv2d(x, self.weight.value, self.bias.value, self.padding)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        (x,) = self._take_cache()
        dx, dkernels, dbias = conv2d_backward(dy, x, self.weight.value, self.padding)
        self.weight.grad += dkernels
        self.bias.grad += dbias
        return dx


class ELU(Layer):
    def forward(self, x: np.ndarray, mode: Mode) -> np.ndarray:
        y = elu(x)
        self._cache = (x, y)
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        x, y = self._take_cache()
        return dy * np.where(x > 0, 1.0, y + 1.0)


class AvgPool2d(Layer):
    def __init__(self, name: str, pool: Tuple[int, int], stride: Optional[Tuple[int, int]] = None):
        super().__init__(name)
        self.pool = tuple(pool)
        self.stride = tuple(stride) if stride is not None else tuple(pool)

    def forward(self, x: np.ndarray, mode: Mode) -> np.ndarray:
        self._cache = (x.shape,)
        return avg_pool2d(x, self.pool, self.stride)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        (shape,) = self._take_cache()
        return avg_pool2d_backward(dy, shape, self.pool, self.stride)


class Flatten(Layer):
    def forward(self, x: np.ndarray, mode: Mode) -> np.ndarray:
        self._cache = (x.shape,)
        return x.reshape(x.shape[0], -1)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        (shape,) = self._take_cache()
        return dy.reshape(shape)


class Dense(Layer):
    """
    🔗 Fully connected layer, y = x W + b
    """

    def __init__(self, name: str, in_features: int, out_features: int, rng: np.random.Generator):
        super().__init__(name)
        self.weight = Grid(f"{name}.weight", uniform_init(rng, (in_features, out_features), in_features))
        self.bias = Grid(f"{name}.bias", uniform_init(rng, (out_features,), in_features))

    def params(self) -> List[Grid]:
        return [self.weight, self.bias]

    def forward(self, x: np.ndarray, mode: Mode) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.weight.shape[0]:
            raise InvalidArgumentError(f"{self.name}: expected (b, {self.weight.shape[0]}), got {x.shape}")
        self._cache = (x,)
        return x @ self.weight.value + self.bias.value

    def backward(self, dy: np.ndarray) -> np.ndarray:
        (x,) = self._take_cache()
        self.weight.grad += x.T @ dy
        self.bias.grad += dy.sum(axis=0)
        return dy @ self.weight.value.T


class BatchNorm(Layer):
    """
    📏 Per-channel batch normalisation for (b, c) or (b, c, h, w) inputs

    Train mode normalises with batch statistics and updates the running
    statistics with momentum 0.1 (unbiased variance); eval mode uses the
    running statistics.
    """

    def __init__(self, name: str, channels: int, momentum: float = BN_MOMENTUM, eps: float = BN_EPS):
        super().__init__(name)
        self.momentum = momentum
        self.eps = eps
        self.gain = Grid(f"{name}.gain", np.ones(channels))
        self.shift = Grid(f"{name}.shift", np.zeros(channels))
        self.running_mean = Grid(f"{name}.running_mean", np.zeros(channels), trainable=False)
        self.running_var = Grid(f"{name}.running_var", np.ones(channels), trainable=False)

    def params(self) -> List[Grid]:
        return [self.gain, self.shift]

    def buffers(self) -> List[Grid]:
        return [self.running_mean, self.running_var]

    @staticmethod
    def _axes(x: np.ndarray) -> Tuple[int, ...]:
        return (0,) if x.ndim == 2 else (0, 2, 3)

    @staticmethod
    def _per_channel(values: np.ndarray, ndim: int) -> np.ndarray:
        return values.reshape((1, -1) + (1,) * (ndim - 2))

    def forward(self, x: np.ndarray, mode: Mode) -> np.ndarray:
        axes = self._axes(x)
        if mode is Mode.TRAIN:
            if x.shape[0] < 2:
                raise InvalidArgumentError(f"{self.name}: batch norm needs a batch of >= 2 in train mode")
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            count = x.size // x.shape[1]
            self.running_mean.value[...] = (1 - self.momentum) * self.running_mean.value + self.momentum * mean
            self.running_var.value[...] = (
                (1 - self.momentum) * self.running_var.value + self.momentum * var * count / (count - 1)
            )
        else:
            mean = self.running_mean.value
            var = self.running_var.value
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - self._per_channel(mean, x.ndim)) * self._per_channel(inv_std, x.ndim)
        self._cache = (xhat, inv_std, mode)
        return xhat * self._per_channel(self.gain.value, x.ndim) + self._per_channel(self.shift.value, x.ndim)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        xhat, inv_std, mode = self._take_cache()
        axes = self._axes(dy)
        ndim = dy.ndim
        self.gain.grad += (dy * xhat).sum(axis=axes)
        self.shift.grad += dy.sum(axis=axes)
        dxhat = dy * self._per_channel(self.gain.value, ndim)
        if mode is Mode.EVAL:
            return dxhat * self._per_channel(inv_std, ndim)
        count = dy.size // dy.shape[1]
        sum_dxhat = self._per_channel(dxhat.sum(axis=axes), ndim)
        sum_dxhat_xhat = self._per_channel((dxhat * xhat).sum(axis=axes), ndim)
        return self._per_channel(inv_std, ndim) / count * (count * dxhat - sum_dxhat - xhat * sum_dxhat_xhat)


def dropout_mask(shape: Tuple[int, ...], p_drop: float, rng: np.random.Generator) -> np.ndarray:
    """
    🎲 Inverted-dropout mask: 0 with probability p_drop, 1/(1 - p_drop) otherwise

    Raises:
        InvalidArgumentError: Unless 0 <= p_drop < 1
    """
    if not 0.0 <= p_drop < 1.0:
        raise InvalidArgumentError(f"drop probability must be in [0, 1), got {p_drop}")
    return (rng.random(shape) >= p_drop) / (1.0 - p_drop)


def dropout(x: np.ndarray, p_drop: float, mode: Mode, rng: np.random.Generator) -> np.ndarray:
    """
    🎲 Inverted dropout; identity in eval mode
    """
    if mode is Mode.EVAL:
        if not 0.0 <= p_drop < 1.0:
            raise InvalidArgumentError(f"drop probability must be in [0, 1), got {p_drop}")
        return x
    return x * dropout_mask(x.shape, p_drop, rng)


class Dropout(Layer):
    def __init__(self, name: str, p_drop: float, rng: np.random.Generator):
        super().__init__(name)
        if not 0.0 <= p_drop < 1.0:
            raise InvalidArgumentError(f"drop probability must be in [0, 1), got {p_drop}")
        self.p_drop = p_drop
        self.rng = rng

    def forward(self, x: np.ndarray, mode: Mode) -> np.ndarray:
        if mode is Mode.EVAL or self.p_drop == 0.0:
            self._cache = (None,)
            return x
        mask = dropout_mask(x.shape, self.p_drop, self.rng)
        self._cache = (mask,)
        return x * mask

    def backward(self, dy: np.ndarray) -> np.ndarray:
        (mask,) = self._take_cache()
        return dy if mask is None else dy * mask


class Sequential(Layer):
    """
    ⛓️ Layers run in order; backward runs them in reverse
    """

    def __init__(self, name: str, layers: Sequence[Layer]):
        super().__init__(name)
        self.layers = list(layers)

    def params(self) -> List[Grid]:
        return [p for layer in self.layers for p in layer.params()]

    def buffers(self) -> List[Grid]:
        return [b for layer in self.layers for b in layer.buffers()]

    def forward(self, x: np.ndarray, mode: Mode) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x, mode)
            logging.debug(f"🧮 {layer.name} -> {x.shape}")
        return x

    def backward(self, dy: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy


class DepthConcat(Layer):
    """
    🔀 Runs parallel branches on the same input and stacks their outputs on axis 1
    """

    def __init__(self, name: str, branches: Sequence[Layer]):
        super().__init__(name)
        self.branches = list(branches)

    def params(self) -> List[Grid]:
        return [p for branch in self.branches for p in branch.params()]

    def buffers(self) -> List[Grid]:
        return [b for branch in self.branches for b in branch.buffers()]

    def forward(self, x: np.ndarray, mode: Mode) -> np.ndarray:
        outputs = [branch.forward(x, mode) for branch in self.branches]
        shapes = {out.shape[2:] for out in outputs}
        if len(shapes) != 1:
            raise InvalidArgumentError(f"{self.name}: branch outputs disagree in extent {sorted(shapes)}")
        self._cache = (tuple(out.shape[1] for out in outputs),)
        return np.concatenate(outputs, axis=1)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        (depths,) = self._take_cache()
        splits = np.cumsum(depths)[:-1]
        dx = None
        for branch, part in zip(self.branches, np.split(dy, splits, axis=1)):
            grad = branch.backward(part)
            dx = grad if dx is None else dx + grad
        return dx


class CrossEntropyLoss:
    """
    📉 Softmax cross-entropy head; `backward` returns d loss / d logits
    """

    def __init__(self) -> None:
        self._cache: Optional[Tuple[np.ndarray, np.ndarray]] = None

    def forward(self, logits: np.ndarray, targets: Sequence[int]) -> Tuple[float, np.ndarray]:
        loss, probs = softmax_cross_entropy(logits, targets)
        self._cache = (probs, np.asarray(targets, dtype=np.int64))
        return loss, probs

    def backward(self, scale: float = 1.0) -> np.ndarray:
        if self._cache is None:
            raise InvalidStateError("loss backward called without a recorded forward pass")
        probs, targets = self._cache
        self._cache = None
        grad = probs.copy()
        grad[np.arange(targets.size), targets] -= 1.0
        return grad * (scale / targets.size)


def collect_grids(layers: Sequence[Layer]) -> Dict[str, Grid]:
    """All parameter and buffer grids of `layers`, keyed by name"""
    grids: Dict[str, Grid] = {}
    for layer in layers:
        for grid in layer.params() + layer.buffers():
            if grid.name in grids:
                raise InvalidArgumentError(f"duplicate grid name {grid.name}")
            grids[grid.name] = grid
    return grids
