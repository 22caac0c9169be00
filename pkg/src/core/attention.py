"""
🔭 Frequency band attention - one global head, N local heads, pooled fusion

The global head runs self-attention over the whole band combination S
(C x K); local head i runs it over the columns of scale i only. The global
output and the concatenated local outputs are stacked, reduced by an
elementwise max and mean, mixed by a learned 1x1 convolution and added back
onto S through the skip connection.

Self-attention here attends over band columns: Q = X Wq, K = X Wk,
V = X Wv (all C x D), A = softmax(Q^T K / scale) normalised per column,
H = V A, so every column of H is a convex combination of the columns of V.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.core.bandgen import split_blocks
from src.core.enums import Mode
from src.core.nn import Grid, Layer, uniform_init
from src.models.bands import BandCombination, BandLayout
from src.utils.config import FUSION_INIT
from src.utils.errors import InvalidArgumentError, NumericError

QKV = Tuple[np.ndarray, np.ndarray, np.ndarray]


@dataclass(eq=False)
class AttentionParams:
    """
    🎛️ Projection matrices for every head plus the fusion convolution

    Attributes:
        global_qkv: (W_query, W_key, W_value), each K x K
        local_qkv: One (W_query, W_key, W_value) triple per scale, each B_i x B_i
        fusion_weight: (w_max, w_avg) of the 1x1 fusion convolution
        fusion_bias: Its bias, shape (1,)
    """

    global_qkv: Tuple[Grid, Grid, Grid]
    local_qkv: List[Tuple[Grid, Grid, Grid]]
    fusion_weight: Grid
    fusion_bias: Grid

    def grids(self) -> List[Grid]:
        grids = list(self.global_qkv)
        for triple in self.local_qkv:
            grids.extend(triple)
        return grids + [self.fusion_weight, self.fusion_bias]

    def check_layout(self, layout: BandLayout) -> None:
        """
        ✅ Raises InvalidArgumentError unless every matrix matches the layout
        """
        k = layout.total_k
        if any(g.shape != (k, k) for g in self.global_qkv):
            raise InvalidArgumentError(f"global projections must be {k}x{k}")
        if len(self.local_qkv) != layout.n_scales:
            raise InvalidArgumentError(f"{len(self.local_qkv)} local heads for {layout.n_scales} scales")
        for i, (triple, count) in enumerate(zip(self.local_qkv, layout.per_scale_counts)):
            if any(g.shape != (count, count) for g in triple):
                raise InvalidArgumentError(f"local head {i} projections must be {count}x{count}")
        if self.fusion_weight.shape != (2,) or self.fusion_bias.shape != (1,):
            raise InvalidArgumentError("fusion convolution needs 2 weights and 1 bias")


def _qkv_grids(prefix: str, size: int, rng: np.random.Generator) -> Tuple[Grid, Grid, Grid]:
    return tuple(  # type: ignore[return-value]
        Grid(f"{prefix}.{part}", uniform_init(rng, (size, size), size)) for part in ("query", "key", "value")
    )


def init_attention_params(layout: BandLayout, rng: np.random.Generator) -> AttentionParams:
    """
    🌱 Scaled-uniform projections, fusion starting as a plain average
    """
    w_max, w_avg, bias = FUSION_INIT
    return AttentionParams(
        global_qkv=_qkv_grids("attention.global", layout.total_k, rng),
        local_qkv=[
            _qkv_grids(f"attention.local{i}", count, rng) for i, count in enumerate(layout.per_scale_counts)
        ],
        fusion_weight=Grid("attention.fusion.weight", np.array([w_max, w_avg])),
        fusion_bias=Grid("attention.fusion.bias", np.array([bias])),
    )


@dataclass(eq=False)
class HeadOutputs:
    """
    🧠 Outputs of all heads

    Attributes:
        h_glo: Global head output (..., C, K)
        h_loc: Concatenated local head outputs (..., C, K)
        global_weights: Global softmax matrix (..., K, K)
        local_weights: One (..., B_i, B_i) softmax matrix per local head
    """

    h_glo: np.ndarray
    h_loc: np.ndarray
    global_weights: np.ndarray
    local_weights: List[np.ndarray]

    @property
    def attn_weights(self) -> List[np.ndarray]:
        return [self.global_weights] + list(self.local_weights)


def _values(qkv: Sequence) -> QKV:
    return tuple(w.value if isinstance(w, Grid) else np.asarray(w, dtype=np.float64) for w in qkv)  # type: ignore


def self_attention(x: np.ndarray, qkv: Sequence, scale: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    👀 Column self-attention of x (..., C, D)

    Args:
        x: Input, last two axes C x D
        qkv: W_query, W_key, W_value (D x D arrays or Grids)
        scale: Positive divisor of the logits

    Returns:
        (h, a): Output (..., C, D) and column-stochastic weights (..., D, D)

    Raises:
        InvalidArgumentError: On shape mismatch or a non-positive scale
        NumericError: If the logits are non-finite
    """
    h, a, _ = _attention_forward(np.asarray(x, dtype=np.float64), _values(qkv), scale)
    return h, a


def _attention_forward(x: np.ndarray, qkv: QKV, scale: float):
    w_query, w_key, w_value = qkv
    d = x.shape[-1]
    if any(w.shape != (d, d) for w in qkv):
        raise InvalidArgumentError(f"projections must be {d}x{d} for input {x.shape}")
    if not scale > 0:
        raise InvalidArgumentError(f"attention scale must be positive, got {scale}")
    q = x @ w_query
    k = x @ w_key
    v = x @ w_value
    logits = np.swapaxes(q, -1, -2) @ k / scale
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite attention logits")
    shifted = logits - np.max(logits, axis=-2, keepdims=True)
    exps = np.exp(shifted)
    a = exps / np.sum(exps, axis=-2, keepdims=True)
    return v @ a, a, (x, q, k, v, a)


def _attention_backward(dh: np.ndarray, qkv: QKV, scale: float, cache) -> Tuple[np.ndarray, QKV]:
    """Gradients of H = V softmax(Q^T K / scale) w.r.t. x and the three projections"""
    w_query, w_key, w_value = qkv
    x, q, k, v, a = cache
    dv = dh @ np.swapaxes(a, -1, -2)
    da = np.swapaxes(v, -1, -2) @ dh
    dz = a * (da - np.sum(a * da, axis=-2, keepdims=True))
    dlogits = dz / scale
    dq = k @ np.swapaxes(dlogits, -1, -2)
    dk = q @ dlogits

    xt = np.swapaxes(x, -1, -2)

    def _weight_grad(dproj: np.ndarray) -> np.ndarray:
        grad = xt @ dproj
        return grad.reshape((-1,) + grad.shape[-2:]).sum(axis=0)

    dx = dq @ w_query.T + dk @ w_key.T + dv @ w_value.T
    return dx, (_weight_grad(dq), _weight_grad(dk), _weight_grad(dv))


def split_local(s: BandCombination) -> List[np.ndarray]:
    """
    ✂️ Per-scale blocks of S; block i has shape C x B_i
    """
    return list(split_blocks(s.s, s.layout))


def band_attention(s: BandCombination, params: AttentionParams, scale: float) -> HeadOutputs:
    """
    🔭 Runs the global head and the N local heads

    Raises:
        InvalidArgumentError: If params do not match the layout
    """
    params.check_layout(s.layout)
    return _heads_forward(s.s, s.layout, params, scale)[0]


def _heads_forward(x: np.ndarray, layout: BandLayout, params: AttentionParams, scale: float):
    h_glo, a_glo, cache_glo = _attention_forward(x, _values(params.global_qkv), scale)
    local_out, local_weights, local_caches = [], [], []
    for block, triple in zip(split_blocks(x, layout), params.local_qkv):
        h_i, a_i, cache_i = _attention_forward(block, _values(triple), scale)
        local_out.append(h_i)
        local_weights.append(a_i)
        local_caches.append(cache_i)
    heads = HeadOutputs(
        h_glo=h_glo,
        h_loc=np.concatenate(local_out, axis=-1),
        global_weights=a_glo,
        local_weights=local_weights,
    )
    return heads, cache_glo, local_caches


def head_fusion(h: HeadOutputs, params: AttentionParams) -> np.ndarray:
    """
    🔀 Max and mean over the stacked (global, local) maps mixed by a 1x1 conv

    m = w_max * max(H_glo, H_loc) + w_avg * mean(H_glo, H_loc) + b
    """
    w_max, w_avg = params.fusion_weight.value
    bias = params.fusion_bias.value[0]
    p_max = np.maximum(h.h_glo, h.h_loc)
    p_avg = (h.h_glo + h.h_loc) / 2.0
    return w_max * p_max + w_avg * p_avg + bias


def apply_skip(m: np.ndarray, s: BandCombination) -> np.ndarray:
    """
    ➕ Skip connection M' = M + S

    Raises:
        InvalidArgumentError: If the shapes differ
    """
    if m.shape != s.s.shape:
        raise InvalidArgumentError(f"skip connection shape mismatch {m.shape} vs {s.s.shape}")
    return m + s.s


class BandAttention(Layer):
    """
    🔭 Attention, fusion and skip connection as a trainable layer over (b, C, K)

    The softmax matrices of the last forward pass stay available in
    `last_heads` for inspection.
    """

    def __init__(self, name: str, layout: BandLayout, params: AttentionParams, scale: float):
        super().__init__(name)
        params.check_layout(layout)
        self.layout = layout
        self.attention = params
        self.scale = scale
        self.last_heads: Optional[HeadOutputs] = None

    def params(self) -> List[Grid]:
        return self.attention.grids()

    def forward(self, x: np.ndarray, mode: Mode) -> np.ndarray:
        if x.shape[-1] != self.layout.total_k:
            raise InvalidArgumentError(f"{self.name}: expected width {self.layout.total_k}, got {x.shape[-1]}")
        heads, cache_glo, local_caches = _heads_forward(x, self.layout, self.attention, self.scale)
        self.last_heads = heads
        self._cache = (heads, cache_glo, local_caches)
        combination = BandCombination(s=x, layout=self.layout)
        return apply_skip(head_fusion(heads, self.attention), combination)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        heads, cache_glo, local_caches = self._take_cache()
        w_max, w_avg = self.attention.fusion_weight.value
        p_max = np.maximum(heads.h_glo, heads.h_loc)
        p_avg = (heads.h_glo + heads.h_loc) / 2.0
        self.attention.fusion_weight.grad += np.array([np.sum(dy * p_max), np.sum(dy * p_avg)])
        self.attention.fusion_bias.grad += np.array([np.sum(dy)])

        glo_wins = heads.h_glo >= heads.h_loc
        d_glo = w_max * dy * glo_wins + w_avg * dy / 2.0
        d_loc = w_max * dy * ~glo_wins + w_avg * dy / 2.0

        dx = dy.copy()
        dx_glo, grads = _attention_backward(d_glo, _values(self.attention.global_qkv), self.scale, cache_glo)
        dx += dx_glo
        for grid, grad in zip(self.attention.global_qkv, grads):
            grid.grad += grad

        for block, triple, cache in zip(self.layout.blocks(), self.attention.local_qkv, local_caches):
            dx_i, grads = _attention_backward(d_loc[..., block], _values(triple), self.scale, cache)
            dx[..., block] += dx_i
            for grid, grad in zip(triple, grads):
                grid.grad += grad
        logging.debug(f"🔭 {self.name} backward through {1 + len(local_caches)} heads")
        return dx
