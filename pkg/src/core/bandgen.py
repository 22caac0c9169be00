"""
🎚️ Frequency band generator - multi-scale sliding windows over the PSD

For every window length L_i the PSD of each channel is cut into
B_i = floor((P - L_i) / G) slices of width L_i, G bins apart, and each slice
is replaced by its mean. The per-scale means are concatenated in the order
of the configured window lengths, giving S with K = sum of B_i columns.
"""

import logging
from itertools import accumulate
from typing import Sequence

import numpy as np

from src.models.bands import BandCombination, BandLayout
from src.models.recording import PsdFeatures
from src.utils.config import BandGenConfig
from src.utils.errors import InvalidArgumentError


def band_counts(p: int, cfg: BandGenConfig) -> BandLayout:
    """
    🔢 Band counts per scale and their offsets

    Args:
        p: Number of PSD bins
        cfg: Window lengths and increment

    Returns:
        BandLayout: Counts B_i, offsets and total K

    Raises:
        InvalidArgumentError: If a scale would produce no band
    """
    cfg.validate()
    counts = []
    for length in cfg.window_lengths:
        count = (p - length) // cfg.increment_g
        if length >= p or count < 1:
            raise InvalidArgumentError(
                f"window length {length} yields {max(count, 0)} bands on {p} bins (G={cfg.increment_g})"
            )
        counts.append(count)
    offsets = [0] + list(accumulate(counts))[:-1]
    return BandLayout(
        n_bins=p,
        window_lengths=tuple(cfg.window_lengths),
        increment_g=cfg.increment_g,
        per_scale_counts=tuple(counts),
        offsets=tuple(offsets),
        total_k=sum(counts),
    )


def slice_scale(f_c: np.ndarray, l: int, g: int, b: int) -> np.ndarray:
    """
    📊 Means of b slices of width l, g bins apart, along the last axis

    output[..., j] = mean(f_c[..., j*g : j*g + l])

    Raises:
        InvalidArgumentError: If b is not floor((P - l) / g) or is zero
    """
    f_c = np.asarray(f_c, dtype=np.float64)
    p = f_c.shape[-1]
    if b < 1 or b != (p - l) // g:
        raise InvalidArgumentError(f"band count {b} does not match floor(({p} - {l}) / {g})")
    stop = (b - 1) * g + 1
    total = np.zeros(f_c.shape[:-1] + (b,), dtype=np.float64)
    # Summed offset by offset, in ascending order
    for u in range(l):
        total += f_c[..., u : u + stop : g]
    return total / l


def band_matrix(values: np.ndarray, layout: BandLayout) -> np.ndarray:
    """
    🧮 Concatenated band means for an array of PSDs (..., P) -> (..., K)
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape[-1] != layout.n_bins:
        raise InvalidArgumentError(f"PSD has {values.shape[-1]} bins, layout expects {layout.n_bins}")
    return np.concatenate(
        [
            slice_scale(values, length, layout.increment_g, count)
            for length, count in zip(layout.window_lengths, layout.per_scale_counts)
        ],
        axis=-1,
    )


def build_combination(psd: PsdFeatures, cfg: BandGenConfig) -> BandCombination:
    """
    🧱 Builds S (C x K) from one trial's PSD

    Raises:
        InvalidArgumentError: Propagated from band_counts
    """
    layout = band_counts(psd.n_bins, cfg)
    s = band_matrix(psd.values, layout)
    logging.debug(f"🎚️ Band combination {s.shape} from counts {layout.per_scale_counts}")
    return BandCombination(s=s, layout=layout)


def split_blocks(s: np.ndarray, layout: BandLayout) -> Sequence[np.ndarray]:
    """Per-scale column blocks of any (..., K) array"""
    return [s[..., block] for block in layout.blocks()]
