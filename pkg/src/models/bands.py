"""
🎚️ Band records - the sliding-window layout and the band combination S
"""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np


@dataclass(frozen=True)
class BandLayout:
    """
    📐 Where each scale's band means sit inside the concatenated axis

    Attributes:
        n_bins: P, the PSD width the layout was derived from
        window_lengths: L_i per scale, in concatenation order
        increment_g: G, the hop between neighbouring slices
        per_scale_counts: B_i = floor((P - L_i) / G)
        offsets: Exclusive prefix sums of B_i
        total_k: K = sum of B_i
    """

    n_bins: int
    window_lengths: Tuple[int, ...]
    increment_g: int
    per_scale_counts: Tuple[int, ...]
    offsets: Tuple[int, ...]
    total_k: int

    @property
    def n_scales(self) -> int:
        return len(self.per_scale_counts)

    def block(self, scale: int) -> slice:
        """Column range of scale `scale` inside S"""
        start = self.offsets[scale]
        return slice(start, start + self.per_scale_counts[scale])

    def blocks(self) -> List[slice]:
        return [self.block(i) for i in range(self.n_scales)]


@dataclass(eq=False)
class BandCombination:
    """
    🧱 Band-mean matrix S of one trial

    Attributes:
        s: Band means, shape (C, K)
        layout: The layout the columns follow
    """

    s: np.ndarray
    layout: BandLayout
