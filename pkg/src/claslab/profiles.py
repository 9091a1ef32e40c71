"""Synthetic per-layer category profiles shaped like the 32- and 28-layer models.

Early layers are rich in partial-shared neurons, the middle of the network
shifts toward all-shared and dead neurons, and partial-shared neurons come
back near the top. The two output layers lean language-specific. These are
hand-built curves for exercising bridge selection, not measurements.
"""

from __future__ import annotations

import numpy as np

from .neurons import LayerCategoryDistribution


def _profile(n_layers: int, peak: range, tail: int = 2) -> LayerCategoryDistribution:
    rows = []
    mid_start, mid_end = n_layers // 4, peak.start - 2
    for li in range(n_layers):
        if li < mid_start:
            ps = 0.55 - 0.04 * li
            dead = 0.04 + 0.01 * li
            ls = 0.12
        elif li <= mid_end:
            ps = 0.22
            dead = 0.18 + 0.01 * ((li - mid_start) % 3)
            ls = 0.06
        elif li < peak.start:
            ps = 0.30
            dead = 0.12
            ls = 0.08
        elif li in peak:
            # gentle hump centred on the peak window
            centre = (peak.start + peak.stop - 1) / 2
            ps = 0.48 - 0.01 * abs(li - centre)
            dead = 0.05
            ls = 0.07
        elif li >= n_layers - tail:
            ps = 0.36
            dead = 0.03
            ls = 0.30
        else:
            ps = 0.34
            dead = 0.08
            ls = 0.12
        rows.append((dead, ls, ps, 1.0 - dead - ls - ps))
    return LayerCategoryDistribution(np.array(rows, dtype=np.float64))


def llama_like_profile() -> LayerCategoryDistribution:
    """32 layers with the partial-shared resurgence peaking over layers 24-29."""
    return _profile(32, range(24, 30))


def qwen_like_profile() -> LayerCategoryDistribution:
    """28 layers with the partial-shared resurgence peaking over layers 24-25."""
    return _profile(28, range(24, 26))
