"""Per-bin 2D prefix sums: any axis-aligned rectangle's histogram in O(bins).

Building classifies each pixel exactly once, then accumulates prefix sums
along both spatial axes. Queries combine the four corner vectors of the
rectangle, which is what makes an exhaustive O(n*m)-position crop search
affordable compared to re-binning every rectangle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import histogram as _hist
from .cost_model import CostMap
from .errors import BoundsError, DomainError, ResourceError
from .histogram import BinningSpec, Histogram

DEFAULT_MEMORY_BUDGET = 768 * 1024 * 1024  # bytes of prefix-sum storage


def required_bytes(height: int, width: int, spec: BinningSpec) -> int:
    """Size of the prefix-sum array for a given map and layout."""
    return 4 * (height + 1) * (width + 1) * spec.total_bins


@dataclass
class IntegralHistogram:
    """Prefix sums: sums[y, x, b] counts bin-b pixels in [0, y) x [0, x)."""

    spec: BinningSpec
    sums: np.ndarray

    @property
    def height(self) -> int:
        return self.sums.shape[0] - 1

    @property
    def width(self) -> int:
        return self.sums.shape[1] - 1


def build_integral(
    cost_map: CostMap,
    spec: BinningSpec,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> IntegralHistogram:
    """Classify each pixel once and accumulate the 2D per-bin prefix sums."""
    h, w = cost_map.height, cost_map.width
    if h * w >= 2**32:
        raise DomainError(f"{w}x{h} exceeds the 32-bit counter capacity")
    need = required_bytes(h, w, spec)
    if need > memory_budget:
        raise ResourceError(
            f"integral histogram needs {need} bytes "
            f"({h + 1}x{w + 1}x{spec.total_bins} u32), budget is {memory_budget}"
        )
    idx = _hist.bin_indices(cost_map.costs, spec).reshape(h, w)
    sums = np.zeros((h + 1, w + 1, spec.total_bins), dtype=np.uint32)
    interior = sums[1:, 1:, :]
    np.put_along_axis(interior, idx[:, :, None].astype(np.int64), 1, axis=2)
    np.cumsum(sums, axis=0, out=sums)
    np.cumsum(sums, axis=1, out=sums)
    return IntegralHistogram(spec, sums)


def query_rect(ih: IntegralHistogram, x0: int, y0: int, w: int, h: int) -> Histogram:
    """Histogram of the rectangle [x0, x0+w) x [y0, y0+h), exact counts."""
    if w < 1 or h < 1:
        raise BoundsError(f"rectangle sides must be >= 1, got {w}x{h}")
    if x0 < 0 or y0 < 0 or x0 + w > ih.width or y0 + h > ih.height:
        raise BoundsError(
            f"rectangle ({x0},{y0})+{w}x{h} outside {ih.width}x{ih.height}"
        )
    s = ih.sums
    # int64: the inclusion-exclusion intermediate may go negative
    counts = (
        s[y0 + h, x0 + w].astype(np.int64)
        - s[y0, x0 + w]
        - s[y0 + h, x0]
        + s[y0, x0]
    )
    return Histogram(ih.spec, counts)
