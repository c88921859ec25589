"""Exhaustive search for the crop whose cost histogram best matches the mother's.

``smart_crop_2`` sweeps every candidate square position (top-left on the
stride grid), scoring each by symmetrized KL distance between the
rectangle's cost histogram and the full map's histogram. The sweep keeps a
per-column histogram of the live row band, so memory stays at
width x bins regardless of the mother's size, and the per-candidate work is
O(bins) via lookup tables over the integer bin counts.

``crop_search_direct`` is the slow reference: it re-bins every rectangle
from raw values and scores it with the histogram module. Both return the
same (position, distance) because the winner's distance is always
recomputed through ``kl_sym`` and ties break row-major in both.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numba import njit

from . import histogram as _hist
from .cost_model import CostMap
from .errors import DimensionError, DomainError
from .histogram import BinningSpec, Histogram, build_histogram, kl_sym


@dataclass
class CropResult:
    """Chosen crop: top-left corner, side, distance, positions evaluated."""

    x: int
    y: int
    size: int
    distance: float
    evaluated: int
    distance_recomputed: float | None = None

    def to_dict(self) -> dict:
        out = {
            "x": self.x,
            "y": self.y,
            "size": self.size,
            "distance": self.distance,
            "evaluated": self.evaluated,
        }
        if self.distance_recomputed is not None:
            out["distance_recomputed"] = self.distance_recomputed
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _check_search_args(costs: CostMap, size: int, stride: int) -> None:
    if size < 1:
        raise DomainError(f"crop size must be >= 1, got {size}")
    if stride < 1:
        raise DomainError(f"stride must be >= 1, got {stride}")
    if size > costs.height or size > costs.width:
        raise DimensionError(
            f"crop {size}x{size} exceeds mother {costs.width}x{costs.height}"
        )


@njit(cache=True, nogil=True)
def _sweep_band(idx, nbins, size, stride, y_lo, y_hi, p_lut, lnp_lut, q_hat, lnq_hat):
    """Scan candidate tops y in [y_lo, y_hi) on the stride grid.

    Returns (distance, y, x, evaluated) of the band's row-major-first
    minimum. The distance is a pure function of the rectangle's integer
    bin counts, so any partition into bands reduces to the same answer.
    """
    height, width = idx.shape
    nx = (width - size) // stride + 1
    colband = np.zeros((width, nbins), np.int32)
    for r in range(y_lo, y_lo + size):
        for x in range(width):
            colband[x, idx[r, x]] += 1
    best_d = np.inf
    best_y = -1
    best_x = -1
    evaluated = 0
    counts = np.zeros(nbins, np.int64)
    y = y_lo
    while y < y_hi:
        if y > y_lo:
            # rows leaving/entering the band; ranges clamp so a stride
            # larger than the window degenerates to a full rebuild
            for r in range(y - stride, min(y, y - stride + size)):
                for x in range(width):
                    colband[x, idx[r, x]] -= 1
            for r in range(max(y, y - stride + size), y + size):
                for x in range(width):
                    colband[x, idx[r, x]] += 1
        for b in range(nbins):
            counts[b] = 0
        for x in range(size):
            for b in range(nbins):
                counts[b] += colband[x, b]
        for xi in range(nx):
            x = xi * stride
            if xi > 0:
                for xx in range(x - stride, min(x, x - stride + size)):
                    for b in range(nbins):
                        counts[b] -= colband[xx, b]
                for xx in range(max(x, x - stride + size), x + size):
                    for b in range(nbins):
                        counts[b] += colband[xx, b]
            d = 0.0
            for b in range(nbins):
                c = counts[b]
                d += (p_lut[c] - q_hat[b]) * (lnp_lut[c] - lnq_hat[b])
            evaluated += 1
            if d < best_d:
                best_d = d
                best_y = y
                best_x = x
        y += stride
    return best_d, best_y, best_x, evaluated


def _score_tables(
    mother_counts: np.ndarray, rect_total: int, nbins: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Lookup tables turning integer rectangle counts into KL terms."""
    mother_total = float(mother_counts.sum())
    eps = 1.0 / (10.0 * max(mother_total, float(rect_total)))
    denom = 1.0 + nbins * eps
    q_hat = (mother_counts / mother_total + eps) / denom
    lnq_hat = np.log(q_hat)
    c = np.arange(rect_total + 1, dtype=np.float64)
    p_lut = (c / rect_total + eps) / denom
    lnp_lut = np.log(p_lut)
    return p_lut, lnp_lut, q_hat, lnq_hat


def smart_crop_2(
    mother_costs: CostMap,
    size: int,
    stride: int = 1,
    spec: BinningSpec | None = None,
    threads: int = 1,
) -> CropResult:
    """Argmin-distance crop position; ties break smallest y then smallest x.

    The mother-side histogram is computed once over the full cost map and
    compared under the same binning layout as every rectangle.
    """
    spec = spec or _hist.search_binning()
    _check_search_args(mother_costs, size, stride)
    idx = _hist.bin_indices(mother_costs.costs, spec).reshape(
        mother_costs.height, mother_costs.width
    )
    mother_counts = np.bincount(idx.ravel(), minlength=spec.total_bins).astype(np.int64)
    nbins = spec.total_bins
    tables = _score_tables(mother_counts, size * size, nbins)

    ny = (mother_costs.height - size) // stride + 1
    last_top = (ny - 1) * stride + 1
    if threads <= 1 or ny < 2 * threads:
        d, y, x, evaluated = _sweep_band(idx, nbins, size, stride, 0, last_top, *tables)
    else:
        # partition candidate tops into contiguous stride-aligned bands
        bounds = [
            (stride * ((ny * k) // threads), stride * ((ny * (k + 1)) // threads))
            for k in range(threads)
        ]
        bounds[-1] = (bounds[-1][0], last_top)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(
                pool.map(
                    lambda b: _sweep_band(idx, nbins, size, stride, b[0], b[1], *tables),
                    bounds,
                )
            )
        evaluated = sum(p[3] for p in parts)
        d, y, x, _ = min(parts, key=lambda p: (p[0], p[1], p[2]))

    distance = _rect_distance(mother_costs, mother_counts, spec, x, y, size)
    return CropResult(x=int(x), y=int(y), size=size, distance=distance, evaluated=int(evaluated))


def _rect_distance(
    mother_costs: CostMap,
    mother_counts: np.ndarray,
    spec: BinningSpec,
    x: int,
    y: int,
    size: int,
) -> float:
    mother_hist = Histogram(spec, mother_counts)
    rect = mother_costs.costs[y : y + size, x : x + size]
    return kl_sym(mother_hist, build_histogram(rect, spec))


def crop_search_direct(
    mother_costs: CostMap,
    size: int,
    stride: int = 1,
    spec: BinningSpec | None = None,
) -> CropResult:
    """Reference search that re-bins every rectangle from raw cost values.

    Identical result contract to :func:`smart_crop_2`, including
    tie-breaking; meant for tests and benchmarks on small inputs, since
    each of the O(n*m) positions costs O(size^2) work.
    """
    spec = spec or _hist.search_binning()
    _check_search_args(mother_costs, size, stride)
    costs = mother_costs.costs
    mother_hist = build_histogram(costs, spec)
    best = (np.inf, -1, -1)
    evaluated = 0
    for y in range(0, costs.shape[0] - size + 1, stride):
        for x in range(0, costs.shape[1] - size + 1, stride):
            rect_hist = build_histogram(costs[y : y + size, x : x + size], spec)
            d = kl_sym(mother_hist, rect_hist)
            evaluated += 1
            if d < best[0]:
                best = (d, y, x)
    return CropResult(
        x=int(best[2]), y=int(best[1]), size=size, distance=float(best[0]), evaluated=evaluated
    )


def center_crop_distance(mother_costs: CostMap, size: int, spec: BinningSpec | None = None) -> float:
    """Distance of the centered crop, for difficulty comparisons."""
    spec = spec or _hist.search_binning()
    _check_search_args(mother_costs, size, 1)
    x = (mother_costs.width - size) // 2
    y = (mother_costs.height - size) // 2
    mother_hist = build_histogram(mother_costs.costs, spec)
    rect = mother_costs.costs[y : y + size, x : x + size]
    return kl_sym(mother_hist, build_histogram(rect, spec))


def random_crop_distances(
    mother_costs: CostMap,
    size: int,
    count: int,
    seed: int,
    spec: BinningSpec | None = None,
) -> np.ndarray:
    """Distances of ``count`` uniformly drawn crop positions."""
    from .seeding import philox

    spec = spec or _hist.search_binning()
    _check_search_args(mother_costs, size, 1)
    rng = philox(seed)
    mother_hist = build_histogram(mother_costs.costs, spec)
    out = np.empty(count, dtype=np.float64)
    for i in range(count):
        x = int(rng.integers(0, mother_costs.width - size + 1))
        y = int(rng.integers(0, mother_costs.height - size + 1))
        rect = mother_costs.costs[y : y + size, x : x + size]
        out[i] = kl_sym(mother_hist, build_histogram(rect, spec))
    return out
