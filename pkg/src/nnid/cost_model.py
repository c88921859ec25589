"""Additive embedding costs from directional wavelet residuals.

The cost of changing a pixel is low where any of three directional
16-tap wavelet residuals is large (textured areas) and high where all
residuals are small (smooth areas):

    rho = sum_k  corr( 1 / (|R_k| + sigma), |rot180(K_k)| )
    R_k = corr( image, K_k )

with the three kernels built as outer products of the Daubechies-8
decomposition lowpass filter ``h`` and its quadrature highpass ``g``.
Both correlations use mirror padding (non-duplicating edge) and a fixed
alignment: (k-1)//2 samples before, k//2 after, per axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .errors import DimensionError, DomainError, NumericalError
from .image import check_gray_image

WET_COST = 1e10
DEFAULT_SIGMA = 1.0

# 16-tap Daubechies-8 scaling (decomposition lowpass) filter, standard tables.
DB8_LOWPASS = np.array(
    [
        -0.00011747678400228192,
        0.0006754494059985568,
        -0.0003917403729959771,
        -0.00487035299301066,
        0.008746094047015655,
        0.013981027917015516,
        -0.04408825393106472,
        -0.01736930100202211,
        0.128747426620186,
        0.00047248457399797254,
        -0.2840155429624281,
        -0.015829105256023893,
        0.5853546836548691,
        0.6756307362980128,
        0.3128715909144659,
        0.05441584224308161,
    ]
)


def highpass_from_lowpass(lowpass: np.ndarray) -> np.ndarray:
    """Quadrature highpass: alternating-sign reversal of the lowpass taps."""
    n = len(lowpass)
    signs = (-1.0) ** np.arange(n)
    return signs * lowpass[::-1]


DB8_HIGHPASS = highpass_from_lowpass(DB8_LOWPASS)


def _validate_filters() -> None:
    h, g = DB8_LOWPASS, DB8_HIGHPASS
    if abs(h.sum() - np.sqrt(2.0)) > 1e-9:
        raise DomainError("lowpass taps do not sum to sqrt(2)")
    if abs(h @ h - 1.0) > 1e-9 or abs(g @ g - 1.0) > 1e-9 or abs(h @ g) > 1e-9:
        raise DomainError("filter pair is not orthonormal")


_validate_filters()

# (column taps, row taps) per directional kernel: K[u, v] = col[u] * row[v]
_BANK = (
    (DB8_LOWPASS, DB8_HIGHPASS),  # LH
    (DB8_HIGHPASS, DB8_LOWPASS),  # HL
    (DB8_HIGHPASS, DB8_HIGHPASS),  # HH
)


def directional_kernels() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The three 16x16 directional kernels (LH, HL, HH) as full matrices."""
    kernels = tuple(np.outer(c, r) for c, r in _BANK)
    return kernels


@dataclass
class CostMap:
    """Per-pixel embedding costs for one grayscale image."""

    costs: np.ndarray
    wet_threshold: float = WET_COST

    def __post_init__(self) -> None:
        self.costs = np.asarray(self.costs, dtype=np.float64)
        if self.costs.ndim != 2:
            raise DimensionError(f"costs must be 2D, got shape {self.costs.shape}")
        finite = np.isfinite(self.costs)
        if not finite.all():
            bad = np.argwhere(~finite)[0]
            raise NumericalError(
                f"non-finite cost at pixel (x={bad[1]}, y={bad[0]})"
            )
        if (self.costs < 0).any():
            bad = np.argwhere(self.costs < 0)[0]
            raise DomainError(f"negative cost at pixel (x={bad[1]}, y={bad[0]})")

    @property
    def height(self) -> int:
        return self.costs.shape[0]

    @property
    def width(self) -> int:
        return self.costs.shape[1]

    def wet_mask(self) -> np.ndarray:
        return self.costs >= self.wet_threshold


def _correlate_same(arr: np.ndarray, col_taps: np.ndarray, row_taps: np.ndarray) -> np.ndarray:
    """Separable 2D correlation with mirror padding, output same size.

    out[i, j] = sum_{u,v} pad(arr)[i + u, j + v] * col[u] * row[v]
    with pad = (k-1)//2 before and k//2 after along each axis.
    """
    k = len(col_taps)
    pb, pa = (k - 1) // 2, k // 2
    padded = np.pad(arr, ((pb, pa), (pb, pa)), mode="reflect")
    # ndimage centers length-k filters at k//2, so the valid region of the
    # padded correlation starts at offset k//2 on each axis.
    tmp = correlate1d(padded, row_taps, axis=1, mode="constant", cval=0.0)
    tmp = correlate1d(tmp, col_taps, axis=0, mode="constant", cval=0.0)
    h, w = arr.shape
    return np.ascontiguousarray(tmp[k // 2 : k // 2 + h, k // 2 : k // 2 + w])


def wavelet_residuals(image: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Directional residuals (LH, HL, HH) of a grayscale image.

    The image's corner value is subtracted before filtering. Every kernel
    has zero DC response so this does not change the result in exact
    arithmetic, and it makes the computed residuals bitwise identical for
    images differing by a constant offset.
    """
    arr = check_gray_image(image)
    d = arr.astype(np.float64)
    d -= d[0, 0]
    lh, hl, hh = (_correlate_same(d, c, r) for c, r in _BANK)
    return lh, hl, hh


def compute_cost_map(image: np.ndarray, sigma: float = DEFAULT_SIGMA) -> CostMap:
    """S-UNIWARD-style cost map of an 8-bit grayscale image."""
    if not (sigma > 0):
        raise DomainError(f"sigma must be positive, got {sigma}")
    residuals = wavelet_residuals(image)
    rho = np.zeros_like(residuals[0])
    for (col, row), res in zip(_BANK, residuals):
        suit = np.abs(res)
        suit += sigma
        np.reciprocal(suit, out=suit)
        rho += _correlate_same(suit, np.abs(col[::-1]), np.abs(row[::-1]))
    if not np.isfinite(rho).all():
        bad = np.argwhere(~np.isfinite(rho))[0]
        raise NumericalError(f"non-finite cost at pixel (x={bad[1]}, y={bad[0]})")
    np.minimum(rho, WET_COST, out=rho)
    return CostMap(rho)
