"""Dilated 2D convolution and the mixed-dilation inception block.

The operator spaces kernel taps ``d`` pixels apart, enlarging the
receptive field without subsampling:

    (z * k)(x, y) = sum_i sum_j z(x - d*i, y - d*j) k(i, j)

with taps indexed over centered offsets and zero padding so output
dimensions equal input dimensions. Forward-only; no gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DimensionError, DomainError

BLOCK_CHANNELS = 30
BLOCK_KERNEL = 5
BLOCK_DILATIONS = (1,) * 10 + (2,) * 10 + (4,) * 10


@dataclass
class DilatedKernel:
    """Odd-sized 2D taps plus an integer dilation factor."""

    taps: np.ndarray
    dilation: int = 1

    def __post_init__(self) -> None:
        self.taps = np.asarray(self.taps, dtype=np.float64)
        if self.taps.ndim != 2:
            raise DomainError(f"taps must be 2D, got shape {self.taps.shape}")
        if self.taps.shape[0] % 2 == 0 or self.taps.shape[1] % 2 == 0:
            raise DomainError(
                f"taps must be odd-sized for centered indexing, got {self.taps.shape}"
            )
        if self.dilation < 1:
            raise DomainError(f"dilation must be >= 1, got {self.dilation}")

    @property
    def receptive_field(self) -> tuple[int, int]:
        kh, kw = self.taps.shape
        d = self.dilation
        return ((kh - 1) * d + 1, (kw - 1) * d + 1)


def dilated_conv2d(z: np.ndarray, kernel: DilatedKernel) -> np.ndarray:
    """Single-channel dilated convolution, zero padded to the input size."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise DimensionError(f"input must be 2D, got shape {z.shape}")
    rf_h, rf_w = kernel.receptive_field
    if rf_h > z.shape[0] or rf_w > z.shape[1]:
        raise DimensionError(
            f"receptive field {rf_h}x{rf_w} exceeds input {z.shape[0]}x{z.shape[1]}"
        )
    kh, kw = kernel.taps.shape
    rh, rw = kh // 2, kw // 2
    d = kernel.dilation
    h, w = z.shape
    out = np.zeros_like(z)
    # out[x, y] = sum_{i, j} z[x - d*i, y - d*j] * taps[i, j], centered taps
    for i in range(-rh, rh + 1):
        for j in range(-rw, rw + 1):
            t = kernel.taps[i + rh, j + rw]
            if t == 0.0:
                continue
            src_x = slice(max(0, -d * i), min(h, h - d * i))
            dst_x = slice(max(0, d * i), min(h, h + d * i))
            src_y = slice(max(0, -d * j), min(w, w - d * j))
            dst_y = slice(max(0, d * j), min(w, w + d * j))
            out[dst_x, dst_y] += t * z[src_x, src_y]
    return out


def zero_stuffed_kernel(kernel: DilatedKernel) -> np.ndarray:
    """Equivalent undilated kernel: d-1 zero rows/columns between taps."""
    kh, kw = kernel.taps.shape
    d = kernel.dilation
    out = np.zeros(((kh - 1) * d + 1, (kw - 1) * d + 1))
    out[::d, ::d] = kernel.taps
    return out


def dilated_inception_block(
    x: np.ndarray,
    weights: np.ndarray,
    dilations: tuple[int, ...] | None = None,
    enforce_partition: bool = True,
) -> np.ndarray:
    """Mixed-dilation convolution block, 30 channels in and out.

    ``weights`` has shape (30, 30, 5, 5): one 5x5 tap set per (output,
    input) channel pair, so the parameter count matches the plain block's.
    Output channel c sums the dilated convolutions of every input channel
    with its tap set at that channel's dilation; the canonical assignment
    is 10 channels each at dilations 1, 2, and 4.

    ``enforce_partition=False`` admits degenerate assignments (for
    example, all dilations 1, which reproduces the plain block).
    """
    x = np.asarray(x, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if x.ndim != 3 or x.shape[0] != BLOCK_CHANNELS:
        raise ConfigurationError(
            f"input must be ({BLOCK_CHANNELS}, H, W), got shape {x.shape}"
        )
    expected = (BLOCK_CHANNELS, BLOCK_CHANNELS, BLOCK_KERNEL, BLOCK_KERNEL)
    if weights.shape != expected:
        raise ConfigurationError(
            f"weights must have shape {expected}, got {weights.shape}"
        )
    if dilations is None:
        dilations = BLOCK_DILATIONS
    dilations = tuple(int(d) for d in dilations)
    if len(dilations) != BLOCK_CHANNELS or any(d < 1 for d in dilations):
        raise ConfigurationError(
            f"need {BLOCK_CHANNELS} positive dilations, got {dilations}"
        )
    if enforce_partition and sorted(dilations) != sorted(BLOCK_DILATIONS):
        raise ConfigurationError(
            f"dilations must be ten each of {{1, 2, 4}}, got {dilations}"
        )
    out = np.zeros_like(x)
    for c_out in range(BLOCK_CHANNELS):
        d = dilations[c_out]
        acc = out[c_out]
        for c_in in range(BLOCK_CHANNELS):
            acc += dilated_conv2d(x[c_in], DilatedKernel(weights[c_out, c_in], d))
    return out


def block_parameter_count(weights: np.ndarray) -> int:
    """Trainable parameters of the block; dilation adds none."""
    return int(np.asarray(weights).size)
