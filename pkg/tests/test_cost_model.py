from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nnid.cost_model import (
    DB8_HIGHPASS,
    DB8_LOWPASS,
    WET_COST,
    CostMap,
    compute_cost_map,
    directional_kernels,
    wavelet_residuals,
)
from nnid.errors import DimensionError, DomainError, NumericalError

from conftest import random_image


def naive_correlate_same(arr: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Independent oracle: pad with the mirror convention, slide the window."""
    kh, kw = kernel.shape
    padded = np.pad(
        arr, (((kh - 1) // 2, kh // 2), ((kw - 1) // 2, kw // 2)), mode="reflect"
    )
    out = np.zeros(arr.shape)
    for i in range(arr.shape[0]):
        for j in range(arr.shape[1]):
            out[i, j] = (padded[i : i + kh, j : j + kw] * kernel).sum()
    return out


def naive_cost_map(image: np.ndarray, sigma: float = 1.0) -> np.ndarray:
    d = image.astype(np.float64)
    d -= d[0, 0]
    rho = np.zeros(image.shape)
    for kernel in directional_kernels():
        residual = naive_correlate_same(d, kernel)
        rho += naive_correlate_same(
            1.0 / (np.abs(residual) + sigma), np.abs(np.rot90(kernel, 2))
        )
    return rho


def test_filter_taps_sanity():
    assert abs(DB8_LOWPASS.sum() - np.sqrt(2.0)) < 1e-9
    assert abs(DB8_LOWPASS @ DB8_LOWPASS - 1.0) < 1e-9
    assert abs(DB8_HIGHPASS @ DB8_HIGHPASS - 1.0) < 1e-9
    assert abs(DB8_LOWPASS @ DB8_HIGHPASS) < 1e-9


def test_constant_image_residuals_are_zero():
    img = np.full((24, 24), 128, dtype=np.uint8)
    for res in wavelet_residuals(img):
        assert np.all(res == 0.0)


def test_residuals_dc_invariant_bitwise():
    img = random_image(3, 20, 27)
    img = np.clip(img, 0, 245)
    shifted = (img + 10).astype(np.uint8)
    for a, b in zip(wavelet_residuals(img), wavelet_residuals(shifted)):
        assert np.array_equal(a, b)


def test_residuals_match_naive_oracle():
    img = random_image(7, 32, 32)
    d = img.astype(np.float64)
    d -= d[0, 0]
    kernels = directional_kernels()
    for res, kernel in zip(wavelet_residuals(img), kernels):
        ref = naive_correlate_same(d, kernel)
        assert np.abs(res - ref).max() < 1e-9


def test_residual_fully_scalar_spot_check():
    # one pixel re-derived with explicit loops over the kernel taps
    img = random_image(11, 16, 16)
    d = img.astype(np.float64) - float(img[0, 0])
    kernel = directional_kernels()[0]
    padded = np.pad(d, ((7, 8), (7, 8)), mode="reflect")
    i, j = 5, 9
    acc = 0.0
    for u in range(16):
        for v in range(16):
            acc += padded[i + u, j + v] * kernel[u, v]
    assert abs(wavelet_residuals(img)[0][i, j] - acc) < 1e-9


def test_constant_image_cost_map_is_constant():
    img = np.full((32, 40), 77, dtype=np.uint8)
    cm = compute_cost_map(img)
    # every pixel bitwise equal: variance is zero up to the estimator's own
    # accumulation noise
    assert np.all(cm.costs == cm.costs[0, 0])
    assert cm.costs.std() < 1e-12
    assert cm.costs[0, 0] > 0


def test_cost_map_dc_invariant_bitwise():
    img = np.clip(random_image(5, 24, 24), 0, 200)
    shifted = (img + 55).astype(np.uint8)
    a = compute_cost_map(img).costs
    b = compute_cost_map(shifted).costs
    assert np.array_equal(a, b)


def test_cost_map_matches_naive_oracle():
    img = random_image(13, 32, 32)
    got = compute_cost_map(img).costs
    ref = naive_cost_map(img)
    rel = np.abs(got - ref) / np.maximum(np.abs(ref), 1e-300)
    assert rel.max() < 1e-6


@settings(max_examples=8, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    h=st.integers(16, 64),
    w=st.integers(16, 64),
)
def test_fast_path_equals_naive_path_up_to_64(seed, h, w):
    img = random_image(seed, h, w)
    got = compute_cost_map(img).costs
    ref = naive_cost_map(img)
    rel = np.abs(got - ref) / np.maximum(np.abs(ref), 1e-300)
    assert rel.max() < 1e-6


def test_costs_nonnegative_and_finite():
    img = random_image(17, 48, 33)
    cm = compute_cost_map(img)
    assert (cm.costs >= 0).all()
    assert np.isfinite(cm.costs).all()
    assert cm.costs.max() <= WET_COST


@pytest.mark.xfail(
    reason="the 16-tap bank is asymmetric: mirroring conjugates each pass "
    "into one with reversed taps, which is not in the bank; measured "
    "deviations reach ~2x, so exact mirror symmetry cannot hold",
    strict=True,
)
def test_cost_map_mirror_symmetry():
    img = random_image(19, 32, 40)
    a = compute_cost_map(img).costs
    b = compute_cost_map(img[:, ::-1]).costs
    assert np.abs(b[:, ::-1] - a).max() < 1e-9


def test_too_small_image_rejected():
    with pytest.raises(DimensionError):
        compute_cost_map(np.full((8, 8), 10, dtype=np.uint8))


def test_bad_sigma_rejected():
    img = random_image(23, 16, 16)
    with pytest.raises(DomainError):
        compute_cost_map(img, sigma=0.0)


def test_cost_map_type_validates():
    with pytest.raises(NumericalError):
        CostMap(np.array([[1.0, np.inf], [0.0, 1.0]]))
    with pytest.raises(DomainError):
        CostMap(np.array([[1.0, -2.0], [0.0, 1.0]]))
