from __future__ import annotations

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import Pipeline

from nnid.calibration import DetectorOracle
from nnid.cost_model import CostMap
from nnid.errors import DomainError
from nnid.estimators import (
    CostMapTransformer,
    PayloadCalibrator,
    SmartCropTransformer,
    TernaryEmbedder,
    check_cost_batch,
    check_image_batch,
)
from nnid.smart_crop import CropResult

from conftest import random_image


def _batch(n=3, h=48, w=64):
    return [random_image(100 + i, h, w) for i in range(n)]


def test_cost_map_transformer_matches_function():
    from nnid.cost_model import compute_cost_map

    batch = _batch()
    out = CostMapTransformer().fit_transform(batch)
    assert len(out) == 3
    assert np.array_equal(out[0].costs, compute_cost_map(batch[0]).costs)


def test_smart_crop_transformer_pipeline_composition():
    pipe = Pipeline(
        [("costs", CostMapTransformer()), ("crop", SmartCropTransformer(size=16))]
    )
    crops = pipe.fit_transform(_batch())
    assert len(crops) == 3
    assert all(isinstance(c, CropResult) for c in crops)
    assert all(c.size == 16 for c in crops)


def test_embedder_transform_changes_pixels_deterministically():
    batch = _batch(2)
    embedder = TernaryEmbedder(alpha=0.4, seed=7)
    a = embedder.fit_transform(batch)
    b = TernaryEmbedder(alpha=0.4, seed=7).fit_transform(batch)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    diff = a[0].astype(int) - batch[0].astype(int)
    assert set(np.unique(diff)).issubset({-1, 0, 1})
    assert (a[0] != batch[0]).any()


def test_get_params_and_clone():
    est = SmartCropTransformer(size=32, stride=2, bins=16)
    params = est.get_params()
    assert params == {"size": 32, "stride": 2, "bins": 16, "threads": 1}
    cloned = clone(est)
    assert cloned.get_params() == params
    est.set_params(stride=5)
    assert est.get_params()["stride"] == 5


def test_calibrator_fits_alpha():
    cal = PayloadCalibrator(
        dim=256,
        detector=DetectorOracle("builtin_synthetic"),
        target_accuracy=0.76,
        tol_accuracy=0.002,
        max_iter=20,
    )
    cal.fit(None)
    assert cal.alpha_ == pytest.approx(0.26, abs=0.002)
    assert cal.predict() == cal.alpha_
    with pytest.raises(DomainError):
        PayloadCalibrator().predict()


def test_validation_helpers_reject_garbage():
    with pytest.raises(DomainError):
        check_image_batch([])
    with pytest.raises(DomainError):
        check_image_batch("nope")
    with pytest.raises(DomainError):
        check_cost_batch([])
    batch = check_cost_batch(np.abs(np.random.default_rng(0).standard_normal((2, 8, 8))))
    assert all(isinstance(cm, CostMap) for cm in batch)
