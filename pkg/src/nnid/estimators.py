"""Scikit-learn style wrappers so the operators compose with pipelines.

Each transformer is stateless (``fit`` validates and returns self) and
maps a batch of images or cost matrices to the next stage's inputs; the
calibrator is the one genuine estimator, learning ``alpha_`` from data.
Constructor arguments follow the sklearn convention (stored verbatim, so
``get_params``/``set_params``/``clone`` work).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import calibration, cost_model, embedding, smart_crop
from .cost_model import CostMap
from .errors import DomainError
from .histogram import search_binning
from .image import check_gray_image
from .seeding import stable_hash64


def check_image_batch(X) -> list[np.ndarray]:
    """Validate a batch of grayscale images (list or 3D stack)."""
    if isinstance(X, np.ndarray) and X.ndim == 3:
        X = list(X)
    if not isinstance(X, (list, tuple)) or len(X) == 0:
        raise DomainError("expected a nonempty batch of 2D grayscale images")
    return [check_gray_image(im) for im in X]


def check_cost_batch(X) -> list[CostMap]:
    """Validate a batch of cost maps (CostMap objects or 2D arrays)."""
    if isinstance(X, np.ndarray) and X.ndim == 3:
        X = list(X)
    if isinstance(X, CostMap):
        X = [X]
    if not isinstance(X, (list, tuple)) or len(X) == 0:
        raise DomainError("expected a nonempty batch of cost maps")
    return [cm if isinstance(cm, CostMap) else CostMap(np.asarray(cm)) for cm in X]


class CostMapTransformer(BaseEstimator, TransformerMixin):
    """images -> embedding cost maps."""

    def __init__(self, sigma: float = cost_model.DEFAULT_SIGMA):
        self.sigma = sigma

    def fit(self, X, y=None):
        check_image_batch(X)
        return self

    def transform(self, X) -> list[CostMap]:
        return [
            cost_model.compute_cost_map(im, sigma=self.sigma)
            for im in check_image_batch(X)
        ]


class SmartCropTransformer(BaseEstimator, TransformerMixin):
    """cost maps -> best-matching crop positions (CropResult per map)."""

    def __init__(self, size: int = 256, stride: int = 1, bins: int = 64, threads: int = 1):
        self.size = size
        self.stride = stride
        self.bins = bins
        self.threads = threads

    def fit(self, X, y=None):
        check_cost_batch(X)
        return self

    def transform(self, X) -> list[smart_crop.CropResult]:
        spec = search_binning(self.bins)
        return [
            smart_crop.smart_crop_2(
                cm, self.size, stride=self.stride, spec=spec, threads=self.threads
            )
            for cm in check_cost_batch(X)
        ]


class TernaryEmbedder(BaseEstimator, TransformerMixin):
    """cover images -> stego images at a fixed relative payload."""

    def __init__(
        self,
        alpha: float = 0.4,
        seed: int = 0,
        sigma: float = cost_model.DEFAULT_SIGMA,
        tol: float | None = None,
    ):
        self.alpha = alpha
        self.seed = seed
        self.sigma = sigma
        self.tol = tol

    def fit(self, X, y=None):
        check_image_batch(X)
        return self

    def transform(self, X) -> list[np.ndarray]:
        stegos = []
        for i, cover in enumerate(check_image_batch(X)):
            costs = cost_model.compute_cost_map(cover, sigma=self.sigma)
            plan = embedding.compute_change_probabilities(
                costs, self.alpha * cover.size, tol=self.tol
            )
            stegos.append(
                embedding.simulate_embedding(
                    cover, plan, stable_hash64(self.seed, "embedder", i)
                )
            )
        return stegos


class PayloadCalibrator(BaseEstimator):
    """Learns the relative payload that hits a target detector accuracy.

    ``fit`` takes a dataset manifest (see :mod:`nnid.pipeline`) and sets
    ``alpha_``, ``result_``.
    """

    def __init__(
        self,
        dim: int = 256,
        detector: calibration.DetectorOracle | None = None,
        target_accuracy: float = calibration.DEFAULT_TARGET_ACCURACY,
        tol_accuracy: float = calibration.DEFAULT_TOL_ACCURACY,
        max_iter: int = 30,
        seed: int = 0,
    ):
        self.dim = dim
        self.detector = detector
        self.target_accuracy = target_accuracy
        self.tol_accuracy = tol_accuracy
        self.max_iter = max_iter
        self.seed = seed

    def fit(self, X, y=None):
        detector = self.detector or calibration.DetectorOracle("builtin_residual")
        self.result_ = calibration.calibrate_payload(
            X,
            self.dim,
            detector,
            target_acc=self.target_accuracy,
            tol_acc=self.tol_accuracy,
            max_iter=self.max_iter,
            seed=self.seed,
        )
        self.alpha_ = self.result_.alpha
        return self

    def predict(self, X=None) -> float:
        if not hasattr(self, "alpha_"):
            raise DomainError("calibrator is not fitted")
        return self.alpha_
