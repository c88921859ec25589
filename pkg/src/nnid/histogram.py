"""Fixed-layout cost histograms and their symmetrized KL distance.

Costs span several orders of magnitude, so the default layout bins
log10(cost) over [-2, 6] with a dedicated trailing bin for wet-cost
sentinel values. Distances between histograms require identical layouts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cost_model import WET_COST
from .errors import BinningMismatchError, DataError, DomainError

TRANSFORMS = ("linear", "log10")


@dataclass(frozen=True)
class BinningSpec:
    """Layout of a cost histogram: count, value transform, range, wet bin."""

    bin_count: int
    transform: str = "log10"
    lo: float = -2.0
    hi: float = 6.0
    wet_bin: bool = True

    def __post_init__(self) -> None:
        if self.bin_count < 2:
            raise DomainError(f"bin_count must be >= 2, got {self.bin_count}")
        if self.transform not in TRANSFORMS:
            raise DomainError(f"unknown transform {self.transform!r}")
        if not (self.lo < self.hi):
            raise DomainError(f"need lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def total_bins(self) -> int:
        return self.bin_count + (1 if self.wet_bin else 0)

    def to_dict(self) -> dict:
        return {
            "bin_count": self.bin_count,
            "transform": self.transform,
            "lo": self.lo,
            "hi": self.hi,
            "wet_bin": self.wet_bin,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BinningSpec":
        return cls(
            bin_count=int(data["bin_count"]),
            transform=str(data["transform"]),
            lo=float(data["lo"]),
            hi=float(data["hi"]),
            wet_bin=bool(data["wet_bin"]),
        )


def default_binning() -> BinningSpec:
    """Full-resolution layout used for reporting."""
    return BinningSpec(bin_count=256)


def search_binning(bin_count: int = 64) -> BinningSpec:
    """Reduced layout used by the crop search (memory is bins-proportional)."""
    return BinningSpec(bin_count=bin_count)


@dataclass
class Histogram:
    """Binned counts under a fixed :class:`BinningSpec`."""

    spec: BinningSpec
    counts: np.ndarray

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (self.spec.total_bins,):
            raise DomainError(
                f"counts length {self.counts.shape} does not match "
                f"{self.spec.total_bins} bins"
            )
        if (self.counts < 0).any():
            raise DomainError("negative bin count")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_json(self) -> str:
        payload = {"spec": self.spec.to_dict(), "counts": self.counts.tolist()}
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Histogram":
        try:
            payload = json.loads(text)
            return cls(BinningSpec.from_dict(payload["spec"]), np.array(payload["counts"]))
        except (KeyError, ValueError, TypeError) as exc:
            raise DataError(f"malformed histogram JSON: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Histogram":
        return cls.from_json(Path(path).read_text())


def bin_indices(values: np.ndarray, spec: BinningSpec) -> np.ndarray:
    """Classify values into bins: half-open bins, last bin closed.

    Transformed values are clamped to [lo, hi]; values at or above the wet
    sentinel go to the trailing wet bin when the spec has one.
    """
    vals = np.asarray(values, dtype=np.float64).ravel()
    if vals.size == 0:
        raise DomainError("cannot bin an empty value sequence")
    if np.isnan(vals).any() or (vals < 0).any():
        raise DomainError("values must be nonnegative reals")
    if spec.transform == "log10":
        with np.errstate(divide="ignore"):
            t = np.log10(vals)
    else:
        t = vals
    t = np.clip(t, spec.lo, spec.hi)
    scaled = (t - spec.lo) * (spec.bin_count / (spec.hi - spec.lo))
    idx = np.floor(scaled).astype(np.int32)
    np.clip(idx, 0, spec.bin_count - 1, out=idx)
    if spec.wet_bin:
        idx[vals >= WET_COST] = spec.bin_count
    return idx


def build_histogram(values: np.ndarray, spec: BinningSpec) -> Histogram:
    """Histogram of a value sequence; total always equals the input length."""
    idx = bin_indices(values, spec)
    counts = np.bincount(idx, minlength=spec.total_bins).astype(np.int64)
    return Histogram(spec, counts)


def smoothed_probabilities(
    p_counts: np.ndarray, q_counts: np.ndarray
) -> tuple[np.ndarray, np.ndarray, float]:
    """Normalized counts with additive smoothing shared by both sides.

    eps = 1 / (10 * max(total_p, total_q)) is added per bin and the result
    renormalized, so empty bins never zero out a log while the perturbation
    vanishes as totals grow.
    """
    tp = float(p_counts.sum())
    tq = float(q_counts.sum())
    if tp <= 0 or tq <= 0:
        raise DomainError("histogram totals must be positive")
    eps = 1.0 / (10.0 * max(tp, tq))
    n = len(p_counts)
    denom = 1.0 + n * eps
    p_hat = (p_counts / tp + eps) / denom
    q_hat = (q_counts / tq + eps) / denom
    return p_hat, q_hat, eps


def kl_sym(p: Histogram, q: Histogram) -> float:
    """Symmetrized Kullback-Leibler distance in nats.

    sum_i P(i) ln(P(i)/Q(i)) + sum_i Q(i) ln(Q(i)/P(i)) over the smoothed
    normalized counts, accumulated per bin in index order so the result is
    bit-for-bit symmetric in its arguments.
    """
    if p.spec != q.spec:
        raise BinningMismatchError(
            f"binning layouts differ: {p.spec} vs {q.spec}"
        )
    p_hat, q_hat, _ = smoothed_probabilities(p.counts, q.counts)
    terms = (p_hat - q_hat) * (np.log(p_hat) - np.log(q_hat))
    return float(np.add.reduce(terms))
