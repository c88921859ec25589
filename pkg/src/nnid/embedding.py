"""Square-root-law payload arithmetic and ternary embedding simulation.

The payload-limited sender turns a cost map and a bit budget into
per-pixel change probabilities

    beta = exp(-lambda * rho) / (1 + 2 * exp(-lambda * rho))

with lambda chosen by bisection so the ternary entropy of the change
field hits the budget. Simulation then draws one uniform per pixel from
a counter-based stream, so identical (cover, plan, seed) produce
identical stego images on any platform and under any parallel schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .cost_model import CostMap
from .errors import CapacityError, ConvergenceError, DimensionError, DomainError
from .image import check_gray_image
from .seeding import philox

LOG2_3 = math.log2(3.0)  # ternary embedding ceiling in bits per pixel

LAMBDA_BRACKET = (1e-8, 1e8)
MAX_BISECT_ITER = 200


@dataclass(frozen=True)
class PayloadSpec:
    """Relative payload alpha (bits per pixel) at a given image size."""

    alpha: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1 or self.width * self.height < 2:
            raise DomainError(f"degenerate dimensions {self.width}x{self.height}")
        if not (0.0 <= self.alpha <= LOG2_3):
            raise DomainError(f"alpha {self.alpha} outside [0, log2(3)]")

    @property
    def pixels(self) -> int:
        return self.width * self.height

    @property
    def total_bits(self) -> float:
        return self.alpha * self.pixels

    @property
    def k(self) -> float:
        """Proportionality constant: alpha = k * ln(wh) / sqrt(wh)."""
        n = float(self.pixels)
        return self.alpha * math.sqrt(n) / math.log(n)


def srl_alpha(base: PayloadSpec, target_w: int, target_h: int) -> float:
    """Raw square-root-law payload: alpha' = k * ln(w'h') / sqrt(w'h').

    Natural logarithm throughout. The result can exceed the ternary
    ceiling for small targets; :func:`srl_payload` enforces the range.
    """
    if base.alpha <= 0:
        raise DomainError("base alpha must be positive")
    if target_w < 1 or target_h < 1 or target_w * target_h < 2:
        raise DomainError(f"degenerate target dimensions {target_w}x{target_h}")
    n = float(target_w * target_h)
    return base.k * math.log(n) / math.sqrt(n)


def srl_payload(base: PayloadSpec, target_w: int, target_h: int) -> PayloadSpec:
    """Carry a payload across image sizes at constant square-root-law k."""
    if (target_w, target_h) == (base.width, base.height):
        if base.alpha <= 0:
            raise DomainError("base alpha must be positive")
        return replace(base)
    alpha = srl_alpha(base, target_w, target_h)
    return PayloadSpec(alpha=alpha, width=target_w, height=target_h)


@dataclass
class EmbeddingPlan:
    """Per-pixel ternary change probabilities realizing a bit budget."""

    beta: np.ndarray
    lam: float
    realized_bits: float
    target_bits: float

    @property
    def expected_changes(self) -> float:
        return float(2.0 * self.beta.sum())


def ternary_entropy_bits(beta: np.ndarray) -> np.ndarray:
    """Per-pixel ternary entropy H3(beta) in bits.

    H3(b) = -2 b log2(b) - (1 - 2b) log2(1 - 2b); zero at b = 0.
    """
    b = np.asarray(beta, dtype=np.float64)
    out = np.zeros_like(b)
    pos = b > 0
    bp = b[pos]
    rest = 1.0 - 2.0 * bp
    h = -2.0 * bp * np.log2(bp)
    nz = rest > 0
    h[nz] -= rest[nz] * np.log2(rest[nz])
    out[pos] = h
    return out


def _beta_of_lambda(lam: float, rho: np.ndarray) -> np.ndarray:
    e = np.exp(-lam * rho)
    return e / (1.0 + 2.0 * e)


def compute_change_probabilities(
    costs: CostMap,
    target_bits: float,
    tol: float | None = None,
    max_iter: int = MAX_BISECT_ITER,
) -> EmbeddingPlan:
    """Find lambda by bisection so the plan's entropy matches the budget.

    Wet pixels are excluded and get probability zero. ``tol`` defaults to
    1e-3 * target_bits. The entropy sum is continuous and strictly
    decreasing in lambda, so a bracketed bisection always applies; the
    initial bracket is expanded geometrically when the budget lies outside.
    """
    if target_bits <= 0:
        raise DomainError(f"target_bits must be positive, got {target_bits}")
    wet = costs.wet_mask()
    rho = costs.costs[~wet]
    ceiling = LOG2_3 * rho.size
    if target_bits > ceiling:
        raise CapacityError(
            f"target {target_bits:.6g} bits exceeds the ternary ceiling "
            f"{ceiling:.6g} bits over {rho.size} dry pixels"
        )
    if tol is None:
        tol = 1e-3 * target_bits

    def realized(lam: float) -> float:
        return float(ternary_entropy_bits(_beta_of_lambda(lam, rho)).sum())

    lo, hi = LAMBDA_BRACKET
    s_lo = realized(lo)
    s_hi = realized(hi)
    # entropy decreases with lambda: s_lo is the high side of the budget
    while s_lo + tol < target_bits and lo > 1e-300:
        lo /= 16.0
        s_lo = realized(lo)
    while s_hi - tol > target_bits and hi < 1e300:
        hi *= 16.0
        s_hi = realized(hi)
    if s_lo + tol < target_bits or s_hi - tol > target_bits:
        raise ConvergenceError(
            f"could not bracket {target_bits:.6g} bits: "
            f"S({lo:.3g})={s_lo:.6g}, S({hi:.3g})={s_hi:.6g}"
        )

    lam, s_mid = (lo, s_lo) if abs(s_lo - target_bits) <= abs(s_hi - target_bits) else (hi, s_hi)
    converged = abs(s_mid - target_bits) <= tol
    for _ in range(max_iter):
        if converged:
            break
        lam = 0.5 * (lo + hi)
        s_mid = realized(lam)
        if abs(s_mid - target_bits) <= tol:
            converged = True
            break
        if s_mid > target_bits:
            lo = lam
        else:
            hi = lam
    if not converged:
        raise ConvergenceError(
            f"bisection did not reach |S - {target_bits:.6g}| <= {tol:.3g} in "
            f"{max_iter} iterations (bracket [{lo:.6g}, {hi:.6g}], S={s_mid:.6g})"
        )

    beta = np.zeros_like(costs.costs)
    beta[~wet] = _beta_of_lambda(lam, rho)
    return EmbeddingPlan(
        beta=beta, lam=float(lam), realized_bits=s_mid, target_bits=float(target_bits)
    )


def simulate_embedding(cover: np.ndarray, plan: EmbeddingPlan, seed: int) -> np.ndarray:
    """Draw the ternary change field and apply it to the cover.

    Pixel (i, j) consumes draw i*width+j of a Philox stream keyed by
    ``seed``: +1 when u < beta, -1 when u >= 1-beta, unchanged otherwise.
    At the 0/255 rails the change sign flips toward the feasible direction,
    preserving the change event.
    """
    arr = check_gray_image(cover)
    if plan.beta.shape != arr.shape:
        raise DimensionError(
            f"plan shape {plan.beta.shape} does not match cover {arr.shape}"
        )
    u = philox(seed).random(arr.shape)
    change = np.zeros(arr.shape, dtype=np.int16)
    change[u < plan.beta] = 1
    change[u >= 1.0 - plan.beta] = -1
    # saturation: flip instead of clip so the change event survives
    change[(arr == 255) & (change == 1)] = -1
    change[(arr == 0) & (change == -1)] = 1
    return (arr.astype(np.int16) + change).astype(np.uint8)
