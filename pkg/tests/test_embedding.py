from __future__ import annotations

import math

import numpy as np
import pytest

from nnid.cost_model import WET_COST, CostMap
from nnid.embedding import (
    LOG2_3,
    PayloadSpec,
    compute_change_probabilities,
    simulate_embedding,
    srl_payload,
    ternary_entropy_bits,
)
from nnid.errors import CapacityError, DimensionError, DomainError

from conftest import random_cost_map, random_image


def entropy_oracle(beta: np.ndarray) -> float:
    """Independent scalar evaluation of the plan's ternary entropy."""
    total = 0.0
    for b in np.asarray(beta).ravel():
        if b > 0:
            total += -2.0 * b * math.log2(b) - (1.0 - 2.0 * b) * math.log2(1.0 - 2.0 * b)
    return total


def test_srl_reference_anchor_values():
    base = PayloadSpec(alpha=0.4, width=256, height=256)
    assert srl_payload(base, 512, 512).alpha == pytest.approx(0.225, abs=1e-3)
    assert srl_payload(base, 1024, 1024).alpha == pytest.approx(0.125, abs=1e-3)
    assert srl_payload(base, 2048, 2048).alpha == pytest.approx(0.06875, abs=1e-3)


def test_srl_identity_exact():
    base = PayloadSpec(alpha=0.37, width=200, height=300)
    assert srl_payload(base, 200, 300).alpha == 0.37


def test_srl_round_trip():
    base = PayloadSpec(alpha=0.4, width=256, height=256)
    there = srl_payload(base, 1024, 768)
    back = srl_payload(there, 256, 256)
    assert back.alpha == pytest.approx(0.4, abs=1e-9)


def test_srl_rejects_degenerate_dims():
    base = PayloadSpec(alpha=0.4, width=256, height=256)
    with pytest.raises(DomainError):
        srl_payload(base, 0, 10)
    with pytest.raises(DomainError):
        srl_payload(base, 1, 1)
    with pytest.raises(DomainError):
        PayloadSpec(alpha=2.0, width=16, height=16)


def test_constant_cost_closed_form_lambda():
    c = 3.2
    beta0 = 0.1
    n = 24 * 24
    cm = CostMap(np.full((24, 24), c))
    target = n * float(ternary_entropy_bits(np.array([beta0]))[0])
    plan = compute_change_probabilities(cm, target, tol=1e-12 * target)
    lam_expected = math.log((1.0 - 2.0 * beta0) / beta0) / c
    assert plan.lam == pytest.approx(lam_expected, rel=1e-6)
    assert np.allclose(plan.beta, beta0, atol=1e-7)


def test_entropy_hits_target_on_random_maps():
    for seed in range(10):
        cm = random_cost_map(seed, 16, 16)
        target = 0.4 * 256
        plan = compute_change_probabilities(cm, target)
        assert abs(plan.realized_bits - target) <= 1e-3 * target
        assert plan.realized_bits == pytest.approx(entropy_oracle(plan.beta), rel=1e-9)


def test_tiny_target_drives_beta_to_zero():
    cm = random_cost_map(3, 16, 16)
    plan = compute_change_probabilities(cm, 1e-4)
    assert plan.beta.max() < 1e-5
    assert plan.lam > 10.0


def test_beta_in_range_and_monotone_in_target():
    cm = random_cost_map(4, 20, 20)
    small = compute_change_probabilities(cm, 0.1 * 400)
    large = compute_change_probabilities(cm, 0.8 * 400)
    assert (small.beta >= 0).all() and (small.beta <= 1.0 / 3.0 + 1e-12).all()
    assert (large.beta >= small.beta - 1e-12).all()
    assert large.lam < small.lam


def test_cost_ordering_maps_to_beta_ordering():
    cm = random_cost_map(5, 16, 16)
    plan = compute_change_probabilities(cm, 0.3 * 256)
    flat_rho = cm.costs.ravel()
    flat_beta = plan.beta.ravel()
    order = np.argsort(flat_rho)
    # costs ascending -> probabilities nonincreasing
    assert (np.diff(flat_beta[order]) <= 1e-15).all()


def test_wet_pixels_never_change():
    costs = np.full((16, 16), 2.0)
    costs[3, 4] = WET_COST
    costs[10, 11] = WET_COST
    cm = CostMap(costs)
    plan = compute_change_probabilities(cm, 60.0)
    assert plan.beta[3, 4] == 0.0 and plan.beta[10, 11] == 0.0
    cover = random_image(6, 16, 16)
    for seed in range(25):
        stego = simulate_embedding(cover, plan, seed)
        assert stego[3, 4] == cover[3, 4]
        assert stego[10, 11] == cover[10, 11]


def test_infeasible_target_reports_ceiling():
    costs = np.full((16, 16), 2.0)
    costs[0, 0] = WET_COST
    cm = CostMap(costs)
    ceiling = LOG2_3 * 255
    with pytest.raises(CapacityError) as err:
        compute_change_probabilities(cm, ceiling * 1.01)
    assert f"{ceiling:.6g}" in str(err.value)


def test_saturated_target_reaches_one_third():
    cm = CostMap(np.full((16, 16), 1.0))
    plan = compute_change_probabilities(cm, LOG2_3 * 256)
    assert np.allclose(plan.beta, 1.0 / 3.0, atol=1e-4)


def test_zero_beta_returns_cover():
    cover = random_image(7, 20, 20)
    plan_zero = compute_change_probabilities(random_cost_map(7, 20, 20), 1e-9)
    stego = simulate_embedding(cover, plan_zero, 123)
    assert np.array_equal(stego, cover)


def test_simulation_deterministic_and_pm1():
    cover = random_image(8, 32, 32)
    cm = random_cost_map(8, 32, 32)
    plan = compute_change_probabilities(cm, 0.4 * 1024)
    a = simulate_embedding(cover, plan, 999)
    b = simulate_embedding(cover, plan, 999)
    assert np.array_equal(a, b)
    c = simulate_embedding(cover, plan, 1000)
    assert not np.array_equal(a, c)
    diff = a.astype(int) - cover.astype(int)
    assert set(np.unique(diff)).issubset({-1, 0, 1})


def test_saturation_flips_change_sign():
    cover = np.full((16, 16), 255, dtype=np.uint8)
    cover[:8] = 0
    from nnid.embedding import EmbeddingPlan

    beta = np.full((16, 16), 1.0 / 3.0)
    plan = EmbeddingPlan(beta=beta, lam=0.0, realized_bits=0.0, target_bits=0.0)
    for seed in range(5):
        stego = simulate_embedding(cover, plan, seed)
        assert stego.max() <= 255 and stego.min() >= 0
        changed = stego != cover
        assert (stego[:8][changed[:8]] == 1).all()
        assert (stego[8:][changed[8:]] == 254).all()


def test_change_rate_matches_beta():
    cover = random_image(9, 64, 64)
    beta = np.full((64, 64), 0.1)
    from nnid.embedding import EmbeddingPlan

    plan = EmbeddingPlan(beta=beta, lam=1.0, realized_bits=0.0, target_bits=0.0)
    rng_changes = []
    for seed in range(50):
        stego = simulate_embedding(cover, plan, seed)
        rng_changes.append((stego != cover).mean())
    assert np.mean(rng_changes) == pytest.approx(0.2, abs=0.01)


def test_dimension_mismatch_rejected():
    cover = random_image(10, 16, 16)
    plan = compute_change_probabilities(random_cost_map(10, 18, 16), 10.0)
    with pytest.raises(DimensionError):
        simulate_embedding(cover, plan, 0)
