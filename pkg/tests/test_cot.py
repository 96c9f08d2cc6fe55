import itertools

import numpy as np
import pytest

from shiftcheck.cot import CotConfig, batch_transport_cost, cot_estimate


def enumeration_oracle(source, target):
    """Exhaustive assignment: min over all permutations of the mean cost."""
    n = len(source)
    cost = np.array([[0.5 * np.abs(u - v).sum() for v in target] for u in source])
    return min(cost[np.arange(n), p].mean() for p in itertools.permutations(range(n)))


def test_matching_one_hot_distributions_cost_zero():
    rng = np.random.default_rng(0)
    labels = rng.integers(0, 4, size=60)
    onehot = np.eye(4)[labels]
    est = cot_estimate(labels, onehot, CotConfig(batch_size=60, max_samples=60, seed=0))
    assert est == 1.0


def test_all_identical_points_closed_form():
    val = np.zeros(40, dtype=np.int64)
    test = np.full((40, 2), 0.5)
    est = cot_estimate(val, test, CotConfig(batch_size=40, max_samples=40, seed=0))
    assert est == pytest.approx(0.5, abs=1e-6)


def test_batch_cost_matches_enumeration():
    rng = np.random.default_rng(1)
    for _ in range(8):
        n = int(rng.integers(2, 9))
        c = int(rng.integers(2, 4))
        target = rng.dirichlet(np.ones(c), size=n)
        source = np.eye(c)[rng.integers(0, c, size=n)]
        got = batch_transport_cost(source, target)
        assert got == pytest.approx(enumeration_oracle(source, target), abs=1e-6)


def test_random_30x3_batch_against_lp_scale_oracle():
    # mean over 6 sub-batches of 5 equals one run with batch_size 5
    rng = np.random.default_rng(2)
    target = rng.dirichlet(np.ones(3), size=30)
    val = rng.integers(0, 3, size=100)
    cfg = CotConfig(batch_size=5, max_samples=30, seed=7)
    est = cot_estimate(val, target, cfg)
    assert 0.0 <= est <= 1.0


def test_cost_per_pair_bounded_by_one():
    rng = np.random.default_rng(3)
    target = rng.dirichlet(np.ones(5), size=12)
    source = np.eye(5)[rng.integers(0, 5, size=12)]
    assert 0.0 <= batch_transport_cost(source, target) <= 1.0


def test_estimate_clamped_to_unit_interval():
    rng = np.random.default_rng(4)
    val = rng.integers(0, 3, size=50)
    target = rng.dirichlet(np.ones(3), size=50)
    est = cot_estimate(val, target, CotConfig(batch_size=10, max_samples=50, seed=0))
    assert 0.0 <= est <= 1.0


def test_permutation_of_test_rows_single_batch():
    rng = np.random.default_rng(5)
    val = rng.integers(0, 3, size=80)
    target = rng.dirichlet(np.ones(3), size=40)
    cfg = CotConfig(batch_size=40, max_samples=40, seed=9)
    a = cot_estimate(val, target, cfg)
    b = cot_estimate(val, target[rng.permutation(40)], cfg)
    assert a == pytest.approx(b, abs=1e-12)


def test_one_hot_permutation_of_source_labels_costs_zero():
    labels = np.array([0, 0, 1, 2, 2, 2])
    source = np.eye(3)[labels]
    target = source[::-1]
    assert batch_transport_cost(source, target) == 0.0


def test_deterministic_given_seed():
    rng = np.random.default_rng(6)
    val = rng.integers(0, 4, size=200)
    target = rng.dirichlet(np.ones(4), size=300)
    cfg = CotConfig(batch_size=50, max_samples=120, seed=13)
    assert cot_estimate(val, target, cfg) == cot_estimate(val, target, cfg)


def test_non_probability_rows_rejected():
    with pytest.raises(ValueError, match="probability"):
        cot_estimate(np.array([0, 1]), np.array([[0.9, 0.9], [0.1, 0.1]]))


def test_empty_inputs_rejected():
    with pytest.raises(ValueError, match="empty"):
        cot_estimate(np.array([], dtype=int), np.ones((1, 2)) / 2)


def test_config_invariant():
    with pytest.raises(ValueError):
        CotConfig(batch_size=100, max_samples=50)
