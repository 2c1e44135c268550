import math

import numpy as np
import pytest

from src.analysis.generalization import (
    Branch,
    check_finite_phi,
    client_statements,
    cross_entropy,
    entropy,
    generalization_statement,
    kl_divergence,
    mutual_info_identity,
    normalize_phi,
    total_variation,
)
from src.data.datasets import PartitionConfig, generate_synthetic, histogram_from_counts, partition_dirichlet
from src.errors import DomainError, InvalidArgumentError


def _random_pairs(count, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        size = int(rng.integers(2, 12))
        p = histogram_from_counts(rng.integers(0, 20, size=size), smoothing_eps=0.5).probs
        q = histogram_from_counts(rng.integers(0, 20, size=size), smoothing_eps=0.5).probs
        yield p, q


@pytest.mark.parametrize("dist, expected", [
    ((0.5, 0.5), math.log(2)),
    ((1.0, 0.0), 0.0),
    ((0.9, 0.1), 0.325083),
])
def test_entropy(dist, expected):
    assert entropy(dist) == pytest.approx(expected, abs=1e-6)


@pytest.mark.parametrize("p, q, expected", [
    ((0.5, 0.5), (0.5, 0.5), math.log(2)),
    ((1.0, 0.0), (0.5, 0.5), math.log(2)),
    ((0.9, 0.1), (0.5, 0.5), 0.693147),
])
def test_cross_entropy(p, q, expected):
    assert cross_entropy(p, q) == pytest.approx(expected, abs=1e-6)


def test_kl_examples():
    assert kl_divergence((0.3, 0.7), (0.3, 0.7)) == 0.0
    assert kl_divergence((0.9, 0.1), (0.5, 0.5)) == pytest.approx(0.368064, abs=1e-6)
    assert kl_divergence((0.5, 0.5), (0.9, 0.1)) == pytest.approx(0.510826, abs=1e-6)


def test_kl_rejects_unsmoothed_zero():
    with pytest.raises(DomainError):
        kl_divergence((0.5, 0.5), (1.0, 0.0))


def test_mutual_info_example():
    info = mutual_info_identity((0.9, 0.1), (0.5, 0.5))
    assert info == pytest.approx(0.325083, abs=1e-6)
    assert entropy((0.5, 0.5)) - info == pytest.approx(0.368064, abs=1e-6)


def test_information_identities_on_random_pairs():
    for p, q in _random_pairs(1000):
        kl = kl_divergence(p, q)
        assert abs(entropy(q) - mutual_info_identity(p, q) - kl) < 1e-12
        assert abs(cross_entropy(p, q) - entropy(p) - kl) < 1e-12
        assert kl >= -1e-15
        assert total_variation(p, q) <= math.sqrt(kl / 2) + 1e-12


def test_identical_distributions_give_zero():
    stmt = generalization_statement((0.2, 0.8), (0.2, 0.8), 50, 7)
    assert stmt.phi == 0.0
    assert stmt.branch is Branch.REGULAR


def test_worked_example():
    stmt = generalization_statement((0.9, 0.1), (0.5, 0.5), 100, 20, least_freq_prob=0.1)
    kl = 0.9 * math.log(1.8) + 0.1 * math.log(0.2)
    r = math.sqrt(2 * kl)
    oracle = (120 / 0.1) * abs(r / (1 - 20 * r))
    assert stmt.kl == pytest.approx(kl, rel=1e-12)
    assert stmt.phi == pytest.approx(oracle, rel=1e-9)
    assert stmt.phi == pytest.approx(63.7, abs=0.05)
    assert stmt.branch is Branch.DEGENERATE


def test_regular_branch_grows_with_sizes():
    p, q = (0.5001, 0.4999), (0.5, 0.5)
    small = generalization_statement(p, q, 100, 20, least_freq_prob=0.4999)
    large = generalization_statement(p, q, 200, 40, least_freq_prob=0.4999)
    assert small.branch is Branch.REGULAR and large.branch is Branch.REGULAR
    assert large.phi > small.phi


def test_sizes_must_be_positive():
    with pytest.raises(InvalidArgumentError):
        generalization_statement((0.5, 0.5), (0.4, 0.6), 0, 3)


def test_client_statements_are_finite_and_nonnegative():
    ds = generate_synthetic(600, 4, 5, 3.0, rng_seed=0)
    partition = partition_dirichlet(ds, PartitionConfig(num_clients=5, dirichlet_sigma=1.0, rng_seed=1))
    statements = client_statements(ds, partition, 0.5)
    assert len(statements) == 5
    phis = check_finite_phi([s.phi for s in statements])
    assert np.all(phis >= 0)


def test_normalize_phi():
    assert normalize_phi([1.0, 4.0, 2.0]).tolist() == [0.25, 1.0, 0.5]
    assert normalize_phi([0.0, 0.0]).tolist() == [0.0, 0.0]


@pytest.mark.parametrize("bad", [[1.0, float("inf")], [1.0, float("nan")], [-0.1, 1.0]])
def test_check_finite_phi_rejects(bad):
    with pytest.raises(InvalidArgumentError):
        check_finite_phi(bad)


def test_phi_dispersion_shrinks_with_sigma():
    ds = generate_synthetic(2000, 2, 10, 3.0, rng_seed=0)
    spreads = []
    for sigma in (1.0, 5.0, 10.0, 15.0):
        per_seed = []
        for seed in range(30):
            partition = partition_dirichlet(ds, PartitionConfig(num_clients=10, dirichlet_sigma=sigma, rng_seed=seed))
            per_seed.append(np.std([s.phi for s in client_statements(ds, partition, 0.5)]))
        spreads.append(np.mean(per_seed))
    assert all(a > b for a, b in zip(spreads, spreads[1:]))
