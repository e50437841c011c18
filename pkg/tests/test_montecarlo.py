import numpy as np
import pytest

from varjack import exact
from varjack import families as fam
from varjack.model import FiniteDistribution, ProductSpace
from varjack.montecarlo import (
    Estimate, EstimatorConfig, estimate_b_all, estimate_b_k, estimate_variance,
    grouped_square_mean, paired_square_mean, shard_sizes,
)

RAD = (-1.0, 1.0)


def small_instance(seed=0, n=4):
    rng = np.random.default_rng(seed)
    space = ProductSpace(tuple(FiniteDistribution.from_probs(rng.dirichlet(np.ones(rng.integers(2, 4))))
                               for _ in range(n)))
    return space, fam.random_multilinear(space, rng)


class TestConfig:
    def test_min_samples(self):
        with pytest.raises(ValueError):
            EstimatorConfig(1)

    def test_shards(self):
        assert shard_sizes(5000, 2048) == [2048, 2048, 904]

    def test_ci(self):
        e = Estimate("x", 1.0, 0.5, 10)
        assert e.ci95 == (1.0 - 0.98, 1.0 + 0.98)


class TestVariance:
    def test_constant(self):
        e = estimate_variance(fam.rademacher(3), fam.constant(3, 2.0), EstimatorConfig(100))
        assert e.mean == 0.0 and e.stderr == 0.0

    def test_additive_n20(self):
        e = estimate_variance(fam.rademacher(20), fam.additive(20, values=RAD), EstimatorConfig(40000, seed=1))
        assert e.within(20.0)

    def test_calibration(self):
        space, f = small_instance(1)
        var = exact.correlation_table(space, f).variance
        hits = sum(estimate_variance(space, f, EstimatorConfig(2000, seed=s)).within(var) for s in range(100))
        assert hits >= 95


class TestBk:
    def test_additive(self):
        space, f = fam.rademacher(6), fam.additive(6, values=RAD)
        for k in range(1, 7):
            assert estimate_b_k(space, f, k, EstimatorConfig(20000, seed=k)).within(1.0)

    def test_parity_k2(self):
        e = estimate_b_k(fam.rademacher(3), fam.parity(3), 2, EstimatorConfig(20000, seed=2))
        assert e.within(0.0)

    def test_k_range(self):
        with pytest.raises(ValueError, match="outside"):
            estimate_b_k(fam.rademacher(3), fam.parity(3), 4, EstimatorConfig(10))

    def test_determinism_across_workers(self):
        space, f = small_instance(2)
        a = estimate_b_k(space, f, 2, EstimatorConfig(9000, seed=5, streams=1, shard_size=1000))
        b = estimate_b_k(space, f, 2, EstimatorConfig(9000, seed=5, streams=3, shard_size=1000))
        assert (a.mean, a.stderr) == (b.mean, b.stderr)

    def test_standardized_error_distribution(self):
        space, f = small_instance(3, n=5)
        _, r = exact.decompose(space, f)
        for k in (1, 3, 5):
            z = np.array([estimate_b_k(space, f, k, EstimatorConfig(500, seed=s)).z_score(r.B[k - 1])
                          for s in range(200)])
            assert abs(z.mean()) <= 0.3
            assert np.mean(np.abs(z) <= 4) >= 0.95

    def test_joint_estimates(self):
        space, f = small_instance(4)
        _, r = exact.decompose(space, f)
        ests = estimate_b_all(space, f, EstimatorConfig(40000, seed=9))
        for e, b in zip(ests, r.B):
            assert e.within(b)


class TestPairedSquareMean:
    def test_constant_effect(self):
        e = paired_square_mean(lambda rng, m: (np.full(m, 3.0), np.full(m, 3.0)), EstimatorConfig(100))
        assert e.mean == 9.0 and e.stderr == 0.0

    def test_symmetric_effect(self):
        def sampler(rng, m):
            return rng.choice([-1.0, 1.0], m), rng.choice([-1.0, 1.0], m)

        e = paired_square_mean(sampler, EstimatorConfig(20000, seed=4))
        assert e.within(0.0)

    def test_negative_is_flagged_not_truncated(self):
        def sampler(rng, m):
            return np.ones(m), -np.ones(m) * (1 + rng.random(m))

        e = paired_square_mean(sampler, EstimatorConfig(100))
        assert e.mean < 0 and "negative_estimate" in e.flags


class TestGroupedSquareMean:
    def test_unbiased_on_synthetic_groups(self):
        rng = np.random.default_rng(0)
        mu = rng.normal(size=30)
        target = np.mean(mu ** 2)
        z = []
        for s in range(100):
            eff = mu[:, None] + np.random.default_rng(s).normal(size=(30, 50))
            z.append(grouped_square_mean(eff).z_score(target))
        z = np.array(z)
        assert abs(z.mean()) <= 0.3
        assert np.mean(np.abs(z) <= 4) >= 0.95

    def test_needs_replicas(self):
        with pytest.raises(ValueError):
            grouped_square_mean(np.ones((3, 2)))

