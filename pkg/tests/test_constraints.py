import numpy as np
import pytest

from logdetml.constraints import (
    DISSIMILAR,
    SIMILAR,
    Constraint,
    ConstraintGenerationWarning,
    ConstraintSet,
    Thresholds,
    compute_thresholds,
    euclidean_distance_pool,
    generate_from_labels,
    generate_pairs_random,
    kernel_distance_pool,
)
from logdetml.errors import InvalidArgumentError


def test_constraint_rejects_self_pair():
    with pytest.raises(InvalidArgumentError):
        Constraint(2, 2, SIMILAR)


def test_thresholds_ordering_enforced():
    with pytest.raises(InvalidArgumentError):
        Thresholds(u=2.0, l=1.0)
    with pytest.raises(InvalidArgumentError):
        Thresholds(u=0.0, l=1.0)


class TestGenerateFromLabels:
    def test_two_class_counts_and_membership(self):
        cons = generate_from_labels([0, 0, 1, 1], per_class=1, seed=7)
        sims = [c for c in cons if c.kind == SIMILAR]
        diss = [c for c in cons if c.kind == DISSIMILAR]
        assert len(sims) == 2 and len(diss) == 2
        class0_sim = sims[0]
        assert {class0_sim.i, class0_sim.j} <= {0, 1}

    def test_single_class_warns_no_dissimilar(self):
        with pytest.warns(ConstraintGenerationWarning):
            cons = generate_from_labels([0, 0], per_class=1, seed=0)
        assert len(cons) == 1 and cons[0].kind == SIMILAR

    def test_small_class_skips_similars(self):
        with pytest.warns(ConstraintGenerationWarning):
            cons = generate_from_labels([0, 1, 1, 1], per_class=2, seed=0)
        # class 0 is a singleton: its 2 similar pairs are skipped
        assert sum(c.kind == SIMILAR for c in cons) == 2
        assert sum(c.kind == DISSIMILAR for c in cons) == 4

    def test_total_budget_three_classes(self):
        labels = np.repeat([0, 1, 2], 40)
        cons = generate_from_labels(labels, per_class=100, seed=1)
        assert len(cons) == 600  # 2 * 100 * 3

    def test_label_agreement(self):
        rng = np.random.default_rng(5)
        labels = rng.integers(0, 3, size=30)
        cons = generate_from_labels(labels, per_class=20, seed=9)
        for c in cons:
            if c.kind == SIMILAR:
                assert labels[c.i] == labels[c.j]
            else:
                assert labels[c.i] != labels[c.j]

    def test_deterministic_and_seed_sensitive(self):
        labels = np.repeat([0, 1], 10)
        a = generate_from_labels(labels, per_class=30, seed=3)
        b = generate_from_labels(labels, per_class=30, seed=3)
        c = generate_from_labels(labels, per_class=30, seed=4)
        assert a == b
        assert a != c


class TestGeneratePairsRandom:
    def test_kinds_follow_labels(self):
        labels = np.array([0, 0, 1, 1, 1])
        cons = generate_pairs_random(labels, 30, seed=2)
        assert len(cons) == 30
        for c in cons:
            expected = SIMILAR if labels[c.i] == labels[c.j] else DISSIMILAR
            assert c.kind == expected

    def test_deterministic(self):
        labels = np.array([0, 1] * 10)
        assert generate_pairs_random(labels, 15, seed=1) == generate_pairs_random(labels, 15, seed=1)


class TestComputeThresholds:
    def test_interpolated_percentiles(self):
        dists = [0.01 * k for k in range(1, 102)]
        t = compute_thresholds(dists)
        assert t.u == pytest.approx(0.02, abs=1e-12)
        assert t.l == pytest.approx(1.00, abs=1e-12)

    def test_constant_pool(self):
        t = compute_thresholds([1.0, 1.0, 1.0])
        assert t.u == t.l == 1.0

    def test_all_zero_rejected(self):
        with pytest.raises(InvalidArgumentError):
            compute_thresholds([0.0, 0.0, 0.0])

    def test_zero_percentile_clamped_to_positive(self):
        # enough zeros to push the 1st percentile to 0
        dists = [0.0] * 50 + [1.0] * 50
        t = compute_thresholds(dists)
        assert t.u == pytest.approx(1e-3)
        assert t.u <= t.l

    def test_ordering_holds_on_random_pools(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            pool = rng.exponential(size=50) + 1e-6
            t = compute_thresholds(pool)
            assert 0 < t.u <= t.l


class TestDistancePools:
    def test_kernel_pool_matches_euclidean_pool(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((3, 12))
        pk = kernel_distance_pool(X.T @ X)
        pe = euclidean_distance_pool(X)
        assert np.allclose(np.sort(pk), np.sort(pe), atol=1e-10)

    def test_full_pool_size(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((2, 10))
        assert euclidean_distance_pool(X).shape == (45,)

    def test_sampled_pool_for_large_n(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((2, 2501))
        pool = euclidean_distance_pool(X, seed=0)
        assert pool.shape[0] > 100_000  # sampled, minus i==j rejections
        assert np.all(pool >= 0)


class TestConstraintSet:
    def test_initial_slacks_by_kind(self):
        cs = ConstraintSet(
            [Constraint(0, 1, SIMILAR), Constraint(1, 2, DISSIMILAR)],
            Thresholds(0.5, 4.0),
        )
        assert np.allclose(cs.initial_slacks(), [0.5, 4.0])

    def test_per_pair_override(self):
        cs = ConstraintSet(
            [Constraint(0, 1, SIMILAR), Constraint(1, 2, DISSIMILAR)],
            Thresholds(0.5, 4.0),
            xi0=np.array([0.3, 5.0]),
        )
        assert np.allclose(cs.initial_slacks(), [0.3, 5.0])

    def test_index_validation(self):
        cs = ConstraintSet([Constraint(0, 5, SIMILAR)], Thresholds(1.0, 1.0))
        with pytest.raises(InvalidArgumentError):
            cs.validate_indices(4)
