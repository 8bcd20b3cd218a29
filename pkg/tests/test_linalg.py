import math

import numpy as np
import pytest

from logdetml.errors import InvalidArgumentError, NumericalError
from logdetml.linalg import (
    KernelSpec,
    cross_gram,
    frob_divergence,
    gram,
    inv_psd,
    inv_sqrt,
    logdet_divergence,
    min_eigenvalue,
    pair_distance_kernel,
    percentile,
    sqrt_psd,
    vn_divergence,
)

from conftest import random_pd


class TestLogDetDivergence:
    def test_identity_pair_is_zero(self):
        assert logdet_divergence(np.eye(3), np.eye(3)) == pytest.approx(0.0, abs=1e-14)

    def test_scaled_identity(self):
        # tr = 4, log det(2 I_2) = 2 ln 2, so 4 - 2 ln 2 - 2 = 2 - 2 ln 2
        val = logdet_divergence(2 * np.eye(2), np.eye(2))
        assert val == pytest.approx(2 - 2 * math.log(2), abs=1e-12)

    def test_singular_first_argument_gives_inf(self):
        assert logdet_divergence(np.diag([1.0, 0.0]), np.eye(2)) == math.inf

    def test_singular_second_argument_rejected(self):
        with pytest.raises(InvalidArgumentError):
            logdet_divergence(np.eye(2), np.diag([1.0, 0.0]))

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            logdet_divergence(np.eye(2), np.eye(3))

    @pytest.mark.parametrize("seed", range(10))
    def test_nonnegative_on_random_pd_pairs(self, seed):
        rng = np.random.default_rng(seed)
        for _ in range(10):
            dim = int(rng.integers(1, 9))
            A, B = random_pd(rng, dim), random_pd(rng, dim)
            assert logdet_divergence(A, B) >= -1e-12
            assert logdet_divergence(A, A) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("alpha", [0.5, 2.0, 10.0])
    def test_scale_invariance(self, alpha, rng):
        for _ in range(20):
            dim = int(rng.integers(2, 8))
            A, B = random_pd(rng, dim), random_pd(rng, dim)
            base = logdet_divergence(A, B)
            assert logdet_divergence(alpha * A, alpha * B) == pytest.approx(base, abs=1e-9)


class TestVnDivergence:
    def test_identity_pair(self):
        assert vn_divergence(np.eye(2), np.eye(2)) == pytest.approx(0.0, abs=1e-14)

    def test_scalar_case(self):
        # x log x - x + 1 at x = 2
        val = vn_divergence(2 * np.eye(1), np.eye(1))
        assert val == pytest.approx(2 * math.log(2) - 1, abs=1e-12)

    def test_singular_psd_argument_uses_zero_convention(self):
        # 0 log 0 := 0: value is 0 - 0 - 1 + 2 = 1
        assert vn_divergence(np.diag([0.0, 1.0]), np.eye(2)) == pytest.approx(1.0, abs=1e-12)

    def test_nonnegative_on_random_pairs(self, rng):
        for _ in range(100):
            dim = int(rng.integers(1, 9))
            A, B = random_pd(rng, dim), random_pd(rng, dim)
            assert vn_divergence(A, B) >= -1e-12
            assert vn_divergence(A, A) == pytest.approx(0.0, abs=1e-12)

    def test_negative_eigenvalue_rejected(self):
        with pytest.raises(InvalidArgumentError):
            vn_divergence(np.diag([-1.0, 1.0]), np.eye(2))


class TestFrobDivergence:
    def test_equal(self):
        assert frob_divergence(np.eye(3), np.eye(3)) == 0.0

    def test_identity_vs_zero(self):
        assert frob_divergence(np.eye(2), np.zeros((2, 2))) == pytest.approx(1.0)

    def test_offdiagonal(self):
        A = np.array([[0.0, 2.0], [2.0, 0.0]])
        assert frob_divergence(A, np.zeros((2, 2))) == pytest.approx(4.0)

    def test_nonnegative_random(self, rng):
        for _ in range(100):
            dim = int(rng.integers(1, 9))
            A, B = random_pd(rng, dim), random_pd(rng, dim)
            assert frob_divergence(A, B) >= 0.0


class TestGram:
    def test_linear_unit_vectors(self):
        assert np.allclose(gram(np.eye(2), KernelSpec.linear()), np.eye(2))

    def test_linear_matches_xtx(self, rng):
        X = rng.standard_normal((4, 7))
        assert np.max(np.abs(gram(X, KernelSpec.linear()) - X.T @ X)) <= 1e-12

    def test_gaussian_single_point(self):
        K = gram(np.array([[1.0], [0.0]]), KernelSpec.gaussian(1.0))
        assert K.shape == (1, 1) and K[0, 0] == 1.0

    def test_gaussian_two_points(self):
        K = gram(np.array([[1.0, -1.0]]), KernelSpec.gaussian(1.0))
        assert K[0, 1] == pytest.approx(math.exp(-2.0), abs=1e-12)
        assert K[0, 0] == 1.0

    def test_precomputed_rejected(self):
        with pytest.raises(InvalidArgumentError):
            gram(np.eye(2), KernelSpec.precomputed())

    def test_cross_gram_matches_gram_blocks(self, rng):
        X = rng.standard_normal((3, 5))
        for spec in (KernelSpec.linear(), KernelSpec.gaussian(0.7)):
            full = gram(X, spec)
            assert np.allclose(cross_gram(X, X, spec), full, atol=1e-12)

    def test_gaussian_needs_positive_sigma(self):
        with pytest.raises(InvalidArgumentError):
            KernelSpec.gaussian(0.0)


class TestPairDistanceKernel:
    def test_identity(self):
        assert pair_distance_kernel(np.eye(2), 0, 1) == pytest.approx(2.0)

    def test_same_index_is_zero(self, rng):
        K = random_pd(rng, 5)
        assert pair_distance_kernel(K, 3, 3) == 0.0

    def test_hand_value(self):
        K = np.array([[0.7, 0.3], [0.3, 0.7]])
        assert pair_distance_kernel(K, 0, 1) == pytest.approx(0.8)

    def test_matches_euclidean_under_linear_kernel(self, rng):
        X = rng.standard_normal((4, 6))
        K = X.T @ X
        for i in range(6):
            for j in range(6):
                expected = float(np.sum((X[:, i] - X[:, j]) ** 2))
                assert pair_distance_kernel(K, i, j) == pytest.approx(expected, abs=1e-10)

    def test_index_out_of_range(self):
        with pytest.raises(InvalidArgumentError):
            pair_distance_kernel(np.eye(2), 0, 2)


class TestEigPrimitives:
    def test_min_eigenvalue_identity(self):
        assert min_eigenvalue(np.eye(3)) == pytest.approx(1.0)

    def test_min_eigenvalue_diag(self):
        assert min_eigenvalue(np.diag([2.0, -1.0])) == pytest.approx(-1.0)

    def test_min_eigenvalue_2x2(self):
        assert min_eigenvalue(np.array([[2.0, 1.0], [1.0, 2.0]])) == pytest.approx(1.0)

    def test_inv_sqrt_identity(self):
        assert np.allclose(inv_sqrt(np.eye(3)), np.eye(3), atol=1e-14)

    def test_inv_sqrt_diagonal(self):
        B = inv_sqrt(np.diag([4.0, 9.0]))
        assert np.allclose(B, np.diag([0.5, 1.0 / 3.0]), atol=1e-14)

    def test_inv_sqrt_singular_fails(self):
        with pytest.raises(NumericalError):
            inv_sqrt(np.diag([1.0, 0.0]), jitter=0.0)

    def test_inv_sqrt_round_trip(self, rng):
        for _ in range(20):
            dim = int(rng.integers(2, 21))
            A = random_pd(rng, dim)
            B = inv_sqrt(A)
            err = np.linalg.norm(B @ A @ B - np.eye(dim)) / np.sqrt(dim)
            assert err <= 1e-8

    def test_sqrt_psd_round_trip(self, rng):
        A = random_pd(rng, 6)
        S = sqrt_psd(A)
        assert np.allclose(S @ S, A, atol=1e-10)

    def test_inv_psd_reports_jitter(self, rng):
        A = random_pd(rng, 4)
        Ainv, used = inv_psd(A)
        assert used == 0.0
        assert np.allclose(Ainv @ A, np.eye(4), atol=1e-8)
        # singular matrix gets rescued with the default relative jitter
        B = np.diag([1.0, 1.0, 0.0])
        Binv, used = inv_psd(B)
        assert used > 0.0
        with pytest.raises(NumericalError):
            inv_psd(np.zeros((2, 2)))


class TestPercentile:
    def test_single_value(self):
        assert percentile([5.0], 37.0) == 5.0

    def test_midpoint_interpolation(self):
        assert percentile([0.0, 10.0], 50.0) == pytest.approx(5.0)

    def test_extremes(self):
        assert percentile([1, 2, 3, 4], 0.0) == 1.0
        assert percentile([1, 2, 3, 4], 100.0) == 4.0

    def test_rank_interpolation(self):
        vals = [0.01 * k for k in range(1, 102)]  # 0.01 .. 1.01
        assert percentile(vals, 1.0) == pytest.approx(0.02, abs=1e-12)
        assert percentile(vals, 99.0) == pytest.approx(1.00, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(InvalidArgumentError):
            percentile([], 50.0)
