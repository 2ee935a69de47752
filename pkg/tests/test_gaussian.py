import math

import numpy as np
import pytest

from lvggm import (
    PrecisionDecomposition,
    RegularizationParams,
    SampleCovariance,
    gaussian_log_likelihood,
    marginal_precision,
    objective_value,
    sample_covariance,
)

from conftest import random_pd


class TestGaussianLogLikelihood:
    def test_identity(self):
        assert gaussian_log_likelihood(np.eye(2), np.eye(2)) == pytest.approx(-2.0)

    def test_diagonal(self):
        val = gaussian_log_likelihood(np.diag([2.0, 1.0]), np.eye(2))
        assert val == pytest.approx(math.log(2.0) - 3.0, abs=1e-12)

    def test_scalar(self):
        val = gaussian_log_likelihood(np.array([[3.0]]), np.array([[0.5]]))
        assert val == pytest.approx(math.log(3.0) - 1.5, abs=1e-12)

    def test_non_pd_reports_eigenvalue(self):
        K = np.diag([1.0, -0.25])
        with pytest.raises(ValueError, match="-"):
            gaussian_log_likelihood(K, np.eye(2))

    def test_concave_along_segments(self):
        rng = np.random.default_rng(0)
        Sigma = SampleCovariance(np.eye(4))
        for _ in range(100):
            K1 = random_pd(rng, 4)
            K2 = random_pd(rng, 4)
            mid = gaussian_log_likelihood((K1 + K2) / 2.0, Sigma)
            ends = 0.5 * (
                gaussian_log_likelihood(K1, Sigma)
                + gaussian_log_likelihood(K2, Sigma)
            )
            assert mid >= ends - 1e-10


class TestObjectiveValue:
    def test_likelihood_only(self):
        decomp = PrecisionDecomposition(S=np.eye(2), L=np.zeros((2, 2)))
        reg = RegularizationParams(lam=0.0, gamma=1.0)
        assert objective_value(decomp, SampleCovariance(np.eye(2)), reg) == pytest.approx(2.0)

    def test_with_penalty(self):
        decomp = PrecisionDecomposition(S=np.eye(2), L=np.zeros((2, 2)))
        reg = RegularizationParams(lam=1.0, gamma=1.0)
        assert objective_value(decomp, SampleCovariance(np.eye(2)), reg) == pytest.approx(4.0)

    def test_scalar_split(self):
        decomp = PrecisionDecomposition(S=np.array([[1.0]]), L=np.array([[0.5]]))
        reg = RegularizationParams(lam=1.0, gamma=2.0)
        expect = -math.log(0.5) + 0.5 + 2.0 + 0.5
        val = objective_value(decomp, SampleCovariance(np.array([[1.0]])), reg)
        assert val == pytest.approx(expect, abs=1e-12)

    def test_infeasible_sentinel(self):
        decomp = PrecisionDecomposition(S=np.array([[1.0]]), L=np.array([[2.0]]))
        reg = RegularizationParams(lam=1.0, gamma=1.0)
        assert objective_value(decomp, SampleCovariance(np.array([[1.0]])), reg) == math.inf
        ok, reason = decomp.feasibility()
        assert not ok and "not PD" in reason

    def test_permutation_invariant(self):
        rng = np.random.default_rng(1)
        S = random_pd(rng, 5, margin=1.0)
        L = random_pd(rng, 5, margin=0.0) * 0.05
        Sigma = random_pd(rng, 5)
        reg = RegularizationParams(lam=0.7, gamma=1.3)
        base = objective_value(PrecisionDecomposition(S, L), SampleCovariance(Sigma), reg)
        perm = rng.permutation(5)
        P = np.eye(5)[perm]
        val = objective_value(
            PrecisionDecomposition(P @ S @ P.T, P @ L @ P.T),
            SampleCovariance(P @ Sigma @ P.T),
            reg,
        )
        assert val == pytest.approx(base, rel=1e-12)


class TestMarginalPrecision:
    def test_worked_example(self, worked_example):
        np.testing.assert_allclose(worked_example["S_star"], np.diag([2.0, 2.0]))
        np.testing.assert_allclose(worked_example["L_star"], 0.5 * np.ones((2, 2)))
        np.testing.assert_allclose(
            worked_example["K_O"], np.array([[1.5, -0.5], [-0.5, 1.5]])
        )

    def test_zero_coupling(self):
        K = np.diag([2.0, 3.0, 4.0])
        K[0, 1] = K[1, 0] = 0.5
        K_O, S_star, L_star = marginal_precision(K, [0, 1], [2])
        np.testing.assert_allclose(L_star, 0.0)
        np.testing.assert_allclose(K_O, K[:2, :2])

    def test_identity(self):
        K_O, S_star, L_star = marginal_precision(np.eye(3), [0, 1], [2])
        np.testing.assert_allclose(S_star, np.eye(2))
        np.testing.assert_allclose(L_star, 0.0)
        np.testing.assert_allclose(K_O, np.eye(2))

    def test_exact_decomposition_and_rank(self):
        rng = np.random.default_rng(2)
        for h in (1, 2, 3):
            K = random_pd(rng, 8 + h, margin=0.5)
            K_O, S_star, L_star = marginal_precision(
                K, np.arange(8), np.arange(8, 8 + h)
            )
            np.testing.assert_allclose(K_O + L_star, S_star, atol=1e-12)
            w = np.linalg.eigvalsh(L_star)
            rank = np.sum(w > 1e-9 * max(w[-1], 1e-300))
            assert rank <= h
            assert np.linalg.eigvalsh(K_O)[0] > 0

    def test_overlapping_indices_error(self):
        with pytest.raises(ValueError, match="overlap"):
            marginal_precision(np.eye(3), [0, 1], [1, 2])

    def test_incomplete_cover_error(self):
        with pytest.raises(ValueError, match="partition"):
            marginal_precision(np.eye(3), [0], [2])

    def test_singular_latent_block_error(self):
        K = np.eye(3)
        K[2, 2] = 0.0
        with pytest.raises(ValueError, match="singular"):
            marginal_precision(K, [0, 1], [2])


class TestSampleCovariance:
    def test_two_points(self):
        cov = sample_covariance(np.array([[1.0, 0.0], [-1.0, 0.0]]))
        np.testing.assert_allclose(cov.matrix, [[1.0, 0.0], [0.0, 0.0]])
        assert cov.n == 2

    def test_single_row(self):
        cov = sample_covariance(np.array([[2.0]]))
        np.testing.assert_allclose(cov.matrix, [[4.0]])

    def test_empty_error(self):
        with pytest.raises(ValueError):
            sample_covariance(np.zeros((0, 3)))

    def test_monte_carlo_diagonal(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(100_000, 2)) * np.sqrt([1.0, 4.0])
        cov = sample_covariance(X)
        assert abs(cov.matrix[0, 0] - 1.0) < 0.05
        assert abs(cov.matrix[1, 1] - 4.0) < 0.2

    def test_row_permutation_invariant(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(50, 4))
        base = sample_covariance(X).matrix
        perm = rng.permutation(50)
        np.testing.assert_allclose(sample_covariance(X[perm]).matrix, base, atol=1e-13)

    def test_centered_variant(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(200, 3)) + 5.0
        cov = sample_covariance(X, center=True)
        np.testing.assert_allclose(cov.matrix, np.cov(X.T), atol=1e-12)

    def test_psd_validation(self):
        with pytest.raises(ValueError, match="not PSD"):
            SampleCovariance(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_asymmetry_warns(self):
        M = np.array([[1.0, 0.2], [0.1, 1.0]])
        with pytest.warns(UserWarning, match="asymmetric"):
            SampleCovariance(M)
