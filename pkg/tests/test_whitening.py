"""
Tests for the conditional whitening transform.
"""

import math

import numpy as np
from scipy.stats import norm

from misc.exceptions import DomainError, NumericError
from models.whitening import WhiteningTransform, fit_whitening, precondition, unprecondition
from tests.test_base import BaseTest


class TestFitWhitening(BaseTest):
    """Test estimation from (context, pixel) pairs."""

    def test_independent_unit_variance(self):
        X = np.array([[1.0], [-1.0], [1.0], [-1.0]])
        y = np.array([1.0, 1.0, -1.0, -1.0])
        wt = fit_whitening(X, y)
        self.assertAlmostEqual(wt.m_y, 0.0)
        np.testing.assert_allclose(wt.Cxx_inv_sqrt, [[1.0]], atol=1e-7)
        np.testing.assert_allclose(wt.Cyx_white, [0.0], atol=1e-12)
        self.assertAlmostEqual(wt.W, 1.0, places=12)
        self.assertAlmostEqual(wt.log_jacobian, 0.0, places=12)

    def test_scalar_variances(self):
        """Var(x) = 4 and Var(y) = 9 with no correlation."""
        X = np.array([[2.0], [-2.0], [2.0], [-2.0]])
        y = np.array([3.0, 3.0, -3.0, -3.0])
        wt = fit_whitening(X, y)
        np.testing.assert_allclose(wt.Cxx_inv_sqrt, [[0.5]], rtol=1e-7)
        self.assertAlmostEqual(wt.W, 1.0 / 3.0, places=12)
        self.assertAlmostEqual(wt.log_jacobian, -math.log(3.0), places=12)

    def test_linear_gaussian_pairs_are_whitened(self):
        rng = self.rng(1)
        mixing = np.array([[1.0, 0.0, 0.0], [0.8, 0.6, 0.0], [-0.3, 0.5, 0.4]])
        X = rng.normal(size=(100000, 3)) @ mixing.T + np.array([0.5, -1.0, 2.0])
        y = X @ np.array([0.7, -0.2, 0.1]) + 0.3 * rng.normal(size=100000) + 4.0
        wt = fit_whitening(X, y)
        X_hat, y_hat = precondition(wt, X, y)
        np.testing.assert_allclose(X_hat.mean(axis=0), 0.0, atol=1e-10)
        np.testing.assert_allclose(np.cov(X_hat.T, bias=True), np.eye(3), atol=1e-6)
        self.assertAlmostEqual(y_hat.mean(), 0.0, places=10)
        self.assertAlmostEqual(y_hat.var(), 1.0, places=6)
        np.testing.assert_allclose(y_hat @ X_hat / X.shape[0], 0.0, atol=1e-6)
        self.assertAlmostEqual(1.0 / wt.W, 0.3, delta=0.005)

    def test_too_few_pairs(self):
        with self.assertRaises(DomainError):
            fit_whitening(np.zeros((3, 2)), np.zeros(3))

    def test_constant_pixels(self):
        X = self.rng().normal(size=(50, 2))
        with self.assertRaises(NumericError):
            fit_whitening(X, np.full(50, 0.25))

    def test_constant_contexts(self):
        with self.assertRaises(NumericError):
            fit_whitening(np.ones((50, 2)), self.rng().normal(size=50))


class TestPrecondition(BaseTest):
    """Test the whitening maps."""

    def test_identity(self):
        wt = WhiteningTransform.identity(4)
        rng = self.rng()
        ctx = rng.normal(size=(6, 4))
        y = rng.normal(size=6)
        ctx_hat, y_hat = precondition(wt, ctx, y)
        np.testing.assert_array_equal(ctx_hat, ctx)
        np.testing.assert_array_equal(y_hat, y)
        self.assertEqual(wt.log_jacobian, 0.0)

    def test_means_map_to_zero(self):
        wt = self.random_whitening(4)
        ctx_hat, y_hat = precondition(wt, wt.m_x, np.array(wt.m_y))
        np.testing.assert_allclose(ctx_hat, 0.0, atol=1e-15)
        self.assertAlmostEqual(float(y_hat), 0.0, places=15)

    def test_contexts_only(self):
        wt = self.random_whitening(3)
        ctx_hat, y_hat = precondition(wt, np.ones((2, 5, 3)))
        self.assertEqual(ctx_hat.shape, (2, 5, 3))
        self.assertIsNone(y_hat)

    def test_unprecondition_inverts(self):
        wt = self.random_whitening(4, seed=2)
        rng = self.rng(3)
        ctx = rng.normal(size=(10, 4))
        y = rng.normal(size=10)
        ctx_hat, y_hat = precondition(wt, ctx, y)
        np.testing.assert_allclose(unprecondition(wt, ctx_hat, y_hat), y, atol=1e-12)

    def test_change_of_variables(self):
        """log N(y_hat; 0, 1) + log W is the Gaussian log-density of y given its context."""
        wt = self.random_whitening(3, seed=4)
        rng = self.rng(5)
        ctx = rng.normal(size=(20, 3))
        y = rng.normal(size=20)
        ctx_hat, y_hat = precondition(wt, ctx, y)
        expected = norm.logpdf(y, loc=ctx_hat @ wt.Cyx_white + wt.m_y, scale=1.0 / wt.W)
        np.testing.assert_allclose(norm.logpdf(y_hat) + wt.log_jacobian, expected, atol=1e-10)

    def test_dimension_mismatch(self):
        with self.assertRaises(DomainError):
            precondition(WhiteningTransform.identity(3), np.zeros((2, 4)))
        with self.assertRaises(DomainError):
            precondition(WhiteningTransform.identity(3), np.zeros((2, 3)), np.zeros(3))


class TestWhiteningTransform(BaseTest):
    """Test validation of stored transforms."""

    def test_log_jacobian_follows_w(self):
        wt = WhiteningTransform(
            m_x=np.zeros(2), m_y=0.0, Cxx_inv_sqrt=np.eye(2), Cyx_white=np.zeros(2), W=2.0, log_jacobian=5.0,
        )
        self.assertAlmostEqual(wt.log_jacobian, math.log(2.0), places=15)

    def test_nonpositive_scale(self):
        with self.assertRaises(ValueError):
            WhiteningTransform(m_x=np.zeros(2), m_y=0.0, Cxx_inv_sqrt=np.eye(2), Cyx_white=np.zeros(2), W=0.0)

    def test_shape_mismatch(self):
        with self.assertRaises(ValueError):
            WhiteningTransform(m_x=np.zeros(2), m_y=0.0, Cxx_inv_sqrt=np.eye(3), Cyx_white=np.zeros(2), W=1.0)
