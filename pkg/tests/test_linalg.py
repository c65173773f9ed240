"""Tests for the SPD kernels and the normal log-density."""

import math

import numpy as np
import pytest

from penmix.exceptions import DimensionMismatch, NotPositiveDefinite
from penmix.linalg import (
    LOG_2PI,
    cholesky_lower,
    log_det,
    mahalanobis_sq,
    mahalanobis_sq_rows,
    min_eigenvalue,
    mvn_logpdf,
    symmetrize,
)


def random_spd(rng, d, scale=1.0):
    a = rng.standard_normal((d, d))
    return a @ a.T + scale * np.eye(d)


class TestCholesky:
    def test_identity(self):
        np.testing.assert_allclose(cholesky_lower(np.eye(2)), np.eye(2))

    def test_diagonal(self):
        np.testing.assert_allclose(cholesky_lower(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))

    def test_recomposition(self):
        m = np.array([[3.0, -2.0], [-2.0, 3.0]])
        L = cholesky_lower(m)
        np.testing.assert_allclose(L @ L.T, m, rtol=1e-10)
        assert L[0, 0] == pytest.approx(math.sqrt(3.0))

    def test_not_positive_definite(self):
        with pytest.raises(NotPositiveDefinite):
            cholesky_lower(np.array([[1.0, 2.0], [2.0, 1.0]]))
        with pytest.raises(NotPositiveDefinite):
            cholesky_lower(np.zeros((2, 2)))

    def test_rejects_non_square(self):
        with pytest.raises(DimensionMismatch):
            cholesky_lower(np.ones((2, 3)))

    def test_random_spd_recomposition(self):
        # 1000 random SPD matrices, d in {2, 3}
        rng = np.random.default_rng(7)
        for i in range(1000):
            d = 2 + (i % 2)
            m = random_spd(rng, d, scale=10.0 ** rng.uniform(-3, 2))
            L = cholesky_lower(m)
            err = np.linalg.norm(L @ L.T - m) / np.linalg.norm(m)
            assert err < 1e-10


class TestLogDet:
    def test_identity(self):
        assert log_det(np.eye(3)) == pytest.approx(0.0, abs=1e-14)

    def test_diagonal(self):
        # product of eigenvalues: 1 * 3 * 10 = 30
        assert log_det(np.diag([1.0, 3.0, 10.0])) == pytest.approx(math.log(30.0), abs=1e-12)
        assert log_det(np.diag([1.0, 3.0, 10.0])) == pytest.approx(3.4012, abs=1e-4)

    def test_log_e(self):
        e = math.e
        assert log_det(np.diag([e, e])) == pytest.approx(2.0, abs=1e-12)

    def test_scaling(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            d = rng.integers(2, 4)
            m = random_spd(rng, d)
            c = 10.0 ** rng.uniform(-2, 2)
            assert log_det(c * m) == pytest.approx(d * math.log(c) + log_det(m), abs=1e-10)


class TestMahalanobis:
    def test_zero_displacement(self):
        sigma = np.array([[2.0, 0.3], [0.3, 1.0]])
        x = np.array([1.5, -0.5])
        assert mahalanobis_sq(x, x, sigma) == 0.0

    def test_unit_vector_identity(self):
        assert mahalanobis_sq(np.array([1.0, 0.0]), np.zeros(2), np.eye(2)) == pytest.approx(1.0)

    def test_hand_solved_2x2(self):
        # Sigma = [[3,-2],[-2,3]], inverse = [[3,2],[2,3]]/5, so
        # (1,1)' Sigma^{-1} (1,1) = (3+2+2+3)/5 = 2.
        sigma = np.array([[3.0, -2.0], [-2.0, 3.0]])
        got = mahalanobis_sq(np.array([1.0, 1.0]), np.zeros(2), sigma)
        assert got == pytest.approx(2.0, abs=1e-12)

    def test_scale_inverse(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            d = rng.integers(2, 4)
            sigma = random_spd(rng, d)
            x = rng.standard_normal(d)
            mu = rng.standard_normal(d)
            c = 10.0 ** rng.uniform(-2, 2)
            base = mahalanobis_sq(x, mu, sigma)
            assert mahalanobis_sq(x, mu, c * sigma) == pytest.approx(base / c, rel=1e-10)

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatch):
            mahalanobis_sq(np.zeros(3), np.zeros(2), np.eye(2))

    def test_rows_matches_scalar(self):
        rng = np.random.default_rng(5)
        sigma = random_spd(rng, 3)
        L = cholesky_lower(sigma)
        data = rng.standard_normal((20, 3))
        mu = rng.standard_normal(3)
        rows = mahalanobis_sq_rows(data, mu, L)
        for i in range(20):
            assert rows[i] == pytest.approx(mahalanobis_sq(data[i], mu, sigma), rel=1e-9)


class TestMvnLogpdf:
    def test_standard_normal_mode(self):
        got = mvn_logpdf(np.zeros(2), np.zeros(2), np.eye(2))
        assert got == pytest.approx(-LOG_2PI)
        assert got == pytest.approx(-1.837877, abs=1e-6)

    def test_unit_mahalanobis(self):
        got = mvn_logpdf(np.array([1.0, 0.0]), np.zeros(2), np.eye(2))
        assert got == pytest.approx(-LOG_2PI - 0.5)

    def test_d3_diagonal_mode(self):
        # -(3/2) log(2 pi) - (1/2) log 30
        got = mvn_logpdf(np.zeros(3), np.zeros(3), np.diag([1.0, 3.0, 10.0]))
        expected = -1.5 * LOG_2PI - 0.5 * math.log(30.0)
        assert got == pytest.approx(expected, abs=1e-12)
        assert got == pytest.approx(-4.457414, abs=1e-6)

    def test_matches_scipy(self):
        from scipy.stats import multivariate_normal

        rng = np.random.default_rng(19)
        for _ in range(25):
            d = rng.integers(1, 4)
            sigma = random_spd(rng, d)
            mu = rng.standard_normal(d)
            x = rng.standard_normal(d)
            assert mvn_logpdf(x, mu, sigma) == pytest.approx(
                multivariate_normal(mu, sigma).logpdf(x), rel=1e-10
            )

    def test_integrates_to_one_2d(self):
        # quadrature over [-8 sigma, 8 sigma] per axis
        sigma = np.array([[1.5, 0.6], [0.6, 1.0]])
        mu = np.array([0.3, -0.2])
        sds = np.sqrt(np.diag(sigma))
        xs = np.linspace(mu[0] - 8 * sds[0], mu[0] + 8 * sds[0], 401)
        ys = np.linspace(mu[1] - 8 * sds[1], mu[1] + 8 * sds[1], 401)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        L = cholesky_lower(sigma)
        logpdf = (
            -0.5 * 2 * LOG_2PI
            - np.log(np.diag(L)).sum()
            - 0.5 * mahalanobis_sq_rows(pts, mu, L)
        )
        dx = xs[1] - xs[0]
        dy = ys[1] - ys[0]
        total = np.exp(logpdf).sum() * dx * dy
        assert total == pytest.approx(1.0, abs=1e-3)


class TestSymmetrize:
    def test_mirrors_lower_triangle(self):
        a = np.array([[1.0, 99.0], [2.0, 3.0]])
        np.testing.assert_allclose(symmetrize(a), [[1.0, 2.0], [2.0, 3.0]])

    def test_min_eigenvalue(self):
        assert min_eigenvalue(np.diag([4.0, 0.5])) == pytest.approx(0.5)
