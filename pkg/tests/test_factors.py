import numpy as np
import pytest
from numpy.testing import assert_allclose

from cholband.exceptions import DataError
from cholband.factors import (
    CholeskyFactors,
    Dataset,
    center_columns,
    center_with_means,
    matrix_neg_log_likelihood,
    neg_log_likelihood,
    reconstruct_covariance,
    reconstruct_precision,
    row_neg_log_likelihood,
    update_sigma,
)

from conftest import random_banded_factors, random_factors, random_spd, rng


def factors_2x2(phi: float, s1: float = 0.01, s2: float = 0.01) -> CholeskyFactors:
    return CholeskyFactors(rows=(np.zeros(0), np.array([phi])),
                           variances=np.array([s1, s2]))


class TestReconstructPrecision:
    def test_identity_case(self):
        f = CholeskyFactors(rows=(np.zeros(0), np.array([0.0]), np.array([0.0, 0.0])),
                            variances=np.ones(3))
        assert_allclose(reconstruct_precision(f), np.eye(3))

    def test_hand_multiply_08(self):
        # T' D^{-1} T with phi = 0.8, both variances 0.01, multiplied by hand.
        assert_allclose(reconstruct_precision(factors_2x2(0.8)),
                        np.array([[164.0, -80.0], [-80.0, 100.0]]), rtol=1e-12)

    def test_hand_multiply_05(self):
        assert_allclose(reconstruct_precision(factors_2x2(0.5)),
                        np.array([[125.0, -50.0], [-50.0, 100.0]]), rtol=1e-12)

    def test_nonpositive_variance_names_row(self):
        f = factors_2x2(0.5)
        f.variances[1] = 0.0
        with pytest.raises(DataError, match="row 2"):
            reconstruct_precision(f)

    def test_symmetry_exact(self, gen):
        f = random_factors(gen, 8)
        omega = reconstruct_precision(f)
        assert np.array_equal(omega, omega.T)


class TestReconstructCovariance:
    def test_diagonal_case(self):
        f = CholeskyFactors(rows=(np.zeros(0), np.array([0.0])),
                            variances=np.array([2.0, 3.0]))
        assert_allclose(reconstruct_covariance(f), np.diag([2.0, 3.0]))

    def test_two_by_two_inverse_formula(self):
        # Independent oracle: explicit 2x2 inverse of the precision.
        omega = np.array([[164.0, -80.0], [-80.0, 100.0]])
        det = omega[0, 0] * omega[1, 1] - omega[0, 1] * omega[1, 0]
        expected = np.array([[omega[1, 1], -omega[0, 1]],
                             [-omega[1, 0], omega[0, 0]]]) / det
        assert_allclose(reconstruct_covariance(factors_2x2(0.8)), expected, rtol=1e-12)

    def test_inverse_pair(self, gen):
        for p in (1, 2, 5, 9):
            f = random_factors(gen, p)
            product = reconstruct_covariance(f) @ reconstruct_precision(f)
            assert_allclose(product, np.eye(p), atol=1e-8)

    def test_round_trip_against_matrix_inverse(self, gen):
        for p in range(2, 13):
            f = random_factors(gen, p)
            omega = reconstruct_precision(f)
            sigma = reconstruct_covariance(f)
            err = np.linalg.norm(omega - np.linalg.inv(sigma)) / np.linalg.norm(omega)
            assert err < 1e-8


class TestCholeskyIdentity:
    def test_population_regressions_recover_sigma(self, gen):
        # Population regressions computed from sigma's blocks must satisfy
        # D = (I - Phi) sigma (I - Phi)' and reconstruct sigma itself.
        for p in (2, 5, 12):
            sigma = random_spd(gen, p)
            rows = [np.zeros(0)]
            variances = np.empty(p)
            variances[0] = sigma[0, 0]
            for j in range(2, p + 1):
                block = sigma[: j - 1, : j - 1]
                cross = sigma[: j - 1, j - 1]
                phi = np.linalg.solve(block, cross)
                rows.append(phi)
                variances[j - 1] = sigma[j - 1, j - 1] - cross @ phi
            f = CholeskyFactors(rows=tuple(rows), variances=variances)
            assert_allclose(reconstruct_covariance(f), sigma, atol=1e-8)
            t = f.t_matrix()
            d = t @ sigma @ t.T
            assert_allclose(np.diag(d), variances, atol=1e-8)
            assert_allclose(d - np.diag(np.diag(d)), np.zeros((p, p)), atol=1e-8)


class TestNegLogLikelihood:
    def test_identity_factors_sum_of_squares(self):
        f = CholeskyFactors(rows=(np.zeros(0), np.array([0.0])), variances=np.ones(2))
        x = np.array([[1.5, -2.0]])
        data = Dataset(values=x)
        assert_allclose(neg_log_likelihood(f, data), 1.5 ** 2 + 2.0 ** 2)

    def test_scalar_hand_value(self):
        # p = 1, sigma2 = 2, one observation at zero: value is log 2.
        f = CholeskyFactors(rows=(np.zeros(0),), variances=np.array([2.0]))
        data = Dataset(values=np.array([[0.0]]))
        assert_allclose(neg_log_likelihood(f, data), np.log(2.0), rtol=1e-12)

    def test_decomposes_into_rows(self, gen):
        p = 6
        f = random_factors(gen, p)
        data = Dataset(values=gen.normal(size=(40, p)))
        total = sum(
            row_neg_log_likelihood(j, f.rows[j - 1], f.variances[j - 1], data)
            for j in range(1, p + 1)
        )
        assert_allclose(neg_log_likelihood(f, data), total, rtol=1e-10)

    def test_matches_brute_force_determinant(self, gen):
        # Oracle: explicit determinant and inverse of the assembled sigma.
        for p in (2, 5, 8):
            f = random_factors(gen, p)
            data = Dataset(values=gen.normal(size=(25, p)))
            sigma = reconstruct_covariance(f)
            sign, logdet = np.linalg.slogdet(sigma)
            inv = np.linalg.inv(sigma)
            brute = data.n * logdet + sum(x @ inv @ x for x in data.values)
            assert sign > 0
            assert_allclose(neg_log_likelihood(f, data), brute, rtol=1e-8)
            assert_allclose(matrix_neg_log_likelihood(sigma, data), brute, rtol=1e-8)

    def test_dimension_mismatch(self, gen):
        f = random_factors(gen, 3)
        data = Dataset(values=gen.normal(size=(10, 4)))
        with pytest.raises(DataError):
            neg_log_likelihood(f, data)

    def test_banded_factors_give_banded_precision(self, gen):
        from cholband.penalties import band_support

        for _ in range(20):
            p = int(gen.integers(2, 11))
            f = random_banded_factors(gen, p)
            k = max(band_support(r) for r in f.rows)
            omega = reconstruct_precision(f)
            for i in range(p):
                for j in range(p):
                    if abs(i - j) > k:
                        assert omega[i, j] == 0.0


class TestRowNegLogLikelihood:
    def test_perfect_fit_unit_variance(self):
        data = Dataset(values=np.array([[1.0, 2.0], [2.0, 4.0]]))
        assert row_neg_log_likelihood(2, np.array([2.0]), 1.0, data) == pytest.approx(0.0)

    def test_single_observation_hand_value(self):
        # Empty regression, unit variance, one observation at 2: value is 4.
        data = Dataset(values=np.array([[2.0]]))
        assert row_neg_log_likelihood(1, np.zeros(0), 1.0, data) == pytest.approx(4.0)

    def test_variance_scaling_identity(self, gen):
        data = Dataset(values=gen.normal(size=(15, 3)))
        phi = np.array([0.3, -0.2])
        base = row_neg_log_likelihood(3, phi, 1.0, data)
        c = 2.7
        scaled = row_neg_log_likelihood(3, phi, c, data)
        assert_allclose(scaled, data.n * np.log(c) + (base - 0.0) / c, rtol=1e-10)

    def test_rejects_nonpositive_variance(self, gen):
        data = Dataset(values=gen.normal(size=(5, 2)))
        with pytest.raises(DataError):
            row_neg_log_likelihood(2, np.array([0.1]), 0.0, data)


class TestUpdateSigma:
    def test_exact_fit_clamps_and_flags(self):
        data = Dataset(values=np.array([[1.0, 2.0], [2.0, 4.0], [-1.0, -2.0]]))
        fit = update_sigma(2, np.array([2.0]), data)
        assert fit.degenerate
        assert fit.sigma2 > 0.0

    def test_first_row_mean_square(self, gen):
        values = gen.normal(size=(30, 2))
        data = Dataset(values=values)
        fit = update_sigma(1, np.zeros(0), data)
        assert_allclose(fit.sigma2, np.mean(values[:, 0] ** 2), rtol=1e-12)
        assert not fit.degenerate

    def test_hand_mean_of_squares(self):
        data = Dataset(values=np.array([[0.5, 1.0], [0.5, -1.0]]))
        fit = update_sigma(2, np.array([0.0]), data)
        assert fit.sigma2 == pytest.approx(1.0)

    def test_residuals_stored(self, gen):
        data = Dataset(values=gen.normal(size=(12, 3)))
        phi = np.array([0.4, 0.1])
        fit = update_sigma(3, phi, data)
        expected = data.values[:, 2] - data.values[:, :2] @ phi
        assert_allclose(fit.residuals, expected)
        assert_allclose(fit.sigma2, np.mean(expected ** 2))


class TestDataset:
    def test_centering_records_means(self, gen):
        values = gen.normal(size=(20, 4)) + 3.0
        ds = center_columns(values)
        assert ds.centered
        assert_allclose(ds.column_means, values.mean(axis=0))
        assert np.all(np.abs(ds.values.sum(axis=0)) <= 1e-8 * ds.n)

    def test_center_with_external_means(self, gen):
        values = gen.normal(size=(10, 3))
        means = np.array([1.0, -1.0, 0.5])
        ds = center_with_means(values, means)
        assert ds.centered
        assert_allclose(ds.values, values - means)

    def test_rejects_empty(self):
        with pytest.raises(DataError):
            Dataset(values=np.zeros((0, 3)))

    def test_rejects_non_finite(self):
        with pytest.raises(DataError):
            Dataset(values=np.array([[1.0, np.nan]]))

    def test_row_length_validation(self):
        with pytest.raises(DataError):
            CholeskyFactors(rows=(np.zeros(0), np.zeros(2)), variances=np.ones(2))
