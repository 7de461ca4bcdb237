import numpy as np
import pytest
from numpy.testing import assert_allclose

from cholband.exceptions import DataError
from cholband.factors import reconstruct_covariance, reconstruct_precision
from cholband.simulate import (
    RngSeed,
    default_blocks,
    make_sigma1,
    make_sigma2,
    make_sigma3,
    sample_gaussian,
    sample_t3,
)
from scipy.stats import kurtosis


class TestSigma1:
    def test_rows_and_variances(self):
        m = make_sigma1(3)
        assert_allclose(m.true_factors.rows[1], [0.8])
        assert_allclose(m.true_factors.rows[2], [0.0, 0.8])
        assert_allclose(m.true_factors.variances, 0.01 * np.ones(3))

    def test_univariate(self):
        m = make_sigma1(1)
        assert m.p == 1
        assert_allclose(m.sigma, [[0.01]])

    def test_two_dim_precision(self):
        m = make_sigma1(2)
        assert_allclose(m.omega, [[164.0, -80.0], [-80.0, 100.0]], rtol=1e-12)

    def test_band_profile(self):
        m = make_sigma1(4)
        assert m.true_band == (0, 1, 1, 1)


class TestSigma2:
    def test_row_three_coefficients(self):
        m = make_sigma2(3)
        assert_allclose(m.true_factors.rows[2], [0.25, 0.5])

    def test_two_dim_matches_sigma1_structure(self):
        m = make_sigma2(2)
        assert_allclose(m.true_factors.rows[1], [0.5])
        assert_allclose(m.omega, [[125.0, -50.0], [-50.0, 100.0]], rtol=1e-12)

    def test_band_is_dense_near_diagonal(self):
        m = make_sigma2(6)
        near = np.abs(np.subtract.outer(range(6), range(6))) <= 2
        assert np.all(np.abs(m.omega[near]) > 0.0)
        product = m.sigma @ m.omega
        assert_allclose(product, np.eye(6), atol=1e-8)


class TestSigma3:
    def test_single_block_pair_is_forced(self):
        m = make_sigma3(2, blocks=1, seed=RngSeed(5))
        assert_allclose(m.true_factors.rows[1], [0.5])

    def test_default_blocks(self):
        assert default_blocks(30) == 1
        assert default_blocks(100) == 3
        assert default_blocks(200) == 6

    def test_blocks_exceeding_p_rejected(self):
        with pytest.raises(DataError):
            make_sigma3(4, blocks=5, seed=RngSeed(0))

    def test_draw_ranges_and_contiguity(self):
        for seed in range(5):
            m = make_sigma3(20, blocks=1, seed=RngSeed(seed))
            for j in range(2, 21):
                row = m.true_factors.rows[j - 1]
                support = np.nonzero(row)[0]
                assert support.size >= 1
                # Trailing contiguous block up to j-1.
                assert support.max() == j - 2
                assert support.size == j - 1 - support.min()
                # Start index within [1, ceil(j/2)] means support size within
                # [j - ceil(j/2), j - 1].
                k_start = j - 1 - support.size + 1
                assert 1 <= k_start <= (j + 1) // 2

    def test_cross_block_entries_exactly_zero(self):
        m = make_sigma3(9, blocks=3, seed=RngSeed(7))
        omega = m.omega
        for i in range(9):
            for j in range(9):
                if i // 3 != j // 3:
                    assert omega[i, j] == 0.0

    def test_block_sizes_spread_from_front(self):
        m = make_sigma3(7, blocks=3, seed=RngSeed(1))
        groups = [0, 0, 0, 1, 1, 2, 2]  # sizes 3,2,2: remainder goes to the front
        for i in range(7):
            for j in range(7):
                if groups[i] != groups[j]:
                    assert m.omega[i, j] == 0.0

    def test_reconstruction_round_trip(self):
        for maker in (lambda: make_sigma1(8), lambda: make_sigma2(8),
                      lambda: make_sigma3(8, blocks=2, seed=RngSeed(3))):
            m = maker()
            assert_allclose(m.sigma @ m.omega, np.eye(8), atol=1e-8)
            assert_allclose(reconstruct_covariance(m.true_factors), m.sigma)
            assert_allclose(reconstruct_precision(m.true_factors), m.omega)


class TestSampling:
    def test_gaussian_deterministic(self):
        m = make_sigma1(3)
        a = sample_gaussian(m, 20, RngSeed(9, 4))
        b = sample_gaussian(m, 20, RngSeed(9, 4))
        assert np.array_equal(a.values, b.values)
        c = sample_gaussian(m, 20, RngSeed(9, 5))
        assert not np.array_equal(a.values, c.values)

    def test_gaussian_matches_truth_at_large_n(self):
        m = make_sigma1(3)
        data = sample_gaussian(m, 50000, RngSeed(2, 0))
        emp = data.values.T @ data.values / data.n
        assert np.max(np.abs(emp - m.sigma)) < 0.02

    def test_white_case(self):
        from cholband.factors import CholeskyFactors
        from cholband.simulate import CovModel

        f = CholeskyFactors(rows=(np.zeros(0), np.array([0.0])), variances=np.ones(2))
        m = CovModel(name="sigma1", p=2, true_factors=f,
                     sigma=np.eye(2), omega=np.eye(2), true_band=(0, 0))
        data = sample_gaussian(m, 30000, RngSeed(4, 0))
        emp = data.values.T @ data.values / data.n
        assert np.max(np.abs(emp - np.eye(2))) < 0.05

    def test_t3_deterministic(self):
        m = make_sigma2(2)
        a = sample_t3(m, 15, RngSeed(1, 2))
        b = sample_t3(m, 15, RngSeed(1, 2))
        assert np.array_equal(a.values, b.values)

    def test_t3_covariance_is_three_sigma(self):
        m = make_sigma2(2)
        data = sample_t3(m, 100000, RngSeed(8, 0))
        emp = data.values.T @ data.values / data.n
        assert_allclose(emp, 3.0 * m.sigma, rtol=0.05)

    def test_t3_heavy_tails(self):
        m = make_sigma1(2)
        data = sample_t3(m, 100000, RngSeed(6, 0))
        # Excess kurtosis of every margin clearly positive.
        assert np.all(kurtosis(data.values, axis=0) > 3.0)

    def test_datasets_marked_uncentered(self):
        m = make_sigma1(2)
        assert not sample_gaussian(m, 5, RngSeed(0)).centered
        assert not sample_t3(m, 5, RngSeed(0)).centered
