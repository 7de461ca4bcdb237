import numpy as np
import pytest

from cholband.exceptions import DataError, SelectionError
from cholband.factors import center_columns, center_with_means
from cholband.estimators import EstimatorChoice, FitOptions
from cholband.selection import (
    TuningGrid,
    _argmin_with_tiebreak,
    default_grid,
    kfold_scores,
    select_kfold,
    select_on_validation,
)
from cholband.simulate import RngSeed, make_sigma1, sample_gaussian

from conftest import centered_dataset


def sigma1_split(p=5, n=2000, seed=17):
    model = make_sigma1(p)
    train = center_columns(sample_gaussian(model, n, RngSeed(seed, 1)).values)
    valid = center_with_means(sample_gaussian(model, n, RngSeed(seed, 2)).values,
                              train.column_means)
    return model, train, valid


class TestSelectOnValidation:
    def test_singleton_grid(self, gen):
        data = centered_dataset(gen, 40, 3)
        valid = centered_dataset(gen, 40, 3)
        grid = TuningGrid((EstimatorChoice.banding(1),))
        best, scores = select_on_validation(data, valid, grid)
        assert best == grid.candidates[0]
        assert len(scores) == 1

    def test_sigma1_prefers_bandwidth_one(self):
        _, train, valid = sigma1_split()
        grid = TuningGrid((EstimatorChoice.banding(0), EstimatorChoice.banding(1)))
        best, scores = select_on_validation(train, valid, grid)
        assert best.k == 1
        assert scores[1] < scores[0]

    def test_exact_tie_breaks_to_sparser(self, gen):
        # Two penalties so large that both fits are the identity factor give
        # identical scores; the larger penalty wins.
        train = centered_dataset(gen, 30, 3)
        valid = centered_dataset(gen, 30, 3)
        grid = TuningGrid((EstimatorChoice.lasso(1e8), EstimatorChoice.lasso(1e9)))
        best, scores = select_on_validation(train, valid, grid)
        assert scores[0] == scores[1]
        assert best.spec.lam == 1e9

    def test_banding_tie_breaks_to_smaller_k(self):
        grid = TuningGrid((EstimatorChoice.banding(2), EstimatorChoice.banding(1)))
        assert _argmin_with_tiebreak(grid, [3.0, 3.0]) == 1

    def test_all_candidates_inadmissible(self, gen):
        # p > n makes the sample covariance singular on the validation set.
        train = centered_dataset(gen, 4, 8)
        valid = centered_dataset(gen, 4, 8)
        grid = TuningGrid((EstimatorChoice.sample(),))
        with pytest.raises(SelectionError):
            select_on_validation(train, valid, grid)

    def test_grid_refinement_lowers_best_score(self, gen):
        train = centered_dataset(gen, 50, 4)
        valid = centered_dataset(gen, 50, 4)
        base = default_grid("banding", 4, 50, ks=(0, 1))
        wider = default_grid("banding", 4, 50, ks=(0, 1, 2, 3))
        _, scores_base = select_on_validation(train, valid, base)
        _, scores_wide = select_on_validation(train, valid, wider)
        best_base = min(s for s in scores_base if s is not None)
        best_wide = min(s for s in scores_wide if s is not None)
        assert best_wide <= best_base


class TestArgminTiebreak:
    def test_scale_invariance(self):
        grid = default_grid("banding", 6, 50, ks=(0, 1, 2, 3))
        scores = [5.0, 2.0, 2.5, 7.0]
        idx = _argmin_with_tiebreak(grid, scores)
        for c in (0.5, 3.0, 100.0):
            assert _argmin_with_tiebreak(grid, [c * s for s in scores]) == idx

    def test_none_scores_skipped(self):
        grid = default_grid("banding", 6, 50, ks=(0, 1, 2))
        assert _argmin_with_tiebreak(grid, [None, 4.0, None]) == 1

    def test_all_none_raises(self):
        grid = default_grid("banding", 6, 50, ks=(0, 1))
        with pytest.raises(SelectionError):
            _argmin_with_tiebreak(grid, [None, None])


class TestSelectKfold:
    def test_deterministic_given_seed(self, gen):
        from cholband.factors import Dataset

        data = Dataset(values=gen.normal(size=(40, 4)))
        grid = default_grid("banding", 4, 40, ks=(0, 1, 2))
        a = select_kfold(data, grid, 5, seed=RngSeed(77))
        b = select_kfold(data, grid, 5, seed=RngSeed(77))
        assert a == b

    def test_leave_one_out_runs(self, gen):
        from cholband.factors import Dataset

        data = Dataset(values=gen.normal(size=(12, 3)))
        grid = default_grid("banding", 3, 12, ks=(0, 1))
        choice = select_kfold(data, grid, 12, seed=RngSeed(5))
        assert choice.method == "banding"

    def test_fold_bounds_validated(self, gen):
        from cholband.factors import Dataset

        data = Dataset(values=gen.normal(size=(10, 3)))
        grid = default_grid("banding", 3, 10, ks=(0, 1))
        with pytest.raises(DataError):
            select_kfold(data, grid, 1)
        with pytest.raises(DataError):
            select_kfold(data, grid, 11)

    def test_sigma1_mostly_selects_bandwidth_one(self):
        # Monte Carlo: the lag-one truth should win in most seeded trials.
        model = make_sigma1(5)
        grid = TuningGrid(tuple(EstimatorChoice.banding(k) for k in range(4)))
        hits = 0
        for trial in range(50):
            data = sample_gaussian(model, 200, RngSeed(1000 + trial, 0))
            choice = select_kfold(data, grid, 5, seed=RngSeed(trial))
            hits += choice.k == 1
        assert hits >= 40

    def test_candidate_failing_on_fold_excluded(self, gen):
        from cholband.factors import Dataset

        # Bandwidth 8 is inadmissible once a fold shrinks the training part
        # below k + 2 rows.
        data = Dataset(values=gen.normal(size=(10, 12)))
        grid = TuningGrid((EstimatorChoice.banding(0), EstimatorChoice.banding(8)))
        scores = kfold_scores(data, grid, 5, seed=RngSeed(2))
        assert scores[0] is not None
        assert scores[1] is None


class TestDefaultGrids:
    def test_lambda_grid_size(self):
        grid = default_grid("lasso", 30, 100)
        assert len(grid.candidates) == 10
        lams = [c.spec.lam for c in grid.candidates]
        assert lams[0] == pytest.approx(1e-3)
        assert lams[-1] == pytest.approx(1e2)

    def test_j2_lattice(self):
        grid = default_grid("adaptive-j2", 30, 100)
        assert len(grid.candidates) == 30
        ratios = {round(c.spec.lam2 / c.spec.lam, 9) for c in grid.candidates}
        assert ratios == {0.1, 1.0, 10.0}

    def test_banding_cap(self):
        grid = default_grid("banding", 30, 100)
        ks = [c.k for c in grid.candidates]
        assert ks == list(range(21))
        small = default_grid("banding", 4, 100)
        assert [c.k for c in small.candidates] == [0, 1, 2, 3]
        tiny_n = default_grid("banding", 30, 10)
        assert max(c.k for c in tiny_n.candidates) == 8

    def test_mixed_family_grid_rejected(self):
        with pytest.raises(DataError):
            TuningGrid((EstimatorChoice.banding(0), EstimatorChoice.lasso(1.0)))
