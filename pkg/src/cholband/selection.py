"""Tuning-parameter selection by validation likelihood and K-fold CV.

Candidates whose estimate is singular on the scoring set are excluded (the
NA convention); exact score ties break toward the sparser candidate, meaning
a larger penalty or a smaller bandwidth.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DataError, SelectionError
from .factors import Dataset, center_columns, center_with_means, matrix_neg_log_likelihood, \
    neg_log_likelihood
from .estimators import EstimatorChoice, FitOptions, FittedEstimate, fit_estimator
from .penalties import PenaltyKind, PenaltySpec
from .simulate import RngSeed

# Default grids: 10 log-spaced penalty values, a three-point lambda2/lambda1
# lattice for the two-parameter penalty, and bandwidths up to 20.
LAMBDA_GRID = tuple(np.logspace(-3.0, 2.0, 10))
LAMBDA2_RATIOS = (0.1, 1.0, 10.0)
BANDING_K_LIMIT = 20

FAMILIES = ("sample", "ledoit-wolf", "banding", "lasso",
            "adaptive-j0", "adaptive-j1", "adaptive-j2")


@dataclass(frozen=True)
class TuningGrid:
    """An ordered sequence of candidates from one method family."""

    candidates: tuple

    def __post_init__(self):
        cands = tuple(self.candidates)
        if not cands:
            raise DataError("tuning grid must be non-empty")
        family = cands[0].family()
        if any(c.family() != family for c in cands):
            raise DataError("tuning grid mixes method families")
        object.__setattr__(self, "candidates", cands)

    @property
    def family(self) -> str:
        return self.candidates[0].family()


def default_grid(family: str, p: int, n: int, lambdas=None, ratios=None,
                 ks=None) -> TuningGrid:
    """Build the default grid for one family, capped by the data dimensions."""
    if family == "sample":
        return TuningGrid((EstimatorChoice.sample(),))
    if family == "ledoit-wolf":
        return TuningGrid((EstimatorChoice.ledoit_wolf(),))
    if family == "banding":
        if ks is None:
            ks = range(0, min(p - 1, n - 2, BANDING_K_LIMIT) + 1)
        else:
            k_cap = min(p - 1, n - 2)
            ks = [k for k in ks if 0 <= k <= k_cap]
            if not ks:
                raise DataError("no admissible bandwidths after capping")
        return TuningGrid(tuple(EstimatorChoice.banding(k) for k in ks))
    lambdas = LAMBDA_GRID if lambdas is None else tuple(float(v) for v in lambdas)
    if family == "lasso":
        return TuningGrid(tuple(EstimatorChoice.lasso(lam) for lam in lambdas))
    if family == "adaptive-j0":
        kind = PenaltyKind.NESTED_J0
    elif family == "adaptive-j1":
        kind = PenaltyKind.NESTED_J1
    elif family == "adaptive-j2":
        ratios = LAMBDA2_RATIOS if ratios is None else tuple(float(v) for v in ratios)
        cands = tuple(
            EstimatorChoice.adaptive(PenaltySpec(PenaltyKind.NESTED_J2, lam, lam * r))
            for lam in lambdas for r in ratios
        )
        return TuningGrid(cands)
    else:
        raise DataError(f"unknown estimator family {family!r}")
    return TuningGrid(tuple(
        EstimatorChoice.adaptive(PenaltySpec(kind, lam)) for lam in lambdas
    ))


def _sparser(a: EstimatorChoice, b: EstimatorChoice) -> bool:
    """True when candidate a is sparser than b (larger penalty / smaller k)."""
    if a.method == "banding":
        return a.k < b.k
    if a.method in ("lasso", "adaptive"):
        key_a = (a.spec.lam, a.spec.lam2)
        key_b = (b.spec.lam, b.spec.lam2)
        return key_a > key_b
    return False


def _argmin_with_tiebreak(grid: TuningGrid, scores):
    best = None
    for idx, score in enumerate(scores):
        if score is None or not np.isfinite(score):
            continue
        if best is None or score < scores[best]:
            best = idx
        elif score == scores[best] and _sparser(grid.candidates[idx], grid.candidates[best]):
            best = idx
    if best is None:
        raise SelectionError("no admissible candidate")
    return best


def _score_fit(fitted: FittedEstimate, valid: Dataset):
    if fitted.factors is not None:
        score = neg_log_likelihood(fitted.factors, valid)
        return float(score) if np.isfinite(score) else None
    return matrix_neg_log_likelihood(fitted.sigma, valid)


def fit_and_select_on_validation(train: Dataset, valid: Dataset, grid: TuningGrid,
                                 opts: FitOptions = FitOptions()):
    """Fit every candidate on train, score on valid; returns
    (best_choice, scores, best_fit) with the winning fit reused."""
    if train.p != valid.p:
        raise DataError("train and validation dimensions differ")
    scores = []
    fits = []
    for choice in grid.candidates:
        try:
            fitted = fit_estimator(train, choice, opts)
        except DataError:
            # Candidate inadmissible for these dimensions (e.g. bandwidth cap).
            scores.append(None)
            fits.append(None)
            continue
        scores.append(_score_fit(fitted, valid))
        fits.append(fitted)
    best = _argmin_with_tiebreak(grid, scores)
    return grid.candidates[best], scores, fits[best]


def select_on_validation(train: Dataset, valid: Dataset, grid: TuningGrid,
                         opts: FitOptions = FitOptions()):
    """Pick the candidate minimizing validation negative log-likelihood.

    Expects train centered by its own means and valid centered with the
    training means.  Returns (best_choice, scores); excluded candidates score
    None.
    """
    best, scores, _ = fit_and_select_on_validation(train, valid, grid, opts)
    return best, scores


def _fold_slices(n: int, folds: int):
    base, rem = divmod(n, folds)
    sizes = [base + 1 if f < rem else base for f in range(folds)]
    edges = np.cumsum([0] + sizes)
    return [(edges[f], edges[f + 1]) for f in range(folds)]


def kfold_scores(data: Dataset, grid: TuningGrid, folds: int,
                 opts: FitOptions = FitOptions(), seed: RngSeed = RngSeed(0)):
    """Per-candidate sums of held-out negative log-likelihood over K folds.

    Fold assignment shuffles indices with the seeded generator, then splits
    contiguously.  Each fold's training part is centered by its own means and
    the held-out part by those training means.  Candidates that fail or score
    NA on any fold report None.
    """
    n = data.n
    if folds < 2:
        raise DataError("need at least 2 folds")
    if n < folds:
        raise DataError(f"cannot split {n} observations into {folds} folds")
    perm = seed.generator().permutation(n)
    totals = [0.0] * len(grid.candidates)
    alive = [True] * len(grid.candidates)
    for lo, hi in _fold_slices(n, folds):
        held = perm[lo:hi]
        kept = np.concatenate([perm[:lo], perm[hi:]])
        train = center_columns(data.values[kept])
        valid = center_with_means(data.values[held], train.column_means)
        for idx, choice in enumerate(grid.candidates):
            if not alive[idx]:
                continue
            try:
                fitted = fit_estimator(train, choice, opts)
            except DataError:
                alive[idx] = False
                continue
            score = _score_fit(fitted, valid)
            if score is None:
                alive[idx] = False
            else:
                totals[idx] += score
    return [totals[i] if alive[i] else None for i in range(len(grid.candidates))]


def select_kfold(data: Dataset, grid: TuningGrid, folds: int,
                 opts: FitOptions = FitOptions(), seed: RngSeed = RngSeed(0)) -> EstimatorChoice:
    """K-fold cross-validated selection; deterministic given (data, seed)."""
    scores = kfold_scores(data, grid, folds, opts, seed)
    return grid.candidates[_argmin_with_tiebreak(grid, scores)]
