"""LDA, QDA and Naive Bayes on top of any covariance estimator.

The linear rule uses one pooled within-class covariance; the quadratic rule
estimates one covariance per class; Naive Bayes is the linear rule with the
pooled covariance replaced by its diagonal.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import DataError, NumericalError
from .factors import Dataset
from .estimators import EstimatorChoice, FitOptions, fit_estimator
from .selection import TuningGrid, default_grid, kfold_scores, select_kfold, \
    _argmin_with_tiebreak
from .simulate import RngSeed

KINDS = ("lda", "qda", "naive_bayes")

TUNED_FAMILIES = ("banding", "lasso", "adaptive-j0", "adaptive-j1", "adaptive-j2")


@dataclass(frozen=True)
class SelectionProtocol:
    """How tunable estimators pick their parameters inside a classifier fit."""

    folds: int = 5
    seed: RngSeed = RngSeed(0)
    grid: TuningGrid = None


@dataclass(frozen=True)
class ClassModel:
    """Fitted discriminant model.

    ``precision`` is (p, p) for the shared-covariance rules and (K, p, p)
    for the quadratic rule; ``logdet`` holds log|sigma_k| per class for the
    quadratic rule only.
    """

    kind: str
    classes: np.ndarray
    means: np.ndarray
    log_priors: np.ndarray
    precision: np.ndarray
    logdet: np.ndarray = None


def _class_partition(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise DataError("features and labels must align")
    classes = np.unique(y)
    if classes.shape[0] < 2:
        raise DataError("need at least 2 classes")
    groups = []
    for cls in classes:
        rows = x[y == cls]
        if rows.shape[0] < 2:
            raise DataError(f"class {cls!r} has fewer than 2 observations")
        groups.append(rows)
    return x, y, classes, groups


def _residual_dataset(groups, means):
    residuals = np.vstack([g - mu for g, mu in zip(groups, means)])
    return Dataset(values=residuals, centered=True,
                   column_means=np.zeros(residuals.shape[1]))


def _precision_from_fit(fitted):
    omega = fitted.precision()
    if omega is None:
        raise NumericalError(
            "estimated covariance is singular; use a regularized estimator "
            "(banding, lasso, adaptive banding or ledoit-wolf)")
    return omega


def _logdet_of_fit(fitted) -> float:
    if fitted.factors is not None:
        return float(np.log(fitted.factors.variances).sum())
    factor = scipy.linalg.cho_factor(fitted.sigma, lower=True)
    return 2.0 * float(np.log(np.diag(factor[0])).sum())


def _tune_shared(datasets, estimator: EstimatorChoice, opts, selection):
    """Pick one tuning parameter shared across the given datasets by summing
    their K-fold CV likelihoods (a single dataset for the pooled rules)."""
    family = estimator.family()
    if family not in TUNED_FAMILIES:
        return estimator
    if selection is None:
        return estimator
    grid = selection.grid
    if grid is None:
        n_min = min(d.n for d in datasets)
        p = datasets[0].p
        grid = default_grid(family, p, n_min - (n_min // selection.folds))
    if len(datasets) == 1:
        return select_kfold(datasets[0], grid, selection.folds, opts, selection.seed)
    # Shared parameter across classes: sum per-class CV scores.
    totals = [0.0] * len(grid.candidates)
    alive = [True] * len(grid.candidates)
    for ds in datasets:
        scores = kfold_scores(ds, grid, selection.folds, opts, selection.seed)
        for i, s in enumerate(scores):
            if s is None:
                alive[i] = False
            elif alive[i]:
                totals[i] += s
    scores = [totals[i] if alive[i] else None for i in range(len(grid.candidates))]
    return grid.candidates[_argmin_with_tiebreak(grid, scores)]


def fit_classifier(kind: str, x, y, estimator: EstimatorChoice,
                   opts: FitOptions = FitOptions(),
                   selection: SelectionProtocol = SelectionProtocol()) -> ClassModel:
    """Fit a discriminant model with the covariance supplied by ``estimator``.

    The linear rule applies the estimator to pooled class-mean-centered
    residuals; the quadratic rule applies it per class with one tuning
    parameter shared across classes; Naive Bayes ignores the estimator and
    uses the diagonal of the pooled sample covariance (divisor n).
    """
    if kind not in KINDS:
        raise DataError(f"unknown classifier kind {kind!r}")
    x, y, classes, groups = _class_partition(x, y)
    n = x.shape[0]
    means = np.vstack([g.mean(axis=0) for g in groups])
    log_priors = np.log(np.array([g.shape[0] / n for g in groups]))

    if kind == "naive_bayes":
        pooled = _residual_dataset(groups, means)
        diag = (pooled.values ** 2).mean(axis=0)
        if np.any(diag <= 0.0):
            raise NumericalError(
                "zero pooled variance; diagonal covariance is singular")
        return ClassModel(kind=kind, classes=classes, means=means,
                          log_priors=log_priors, precision=np.diag(1.0 / diag))

    if kind == "lda":
        pooled = _residual_dataset(groups, means)
        choice = _tune_shared([pooled], estimator, opts, selection)
        fitted = fit_estimator(pooled, choice, opts)
        omega = _precision_from_fit(fitted)
        return ClassModel(kind=kind, classes=classes, means=means,
                          log_priors=log_priors, precision=omega)

    # Quadratic rule: per-class covariances, shared tuning parameter.
    class_datasets = [
        Dataset(values=g - mu, centered=True, column_means=np.zeros(x.shape[1]))
        for g, mu in zip(groups, means)
    ]
    choice = _tune_shared(class_datasets, estimator, opts, selection)
    precisions = []
    logdets = []
    for ds in class_datasets:
        fitted = fit_estimator(ds, choice, opts)
        precisions.append(_precision_from_fit(fitted))
        logdets.append(_logdet_of_fit(fitted))
    return ClassModel(kind=kind, classes=classes, means=means,
                      log_priors=log_priors, precision=np.stack(precisions),
                      logdet=np.array(logdets))


def _score_matrix(model: ClassModel, x: np.ndarray) -> np.ndarray:
    """Discriminant scores for a batch, one row per observation."""
    if model.kind in ("lda", "naive_bayes"):
        omega_mu = model.precision @ model.means.T  # (p, K)
        const = -0.5 * np.einsum("kp,pk->k", model.means, omega_mu) + model.log_priors
        return x @ omega_mu + const
    scores = np.empty((x.shape[0], model.classes.shape[0]))
    for idx in range(model.classes.shape[0]):
        resid = x - model.means[idx]
        quad = np.einsum("np,np->n", resid @ model.precision[idx], resid)
        scores[:, idx] = -0.5 * model.logdet[idx] - 0.5 * quad + model.log_priors[idx]
    return scores


def discriminant_scores(model: ClassModel, x) -> np.ndarray:
    """Scores delta_k(x) for one observation, one entry per class."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.means.shape[1],):
        raise DataError("observation dimension does not match the model")
    return _score_matrix(model, x[None, :])[0]


def predict(model: ClassModel, x):
    """arg max of the scores; ties go to the lower class index."""
    scores = discriminant_scores(model, x)
    return model.classes[int(np.argmax(scores))]


def predict_many(model: ClassModel, x) -> np.ndarray:
    """Vectorized prediction for a batch of observations."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.means.shape[1]:
        raise DataError("observation dimensions do not match the model")
    return model.classes[np.argmax(_score_matrix(model, x), axis=1)]


def test_error(model: ClassModel, x, y):
    """Misclassification count and rate over a labeled test set."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise DataError("features and labels must align")
    scores = _score_matrix(model, x)
    predicted = model.classes[np.argmax(scores, axis=1)]
    wrong = int((predicted != y).sum())
    return wrong, wrong / y.shape[0]
