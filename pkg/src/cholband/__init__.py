"""Covariance and precision estimation via adaptively banded Cholesky factors."""

from .exceptions import CholbandError, DataError, NumericalError, SelectionError
from .factors import (
    CholeskyFactors,
    Dataset,
    RowFit,
    center_columns,
    center_with_means,
    matrix_neg_log_likelihood,
    neg_log_likelihood,
    raw_dataset,
    reconstruct_covariance,
    reconstruct_precision,
    row_neg_log_likelihood,
    update_sigma,
)
from .penalties import (
    MarginalCoefs,
    PenaltyKind,
    PenaltySpec,
    band_support,
    enforce_contiguity,
    eval_penalty,
    lqa_weights,
)
from .estimators import (
    EstimatorChoice,
    FitOptions,
    FittedEstimate,
    fit_adaptive_banding,
    fit_banding,
    fit_estimator,
    fit_lasso_cholesky,
    fit_ledoit_wolf,
    lqa_row_update,
    marginal_coefficients,
    sample_covariance,
    shooting_row_update,
)
from .selection import TuningGrid, default_grid, select_kfold, select_on_validation
from .simulate import (
    CovModel,
    RngSeed,
    make_model,
    make_sigma1,
    make_sigma2,
    make_sigma3,
    sample_gaussian,
    sample_t3,
)
from .losses import (
    LossReport,
    entropy_loss,
    evaluate_fit,
    kl_loss,
    norm_losses,
    zero_frequency,
    zero_recovery,
)
from .discriminant import (
    ClassModel,
    SelectionProtocol,
    discriminant_scores,
    fit_classifier,
    predict,
    predict_many,
    test_error,
)
from .benchmark import ExperimentConfig, ExperimentReport, run_benchmark

__version__ = "0.1.0"
