"""Loss metrics between a true covariance and an estimate.

Singular estimates score NA (represented as None) rather than raising, so a
benchmark table can carry the NA marker through to its reports.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import DataError
from .factors import CholeskyFactors, reconstruct_precision

# Relative tolerance used to call a reconstructed precision entry zero,
# absorbing factor-multiplication roundoff.
PRECISION_PATTERN_RTOL = 1e-12


@dataclass(frozen=True)
class LossReport:
    """All metrics for one fit against one truth; None encodes NA."""

    kl: float = None
    entropy: float = None
    norm_l1: float = None
    norm_l2_operator: float = None
    norm_frobenius: float = None
    norm_linf: float = None
    pct_zeros_cholesky: float = None
    pct_zeros_precision: float = None

    FIELDS = ("kl", "entropy", "norm_l1", "norm_l2_operator", "norm_frobenius",
              "norm_linf", "pct_zeros_cholesky", "pct_zeros_precision")

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.FIELDS}


def _chol_logdet(matrix):
    """Cholesky factor and log-determinant; None when not SPD."""
    try:
        factor = scipy.linalg.cho_factor(matrix, lower=True)
    except (np.linalg.LinAlgError, ValueError):
        return None, None
    logdet = 2.0 * float(np.log(np.diag(factor[0])).sum())
    if not np.isfinite(logdet):
        return None, None
    return factor, logdet


def _require_spd(sigma_true):
    sigma_true = np.asarray(sigma_true, dtype=float)
    factor, logdet = _chol_logdet(sigma_true)
    if factor is None:
        raise DataError("true covariance is not symmetric positive definite")
    return sigma_true, factor, logdet


def kl_loss(sigma_true, sigma_hat):
    """Kullback-Leibler loss tr(inv(sigma_hat) sigma) - ln|inv(sigma_hat) sigma| - p.

    One factorization of the estimate supplies both the log-determinant and
    the trace term; a singular estimate returns None (the NA marker).
    """
    sigma_true, _, logdet_true = _require_spd(sigma_true)
    sigma_hat = np.asarray(sigma_hat, dtype=float)
    if sigma_hat.shape != sigma_true.shape:
        raise DataError("dimension mismatch between truth and estimate")
    factor_hat, logdet_hat = _chol_logdet(sigma_hat)
    if factor_hat is None:
        return None
    p = sigma_true.shape[0]
    trace = float(np.trace(scipy.linalg.cho_solve(factor_hat, sigma_true)))
    value = trace - (logdet_true - logdet_hat) - p
    if not np.isfinite(value):
        return None
    # Clamp roundoff at the exact-estimate fixed point.
    return float(max(value, 0.0))


def entropy_loss(sigma_true, sigma_hat):
    """Same functional with the roles of covariance and inverse switched:
    tr(inv(sigma) sigma_hat) - ln|inv(sigma) sigma_hat| - p."""
    sigma_true, factor_true, logdet_true = _require_spd(sigma_true)
    sigma_hat = np.asarray(sigma_hat, dtype=float)
    if sigma_hat.shape != sigma_true.shape:
        raise DataError("dimension mismatch between truth and estimate")
    _, logdet_hat = _chol_logdet(sigma_hat)
    if logdet_hat is None:
        return None
    p = sigma_true.shape[0]
    trace = float(np.trace(scipy.linalg.cho_solve(factor_true, sigma_hat)))
    value = trace - (logdet_hat - logdet_true) - p
    if not np.isfinite(value):
        return None
    return float(max(value, 0.0))


def norm_losses(sigma_true, sigma_hat) -> dict:
    """Matrix L1, operator L2, Frobenius and L-infinity norms of the error."""
    diff = np.asarray(sigma_hat, dtype=float) - np.asarray(sigma_true, dtype=float)
    return {
        "norm_l1": float(np.abs(diff).sum(axis=0).max()),
        "norm_l2_operator": float(np.linalg.norm(diff, 2)),
        "norm_frobenius": float(np.linalg.norm(diff, "fro")),
        "norm_linf": float(np.abs(diff).sum(axis=1).max()),
    }


def _precision_zero_mask(omega, zero_tol: float) -> np.ndarray:
    tol = max(zero_tol, PRECISION_PATTERN_RTOL * float(np.abs(omega).max(initial=0.0)))
    return np.abs(omega) <= tol


def zero_recovery(true_factors: CholeskyFactors, est_factors: CholeskyFactors,
                  zero_tol: float = 0.0):
    """Percentages of true zeros estimated as zeros, in the factor and in the
    reconstructed precision (strictly-below-diagonal entries).

    Returns (pct_cholesky, pct_precision); a component is None when the true
    zero set there is empty.
    """
    if true_factors.p != est_factors.p:
        raise DataError("factor dimensions differ")
    p = true_factors.p
    lower = np.tril_indices(p, k=-1)

    true_phi = true_factors.phi_matrix()[lower]
    est_phi = est_factors.phi_matrix()[lower]
    true_zero = true_phi == 0.0
    if true_zero.any():
        hit = np.abs(est_phi[true_zero]) <= zero_tol
        pct_chol = 100.0 * float(hit.sum()) / float(true_zero.sum())
    else:
        pct_chol = None

    true_omega = reconstruct_precision(true_factors)[lower]
    est_omega = reconstruct_precision(est_factors)
    est_zero = _precision_zero_mask(est_omega, zero_tol)[lower]
    omega_zero = true_omega == 0.0
    if omega_zero.any():
        pct_prec = 100.0 * float(est_zero[omega_zero].sum()) / float(omega_zero.sum())
    else:
        pct_prec = None
    return pct_chol, pct_prec


def zero_frequency(fits, zero_tol: float = 0.0) -> np.ndarray:
    """Entrywise fraction of fits in which each matrix entry is zero.

    ``fits`` holds either CholeskyFactors (patterns taken from T) or
    precision matrices (patterns with roundoff-absorbing tolerance).  The
    diagonal is reported as 0 since it is never zero.
    """
    fits = list(fits)
    if not fits:
        raise DataError("zero_frequency needs at least one fit")
    first = fits[0]
    p = first.p if isinstance(first, CholeskyFactors) else np.asarray(first).shape[0]
    total = np.zeros((p, p))
    for fit in fits:
        if isinstance(fit, CholeskyFactors):
            if fit.p != p:
                raise DataError("fits have differing dimensions")
            mask = np.abs(fit.t_matrix()) <= zero_tol
        else:
            omega = np.asarray(fit, dtype=float)
            if omega.shape != (p, p):
                raise DataError("fits have differing dimensions")
            mask = _precision_zero_mask(omega, zero_tol)
        total += mask
    freq = total / len(fits)
    np.fill_diagonal(freq, 0.0)
    return freq


def evaluate_fit(sigma_true, fitted, true_factors: CholeskyFactors = None,
                 zero_tol: float = 0.0) -> LossReport:
    """Bundle every metric for one fitted estimate against the truth."""
    kl = kl_loss(sigma_true, fitted.sigma)
    ent = entropy_loss(sigma_true, fitted.sigma)
    norms = norm_losses(sigma_true, fitted.sigma)
    pct_chol = pct_prec = None
    if true_factors is not None and fitted.factors is not None:
        pct_chol, pct_prec = zero_recovery(true_factors, fitted.factors, zero_tol)
    return LossReport(kl=kl, entropy=ent, pct_zeros_cholesky=pct_chol,
                      pct_zeros_precision=pct_prec, **norms)
