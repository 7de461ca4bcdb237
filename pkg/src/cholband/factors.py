"""Modified Cholesky data model.

The precision matrix is parameterized as ``omega = T' D^{-1} T`` with
``T = I - Phi`` unit lower triangular and ``D = diag(sigma_j^2)``.  Row j of
``Phi`` holds the coefficients of the regression of variable j on its
predecessors; ``sigma_j^2`` is the residual (innovation) variance.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .exceptions import DataError

# Absolute tolerance factor for the centered-column check (scaled by n).
CENTER_TOL = 1e-8

# Residual variances are clamped below at VARIANCE_FLOOR_SCALE times the
# sample variance of the response column (or 1 if that variance is zero).
VARIANCE_FLOOR_SCALE = 1e-12


@dataclass(frozen=True)
class Dataset:
    """An n-by-p observation matrix plus centering metadata.

    ``column_means`` records the vector subtracted from each row when
    ``centered`` is set (zeros for raw data).
    """

    values: np.ndarray
    centered: bool = False
    column_means: np.ndarray = field(default=None)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DataError("dataset values must be a 2-D array")
        n, p = values.shape
        if n < 1:
            raise DataError("need at least 1 observation")
        if p < 1:
            raise DataError("need at least 1 variable")
        if not np.all(np.isfinite(values)):
            raise DataError("dataset contains non-finite values")
        object.__setattr__(self, "values", values)
        means = self.column_means
        if means is None:
            means = np.zeros(p)
        means = np.asarray(means, dtype=float)
        if means.shape != (p,):
            raise DataError(f"column_means must have length {p}")
        object.__setattr__(self, "column_means", means)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


def raw_dataset(values) -> Dataset:
    """Wrap raw observations without centering."""
    return Dataset(values=np.array(values, dtype=float), centered=False)


def center_columns(values) -> Dataset:
    """Center each column by its own mean and record the means."""
    values = np.array(values, dtype=float)
    if values.ndim != 2:
        raise DataError("dataset values must be a 2-D array")
    means = values.mean(axis=0)
    centered = values - means
    ds = Dataset(values=centered, centered=True, column_means=means)
    sums = np.abs(ds.values.sum(axis=0))
    if np.any(sums > CENTER_TOL * ds.n):
        raise DataError("column sums exceed centering tolerance")
    return ds


def center_with_means(values, means) -> Dataset:
    """Center by externally supplied means (e.g. training means for a
    validation set); the zero-column-sum property is not expected to hold."""
    values = np.array(values, dtype=float)
    means = np.asarray(means, dtype=float)
    return Dataset(values=values - means, centered=True, column_means=means)


@dataclass(frozen=True)
class RowFit:
    """Result of refreshing one regression row: coefficients, residuals and
    the closed-form residual variance (divisor n)."""

    j: int
    phi: np.ndarray
    sigma2: float
    residuals: np.ndarray
    degenerate: bool = False


@dataclass(frozen=True)
class CholeskyFactors:
    """Unit-lower-triangular coefficient rows plus innovation variances.

    ``rows[i]`` holds the length-i coefficient vector of row j = i + 1
    (row 1 is empty).  ``variances[i]`` is sigma_{i+1}^2.
    """

    rows: tuple
    variances: np.ndarray

    def __post_init__(self):
        rows = tuple(np.asarray(r, dtype=float) for r in self.rows)
        variances = np.asarray(self.variances, dtype=float)
        p = len(rows)
        if p < 1:
            raise DataError("factors need at least one row")
        for i, r in enumerate(rows):
            if r.shape != (i,):
                raise DataError(f"row {i + 1} must have {i} coefficients, got {r.shape}")
        if variances.shape != (p,):
            raise DataError(f"variances must have length {p}")
        if not np.all(np.isfinite(variances)):
            raise DataError("variances contain non-finite values")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "variances", variances)

    @property
    def p(self) -> int:
        return len(self.rows)

    def phi_matrix(self) -> np.ndarray:
        """Strictly lower triangular coefficient matrix Phi."""
        p = self.p
        phi = np.zeros((p, p))
        for i, r in enumerate(self.rows):
            phi[i, :i] = r
        return phi

    def t_matrix(self) -> np.ndarray:
        """Unit lower triangular T = I - Phi."""
        return np.eye(self.p) - self.phi_matrix()

    @classmethod
    def from_phi_matrix(cls, phi, variances) -> "CholeskyFactors":
        phi = np.asarray(phi, dtype=float)
        p = phi.shape[0]
        rows = tuple(phi[i, :i].copy() for i in range(p))
        return cls(rows=rows, variances=np.asarray(variances, dtype=float))


def _check_variances(factors: CholeskyFactors) -> None:
    bad = np.nonzero(factors.variances <= 0.0)[0]
    if bad.size:
        raise DataError(f"nonpositive innovation variance in row {bad[0] + 1}")


def reconstruct_precision(factors: CholeskyFactors) -> np.ndarray:
    """Assemble omega = T' D^{-1} T; exact symmetrization kills roundoff."""
    _check_variances(factors)
    t = factors.t_matrix()
    omega = t.T @ (t / factors.variances[:, None])
    return (omega + omega.T) / 2.0


def reconstruct_covariance(factors: CholeskyFactors) -> np.ndarray:
    """Assemble sigma = T^{-1} D (T^{-1})' via a triangular solve.

    Never forms a general matrix inverse; for well-conditioned factors the
    result inverts :func:`reconstruct_precision` to high relative accuracy.
    """
    _check_variances(factors)
    t = factors.t_matrix()
    tinv = solve_triangular(t, np.eye(factors.p), lower=True, unit_diagonal=True)
    sigma = (tinv * factors.variances[None, :]) @ tinv.T
    return (sigma + sigma.T) / 2.0


def row_neg_log_likelihood(j: int, phi, sigma2: float, data: Dataset) -> float:
    """Per-row Gaussian negative log-likelihood contribution,

        n log sigma_j^2 + (1/sigma_j^2) sum_i (x_ij - sum_l phi_jl x_il)^2,

    with the additive constant dropped.
    """
    if sigma2 <= 0.0:
        raise DataError(f"sigma2 must be positive in row {j}, got {sigma2}")
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (j - 1,):
        raise DataError(f"row {j} expects {j - 1} coefficients, got {phi.shape}")
    if j > data.p:
        raise DataError(f"row index {j} exceeds dimension {data.p}")
    resid = data.values[:, j - 1] - data.values[:, : j - 1] @ phi
    return data.n * np.log(sigma2) + float(resid @ resid) / sigma2


def neg_log_likelihood(factors: CholeskyFactors, data: Dataset) -> float:
    """Gaussian negative log-likelihood n log|D| + sum_i x_i' T' D^{-1} T x_i.

    Equals the sum of :func:`row_neg_log_likelihood` over rows; the constant
    term is omitted.
    """
    if data.p != factors.p:
        raise DataError(f"dimension mismatch: data p={data.p}, factors p={factors.p}")
    _check_variances(factors)
    eps = data.values @ factors.t_matrix().T
    rss = (eps * eps).sum(axis=0)
    return float(data.n * np.log(factors.variances).sum() + (rss / factors.variances).sum())


def matrix_neg_log_likelihood(sigma, data: Dataset):
    """Likelihood of an explicit covariance estimate, n log|sigma| + quad form.

    Returns None when the matrix is singular to working precision.
    """
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (data.p, data.p):
        raise DataError("covariance dimension does not match data")
    try:
        factor = cho_factor(sigma, lower=True)
    except np.linalg.LinAlgError:
        return None
    except ValueError:
        return None
    logdet = 2.0 * np.log(np.diag(factor[0])).sum()
    if not np.isfinite(logdet):
        return None
    solved = cho_solve(factor, data.values.T)
    quad = float((data.values.T * solved).sum())
    value = data.n * logdet + quad
    return float(value) if np.isfinite(value) else None


def variance_floor(data: Dataset, j: int) -> float:
    """Lower clamp for the row-j residual variance."""
    col_var = float(np.var(data.values[:, j - 1]))
    return VARIANCE_FLOOR_SCALE * (col_var if col_var > 0.0 else 1.0)


def update_sigma(j: int, phi, data: Dataset) -> RowFit:
    """Step-1 closed form: sigma_j^2 = mean squared residual of row j.

    An exact fit is clamped to the variance floor and flagged degenerate.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (j - 1,):
        raise DataError(f"row {j} expects {j - 1} coefficients, got {phi.shape}")
    resid = data.values[:, j - 1] - data.values[:, : j - 1] @ phi
    sigma2 = float(resid @ resid) / data.n
    floor = variance_floor(data, j)
    degenerate = sigma2 < floor
    if degenerate:
        sigma2 = floor
    return RowFit(j=j, phi=phi, sigma2=sigma2, residuals=resid, degenerate=degenerate)
