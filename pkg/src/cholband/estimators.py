"""Covariance estimators.

Five families: adaptively banded Cholesky fits driven by the nested
penalties, Lasso-penalized Cholesky fits, nonadaptive banding with a common
bandwidth, Ledoit-Wolf shrinkage toward the identity, and the plain sample
covariance.  The penalized fits alternate a closed-form variance update with
a coefficient update solved either by a ridge surrogate (local quadratic
approximation) or by exact coordinate-wise minimization ("shooting").
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _rowsolve
from .exceptions import DataError, NumericalError
from .factors import (
    CholeskyFactors,
    Dataset,
    reconstruct_covariance,
    reconstruct_precision,
    update_sigma,
    variance_floor,
)
from .penalties import (
    NESTED_KINDS,
    MarginalCoefs,
    PenaltyKind,
    PenaltySpec,
    enforce_contiguity,
    eval_penalty,
    lqa_weights,
)

SOLVERS = ("lqa", "shooting")

_KIND_CODES = {
    PenaltyKind.LASSO_L1: _rowsolve.KIND_LASSO,
    PenaltyKind.NESTED_J0: _rowsolve.KIND_J0,
    PenaltyKind.NESTED_J1: _rowsolve.KIND_J1,
    PenaltyKind.NESTED_J2: _rowsolve.KIND_J2,
}


@dataclass(frozen=True)
class FitOptions:
    """Iteration controls for the penalized row fits.

    ``zero_threshold`` is the final hard-zero cutoff and ``stability_floor``
    the in-iteration magnitude floor; both default to 1e-10.
    """

    solver: str = "shooting"
    max_iters: int = 100
    rel_tol: float = 1e-6
    zero_threshold: float = 1e-10
    stability_floor: float = 1e-10

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise DataError(f"unknown solver {self.solver!r}; expected one of {SOLVERS}")
        if self.max_iters < 1:
            raise DataError("max_iters must be positive")
        if self.rel_tol <= 0 or self.zero_threshold <= 0 or self.stability_floor <= 0:
            raise DataError("tolerances must be positive")


def _fmt_param(x: float) -> str:
    return format(float(x), "g")


@dataclass(frozen=True)
class EstimatorChoice:
    """One concrete estimator: a method tag plus its tuning parameters."""

    method: str
    k: int = None
    spec: PenaltySpec = None

    def __post_init__(self):
        if self.method in ("sample", "ledoit_wolf"):
            if self.k is not None or self.spec is not None:
                raise DataError(f"{self.method} takes no tuning parameters")
        elif self.method == "banding":
            if self.k is None or self.k < 0:
                raise DataError("banding requires a nonnegative bandwidth k")
        elif self.method == "lasso":
            if self.spec is None or self.spec.kind is not PenaltyKind.LASSO_L1:
                raise DataError("lasso requires an L1 penalty spec")
        elif self.method == "adaptive":
            if self.spec is None or self.spec.kind not in NESTED_KINDS:
                raise DataError("adaptive banding requires a nested penalty spec")
        else:
            raise DataError(f"unknown estimator method {self.method!r}")

    @staticmethod
    def sample() -> "EstimatorChoice":
        return EstimatorChoice(method="sample")

    @staticmethod
    def ledoit_wolf() -> "EstimatorChoice":
        return EstimatorChoice(method="ledoit_wolf")

    @staticmethod
    def banding(k: int) -> "EstimatorChoice":
        return EstimatorChoice(method="banding", k=int(k))

    @staticmethod
    def lasso(lam: float) -> "EstimatorChoice":
        return EstimatorChoice(method="lasso", spec=PenaltySpec(PenaltyKind.LASSO_L1, lam))

    @staticmethod
    def adaptive(spec: PenaltySpec) -> "EstimatorChoice":
        return EstimatorChoice(method="adaptive", spec=spec)

    def family(self) -> str:
        """Grid/CSV tag: estimators sharing a family share one tuning grid."""
        if self.method == "ledoit_wolf":
            return "ledoit-wolf"
        if self.method == "adaptive":
            return f"adaptive-{self.spec.kind.value}"
        return self.method

    def label(self) -> str:
        if self.method == "banding":
            return f"banding(k={self.k})"
        if self.method == "lasso":
            return f"lasso(lambda={_fmt_param(self.spec.lam)})"
        if self.method == "adaptive":
            name = f"adaptive-{self.spec.kind.value}"
            if self.spec.kind is PenaltyKind.NESTED_J2:
                return (
                    f"{name}(lambda1={_fmt_param(self.spec.lam)},"
                    f"lambda2={_fmt_param(self.spec.lam2)})"
                )
            return f"{name}(lambda={_fmt_param(self.spec.lam)})"
        return self.family()


def marginal_coefficients(data: Dataset) -> MarginalCoefs:
    """Single-predictor coefficients phi*_{jt} = <x_t, x_j> / <x_t, x_t>."""
    gram = data.values.T @ data.values
    diag = gram.diagonal().copy()
    zero = np.nonzero(diag <= 0.0)[0]
    if zero.size:
        raise DataError(f"column {zero[0] + 1} has zero mean-square; marginals undefined")
    table = np.tril((gram / diag[:, None]).T, -1)
    return MarginalCoefs(table=table)


def sample_covariance(data: Dataset) -> np.ndarray:
    """S = X'X / n (divisor n; expects centered input for a true covariance)."""
    s = data.values.T @ data.values / data.n
    return (s + s.T) / 2.0


def fit_ledoit_wolf(data: Dataset) -> np.ndarray:
    """Shrinkage of the sample covariance toward a scaled identity.

    Returns ``(b2/d2) m I + (a2/d2) S`` with ``m = tr(S)/p``,
    ``d2 = |S - mI|_F^2 / p``, ``b2 = min(bbar2, d2)``, ``a2 = d2 - b2`` and
    ``bbar2`` the averaged squared distance of the per-observation outer
    products from S.
    """
    if data.n < 2:
        raise DataError("shrinkage needs at least 2 observations")
    x = data.values
    n, p = x.shape
    s = sample_covariance(data)
    m = float(np.trace(s)) / p
    if m == 0.0:
        warnings.warn("sample covariance is zero; shrinkage target degenerate", RuntimeWarning)
    d2 = float(((s - m * np.eye(p)) ** 2).sum()) / p
    if d2 == 0.0:
        return s.copy()
    sq_norms = (x * x).sum(axis=1)
    bbar2 = (float((sq_norms * sq_norms).sum()) - n * float((s * s).sum())) / (n * n * p)
    bbar2 = max(bbar2, 0.0)
    b2 = min(bbar2, d2)
    a2 = d2 - b2
    return (b2 / d2) * m * np.eye(p) + (a2 / d2) * s


def _require_centered(data: Dataset) -> None:
    if not data.centered:
        raise DataError("estimator requires centered data; center columns first")
    if data.n < 2:
        raise DataError(f"estimation needs at least 2 observations, got {data.n}")


def fit_banding(data: Dataset, k: int) -> CholeskyFactors:
    """Common-bandwidth fit: row j regresses on its min(k, j-1) closest
    predecessors by unpenalized least squares."""
    _require_centered(data)
    n, p = data.values.shape
    k_cap = min(p - 1, n - 2)
    if not 0 <= k <= k_cap:
        raise DataError(f"bandwidth k={k} outside [0, {k_cap}]")
    x = data.values
    rows = [np.zeros(0)]
    variances = np.empty(p)
    variances[0] = update_sigma(1, np.zeros(0), data).sigma2
    deficient = []
    for j in range(2, p + 1):
        band = min(k, j - 1)
        phi = np.zeros(j - 1)
        if band:
            design = x[:, j - 1 - band : j - 1]
            sol, _, rank, _ = np.linalg.lstsq(design, x[:, j - 1], rcond=None)
            if rank < band:
                deficient.append(j)
            phi[j - 1 - band :] = sol
        rows.append(phi)
        variances[j - 1] = update_sigma(j, phi, data).sigma2
    if deficient:
        warnings.warn(
            f"rank-deficient banding design in rows {deficient}; minimum-norm solution used",
            RuntimeWarning,
        )
    return CholeskyFactors(rows=tuple(rows), variances=variances)


# ---------------------------------------------------------------------------
# Penalized row solvers
# ---------------------------------------------------------------------------


def _apply_floor(phi: np.ndarray, floor: float) -> np.ndarray:
    """Push nonzero magnitudes below the stability floor up to the floor."""
    out = phi.copy()
    small = (out != 0.0) & (np.abs(out) < floor)
    if small.any():
        out[small] = np.sign(out[small]) * floor
    return out


def _gram_rss(yy: float, g: np.ndarray, gsub_phi: np.ndarray, phi: np.ndarray) -> float:
    rss = yy - 2.0 * float(g @ phi) + float(phi @ gsub_phi)
    return max(rss, 0.0)


def lqa_row_update(j, phi_prev, sigma2, data: Dataset, spec: PenaltySpec,
                   marginals: MarginalCoefs = None) -> np.ndarray:
    """One ridge step of the local quadratic surrogate for row j.

    Coefficients with infinite surrogate weight stay frozen at zero; the
    remaining active block solves a small positive-definite system exactly.
    """
    if sigma2 <= 0.0:
        raise DataError("sigma2 must be positive")
    phi_prev = np.asarray(phi_prev, dtype=float)
    m = j - 1
    if phi_prev.shape != (m,):
        raise DataError(f"row {j} expects {m} coefficients")
    x = data.values
    gsub = x[:, :m].T @ x[:, :m]
    g = x[:, :m].T @ x[:, j - 1]
    return _lqa_step(gsub, g, sigma2, spec, phi_prev, marginals)


def _lqa_step(gsub, g, sigma2, spec, phi_prev, marginals) -> np.ndarray:
    w = lqa_weights(spec, phi_prev, marginals)
    active = np.isfinite(w)
    phi = np.zeros_like(phi_prev)
    if not active.any():
        return phi
    a_mat = gsub[np.ix_(active, active)] / sigma2 + np.diag(w[active])
    rhs = g[active] / sigma2
    with warnings.catch_warnings():
        # Huge ridge weights near convergence make the system ill-conditioned
        # by design (they pin dead coefficients); silence scipy's warning.
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        try:
            sol = scipy.linalg.solve(a_mat, rhs, assume_a="pos")
        except np.linalg.LinAlgError:
            size = a_mat.shape[0]
            jitter = 1e-12 * float(np.trace(a_mat)) / size
            warnings.warn("singular ridge system; solved with diagonal jitter", RuntimeWarning)
            sol = scipy.linalg.solve(a_mat + jitter * np.eye(size), rhs, assume_a="sym")
    phi[active] = sol
    return phi


def shooting_row_update(j, phi_prev, sigma2, data: Dataset, spec: PenaltySpec,
                        marginals: MarginalCoefs = None) -> np.ndarray:
    """One full shooting sweep for row j: each coordinate is minimized
    exactly against the untouched (nonconvex) penalty with the others fixed,
    so the row objective never increases across the sweep."""
    if sigma2 <= 0.0:
        raise DataError("sigma2 must be positive")
    phi_prev = np.asarray(phi_prev, dtype=float)
    m = j - 1
    if phi_prev.shape != (m,):
        raise DataError(f"row {j} expects {m} coefficients")
    x = data.values
    gsub = np.ascontiguousarray(x[:, :m].T @ x[:, :m])
    g = np.ascontiguousarray(x[:, :m].T @ x[:, j - 1])
    lead_abs = _lead_abs_for(spec, marginals, j)
    phi = phi_prev.copy()
    s = gsub @ phi
    _, status = _rowsolve.sweep(gsub, g, s, phi, sigma2, _KIND_CODES[spec.kind],
                                spec.lam, spec.lam2, lead_abs,
                                FitOptions().stability_floor)
    if status == 2:
        raise NumericalError("cascade invariant violated: zero between nonzero coefficients")
    return phi


def _lead_abs_for(spec: PenaltySpec, marginals, j: int) -> float:
    if spec.kind is not PenaltyKind.NESTED_J1:
        return 1.0
    if marginals is None:
        raise DataError("scaled nested penalty requires marginal coefficients")
    lead = abs(marginals.lead(j))
    if lead == 0.0:
        raise DataError(f"zero marginal coefficient phi*_{{{j},{j - 1}}}; penalty undefined")
    return lead


def _init_row(x, gsub, g, j, p, n, marginals):
    m = j - 1
    if p < n:
        try:
            return scipy.linalg.solve(gsub, g, assume_a="pos")
        except np.linalg.LinAlgError:
            return np.linalg.lstsq(x[:, :m], x[:, j - 1], rcond=None)[0]
    return marginals.row(j).copy()


def _fit_row_lqa(gsub, g, yy, phi, n, var_floor, spec, marginals, opts):
    """Alternating variance/ridge iteration for one row under the surrogate.

    Iterates until the penalized objective settles and no coefficient moves
    by more than the stability floor, so dead coefficients have decayed to
    the floor before the final hard thresholding."""
    floor = opts.stability_floor
    rss = _gram_rss(yy, g, gsub @ phi, phi)
    sigma2 = max(rss / n, var_floor)
    obj = n * math.log(sigma2) + rss / sigma2 + eval_penalty(spec, phi, marginals)
    for _ in range(opts.max_iters):
        phi_new = _apply_floor(_lqa_step(gsub, g, sigma2, spec, phi, marginals), floor)
        max_move = float(np.max(np.abs(phi_new - phi)))
        rss = _gram_rss(yy, g, gsub @ phi_new, phi_new)
        sigma2_new = max(rss / n, var_floor)
        obj_new = n * math.log(sigma2_new) + rss / sigma2_new \
            + eval_penalty(spec, phi_new, marginals)
        obj_ok = (math.isfinite(obj) and math.isfinite(obj_new)
                  and abs(obj_new - obj) < opts.rel_tol * max(1.0, abs(obj)))
        phi, sigma2, obj = phi_new, sigma2_new, obj_new
        if obj_ok and max_move <= floor:
            break
    return phi


def _fit_penalized(data: Dataset, spec: PenaltySpec, opts: FitOptions,
                   contiguous: bool) -> CholeskyFactors:
    _require_centered(data)
    x = data.values
    n, p = x.shape
    gram = x.T @ x
    need_marginals = spec.kind is PenaltyKind.NESTED_J1 or p >= n
    marginals = marginal_coefficients(data) if need_marginals else None
    kind_code = _KIND_CODES[spec.kind]

    rows = [np.zeros(0)]
    variances = np.empty(p)
    variances[0] = update_sigma(1, np.zeros(0), data).sigma2
    degenerate = []
    floor = opts.stability_floor

    for j in range(2, p + 1):
        m = j - 1
        gsub = np.ascontiguousarray(gram[:m, :m])
        g = np.ascontiguousarray(gram[:m, j - 1])
        yy = float(gram[j - 1, j - 1])
        lead_abs = _lead_abs_for(spec, marginals, j)
        var_floor = variance_floor(data, j)
        phi = _apply_floor(np.asarray(_init_row(x, gsub, g, j, p, n, marginals), dtype=float),
                           floor)

        if opts.solver == "shooting":
            phi, _, status = _rowsolve.fit_row(
                gsub, g, yy, phi, float(n), var_floor, kind_code,
                spec.lam, spec.lam2, lead_abs, floor, opts.rel_tol,
                opts.zero_threshold, opts.max_iters)
            if status == 1:
                raise NumericalError(f"shooting objective increased in row {j}")
            if status == 2:
                raise NumericalError(
                    f"cascade invariant violated in row {j}: zero between nonzero coefficients")
        else:
            phi = _fit_row_lqa(gsub, g, yy, phi, n, var_floor, spec, marginals, opts)
            phi = np.where(np.abs(phi) <= opts.zero_threshold, 0.0, phi)

        if contiguous:
            phi = enforce_contiguity(phi)
        fit = update_sigma(j, phi, data)
        if fit.degenerate:
            degenerate.append(j)
        rows.append(phi)
        variances[j - 1] = fit.sigma2

    if degenerate:
        warnings.warn(f"degenerate (exact-fit) rows clamped to variance floor: {degenerate}",
                      RuntimeWarning)
    return CholeskyFactors(rows=tuple(rows), variances=variances)


def fit_adaptive_banding(data: Dataset, spec: PenaltySpec,
                         opts: FitOptions = FitOptions()) -> CholeskyFactors:
    """Adaptive banding: each row solves its penalized regression under a
    nested penalty, final coefficients are hard-thresholded at the zero
    cutoff, and supports are forced to contiguous trailing blocks so the
    reconstructed precision is exactly banded."""
    if spec.kind not in NESTED_KINDS:
        raise DataError("adaptive banding requires a nested penalty")
    return _fit_penalized(data, spec, opts, contiguous=True)


def fit_lasso_cholesky(data: Dataset, lam: float,
                       opts: FitOptions = FitOptions()) -> CholeskyFactors:
    """L1-penalized Cholesky fit; zeros may land anywhere in the factor and
    no contiguity is enforced."""
    spec = PenaltySpec(PenaltyKind.LASSO_L1, lam)
    return _fit_penalized(data, spec, opts, contiguous=False)


# ---------------------------------------------------------------------------
# Uniform fit interface
# ---------------------------------------------------------------------------


@dataclass
class FittedEstimate:
    """A fitted estimator: factor form when available, covariance always."""

    choice: EstimatorChoice
    sigma: np.ndarray
    factors: CholeskyFactors = None

    def precision(self):
        """Precision estimate, or None when the covariance is singular."""
        if self.factors is not None:
            return reconstruct_precision(self.factors)
        try:
            factor = scipy.linalg.cho_factor(self.sigma, lower=True)
        except (np.linalg.LinAlgError, ValueError):
            return None
        omega = scipy.linalg.cho_solve(factor, np.eye(self.sigma.shape[0]))
        return (omega + omega.T) / 2.0


def fit_estimator(data: Dataset, choice: EstimatorChoice,
                  opts: FitOptions = FitOptions()) -> FittedEstimate:
    """Fit any estimator choice on centered data."""
    if choice.method == "sample":
        return FittedEstimate(choice=choice, sigma=sample_covariance(data))
    if choice.method == "ledoit_wolf":
        return FittedEstimate(choice=choice, sigma=fit_ledoit_wolf(data))
    if choice.method == "banding":
        factors = fit_banding(data, choice.k)
    elif choice.method == "lasso":
        factors = fit_lasso_cholesky(data, choice.spec.lam, opts)
    else:
        factors = fit_adaptive_banding(data, choice.spec, opts)
    return FittedEstimate(choice=choice, sigma=reconstruct_covariance(factors), factors=factors)
