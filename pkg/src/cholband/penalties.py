"""Lasso and nested-Lasso penalty families with their ridge surrogates.

The nested penalties chain each coefficient to its closer neighbour through
ratio terms ``|phi_t| / |phi_{t+1}|`` (with 0/0 = 0), so a zero forces all
more distant coefficients to zero and every finite-penalty row has a
contiguous trailing support block.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DataError

INF = math.inf


class PenaltyKind(enum.Enum):
    LASSO_L1 = "lasso"
    NESTED_J0 = "j0"
    NESTED_J1 = "j1"
    NESTED_J2 = "j2"


NESTED_KINDS = (PenaltyKind.NESTED_J0, PenaltyKind.NESTED_J1, PenaltyKind.NESTED_J2)


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty family plus tuning parameters.

    ``lam`` is the single tuning parameter (lambda_1 for the two-parameter
    family); ``lam2`` is used by that family only and ignored elsewhere.
    """

    kind: PenaltyKind
    lam: float
    lam2: float = 0.0

    def __post_init__(self):
        if self.lam < 0.0 or self.lam2 < 0.0:
            raise DataError("penalty parameters must be nonnegative")


@dataclass(frozen=True)
class MarginalCoefs:
    """Single-predictor regression coefficients phi*_{jt}, one per pair t < j.

    ``table[j-1, t-1]`` holds the no-intercept least-squares coefficient from
    regressing column j on column t alone; other entries are zero.
    """

    table: np.ndarray

    def __post_init__(self):
        table = np.asarray(self.table, dtype=float)
        if table.ndim != 2 or table.shape[0] != table.shape[1]:
            raise DataError("marginal coefficient table must be square")
        object.__setattr__(self, "table", table)

    @property
    def p(self) -> int:
        return self.table.shape[0]

    def row(self, j: int) -> np.ndarray:
        return self.table[j - 1, : j - 1]

    def lead(self, j: int) -> float:
        """phi*_{j,j-1}, the coefficient on the closest predecessor."""
        if j < 2 or j > self.p:
            raise DataError(f"no leading marginal coefficient for row {j}")
        return float(self.table[j - 1, j - 2])


def _lead_marginal(marginals, j: int) -> float:
    if marginals is None:
        raise DataError("scaled nested penalty requires marginal coefficients")
    lead = abs(marginals.lead(j))
    if lead == 0.0:
        raise DataError(f"zero marginal coefficient phi*_{{{j},{j - 1}}}; penalty undefined")
    return lead


def _ratio_chain_sum(a: np.ndarray) -> float:
    """Sum of |phi_t| / |phi_{t+1}| over t = 1..m-1 with 0/0 = 0; +inf when a
    nonzero coefficient sits over a zero one."""
    num = a[:-1]
    den = a[1:]
    live = num > 0.0
    if not live.any():
        return 0.0
    if np.any(den[live] == 0.0):
        return INF
    ratios = np.zeros_like(num)
    np.divide(num, den, out=ratios, where=live)
    return float(ratios.sum())


def eval_penalty(spec: PenaltySpec, phi, marginals: MarginalCoefs = None) -> float:
    """Exact penalty value for one coefficient row (may be +inf).

    ``phi`` holds the row-j coefficients ordered by predecessor index, so the
    last entry multiplies the closest predecessor.  An empty row costs 0.
    """
    phi = np.asarray(phi, dtype=float)
    m = phi.shape[0]
    if m == 0:
        return 0.0
    a = np.abs(phi)
    j = m + 1
    if spec.kind is PenaltyKind.LASSO_L1:
        return float(spec.lam * a.sum())
    if spec.kind is PenaltyKind.NESTED_J2:
        total = spec.lam * a.sum()
        if spec.lam2 > 0.0:
            chain = _ratio_chain_sum(a)
            if chain == INF:
                return INF
            total += spec.lam2 * chain
        return float(total)
    # Single-parameter nested penalties.
    if spec.kind is PenaltyKind.NESTED_J1:
        lead_term = float(a[-1]) / _lead_marginal(marginals, j)
    else:
        lead_term = float(a[-1])
    if spec.lam == 0.0:
        return 0.0
    chain = _ratio_chain_sum(a)
    if chain == INF:
        return INF
    return float(spec.lam * (lead_term + chain))


def _weight_term(coef: float, denom: float) -> float:
    # coef / (2 denom) with the 0-coefficient term dropped and a zero
    # denominator freezing the coefficient (infinite weight).
    if coef == 0.0:
        return 0.0
    if denom == 0.0:
        return INF
    return coef / (2.0 * denom)


def lqa_weights(spec: PenaltySpec, phi_prev, marginals: MarginalCoefs = None) -> np.ndarray:
    """Ridge weights of the local quadratic surrogate at ``phi_prev``.

    The surrogate penalty is ``sum_t w_t phi_t^2`` with the ratio
    denominators frozen at the previous iterate.  A weight of +inf marks a
    coefficient frozen at zero, to be excluded from the ridge solve.
    """
    phi_prev = np.asarray(phi_prev, dtype=float)
    m = phi_prev.shape[0]
    a = np.abs(phi_prev)
    j = m + 1
    w = np.zeros(m)
    if m == 0:
        return w
    kind = spec.kind
    if kind is PenaltyKind.LASSO_L1:
        for i in range(m):
            w[i] = _weight_term(spec.lam, a[i])
        return w
    if kind is PenaltyKind.NESTED_J2:
        for i in range(m):
            w[i] = _weight_term(spec.lam, a[i])
            if i < m - 1:
                w[i] += _weight_term(spec.lam2, a[i] * a[i + 1])
        return w
    # Chained single-parameter weights.
    for i in range(m - 1):
        w[i] = _weight_term(spec.lam, a[i] * a[i + 1])
    if kind is PenaltyKind.NESTED_J1:
        w[m - 1] = _weight_term(spec.lam, a[m - 1] * _lead_marginal(marginals, j))
    else:
        w[m - 1] = _weight_term(spec.lam, a[m - 1])
    return w


def band_support(phi, zero_tol: float = 0.0) -> int:
    """Bandwidth k_j: the number of trailing nonzero coefficients.

    Contiguity is implied: scanning from the closest predecessor outward,
    counting stops at the first (near-)zero, so coefficients beyond a gap do
    not enlarge the reported support.
    """
    phi = np.asarray(phi, dtype=float)
    k = 0
    for i in range(phi.shape[0] - 1, -1, -1):
        if abs(phi[i]) <= zero_tol:
            break
        k += 1
    return k


def enforce_contiguity(phi, zero_tol: float = 0.0) -> np.ndarray:
    """Zero everything outside the trailing nonzero block of the row."""
    phi = np.asarray(phi, dtype=float)
    k = band_support(phi, zero_tol)
    out = np.zeros_like(phi)
    if k:
        out[phi.shape[0] - k :] = phi[phi.shape[0] - k :]
    return out
