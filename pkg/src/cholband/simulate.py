"""Ground-truth covariance models and seeded sampling.

All randomness flows through the counter-based Philox bit generator keyed by
``SeedSequence(base, spawn_key=(stream,))``, so every draw is a pure function
of the (base, stream) pair and replicate streams never overlap.  Gaussian
variates use numpy's ``standard_normal`` (ziggurat) on that generator.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import DataError
from .factors import CholeskyFactors, Dataset, reconstruct_covariance, reconstruct_precision
from .penalties import band_support

# All three models share this innovation variance.
TRUE_SIGMA2 = 0.01

CONDITION_WARN_THRESHOLD = 1e10


@dataclass(frozen=True)
class RngSeed:
    """A reproducible stream: 64-bit base entropy plus a replicate index."""

    base: int
    stream: int = 0

    def generator(self, *subkeys: int) -> np.random.Generator:
        seq = np.random.SeedSequence(self.base, spawn_key=(self.stream, *subkeys))
        return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class CovModel:
    """A ground-truth model: factor parameterization plus cached sigma and
    omega, and the per-row bandwidths of the true factor."""

    name: str
    p: int
    true_factors: CholeskyFactors
    sigma: np.ndarray
    omega: np.ndarray
    true_band: tuple


def _finalize(name: str, rows) -> CovModel:
    p = len(rows)
    factors = CholeskyFactors(rows=tuple(rows), variances=np.full(p, TRUE_SIGMA2))
    sigma = reconstruct_covariance(factors)
    omega = reconstruct_precision(factors)
    cond = float(np.linalg.cond(sigma))
    if cond > CONDITION_WARN_THRESHOLD:
        warnings.warn(f"true covariance poorly conditioned (cond={cond:.3g})", RuntimeWarning)
    band = tuple(band_support(r) for r in rows)
    return CovModel(name=name, p=p, true_factors=factors, sigma=sigma, omega=omega,
                    true_band=band)


def make_sigma1(p: int) -> CovModel:
    """Tri-diagonal truth: each row regresses on its closest predecessor with
    coefficient 0.8, so the precision is tri-diagonal."""
    if p < 1:
        raise DataError("p must be at least 1")
    rows = []
    for j in range(1, p + 1):
        row = np.zeros(j - 1)
        if j > 1:
            row[-1] = 0.8
        rows.append(row)
    return _finalize("sigma1", rows)


def make_sigma2(p: int) -> CovModel:
    """Dense truth with geometrically decaying coefficients 0.5^(j-j')."""
    if p < 1:
        raise DataError("p must be at least 1")
    rows = []
    for j in range(1, p + 1):
        lags = np.arange(j - 1, 0, -1)
        rows.append(0.5 ** lags.astype(float))
    return _finalize("sigma2", rows)


def default_blocks(p: int) -> int:
    """Independent-block count used for the random-bandwidth model: large
    dimensions are split to keep the truth well conditioned."""
    if p >= 200:
        return 6
    if p >= 100:
        return 3
    return 1


def make_sigma3(p: int, blocks: int = None, seed: RngSeed = RngSeed(0)) -> CovModel:
    """Random variable-length rows: within each contiguous block, row j picks
    a uniformly random starting lag in [1, ceil(j/2)] (local indexing) and
    sets all closer coefficients to 0.5.  No cross-block coefficients."""
    if p < 1:
        raise DataError("p must be at least 1")
    if blocks is None:
        blocks = default_blocks(p)
    if blocks < 1 or blocks > p:
        raise DataError(f"blocks must lie in [1, {p}], got {blocks}")
    rng = seed.generator()
    base, rem = divmod(p, blocks)
    sizes = [base + 1 if b < rem else base for b in range(blocks)]
    rows = [np.zeros(j) for j in range(p)]
    offset = 0
    for size in sizes:
        for local_j in range(2, size + 1):
            hi = (local_j + 1) // 2  # ceil(j/2)
            k_start = int(rng.integers(1, hi + 1))
            global_j = offset + local_j
            row = rows[global_j - 1]
            row[offset + k_start - 1 : offset + local_j - 1] = 0.5
        offset += size
    return _finalize("sigma3", rows)


def make_model(name: str, p: int, blocks: int = None, seed: RngSeed = RngSeed(0)) -> CovModel:
    if name == "sigma1":
        return make_sigma1(p)
    if name == "sigma2":
        return make_sigma2(p)
    if name == "sigma3":
        return make_sigma3(p, blocks=blocks, seed=seed)
    raise DataError(f"unknown model {name!r}")


def sample_gaussian(model: CovModel, n: int, seed: RngSeed) -> Dataset:
    """Draw n observations from N(0, sigma); returned uncentered."""
    if n < 1:
        raise DataError("n must be at least 1")
    rng = seed.generator()
    z = rng.standard_normal((n, model.p))
    chol = np.linalg.cholesky(model.sigma)
    return Dataset(values=z @ chol.T, centered=False)


def sample_t3(model: CovModel, n: int, seed: RngSeed) -> Dataset:
    """Multivariate t with 3 degrees of freedom and scale matrix sigma.

    Each row is a Gaussian draw divided by sqrt(w/3) with an independent
    chi-square(3) weight, so the distribution's covariance is 3 sigma; losses
    downstream are still measured against sigma itself.
    """
    if n < 1:
        raise DataError("n must be at least 1")
    rng = seed.generator()
    z = rng.standard_normal((n, model.p))
    w = rng.chisquare(3.0, size=n)
    chol = np.linalg.cholesky(model.sigma)
    values = (z @ chol.T) / np.sqrt(w / 3.0)[:, None]
    return Dataset(values=values, centered=False)


def sample(model: CovModel, distribution: str, n: int, seed: RngSeed) -> Dataset:
    if distribution == "gaussian":
        return sample_gaussian(model, n, seed)
    if distribution == "t3":
        return sample_t3(model, n, seed)
    raise DataError(f"unknown distribution {distribution!r}")
