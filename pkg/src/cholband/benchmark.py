"""Reproducible Monte Carlo benchmark: simulate, tune, fit, score, report.

Replications use disjoint Philox streams (3r, 3r+1, 3r+2 for truth, train
and validation), may run in parallel processes, and are reduced in
replication order so outputs are byte-identical regardless of parallelism.
The ``CHOLBAND_THREADS`` environment variable caps the worker count.
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .csvio import fmt_value, write_matrix, write_factor_file, write_table
from .exceptions import DataError
from .factors import center_columns, center_with_means
from .losses import LossReport, evaluate_fit, zero_frequency
from .selection import FAMILIES, default_grid, fit_and_select_on_validation
from .estimators import FitOptions
from .simulate import RngSeed, make_model, sample

DEFAULT_ESTIMATORS = ("sample", "ledoit-wolf", "lasso", "adaptive-j1", "adaptive-j2", "banding")

FACTOR_FAMILIES = ("banding", "lasso", "adaptive-j0", "adaptive-j1", "adaptive-j2")

THREAD_ENV_VAR = "CHOLBAND_THREADS"


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a benchmark run depends on; outputs are a pure function
    of this object."""

    model: str = "sigma1"
    p: int = 30
    blocks: int = None
    distribution: str = "gaussian"
    n_train: int = 100
    n_valid: int = 100
    replications: int = 50
    estimators: tuple = DEFAULT_ESTIMATORS
    grids: dict = field(default_factory=dict)
    seed: int = 0
    solver: str = "shooting"
    fixed_truth: bool = False
    output_dir: str = None

    def __post_init__(self):
        if self.model not in ("sigma1", "sigma2", "sigma3"):
            raise DataError(f"unknown model {self.model!r}")
        if self.distribution not in ("gaussian", "t3"):
            raise DataError(f"unknown distribution {self.distribution!r}")
        for count, name in ((self.p, "p"), (self.n_train, "n_train"),
                            (self.n_valid, "n_valid"), (self.replications, "replications")):
            if count < 1:
                raise DataError(f"{name} must be positive, got {count}")
        if not self.estimators:
            raise DataError("estimator list must be non-empty")
        for family in self.estimators:
            if family not in FAMILIES:
                raise DataError(f"unknown estimator {family!r}; choose from {FAMILIES}")
        object.__setattr__(self, "estimators", tuple(self.estimators))

    def fit_options(self) -> FitOptions:
        return FitOptions(solver=self.solver)


@dataclass
class RepRecord:
    replication: int
    family: str
    selected: str
    losses: LossReport
    factors: object = None  # CholeskyFactors for factor-based families
    precision: np.ndarray = None


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    rows: list
    summaries: dict  # family -> metric -> (mean, se)
    zero_freq: dict  # family -> {"factor": matrix, "precision": matrix}

    def values(self, family: str, metric: str) -> list:
        return [getattr(r.losses, metric) for r in self.rows if r.family == family]

    def mean(self, family: str, metric: str):
        return self.summaries[family][metric][0]


def _truth_for(config: ExperimentConfig, replication: int):
    if config.model == "sigma3":
        stream = 0 if config.fixed_truth else 3 * replication
        return make_model("sigma3", config.p, blocks=config.blocks,
                          seed=RngSeed(config.seed, stream))
    return make_model(config.model, config.p)


def _grid_for(config: ExperimentConfig, family: str, p: int, n: int):
    overrides = config.grids.get(family, {})
    return default_grid(family, p, n,
                        lambdas=overrides.get("lambda"),
                        ratios=overrides.get("lambda2_ratio"),
                        ks=overrides.get("k"))


def _run_replication(config: ExperimentConfig, replication: int) -> list:
    model = _truth_for(config, replication)
    opts = config.fit_options()
    train_raw = sample(model, config.distribution, config.n_train,
                       RngSeed(config.seed, 3 * replication + 1))
    valid_raw = sample(model, config.distribution, config.n_valid,
                       RngSeed(config.seed, 3 * replication + 2))
    train = center_columns(train_raw.values)
    valid = center_with_means(valid_raw.values, train.column_means)
    records = []
    for family in config.estimators:
        grid = _grid_for(config, family, config.p, config.n_train)
        best, _, fitted = fit_and_select_on_validation(train, valid, grid, opts)
        losses = evaluate_fit(model.sigma, fitted, true_factors=model.true_factors)
        precision = fitted.precision() if fitted.factors is not None else None
        records.append(RepRecord(replication=replication, family=family,
                                 selected=best.label(), losses=losses,
                                 factors=fitted.factors, precision=precision))
    return records


def _worker_count(config: ExperimentConfig) -> int:
    env = os.environ.get(THREAD_ENV_VAR)
    workers = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(workers, config.replications))


def _mean_se(values):
    if any(v is None for v in values):
        return None, None
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, None
    se = float(arr.std(ddof=1) / math.sqrt(arr.size))
    return mean, se


def summarize(rows, estimators) -> dict:
    summaries = {}
    for family in estimators:
        per_metric = {}
        for metric in LossReport.FIELDS:
            values = [r.losses.as_dict()[metric] for r in rows if r.family == family]
            per_metric[metric] = _mean_se(values)
        summaries[family] = per_metric
    return summaries


def run_benchmark(config: ExperimentConfig) -> ExperimentReport:
    """Run all replications, aggregate, and write CSV artifacts.

    Deterministic given the config: replication r always uses streams
    (3r, 3r+1, 3r+2) of the base seed no matter how many workers run.
    """
    workers = _worker_count(config)
    reps = range(config.replications)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_rep = list(pool.map(_run_replication, [config] * config.replications, reps))
    else:
        per_rep = [_run_replication(config, r) for r in reps]
    rows = [record for records in per_rep for record in records]

    summaries = summarize(rows, config.estimators)
    zero_freq = {}
    for family in config.estimators:
        if family not in FACTOR_FAMILIES:
            continue
        factor_fits = [r.factors for r in rows if r.family == family]
        precisions = [r.precision for r in rows if r.family == family]
        zero_freq[family] = {
            "factor": zero_frequency(factor_fits, zero_tol=0.0),
            "precision": zero_frequency(precisions, zero_tol=0.0),
        }

    report = ExperimentReport(config=config, rows=rows, summaries=summaries,
                              zero_freq=zero_freq)
    if config.output_dir is not None:
        write_report(report, Path(config.output_dir))
    return report


def _summary_header():
    header = ["estimator"]
    for metric in LossReport.FIELDS:
        header.extend([f"{metric}_mean", f"{metric}_se"])
    return header


def write_report(report: ExperimentReport, out_dir: Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    summary_rows = []
    for family in report.config.estimators:
        row = [family]
        for metric in LossReport.FIELDS:
            mean, se = report.summaries[family][metric]
            row.extend([mean, se])
        summary_rows.append(row)
    write_table(out_dir / "summary.csv", _summary_header(), summary_rows)

    rep_header = ["replication", "estimator", "selected", *LossReport.FIELDS]
    rep_rows = []
    for record in report.rows:
        losses = record.losses.as_dict()
        rep_rows.append([record.replication, record.family, record.selected,
                         *[losses[m] for m in LossReport.FIELDS]])
    write_table(out_dir / "replications.csv", rep_header, rep_rows)

    for family, freq in report.zero_freq.items():
        write_matrix(out_dir / f"zero_freq_factor_{family}.csv", freq["factor"])
        write_matrix(out_dir / f"zero_freq_precision_{family}.csv", freq["precision"])

    fits_dir = out_dir / "fits"
    for record in report.rows:
        if record.factors is None:
            continue
        family_dir = fits_dir / record.family
        family_dir.mkdir(parents=True, exist_ok=True)
        write_factor_file(family_dir / f"rep{record.replication:03d}.csv", record.factors)
