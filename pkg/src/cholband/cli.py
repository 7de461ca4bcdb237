"""Command-line driver.

Subcommands: benchmark (Monte Carlo experiment), estimate (one-shot fit on a
CSV), classify (train/test discriminant analysis), heatmap (zero-frequency
matrix from stored fits) and simulate (dataset export).

Exit codes: 0 success, 2 usage or config error, 3 I/O error, 4 numerical
failure.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from .benchmark import DEFAULT_ESTIMATORS, ExperimentConfig, run_benchmark
from .csvio import (
    read_factor_file,
    read_labeled_csv,
    read_matrix,
    read_unlabeled_csv,
    write_factor_file,
    write_matrix,
    write_table,
)
from .discriminant import SelectionProtocol, fit_classifier, predict_many, test_error
from .exceptions import DataError, NumericalError
from .factors import center_columns, reconstruct_precision
from .losses import zero_frequency
from .estimators import EstimatorChoice, FitOptions, fit_estimator
from .penalties import PenaltyKind, PenaltySpec, band_support
from .selection import FAMILIES, default_grid, select_kfold
from .simulate import RngSeed, make_model, sample

CONFIG_KEYS = """\
Config file keys (key = value, '#' comments, CLI flags override):
  model        sigma1 | sigma2 | sigma3
  p            dimension
  blocks       independent blocks for sigma3
  dist         gaussian | t3
  n_train      training sample size
  n_valid      validation sample size
  reps         number of replications
  estimators   comma-separated estimator names
  grid         grid override, may repeat (see --grid)
  solver       lqa | shooting
  seed         base RNG seed
  fixed_truth  true | false (freeze the sigma3 realization)
  out          output directory
"""

GRID_HELP = (
    "grid override FAMILY:PARAM=VALUES with PARAM in {lambda, lambda2_ratio, k} "
    "and VALUES either comma-separated numbers or logspace:LO:HI:COUNT "
    "(powers of ten); repeatable"
)


def _parse_values(text: str):
    if text.startswith("logspace:"):
        parts = text.split(":")
        if len(parts) != 4:
            raise DataError(f"bad logspace spec {text!r}; expected logspace:LO:HI:COUNT")
        lo, hi, count = float(parts[1]), float(parts[2]), int(parts[3])
        return tuple(np.logspace(lo, hi, count))
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise DataError(f"bad grid values {text!r}")


def _parse_grid_spec(spec: str) -> tuple:
    head, sep, values = spec.partition("=")
    if not sep:
        raise DataError(f"bad grid spec {spec!r}; expected FAMILY:PARAM=VALUES")
    family, sep, param = head.partition(":")
    if not sep:
        raise DataError(f"bad grid spec {spec!r}; expected FAMILY:PARAM=VALUES")
    if family not in FAMILIES:
        raise DataError(f"unknown estimator family {family!r} in grid spec")
    if param not in ("lambda", "lambda2_ratio", "k"):
        raise DataError(f"unknown grid parameter {param!r}")
    parsed = _parse_values(values)
    if param == "k":
        parsed = tuple(int(v) for v in parsed)
    return family, param, parsed


def _merge_grids(specs) -> dict:
    grids = {}
    for spec in specs or ():
        family, param, values = _parse_grid_spec(spec)
        grids.setdefault(family, {})[param] = values
    return grids


def _read_config_file(path: Path) -> dict:
    raw = {}
    grid_specs = []
    for i, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise DataError(f"{path}: line {i}: expected key = value")
        key = key.strip()
        value = value.strip()
        if key == "grid":
            grid_specs.append(value)
        else:
            raw[key] = value
    if grid_specs:
        raw["grid"] = grid_specs
    return raw


def _bool_from(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise DataError(f"expected a boolean, got {text!r}")


def _family_choice(family: str) -> EstimatorChoice:
    """A representative choice for a family; tunable families get their
    parameters replaced by grid selection before fitting."""
    if family == "sample":
        return EstimatorChoice.sample()
    if family == "ledoit-wolf":
        return EstimatorChoice.ledoit_wolf()
    if family == "banding":
        return EstimatorChoice.banding(0)
    if family == "lasso":
        return EstimatorChoice.lasso(1.0)
    if family == "adaptive-j0":
        return EstimatorChoice.adaptive(PenaltySpec(PenaltyKind.NESTED_J0, 1.0))
    if family == "adaptive-j1":
        return EstimatorChoice.adaptive(PenaltySpec(PenaltyKind.NESTED_J1, 1.0))
    if family == "adaptive-j2":
        return EstimatorChoice.adaptive(PenaltySpec(PenaltyKind.NESTED_J2, 1.0, 1.0))
    raise DataError(f"unknown estimator {family!r}; choose from {FAMILIES}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cholband",
        description="Covariance estimation with adaptively banded Cholesky factors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser(
        "benchmark", help="run a Monte Carlo benchmark",
        epilog=CONFIG_KEYS, formatter_class=argparse.RawDescriptionHelpFormatter)
    bench.add_argument("--config", type=Path, help="flat key = value config file")
    bench.add_argument("--model", choices=("sigma1", "sigma2", "sigma3"))
    bench.add_argument("--p", type=int)
    bench.add_argument("--blocks", type=int)
    bench.add_argument("--dist", choices=("gaussian", "t3"))
    bench.add_argument("--n-train", type=int)
    bench.add_argument("--n-valid", type=int)
    bench.add_argument("--reps", type=int)
    bench.add_argument("--estimator", action="append", choices=FAMILIES,
                       help="estimator family; repeatable")
    bench.add_argument("--grid", action="append", help=GRID_HELP)
    bench.add_argument("--solver", choices=("lqa", "shooting"))
    bench.add_argument("--seed", type=int)
    bench.add_argument("--fixed-truth", action="store_true", default=None)
    bench.add_argument("--out", type=Path)

    est = sub.add_parser("estimate", help="fit one estimator on a CSV of observations")
    est.add_argument("--input", type=Path, required=True,
                     help="headerless numeric CSV, one observation per row")
    est.add_argument("--estimator", required=True, choices=FAMILIES)
    est.add_argument("--grid", action="append", help=GRID_HELP)
    est.add_argument("--solver", choices=("lqa", "shooting"), default="shooting")
    est.add_argument("--folds", type=int, default=5)
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--out", type=Path, required=True, help="output directory")

    cls = sub.add_parser("classify", help="train and apply a discriminant classifier")
    cls.add_argument("--train", type=Path, required=True,
                     help="headered CSV with a label column")
    cls.add_argument("--test", type=Path, required=True)
    cls.add_argument("--kind", choices=("lda", "qda", "naive-bayes"), default="lda")
    cls.add_argument("--estimator", default="sample", choices=FAMILIES)
    cls.add_argument("--label", default="label", help="label column name")
    cls.add_argument("--grid", action="append", help=GRID_HELP)
    cls.add_argument("--solver", choices=("lqa", "shooting"), default="shooting")
    cls.add_argument("--folds", type=int, default=5)
    cls.add_argument("--seed", type=int, default=0)
    cls.add_argument("--out", type=Path, required=True, help="output directory")

    heat = sub.add_parser("heatmap", help="zero-frequency matrix from stored factor fits")
    heat.add_argument("--fits", type=Path, required=True,
                      help="directory of factor CSV files")
    heat.add_argument("--level", choices=("factor", "precision"), default="factor")
    heat.add_argument("--zero-tol", type=float, default=0.0)
    heat.add_argument("--out", type=Path, required=True, help="output CSV path")

    sim = sub.add_parser("simulate", help="export a simulated dataset and its truth")
    sim.add_argument("--model", choices=("sigma1", "sigma2", "sigma3"), default="sigma1")
    sim.add_argument("--p", type=int, default=30)
    sim.add_argument("--blocks", type=int)
    sim.add_argument("--dist", choices=("gaussian", "t3"), default="gaussian")
    sim.add_argument("--n", type=int, default=100)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--stream", type=int, default=0)
    sim.add_argument("--out", type=Path, required=True, help="output directory")

    return parser


def _cmd_benchmark(args) -> int:
    file_values = _read_config_file(args.config) if args.config else {}

    def setting(flag, key, cast, default):
        if flag is not None:
            return flag
        if key in file_values:
            return cast(file_values[key])
        return default

    grid_specs = list(file_values.get("grid", []))
    if args.grid:
        grid_specs.extend(args.grid)

    estimators = args.estimator
    if estimators is None and "estimators" in file_values:
        estimators = tuple(e.strip() for e in file_values["estimators"].split(","))
    if estimators is None:
        estimators = DEFAULT_ESTIMATORS

    out = setting(args.out, "out", Path, None)
    if out is None:
        raise DataError("benchmark requires an output directory (--out)")

    config = ExperimentConfig(
        model=setting(args.model, "model", str, "sigma1"),
        p=setting(args.p, "p", int, 30),
        blocks=setting(args.blocks, "blocks", int, None),
        distribution=setting(args.dist, "dist", str, "gaussian"),
        n_train=setting(args.n_train, "n_train", int, 100),
        n_valid=setting(args.n_valid, "n_valid", int, 100),
        replications=setting(args.reps, "reps", int, 50),
        estimators=tuple(estimators),
        grids=_merge_grids(grid_specs),
        seed=setting(args.seed, "seed", int, 0),
        solver=setting(args.solver, "solver", str, "shooting"),
        fixed_truth=setting(args.fixed_truth, "fixed_truth", _bool_from, False),
        output_dir=str(out),
    )
    report = run_benchmark(config)
    print(f"benchmark complete: {config.replications} replications, "
          f"{len(config.estimators)} estimators -> {config.output_dir}")
    for family in config.estimators:
        mean, se = report.summaries[family]["kl"]
        mean_s = "NA" if mean is None else f"{mean:.4f}"
        se_s = "NA" if se is None else f"{se:.4f}"
        print(f"  {family}: kl_mean={mean_s} kl_se={se_s}")
    return 0


def _cmd_estimate(args) -> int:
    values = read_matrix(args.input)
    data = center_columns(values)
    opts = FitOptions(solver=args.solver)
    grids = _merge_grids(args.grid)
    family = args.estimator
    overrides = grids.get(family, {})
    if family in ("sample", "ledoit-wolf"):
        choice = _family_choice(family)
    else:
        grid = default_grid(family, data.p, data.n,
                            lambdas=overrides.get("lambda"),
                            ratios=overrides.get("lambda2_ratio"),
                            ks=overrides.get("k"))
        if len(grid.candidates) == 1:
            choice = grid.candidates[0]
        else:
            folds = min(args.folds, data.n)
            choice = select_kfold(data, grid, folds, opts, RngSeed(args.seed))
    fitted = fit_estimator(data, choice, opts)
    print(f"selected: {choice.label()}")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "covariance.csv", fitted.sigma)
    omega = fitted.precision()
    if omega is not None:
        write_matrix(out / "precision.csv", omega)
    else:
        print("estimate is singular; no precision file written")
    if fitted.factors is not None:
        write_factor_file(out / "factor.csv", fitted.factors)
        bands = [band_support(row) for row in fitted.factors.rows]
        write_table(out / "bandwidths.csv", ["row", "k"],
                    [[j + 1, k] for j, k in enumerate(bands)])
    return 0


def _cmd_classify(args) -> int:
    kind = args.kind.replace("-", "_")
    x_train, y_train, feature_names = read_labeled_csv(args.train, args.label)

    test_path = Path(args.test)
    header = test_path.read_text().splitlines()[0].split(",") if test_path.exists() else []
    if args.label in header:
        x_test, y_test, test_features = read_labeled_csv(test_path, args.label)
    else:
        x_test, test_features = read_unlabeled_csv(test_path)
        y_test = None
    if list(test_features) != list(feature_names):
        raise DataError("test feature columns do not match the training schema")

    opts = FitOptions(solver=args.solver)
    grids = _merge_grids(args.grid)
    family = args.estimator
    overrides = grids.get(family, {})
    grid = None
    if family not in ("sample", "ledoit-wolf") and overrides:
        grid = default_grid(family, x_train.shape[1], x_train.shape[0],
                            lambdas=overrides.get("lambda"),
                            ratios=overrides.get("lambda2_ratio"),
                            ks=overrides.get("k"))
    selection = SelectionProtocol(folds=args.folds, seed=RngSeed(args.seed), grid=grid)
    model = fit_classifier(kind, x_train, y_train, _family_choice(family),
                           opts=opts, selection=selection)

    predicted = predict_many(model, x_test)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if y_test is not None:
        rows = [[i + 1, str(p), str(t)] for i, (p, t) in enumerate(zip(predicted, y_test))]
        write_table(out / "predictions.csv", ["row", "predicted", "actual"], rows)
        wrong, rate = test_error(model, x_test, y_test)
        print(f"misclassified {wrong} of {len(y_test)} (rate={rate:.4f})")
    else:
        rows = [[i + 1, str(p)] for i, p in enumerate(predicted)]
        write_table(out / "predictions.csv", ["row", "predicted"], rows)
        print(f"predicted {len(predicted)} rows (no labels in test set)")
    return 0


def _cmd_heatmap(args) -> int:
    fits_dir = Path(args.fits)
    if not fits_dir.is_dir():
        raise DataError(f"{fits_dir} is not a directory")
    paths = sorted(fits_dir.glob("*.csv"))
    if not paths:
        raise DataError(f"no factor CSV files in {fits_dir}")
    factors = [read_factor_file(p) for p in paths]
    if args.level == "factor":
        freq = zero_frequency(factors, zero_tol=args.zero_tol)
    else:
        freq = zero_frequency([reconstruct_precision(f) for f in factors],
                              zero_tol=args.zero_tol)
    write_matrix(args.out, freq)
    print(f"wrote {args.level}-level zero frequencies for {len(factors)} fits to {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    model = make_model(args.model, args.p, blocks=args.blocks,
                       seed=RngSeed(args.seed, args.stream))
    data = sample(model, args.dist, args.n, RngSeed(args.seed, args.stream + 1))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "dataset.csv", data.values)
    write_matrix(out / "true_covariance.csv", model.sigma)
    write_matrix(out / "true_precision.csv", model.omega)
    write_factor_file(out / "true_factor.csv", model.true_factors)
    print(f"wrote {args.n} x {model.p} {args.dist} draws from {args.model} to {out}")
    return 0


_COMMANDS = {
    "benchmark": _cmd_benchmark,
    "estimate": _cmd_estimate,
    "classify": _cmd_classify,
    "heatmap": _cmd_heatmap,
    "simulate": _cmd_simulate,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
