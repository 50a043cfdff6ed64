"""Command-line interface.

Subcommands: ``fit`` (model a CSV dataset), ``simulate`` (reproduce a
Monte Carlo table row), ``mean-band`` (bootstrap band for the mean curve),
and ``rate`` (sup-norm convergence diagnostic).  Exit codes: 0 success,
2 bad input or configuration, 3 numerical/fit failure.  Output files are
written to a temporary path and renamed on success.
"""

import argparse
import csv
import io
import os
import sys
import tempfile

import numpy as np

from .core import FunctionalSample, Grid
from .errors import ConfigurationError, InputError, KfpcaError, ParseError
from .estimators import bootstrap_mean_band
from .metrics import METRIC_NAMES, aggregate, convergence_rate, run_scenario
from .model import METHODS, FitConfig, fit, save_model
from .simgen import DISTRIBUTIONS, SimulationScenario

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3


def read_dataset(path) -> FunctionalSample:
    """Parse a dataset CSV: header = grid times (optional leading "id"
    column), one row of observations per subject."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}")
    if not rows:
        raise ParseError(f"dataset file {path} is empty", path=str(path))

    header = rows[0]
    has_id = bool(header) and header[0].strip().lower() == "id"
    start = 1 if has_id else 0
    if len(header) - start < 1:
        raise ParseError(f"{path}: header has no grid values", path=str(path))

    def parse_cell(text, line, col):
        try:
            return float(text)
        except ValueError:
            raise ParseError(
                f"{path}: line {line}, column {col}: {text!r} is not a number",
                path=str(path),
            )

    points = [
        parse_cell(cell, 1, j + 1) for j, cell in enumerate(header[start:], start)
    ]
    d = len(points)
    values = []
    for i, row in enumerate(rows[1:], 2):
        if not row:
            continue
        if len(row) - start != d:
            raise ParseError(
                f"{path}: line {i}: expected {d + start} cells, got {len(row)}",
                path=str(path),
            )
        values.append(
            [parse_cell(cell, i, j + 1) for j, cell in enumerate(row[start:], start)]
        )
    if d < 4:
        raise InputError(f"{path}: need at least 4 grid points, got {d}")
    if len(values) < 3:
        raise InputError(f"{path}: need at least 3 subjects, got {len(values)}")
    try:
        grid = Grid.from_points(points)
    except ConfigurationError as exc:
        raise ParseError(f"{path}: bad grid header: {exc}", path=str(path))
    return FunctionalSample(grid, np.asarray(values))


def _atomic_write(path, text: str):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _parse_ncomp(text: str):
    try:
        if any(c in text for c in ".eE"):
            value = float(text)
        else:
            value = int(text)
    except ValueError:
        raise ConfigurationError(f"--ncomp must be a count or a fraction, got {text!r}")
    return value


def _parse_bandwidth(text: str):
    if text == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError:
        raise ConfigurationError(f"bandwidth must be 'auto' or a number, got {text!r}")


def _parse_methods(text: str) -> tuple[str, ...]:
    methods = tuple(m.strip() for m in text.split(",") if m.strip())
    for m in methods:
        if m not in METHODS:
            raise ConfigurationError(
                f"unknown method {m!r}; valid: " + ", ".join(METHODS)
            )
    if not methods:
        raise ConfigurationError("--methods must name at least one method")
    return methods


def _parse_sizes(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise ConfigurationError(f"--sizes must be a comma list of integers, got {text!r}")
    if len(sizes) < 3:
        raise ConfigurationError("--sizes needs at least 3 increasing sample sizes")
    if any(b <= a for a, b in zip(sizes[:-1], sizes[1:])) or sizes[0] < 2:
        raise ConfigurationError("--sizes must be strictly increasing and >= 2")
    return sizes


def _normalize_dist(text: str) -> str:
    name = text.strip().lower().replace("-", "_")
    if name not in DISTRIBUTIONS:
        raise ConfigurationError(
            f"unknown distribution {text!r}; valid: " + ", ".join(DISTRIBUTIONS)
        )
    return name


def _fail(exc, code) -> int:
    print(f"error: {exc}", file=sys.stderr)
    return code


def cmd_fit(args) -> int:
    try:
        sample = read_dataset(args.input)
        config = FitConfig(
            method=args.method,
            n_components=_parse_ncomp(args.ncomp),
            presmooth=args.presmooth,
            presmooth_bandwidth=_parse_bandwidth(args.presmooth_bandwidth),
            eigen_smooth=args.eigen_smooth,
            eigen_bandwidth=_parse_bandwidth(args.eigen_bandwidth),
            seed=args.seed,
        )
    except KfpcaError as exc:
        return _fail(exc, EXIT_INPUT)
    try:
        model = fit(sample, config)
        save_model(model, args.out)
    except KfpcaError as exc:
        return _fail(exc, EXIT_NUMERIC)
    variances = " ".join(f"{v:.6g}" for v in model.component_variances)
    print(f"components: {model.n_components}")
    print(f"fve: {model.fraction_variance_explained():.6f}")
    print(f"component_variances: {variances}")
    print(f"model written to {args.out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        dist = _normalize_dist(args.dist)
        methods = _parse_methods(args.methods)
        scenario = SimulationScenario(
            case=args.case,
            distribution=dist,
            n_subjects=args.n,
            n_points=args.grid,
            sigma2=args.sigma2,
            runs=args.runs,
            seed=args.seed,
        )
    except KfpcaError as exc:
        return _fail(exc, EXIT_INPUT)
    try:
        results = run_scenario(scenario, methods)
        rows = []
        for method in methods:
            table = aggregate(results[method])
            for metric in METRIC_NAMES:
                mean, sd = table[metric]
                rows.append(
                    [
                        scenario.case,
                        scenario.distribution,
                        method,
                        metric,
                        repr(mean),
                        repr(sd),
                        scenario.runs,
                        scenario.seed,
                    ]
                )
        _atomic_write(
            args.out,
            _csv_text(
                ["case", "distribution", "method", "metric", "mean", "sd", "runs", "seed"],
                rows,
            ),
        )
    except KfpcaError as exc:
        return _fail(exc, EXIT_NUMERIC)
    for row in rows:
        print(
            f"case {row[0]} {row[1]} {row[2]:>5s} {row[3]:>5s}: "
            f"mean {float(row[4]):.4f} sd {float(row[5]):.4f}"
        )
    print(f"results written to {args.out}")
    return EXIT_OK


def cmd_mean_band(args) -> int:
    try:
        sample = read_dataset(args.input)
        if not 0.0 < args.level < 1.0:
            raise ConfigurationError(f"--level must lie in (0, 1), got {args.level}")
        if args.reps < 100:
            raise ConfigurationError(
                f"--reps must be at least 100, got {args.reps}"
            )
    except KfpcaError as exc:
        return _fail(exc, EXIT_INPUT)
    try:
        band = bootstrap_mean_band(sample, args.level, args.reps, args.seed)
        rows = [
            [repr(float(t)), repr(float(m)), repr(float(lo)), repr(float(hi))]
            for t, m, lo, hi in zip(
                sample.grid.points, band.mean.values, band.lower.values, band.upper.values
            )
        ]
        _atomic_write(args.out, _csv_text(["t", "mean", "lower", "upper"], rows))
    except KfpcaError as exc:
        return _fail(exc, EXIT_NUMERIC)
    print(f"band written to {args.out}")
    return EXIT_OK


def cmd_rate(args) -> int:
    try:
        sizes = _parse_sizes(args.sizes)
        if args.reps < 1:
            raise ConfigurationError("--reps must be at least 1")
        scenario = SimulationScenario(seed=args.seed)
    except KfpcaError as exc:
        return _fail(exc, EXIT_INPUT)
    try:
        diag = convergence_rate(scenario, sizes, args.reps)
        rows = [
            [n, repr(float(err)), repr(diag.fitted_slope)]
            for n, err in zip(diag.sample_sizes, diag.sup_errors)
        ]
        _atomic_write(
            args.out, _csv_text(["n", "mean_sup_error", "fitted_slope"], rows)
        )
    except KfpcaError as exc:
        return _fail(exc, EXIT_NUMERIC)
    print(f"fitted slope: {diag.fitted_slope:.4f}")
    print(f"rate table written to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kfpca",
        description="Functional PCA via the pairwise sign-based kernel estimator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a model to a dataset CSV")
    p_fit.add_argument("input", help="dataset CSV (header = grid times)")
    p_fit.add_argument("--method", choices=METHODS, default="kfpca")
    p_fit.add_argument(
        "--ncomp", default="0.95",
        help="component count, or a fraction in (0,1) for FVE selection",
    )
    p_fit.add_argument("--presmooth", action="store_true")
    p_fit.add_argument("--presmooth-bandwidth", default="auto")
    p_fit.add_argument("--eigen-smooth", action="store_true")
    p_fit.add_argument("--eigen-bandwidth", default="auto")
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--out", required=True, help="model JSON output path")
    p_fit.set_defaults(handler=cmd_fit)

    p_sim = sub.add_parser("simulate", help="run a Monte Carlo scenario")
    p_sim.add_argument("--case", type=int, choices=(1, 2), default=1)
    p_sim.add_argument("--dist", default="gaussian")
    p_sim.add_argument("--n", type=int, default=100, help="subjects per run")
    p_sim.add_argument("--grid", type=int, default=51, help="grid points")
    p_sim.add_argument("--sigma2", type=float, default=0.25)
    p_sim.add_argument("--runs", type=int, default=100)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--methods", default="kfpca,cov")
    p_sim.add_argument("--out", required=True, help="results CSV output path")
    p_sim.set_defaults(handler=cmd_simulate)

    p_band = sub.add_parser("mean-band", help="bootstrap band for the mean curve")
    p_band.add_argument("input", help="dataset CSV")
    p_band.add_argument("--level", type=float, default=0.9)
    p_band.add_argument("--reps", type=int, default=1000)
    p_band.add_argument("--seed", type=int, default=0)
    p_band.add_argument("--out", required=True, help="band CSV output path")
    p_band.set_defaults(handler=cmd_mean_band)

    p_rate = sub.add_parser("rate", help="sup-norm convergence diagnostic")
    p_rate.add_argument("--sizes", default="50,100,200,400")
    p_rate.add_argument("--reps", type=int, default=20)
    p_rate.add_argument("--seed", type=int, default=0)
    p_rate.add_argument("--out", required=True, help="rate CSV output path")
    p_rate.set_defaults(handler=cmd_rate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
