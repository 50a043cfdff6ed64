"""Evaluation criteria, Monte Carlo aggregation, and the rate diagnostic.

Eigenfunctions are sign-indeterminate, so every comparison against truth
first aligns signs; the same sign flips the matching score column, keeping
eigenfunction and score errors consistent.
"""

import dataclasses
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import Curve, inner_product
from .errors import ConfigurationError, InputError
from .estimators import kendall_tau_hat
from .model import FitConfig, fit
from .simgen import SimulationScenario, generate

METRIC_NAMES = ("imse1", "imse2", "mse1", "mse2")

RATE_REFERENCE_FACTOR = 20


@dataclass(frozen=True, eq=False)
class RunMetrics:
    """Per-run estimation errors for one method on one scenario."""

    imse: np.ndarray
    mse: np.ndarray
    run_index: int
    scenario: SimulationScenario
    method: str

    def __post_init__(self):
        imse = np.asarray(self.imse, dtype=float)
        mse = np.asarray(self.mse, dtype=float)
        object.__setattr__(self, "imse", imse)
        object.__setattr__(self, "mse", mse)
        if not (np.all(np.isfinite(imse)) and np.all(np.isfinite(mse))):
            raise InputError("metrics must be finite")
        if np.any(imse < 0) or np.any(mse < 0):
            raise InputError("metrics must be non-negative")


@dataclass(frozen=True, eq=False)
class RateDiagnostic:
    """Sup-norm errors of the pairwise kernel estimate across sample sizes."""

    sample_sizes: tuple[int, ...]
    sup_errors: np.ndarray
    fitted_slope: float

    def __post_init__(self):
        object.__setattr__(self, "sample_sizes", tuple(self.sample_sizes))
        errs = np.asarray(self.sup_errors, dtype=float)
        object.__setattr__(self, "sup_errors", errs)
        if np.any(np.diff(self.sample_sizes) <= 0):
            raise InputError("sample sizes must be increasing")
        if np.any(errs <= 0):
            raise InputError("sup errors must be positive")


def alignment_sign(estimated: Curve, truth: Curve) -> float:
    """+1 or -1, whichever makes the inner product with truth >= 0.

    A zero inner product keeps the input sign.
    """
    return -1.0 if inner_product(estimated, truth) < 0 else 1.0


def align_sign(estimated: Curve, truth: Curve) -> Curve:
    """The estimated curve, flipped if that points it toward the truth."""
    return estimated if alignment_sign(estimated, truth) > 0 else -estimated


def imse(estimated: Curve, truth: Curve) -> float:
    """Integrated squared error after sign alignment."""
    diff = align_sign(estimated, truth) - truth
    return float(diff.grid.weights @ (diff.values * diff.values))


def score_mse(estimated: np.ndarray, truth: np.ndarray, eigenfunction_sign: float) -> float:
    """Mean squared score error, with the eigenfunction's alignment sign
    applied to the estimated scores so both flip together."""
    est = np.asarray(estimated, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if est.shape != tru.shape:
        raise InputError("score vectors must have equal length")
    diff = eigenfunction_sign * est - tru
    return float(np.mean(diff * diff))


def evaluate_run(
    scenario: SimulationScenario, run_index: int, method: str
) -> RunMetrics:
    """Generate one run, fit one method with two components, and score it
    against the known truth."""
    bundle = generate(scenario, run_index)
    model = fit(
        bundle.sample,
        FitConfig(method=method, n_components=2, seed=scenario.seed),
    )
    imse_k = np.empty(2)
    mse_k = np.empty(2)
    for k in range(2):
        est = model.eigenfunctions[k]
        tru = bundle.true_eigenfunctions[k]
        sign = alignment_sign(est, tru)
        imse_k[k] = imse(est, tru)
        mse_k[k] = score_mse(model.scores[:, k], bundle.true_scores[:, k], sign)
    return RunMetrics(imse_k, mse_k, run_index, scenario, method)


def _evaluate_chunk(args) -> list[RunMetrics]:
    scenario, indices, method = args
    return [evaluate_run(scenario, r, method) for r in indices]


def default_workers() -> int:
    """Worker count from the KFPCA_THREADS environment variable (default 1)."""
    raw = os.environ.get("KFPCA_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_scenario(
    scenario: SimulationScenario,
    methods: tuple[str, ...],
    workers: int | None = None,
) -> dict[str, list[RunMetrics]]:
    """All Monte Carlo runs of a scenario for each method.

    Results are identical for any worker count: every run draws from
    streams derived from (seed, run_index) and the output order is fixed.
    """
    workers = default_workers() if workers is None else max(1, workers)
    out: dict[str, list[RunMetrics]] = {}
    for method in methods:
        if workers == 1 or scenario.runs < 4:
            out[method] = [
                evaluate_run(scenario, r, method) for r in range(scenario.runs)
            ]
            continue
        chunks = [
            (scenario, list(rs), method)
            for rs in np.array_split(np.arange(scenario.runs), workers)
            if len(rs)
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_evaluate_chunk, chunks))
        out[method] = [m for chunk in results for m in chunk]
    return out


def aggregate(runs: list[RunMetrics]) -> dict[str, tuple[float, float]]:
    """Mean and sample standard deviation of each metric across runs.

    A single run reports SD 0 by convention.
    """
    if not runs:
        raise InputError("cannot aggregate an empty run list")
    first = runs[0]
    for r in runs[1:]:
        if r.scenario != first.scenario or r.method != first.method:
            raise InputError("runs must share one scenario and method")
    table = {}
    for k in range(first.imse.size):
        for name, column in (
            (f"imse{k + 1}", np.array([r.imse[k] for r in runs])),
            (f"mse{k + 1}", np.array([r.mse[k] for r in runs])),
        ):
            sd = float(column.std(ddof=1)) if column.size > 1 else 0.0
            table[name] = (float(column.mean()), sd)
    return table


def convergence_rate(
    scenario: SimulationScenario,
    sample_sizes: tuple[int, ...],
    reps: int,
) -> RateDiagnostic:
    """Empirical sup-norm convergence of the pairwise kernel estimate.

    For each sample size the estimate is compared entrywise against a
    plug-in reference computed once from a sample 20x the largest size,
    everything noiseless; the slope of log mean error on log size is the
    rate estimate (theory: -1/2).
    """
    sizes = tuple(int(n) for n in sample_sizes)
    if len(sizes) < 3:
        raise ConfigurationError("need at least 3 sample sizes")
    if any(b <= a for a, b in zip(sizes[:-1], sizes[1:])):
        raise ConfigurationError("sample sizes must be strictly increasing")
    if sizes[0] < 2:
        raise ConfigurationError("sample sizes must be at least 2")
    if reps < 1:
        raise ConfigurationError("reps must be at least 1")

    n_ref = RATE_REFERENCE_FACTOR * sizes[-1]
    total_runs = len(sizes) * reps + 1
    noiseless = dataclasses.replace(scenario, sigma2=0.0, runs=total_runs)

    ref_bundle = generate(
        dataclasses.replace(noiseless, n_subjects=n_ref), len(sizes) * reps
    )
    reference = kendall_tau_hat(ref_bundle.sample).matrix

    means = []
    for si, n in enumerate(sizes):
        sized = dataclasses.replace(noiseless, n_subjects=n)
        errs = [
            float(
                np.max(
                    np.abs(
                        kendall_tau_hat(
                            generate(sized, si * reps + rep).sample
                        ).matrix
                        - reference
                    )
                )
            )
            for rep in range(reps)
        ]
        means.append(float(np.mean(errs)))
    slope = float(np.polyfit(np.log(sizes), np.log(means), 1)[0])
    return RateDiagnostic(sizes, np.asarray(means), slope)
