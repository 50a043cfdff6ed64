"""Pointwise second-order estimators and the bootstrap mean band.

Two kernel-function estimators are provided: the pairwise rank-flavoured
estimator built from spatial signs of curve differences (robust to heavy
tails and skewness), and the plain sample covariance baseline.  Both return
a symmetric positive semidefinite matrix on the sample's grid.
"""

from dataclasses import dataclass

import numpy as np

from .core import Curve, FunctionalSample, Grid, _frozen_array, derive_rng
from .errors import ConfigurationError, EstimationError, InputError

KENDALL = "kendall"
COVARIANCE = "covariance"

SYMMETRY_RTOL = 1e-10
PSD_RTOL = 1e-8
TRACE_ATOL = 1e-8

# purpose tag for bootstrap replicate streams (see core.derive_rng)
_BOOTSTRAP_STREAM = 11

# pair-loop block size: caps the (block x N) scratch matrices
_PAIR_BLOCK = 1024


@dataclass(frozen=True, eq=False)
class DiscretizedKernel:
    """A symmetric kernel function evaluated on a grid x grid mesh.

    ``kind`` records which estimator produced the matrix; the pairwise
    sign-based kind additionally carries a unit weighted trace.
    """

    grid: Grid
    matrix: np.ndarray
    kind: str

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen_array(self.matrix))
        m = self.matrix
        if self.kind not in (KENDALL, COVARIANCE):
            raise ConfigurationError(f"unknown kernel kind {self.kind!r}")
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != self.grid.size:
            raise InputError("kernel matrix must be d x d for the grid's d")
        if not np.all(np.isfinite(m)):
            raise InputError("kernel matrix must be finite")
        scale = float(np.abs(m).max())
        if float(np.abs(m - m.T).max()) > SYMMETRY_RTOL * max(scale, 1e-300):
            raise InputError("kernel matrix is not symmetric")
        evals = np.linalg.eigvalsh((m + m.T) / 2.0)
        if evals[0] < -PSD_RTOL * max(float(evals[-1]), 0.0) - 1e-300:
            raise EstimationError(
                f"kernel matrix is not positive semidefinite (min eig {evals[0]:.3e})"
            )
        if self.kind == KENDALL:
            wtrace = float(self.grid.weights @ np.diag(m))
            if abs(wtrace - 1.0) > TRACE_ATOL:
                raise EstimationError(
                    f"weighted trace of a {KENDALL} kernel must be 1, got {wtrace!r}"
                )

    @property
    def weighted_trace(self) -> float:
        return float(self.grid.weights @ np.diag(self.matrix))


@dataclass(frozen=True, eq=False)
class MeanBand:
    """Pointwise bootstrap percentile band around the mean curve."""

    mean: Curve
    lower: Curve
    upper: Curve
    level: float
    replicates: int

    def __post_init__(self):
        slack = 1e-12
        if np.any(self.lower.values > self.mean.values + slack) or np.any(
            self.mean.values > self.upper.values + slack
        ):
            raise EstimationError("band does not contain the mean estimate pointwise")


def mean_hat(sample: FunctionalSample) -> Curve:
    """Pointwise average curve across subjects."""
    if sample.values.shape[0] < 1:
        raise InputError("cannot average an empty sample")
    return Curve(sample.grid, sample.values.mean(axis=0))


def mean_pairwise_sq_norm(sample: FunctionalSample) -> float:
    """Average of ||X_i - X_j||^2 over unordered pairs, computed without
    materializing the pairs (Gram identity)."""
    x = sample.values
    w = sample.grid.weights
    n = x.shape[0]
    q = np.einsum("ij,j,ij->i", x, w, x)
    colsum = x.sum(axis=0)
    total = n * q.sum() - colsum @ (w * colsum)
    return float(max(total, 0.0)) / (n * (n - 1) / 2.0)


def kendall_tau_hat(
    sample: FunctionalSample, degenerate_tol: float = 1e-12
) -> DiscretizedKernel:
    """Pairwise spatial-sign kernel estimate.

    Each unordered pair of distinct curves contributes the outer product of
    its difference divided by the squared quadrature norm of that
    difference; the estimate averages those rank-one terms.  Pairs whose
    squared norm falls at or below ``degenerate_tol`` times the mean
    pairwise squared norm are dropped and the divisor shrinks accordingly.

    The result is symmetric, positive semidefinite, and has weighted trace
    one.  It is invariant under common scaling and shifts of the sample.

    Parameters
    ----------
    sample : FunctionalSample
        At least two curves on a shared grid.
    degenerate_tol : float
        Relative threshold below which a pair counts as degenerate.

    Raises
    ------
    InputError
        Fewer than two curves.
    EstimationError
        Every pair degenerate (e.g. all curves identical).
    """
    x = sample.values
    w = sample.grid.weights
    n, d = x.shape
    if n < 2:
        raise InputError("pairwise estimator needs at least 2 curves")
    if degenerate_tol < 0:
        raise ConfigurationError("degenerate_tol must be non-negative")

    threshold = degenerate_tol * mean_pairwise_sq_norm(sample)
    xw = x * w
    q = np.einsum("ij,ij->i", x, xw)

    # sum over pairs of outer(D, D)/|D|^2 rewritten as X^T (diag(r) - C) X
    # with C[i, j] = 1/|X_i - X_j|^2 on retained pairs; squared norms come
    # from the Gram identity q_i + q_j - 2 <X_i, X_j>_w.
    accum = np.zeros((d, d))
    ordered_retained = 0
    for i0 in range(0, n, _PAIR_BLOCK):
        i1 = min(i0 + _PAIR_BLOCK, n)
        gram = xw[i0:i1] @ x.T
        nrm = q[i0:i1, None] + q[None, :] - 2.0 * gram
        np.maximum(nrm, 0.0, out=nrm)
        mask = nrm > threshold
        mask[np.arange(i1 - i0), np.arange(i0, i1)] = False
        inv = np.zeros_like(nrm)
        np.divide(1.0, nrm, out=inv, where=mask)
        r = inv.sum(axis=1)
        accum += (x[i0:i1] * r[:, None]).T @ x[i0:i1]
        accum -= x[i0:i1].T @ (inv @ x)
        ordered_retained += int(mask.sum())

    if ordered_retained == 0:
        raise EstimationError("all curve pairs are degenerate")
    # the accumulated sum already equals the unordered-pair sum
    accum /= ordered_retained / 2.0
    return DiscretizedKernel(sample.grid, (accum + accum.T) / 2.0, KENDALL)


def covariance_hat(sample: FunctionalSample) -> DiscretizedKernel:
    """Sample covariance matrix across subjects (divisor N - 1)."""
    x = sample.values
    if x.shape[0] < 2:
        raise InputError("covariance needs at least 2 curves")
    xc = x - x.mean(axis=0)
    m = xc.T @ xc / (x.shape[0] - 1)
    return DiscretizedKernel(sample.grid, (m + m.T) / 2.0, COVARIANCE)


def bootstrap_mean_band(
    sample: FunctionalSample, level: float, replicates: int, seed: int
) -> MeanBand:
    """Percentile bootstrap band for the mean curve.

    Subjects are resampled with replacement; replicate b draws from a
    stream derived from (seed, b), so the band is reproducible and
    independent of replicate execution order.

    Parameters
    ----------
    level : float in (0, 1)
        Coverage level; the band spans the (1 - level)/2 and (1 + level)/2
        pointwise quantiles of the replicate means.
    replicates : int
        Number of bootstrap replicates, at least 100.
    """
    if not 0.0 < level < 1.0:
        raise ConfigurationError(f"level must lie in (0, 1), got {level}")
    if replicates < 100:
        raise ConfigurationError(
            f"need at least 100 bootstrap replicates, got {replicates}"
        )
    x = sample.values
    n = x.shape[0]
    boot = np.empty((replicates, x.shape[1]))
    for b in range(replicates):
        rng = derive_rng(seed, b, _BOOTSTRAP_STREAM)
        idx = rng.integers(0, n, size=n)
        boot[b] = x[idx].mean(axis=0)
    alpha = (1.0 - level) / 2.0
    lower = np.quantile(boot, alpha, axis=0)
    upper = np.quantile(boot, 1.0 - alpha, axis=0)
    grid = sample.grid
    return MeanBand(
        mean=mean_hat(sample),
        lower=Curve(grid, lower),
        upper=Curve(grid, upper),
        level=level,
        replicates=replicates,
    )
