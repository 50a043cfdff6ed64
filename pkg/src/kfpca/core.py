"""Grids, quadrature, curve arithmetic, and local-linear smoothing.

Everything downstream works on curves observed at a common set of time
points.  Integrals are trapezoid sums with per-point quadrature weights, so
an inner product is a single weighted dot product and is exact whenever the
integrand is piecewise linear between grid points.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DimensionError, InputError

GCV_CANDIDATE_COUNT = 20


def _frozen_array(values, dtype=float) -> np.ndarray:
    out = np.array(values, dtype=dtype)
    out.setflags(write=False)
    return out


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    """Create an independent generator keyed on (seed, *key).

    Streams for distinct keys are statistically independent and do not
    depend on the order in which they are created, so work split across
    runs or replicates stays reproducible under any execution order.
    """
    if seed < 0:
        raise ConfigurationError("seed must be a non-negative integer")
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


@dataclass(frozen=True, eq=False)
class Grid:
    """Ordered observation time points with trapezoid quadrature weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", _frozen_array(self.points))
        object.__setattr__(self, "weights", _frozen_array(self.weights))
        if self.points.ndim != 1 or self.points.size < 2:
            raise ConfigurationError("grid needs at least 2 points")
        if not np.all(np.isfinite(self.points)):
            raise ConfigurationError("grid points must be finite")
        if np.any(np.diff(self.points) <= 0):
            raise ConfigurationError("grid points must be strictly increasing")
        if self.weights.shape != self.points.shape:
            raise ConfigurationError("weights must match points in length")
        if np.any(self.weights <= 0):
            raise ConfigurationError("quadrature weights must be positive")

    @classmethod
    def from_points(cls, points) -> "Grid":
        """Grid with trapezoid weights for arbitrary increasing points."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ConfigurationError("grid needs at least 2 points")
        w = np.empty_like(pts)
        w[0] = (pts[1] - pts[0]) / 2.0
        w[-1] = (pts[-1] - pts[-2]) / 2.0
        if pts.size > 2:
            w[1:-1] = (pts[2:] - pts[:-2]) / 2.0
        return cls(pts, w)

    @property
    def size(self) -> int:
        return int(self.points.size)

    @property
    def span(self) -> float:
        return float(self.points[-1] - self.points[0])

    @property
    def spacing(self) -> float:
        """Mean distance between neighbouring points."""
        return self.span / (self.size - 1)

    def matches(self, other: "Grid") -> bool:
        return self.points.shape == other.points.shape and np.array_equal(
            self.points, other.points
        )


def make_regular_grid(a: float, b: float, d: int) -> Grid:
    """Equally spaced grid on [a, b] with d points and trapezoid weights.

    Interior weights equal the spacing h = (b - a)/(d - 1), endpoint
    weights h/2, so the weights sum to b - a.
    """
    if not (a < b):
        raise ConfigurationError(f"invalid bounds: need a < b, got [{a}, {b}]")
    if d < 2:
        raise ConfigurationError(f"need at least 2 grid points, got {d}")
    return Grid.from_points(np.linspace(a, b, d))


@dataclass(frozen=True, eq=False)
class Curve:
    """A function observed at every point of a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values))
        if self.values.shape != self.grid.points.shape:
            raise DimensionError("curve values must match grid length")
        if not np.all(np.isfinite(self.values)):
            raise InputError("curve values must be finite")

    def __add__(self, other: "Curve") -> "Curve":
        _require_same_grid(self.grid, other.grid)
        return Curve(self.grid, self.values + other.values)

    def __sub__(self, other: "Curve") -> "Curve":
        _require_same_grid(self.grid, other.grid)
        return Curve(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "Curve":
        return Curve(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "Curve":
        return Curve(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class FunctionalSample:
    """N curves observed on one shared grid, stored as an N x d matrix."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values))
        if self.values.ndim != 2:
            raise InputError("sample values must be a 2-d matrix")
        if self.values.shape[0] < 2:
            raise InputError("a functional sample needs at least 2 curves")
        if self.values.shape[1] != self.grid.size:
            raise DimensionError("sample column count must match grid length")
        if not np.all(np.isfinite(self.values)):
            raise InputError("sample values must be finite")

    @property
    def n_subjects(self) -> int:
        return int(self.values.shape[0])

    def curve(self, i: int) -> Curve:
        return Curve(self.grid, self.values[i])


def _require_same_grid(a: Grid, b: Grid):
    if not a.matches(b):
        raise DimensionError("curves live on different grids")


def inner_product(f: Curve, g: Curve) -> float:
    """Quadrature inner product sum_j w_j f(t_j) g(t_j)."""
    _require_same_grid(f.grid, g.grid)
    return float(f.grid.weights @ (f.values * g.values))


def sq_norm(f: Curve) -> float:
    """Squared quadrature norm of a curve; always >= 0."""
    return inner_product(f, f)


def _local_linear_matrix(points: np.ndarray, bandwidth: float) -> np.ndarray:
    """Smoother matrix of a Gaussian local-linear fit (rows sum to one).

    Row j holds the weights producing the fit at points[j]; the closed
    form reproduces constants and linears exactly at any bandwidth.
    """
    dt = points[None, :] - points[:, None]
    k = np.exp(-0.5 * (dt / bandwidth) ** 2)
    s0 = k.sum(axis=1)
    s1 = (k * dt).sum(axis=1)
    s2 = (k * dt * dt).sum(axis=1)
    numer = k * (s2[:, None] - dt * s1[:, None])
    denom = s0 * s2 - s1 * s1
    # Tiny bandwidths concentrate all mass on one point and the local-linear
    # system degenerates; fall back to a local-constant fit there.
    bad = denom <= np.finfo(float).tiny * np.maximum(s0 * s2, 1.0)
    if np.any(bad):
        numer[bad] = k[bad]
        denom = np.where(bad, s0, denom)
    return numer / denom[:, None]


def _gcv_score(smoother: np.ndarray, y: np.ndarray) -> float:
    n = y.size
    resid = y - smoother @ y
    trace = float(np.trace(smoother))
    df = n - trace
    if df < 1e-8:
        return np.inf
    return n * float(resid @ resid) / df**2


def gcv_bandwidth_candidates(grid: Grid) -> np.ndarray:
    """Log-spaced bandwidths from half the grid spacing to a quarter span."""
    lo = 0.5 * grid.spacing
    hi = 0.25 * grid.span
    return np.exp(np.linspace(np.log(lo), np.log(hi), GCV_CANDIDATE_COUNT))


def smooth_curve(raw: Curve, bandwidth="auto") -> Curve:
    """Local-linear smooth of a curve onto its own grid.

    Parameters
    ----------
    raw : Curve
        Noisy observations.
    bandwidth : positive float or "auto"
        Gaussian kernel bandwidth.  "auto" picks the generalized
        cross-validation minimizer over a fixed log-spaced candidate set.

    Returns
    -------
    Curve
        Smoothed values on the same grid.
    """
    pts = raw.grid.points
    if isinstance(bandwidth, str):
        if bandwidth != "auto":
            raise ConfigurationError(f"unknown bandwidth spec {bandwidth!r}")
        best, best_score = None, np.inf
        for cand in gcv_bandwidth_candidates(raw.grid):
            s = _local_linear_matrix(pts, cand)
            score = _gcv_score(s, raw.values)
            if score < best_score:
                best, best_score = s, score
        smoother = best
    else:
        if not bandwidth > 0:
            raise ConfigurationError(f"bandwidth must be positive, got {bandwidth}")
        smoother = _local_linear_matrix(pts, float(bandwidth))
    return Curve(raw.grid, smoother @ raw.values)
