"""Reproducible generators for the simulation designs.

Observation matrices follow the two-component expansion
Y_ij = mu(t_j) + xi_i1 phi_1(t_j) + xi_i2 phi_2(t_j) + eps_ij with
mu = 0 on [0, 10], component variances (16, 9), and Gaussian measurement
noise.  Four score laws are supported: gaussian, a symmetric two-point
Gaussian mixture, a heavy-tailed elliptical construction with an
exponential radial shared within a subject, and a skewed heavy-tailed
skew-t calibrated to skewness 1.5 and excess kurtosis 5.1.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .core import Curve, FunctionalSample, Grid, derive_rng, make_regular_grid
from .errors import ConfigurationError, DomainError, EstimationError, InputError

DISTRIBUTIONS = ("gaussian", "mix_gaussian", "ec2", "skew_t")
CASES = (1, 2)

DOMAIN_START = 0.0
DOMAIN_END = 10.0

TARGET_SKEWNESS = 1.5
TARGET_EXCESS_KURTOSIS = 5.1

# Moment-matched skew-t shape parameters for the targets above, frozen
# after verification against quadrature and 1e7-draw sampling oracles
# (see solve_skew_t_params and the test suite).
SKEW_T_SLANT = 3.6733057106176057
SKEW_T_DF = 7.179676983235534

# purpose tags for derive_rng streams
_SCORE_STREAM = 0
_NOISE_STREAM = 1

_DF_MAX = 1e6
_DELTA_MAX = 1.0 - 1e-12
# kurtosis gap accepted when a target is only reachable in the df -> inf
# limit (e.g. the Gaussian corner of the family)
_BOUNDARY_KURTOSIS_GAP = 1e-3


@dataclass(frozen=True)
class SimulationScenario:
    """Full recipe for one Monte Carlo experiment."""

    case: int = 1
    distribution: str = "gaussian"
    n_subjects: int = 100
    n_points: int = 51
    sigma2: float = 0.25
    lambdas: tuple[float, float] = (16.0, 9.0)
    runs: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.case not in CASES:
            raise ConfigurationError(f"case must be one of {CASES}, got {self.case}")
        if self.distribution not in DISTRIBUTIONS:
            raise ConfigurationError(
                f"unknown distribution {self.distribution!r}; valid: "
                + ", ".join(DISTRIBUTIONS)
            )
        if self.n_subjects < 2:
            raise ConfigurationError("n_subjects must be at least 2")
        if self.n_points < 2:
            raise ConfigurationError("n_points must be at least 2")
        if self.sigma2 < 0:
            raise ConfigurationError("sigma2 must be non-negative")
        if len(self.lambdas) != 2 or any(l < 0 for l in self.lambdas):
            raise ConfigurationError("lambdas must be two non-negative variances")
        object.__setattr__(self, "lambdas", tuple(float(l) for l in self.lambdas))
        if self.runs < 1:
            raise ConfigurationError("runs must be at least 1")
        if self.seed < 0:
            raise ConfigurationError("seed must be non-negative")

    def grid(self) -> Grid:
        return make_regular_grid(DOMAIN_START, DOMAIN_END, self.n_points)


@dataclass(frozen=True, eq=False)
class TruthBundle:
    """One generated dataset together with everything used to build it."""

    sample: FunctionalSample
    true_scores: np.ndarray
    true_eigenfunctions: tuple[Curve, Curve]
    true_mean: Curve


def true_eigenfunctions(case: int, grid: Grid) -> tuple[Curve, Curve]:
    """The two analytic basis functions of a simulation case.

    Case 1 uses cos(pi t/10)/sqrt(5) and sin(pi t/10)/sqrt(5); case 2 uses
    sin(pi t/5)/sqrt(5) and cos(pi t/5)/sqrt(5).  Both pairs are
    orthonormal on [0, 10], which the grid must span.
    """
    if case not in CASES:
        raise ConfigurationError(f"case must be one of {CASES}, got {case}")
    t = grid.points
    if abs(t[0] - DOMAIN_START) > 1e-9 or abs(t[-1] - DOMAIN_END) > 1e-9:
        raise ConfigurationError(
            f"grid must span [{DOMAIN_START}, {DOMAIN_END}], got "
            f"[{t[0]}, {t[-1]}]"
        )
    root5 = math.sqrt(5.0)
    if case == 1:
        return (
            Curve(grid, np.cos(np.pi * t / 10.0) / root5),
            Curve(grid, np.sin(np.pi * t / 10.0) / root5),
        )
    return (
        Curve(grid, np.sin(np.pi * t / 5.0) / root5),
        Curve(grid, np.cos(np.pi * t / 5.0) / root5),
    )


def _skew_t_b(df: float) -> float:
    return math.sqrt(df / math.pi) * math.exp(
        special.gammaln((df - 1.0) / 2.0) - special.gammaln(df / 2.0)
    )


def skew_t_shape_moments(slant: float, df: float) -> tuple[float, float, float, float]:
    """Mean, variance, skewness, and excess kurtosis of the unit skew-t.

    Standard moment formulas of the (location 0, scale 1) skew-t family;
    kurtosis requires df > 4.
    """
    if df <= 4:
        raise DomainError("moments require df > 4")
    delta = slant / math.sqrt(1.0 + slant * slant)
    return _moments_from_delta(delta, df)


def _moments_from_delta(delta: float, df: float):
    b = _skew_t_b(df)
    mu = b * delta
    m2 = df / (df - 2.0)
    var = m2 - mu * mu
    skew = (
        mu
        * (df * (3.0 - delta * delta) / (df - 3.0) - 3.0 * m2 + 2.0 * mu * mu)
        / var**1.5
    )
    exkurt = (
        3.0 * df * df / ((df - 2.0) * (df - 4.0))
        - 4.0 * mu * mu * df * (3.0 - delta * delta) / (df - 3.0)
        + 6.0 * mu * mu * m2
        - 3.0 * mu**4
    ) / var**2 - 3.0
    return mu, var, skew, exkurt


def _delta_for_skewness(target: float, df: float) -> float | None:
    """Delta in [0, 1) matching a non-negative skewness target at fixed df,
    or None when the target exceeds the family's reach at that df."""
    if target == 0.0:
        return 0.0
    top = _moments_from_delta(_DELTA_MAX, df)[2]
    if top < target:
        return None
    return optimize.brentq(
        lambda dl: _moments_from_delta(dl, df)[2] - target,
        0.0,
        _DELTA_MAX,
        xtol=1e-15,
    )


def solve_skew_t_params(
    target_skewness: float, target_excess_kurtosis: float
) -> tuple[float, float]:
    """Solve for (slant, df) matching skewness and excess kurtosis.

    Nested bisection: for each df the slant is solved from the skewness
    equation, then df is solved from the kurtosis equation.  Targets only
    reachable in the df -> infinity limit (the Gaussian corner) return the
    capped df with the skewness still matched exactly.

    Returns
    -------
    (slant, df)
        Shape parameters with moment residuals below 1e-8 (skewness
        always; kurtosis except at the df cap).

    Raises
    ------
    DomainError
        Targets outside the family's feasible region.
    EstimationError
        Root polishing failed to reach the residual tolerance.
    """
    sign = 1.0 if target_skewness >= 0 else -1.0
    skew = abs(target_skewness)

    def kurt_gap(df):
        delta = _delta_for_skewness(skew, df)
        if delta is None:
            return None
        return _moments_from_delta(delta, df)[3] - target_excess_kurtosis

    grid = np.exp(np.linspace(np.log(4.0 + 1e-6), np.log(_DF_MAX), 300))
    gaps = [kurt_gap(df) for df in grid]
    feasible = [i for i, g in enumerate(gaps) if g is not None]
    if not feasible:
        raise DomainError(
            f"skewness {target_skewness} is outside the skew-t family's range "
            "for df > 4 (finite kurtosis)"
        )

    crossing = None
    for i, j in zip(feasible[:-1], feasible[1:]):
        if j == i + 1 and gaps[i] * gaps[j] <= 0:
            crossing = (grid[i], grid[j])
            break

    if crossing is None:
        tail_gap = gaps[feasible[-1]]
        at_cap = feasible[-1] == len(grid) - 1
        if at_cap and abs(tail_gap) <= _BOUNDARY_KURTOSIS_GAP:
            df = float(grid[-1])
            delta = _delta_for_skewness(skew, df)
            return sign * delta / math.sqrt(1.0 - delta * delta), df
        raise DomainError(
            f"targets (skewness {target_skewness}, excess kurtosis "
            f"{target_excess_kurtosis}) are infeasible for the skew-t family; "
            "higher skewness requires heavier tails (larger excess kurtosis)"
        )

    df = optimize.brentq(kurt_gap, crossing[0], crossing[1], xtol=1e-12)
    delta = _delta_for_skewness(skew, df)
    _, _, got_skew, got_kurt = _moments_from_delta(delta, df)
    if (
        abs(got_skew - skew) > 1e-8
        or abs(got_kurt - target_excess_kurtosis) > 1e-8
    ):
        raise EstimationError("skew-t moment solve did not converge")
    return sign * delta / math.sqrt(1.0 - delta * delta), float(df)


def _standard_skew_t(n: int, rng: np.random.Generator, slant: float, df: float):
    """Draws from the unit skew-t via the skew-normal / chi-square mix."""
    delta = slant / math.sqrt(1.0 + slant * slant)
    u0 = rng.standard_normal(n)
    u1 = rng.standard_normal(n)
    sn = delta * np.abs(u0) + math.sqrt(1.0 - delta * delta) * u1
    return sn / np.sqrt(rng.chisquare(df, n) / df)


def draw_scores(
    distribution: str, lambda_k: float, n: int, rng: np.random.Generator
) -> np.ndarray:
    """n independent component scores with mean 0 and variance lambda_k.

    The four laws share the first two moments and differ in shape:
    gaussian; an equal mixture of N(+-sqrt(lambda/2), lambda/2);
    sqrt(lambda) eta u / sqrt(2) with eta ~ Exp(1) and u a random sign;
    and the calibrated skew-t rescaled to variance lambda_k.
    """
    if distribution not in DISTRIBUTIONS:
        raise ConfigurationError(
            f"unknown distribution {distribution!r}; valid: "
            + ", ".join(DISTRIBUTIONS)
        )
    if lambda_k <= 0:
        raise ConfigurationError(f"lambda_k must be positive, got {lambda_k}")
    if distribution == "gaussian":
        return rng.normal(0.0, math.sqrt(lambda_k), n)
    if distribution == "mix_gaussian":
        signs = rng.integers(0, 2, n) * 2 - 1
        half = math.sqrt(lambda_k / 2.0)
        return signs * half + half * rng.standard_normal(n)
    if distribution == "ec2":
        eta = rng.standard_exponential(n)
        u = rng.integers(0, 2, n) * 2 - 1
        return math.sqrt(lambda_k) * eta * u / math.sqrt(2.0)
    z = _standard_skew_t(n, rng, SKEW_T_SLANT, SKEW_T_DF)
    mu_z, var_z, _, _ = skew_t_shape_moments(SKEW_T_SLANT, SKEW_T_DF)
    scale = math.sqrt(lambda_k / var_z)
    return scale * (z - mu_z)


def _draw_score_matrix(
    distribution: str, lambdas: tuple[float, float], n: int, rng: np.random.Generator
) -> np.ndarray:
    """Joint N x 2 score matrix for one run.

    Components are uncorrelated under all four laws.  The ec2 law shares
    its exponential radial within a subject (the elliptical construction),
    so extreme subjects inflate both components together; signs stay
    independent across components.
    """
    scores = np.zeros((n, 2))
    active = [k for k in range(2) if lambdas[k] > 0]
    if not active:
        return scores
    if distribution == "ec2":
        eta = rng.standard_exponential(n)
        for k in active:
            u = rng.integers(0, 2, n) * 2 - 1
            scores[:, k] = math.sqrt(lambdas[k]) * eta * u / math.sqrt(2.0)
        return scores
    for k in active:
        scores[:, k] = draw_scores(distribution, lambdas[k], n, rng)
    return scores


def generate(scenario: SimulationScenario, run_index: int) -> TruthBundle:
    """Generate one run's observation matrix plus its ground truth.

    Deterministic in (scenario.seed, run_index): scores and noise come
    from separate derived streams, so runs can execute in any order.
    """
    if not 0 <= run_index < scenario.runs:
        raise InputError(
            f"run_index {run_index} out of range [0, {scenario.runs})"
        )
    grid = scenario.grid()
    phi1, phi2 = true_eigenfunctions(scenario.case, grid)
    basis = np.stack([phi1.values, phi2.values])

    score_rng = derive_rng(scenario.seed, run_index, _SCORE_STREAM)
    noise_rng = derive_rng(scenario.seed, run_index, _NOISE_STREAM)
    scores = _draw_score_matrix(
        scenario.distribution, scenario.lambdas, scenario.n_subjects, score_rng
    )
    noise = noise_rng.normal(
        0.0, math.sqrt(scenario.sigma2), (scenario.n_subjects, scenario.n_points)
    )
    values = scores @ basis + noise
    return TruthBundle(
        sample=FunctionalSample(grid, values),
        true_scores=scores,
        true_eigenfunctions=(phi1, phi2),
        true_mean=Curve(grid, np.zeros(grid.size)),
    )


def scenario_to_doc(scenario: SimulationScenario) -> dict:
    """JSON-compatible scenario document."""
    return {
        "case": scenario.case,
        "distribution": scenario.distribution,
        "n_subjects": scenario.n_subjects,
        "n_points": scenario.n_points,
        "sigma2": scenario.sigma2,
        "lambdas": list(scenario.lambdas),
        "runs": scenario.runs,
        "seed": scenario.seed,
    }


def scenario_from_doc(doc: dict) -> SimulationScenario:
    try:
        return SimulationScenario(
            case=int(doc["case"]),
            distribution=str(doc["distribution"]),
            n_subjects=int(doc["n_subjects"]),
            n_points=int(doc["n_points"]),
            sigma2=float(doc["sigma2"]),
            lambdas=tuple(doc["lambdas"]),
            runs=int(doc["runs"]),
            seed=int(doc["seed"]),
        )
    except KeyError as exc:
        raise InputError(f"scenario document is missing field {exc.args[0]!r}")
