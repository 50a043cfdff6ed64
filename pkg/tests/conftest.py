"""Shared fixtures; the expensive Monte Carlo batteries run once per session."""

import pytest

from kfpca import SimulationScenario, aggregate, convergence_rate, run_scenario

ACCEPTANCE_SEED = 0

TABLE_SCENARIOS = {
    (1, "gaussian"): SimulationScenario(case=1, distribution="gaussian", seed=ACCEPTANCE_SEED),
    (1, "skew_t"): SimulationScenario(case=1, distribution="skew_t", seed=ACCEPTANCE_SEED),
    (2, "skew_t"): SimulationScenario(case=2, distribution="skew_t", seed=ACCEPTANCE_SEED),
    (1, "ec2"): SimulationScenario(case=1, distribution="ec2", seed=ACCEPTANCE_SEED),
    (2, "ec2"): SimulationScenario(case=2, distribution="ec2", seed=ACCEPTANCE_SEED),
}


@pytest.fixture(scope="session")
def acceptance_seed():
    return ACCEPTANCE_SEED


@pytest.fixture(scope="session")
def table_results():
    """Aggregated metrics for every table scenario, both methods, 100 runs."""
    out = {}
    for key, scenario in TABLE_SCENARIOS.items():
        per_method = run_scenario(scenario, ("kfpca", "cov"))
        out[key] = {m: aggregate(runs) for m, runs in per_method.items()}
    return out


@pytest.fixture(scope="session")
def rate_diagnostic():
    """Sup-norm convergence diagnostic at the reference sizes."""
    return convergence_rate(
        SimulationScenario(seed=ACCEPTANCE_SEED), (50, 100, 200, 400), reps=20
    )
