import json

import numpy as np
import pytest

from kfpca import (
    ConfigurationError,
    Curve,
    FitConfig,
    FunctionalSample,
    InputError,
    ParseError,
    SimulationScenario,
    derive_rng,
    deserialize_model,
    fit,
    generate,
    imse,
    load_model,
    make_regular_grid,
    reconstruct,
    save_model,
    serialize_model,
    true_eigenfunctions,
)


def one_factor_sample(n=12, seed=0):
    """Noiseless curves lying exactly in span{mu + xi phi1}."""
    g = make_regular_grid(0, 10, 51)
    phi1, _ = true_eigenfunctions(1, g)
    mu = np.sin(g.points / 3.0)
    xi = derive_rng(seed, 0).normal(0, 4.0, n)
    return FunctionalSample(g, mu + xi[:, None] * phi1.values), mu, xi


def noisy_sample(n=60, seed=1):
    return generate(SimulationScenario(n_subjects=n, seed=seed), 0).sample


class TestFit:
    @pytest.mark.parametrize("method", ["kfpca", "cov"])
    def test_one_factor_data_reconstructed_exactly(self, method):
        sample, _, _ = one_factor_sample()
        model = fit(sample, FitConfig(method=method, n_components=1))
        for i in range(sample.n_subjects):
            rebuilt = reconstruct(model, i, 1)
            assert np.abs(rebuilt.values - sample.values[i]).max() < 1e-8

    def test_methods_agree_on_gaussian_data(self):
        sample = generate(SimulationScenario(n_subjects=400, seed=55), 0).sample
        kf = fit(sample, FitConfig(method="kfpca", n_components=2))
        cv = fit(sample, FitConfig(method="cov", n_components=2))
        for k in range(2):
            assert imse(kf.eigenfunctions[k], cv.eigenfunctions[k]) < 0.05

    def test_cov_component_variances_equal_operator_eigenvalues(self):
        model = fit(noisy_sample(), FitConfig(method="cov", n_components=5))
        assert np.allclose(
            model.component_variances, model.operator_eigenvalues, rtol=1e-6
        )

    def test_full_rank_cov_reconstruction_exact(self):
        sample = noisy_sample(n=20, seed=3)
        d = sample.grid.size
        model = fit(sample, FitConfig(method="cov", n_components=d))
        for i in (0, 7, 19):
            rebuilt = reconstruct(model, i, d)
            assert np.abs(rebuilt.values - sample.values[i]).max() < 1e-8

    def test_deterministic(self):
        sample = noisy_sample(seed=4)
        config = FitConfig(method="kfpca", n_components=3)
        a = fit(sample, config)
        b = fit(sample, config)
        assert np.array_equal(a.scores, b.scores)
        assert np.array_equal(a.component_variances, b.component_variances)
        for ca, cb in zip(a.eigenfunctions, b.eigenfunctions):
            assert np.array_equal(ca.values, cb.values)

    def test_scores_centered(self):
        model = fit(noisy_sample(seed=5), FitConfig(n_components=2))
        col_means = np.abs(model.scores.mean(axis=0))
        col_stds = model.scores.std(axis=0)
        assert np.all(col_means < 1e-8 * col_stds)

    def test_component_variances_descending_for_cov(self):
        model = fit(noisy_sample(seed=6), FitConfig(method="cov", n_components=8))
        assert np.all(np.diff(model.component_variances) <= 1e-12)

    def test_fve_threshold_selects_smallest_k(self):
        sample = noisy_sample(seed=7)
        model = fit(sample, FitConfig(method="cov", n_components=0.9))
        full = fit(sample, FitConfig(method="cov", n_components=sample.grid.size))
        spectrum = full.operator_eigenvalues
        fve = np.cumsum(spectrum) / spectrum.sum()
        expected_k = int(np.nonzero(fve >= 0.9)[0][0]) + 1
        assert model.n_components == expected_k
        assert model.fraction_variance_explained() >= 0.9

    def test_too_many_components_rejected(self):
        with pytest.raises(ConfigurationError):
            fit(noisy_sample(seed=8), FitConfig(n_components=100))

    def test_small_samples_rejected(self):
        g = make_regular_grid(0, 1, 5)
        with pytest.raises(InputError):
            fit(
                FunctionalSample(g, np.random.default_rng(0).normal(size=(2, 5))),
                FitConfig(),
            )
        g3 = make_regular_grid(0, 1, 3)
        with pytest.raises(InputError):
            fit(
                FunctionalSample(g3, np.random.default_rng(0).normal(size=(5, 3))),
                FitConfig(),
            )

    def test_presmooth_path_runs_and_is_deterministic(self):
        sample = noisy_sample(n=20, seed=9)
        config = FitConfig(method="kfpca", n_components=2, presmooth=True)
        a = fit(sample, config)
        b = fit(sample, config)
        assert np.array_equal(a.scores, b.scores)

    @pytest.mark.parametrize("bad", [0, -1, 0.0, 1.0, -0.5])
    def test_invalid_n_components_config(self, bad):
        with pytest.raises(ConfigurationError):
            FitConfig(n_components=bad)

    def test_invalid_method_config(self):
        with pytest.raises(ConfigurationError):
            FitConfig(method="pca")


class TestReconstruct:
    def test_zero_components_returns_mean(self):
        model = fit(noisy_sample(seed=10), FitConfig(n_components=2))
        rebuilt = reconstruct(model, 0, 0)
        assert np.array_equal(rebuilt.values, model.mean.values)

    def test_noise_floor_bound_on_reconstruction_error(self):
        # K=2 reconstruction error stays near the measurement-noise floor
        scenario = SimulationScenario(seed=11)
        errors = []
        for run in range(10):
            bundle = generate(scenario, run)
            model = fit(bundle.sample, FitConfig(method="kfpca", n_components=2))
            truth = bundle.true_scores @ np.stack(
                [c.values for c in bundle.true_eigenfunctions]
            )
            w = bundle.sample.grid.weights
            for i in range(0, 100, 10):
                diff = reconstruct(model, i, 2).values - truth[i]
                errors.append(w @ (diff * diff))
        assert np.mean(errors) < 0.25 * 10.0 + 0.5

    def test_index_bounds(self):
        model = fit(noisy_sample(n=10, seed=12), FitConfig(n_components=2))
        with pytest.raises(InputError):
            reconstruct(model, 10, 1)
        with pytest.raises(ConfigurationError):
            reconstruct(model, 0, 3)


class TestSerialization:
    def test_round_trip_identity(self):
        model = fit(noisy_sample(seed=20), FitConfig(method="kfpca", n_components=3))
        doc = json.loads(json.dumps(serialize_model(model)))
        back = deserialize_model(doc)
        assert back.method == model.method
        assert back.config == model.config
        assert np.array_equal(back.grid.points, model.grid.points)
        assert np.array_equal(back.mean.values, model.mean.values)
        assert np.array_equal(back.operator_eigenvalues, model.operator_eigenvalues)
        assert np.array_equal(back.component_variances, model.component_variances)
        assert np.array_equal(back.scores, model.scores)
        for ca, cb in zip(model.eigenfunctions, back.eigenfunctions):
            assert np.array_equal(ca.values, cb.values)
        assert back.fraction_variance_explained() == pytest.approx(
            model.fraction_variance_explained(), abs=0
        )

    def test_file_round_trip(self, tmp_path):
        model = fit(noisy_sample(seed=21), FitConfig(n_components=2))
        path = tmp_path / "model.json"
        save_model(model, path)
        back = load_model(path)
        assert np.array_equal(back.scores, model.scores)

    def test_missing_field_named(self):
        model = fit(noisy_sample(seed=22), FitConfig(n_components=2))
        doc = serialize_model(model)
        del doc["eigenfunctions"]
        with pytest.raises(ParseError) as err:
            deserialize_model(doc)
        assert "eigenfunctions" in str(err.value)
        assert err.value.path == "eigenfunctions"

    def test_grid_length_mismatch_rejected(self):
        model = fit(noisy_sample(seed=23), FitConfig(n_components=2))
        doc = serialize_model(model)
        doc["mean"] = doc["mean"][:-1]
        with pytest.raises(ParseError) as err:
            deserialize_model(doc)
        assert err.value.path == "mean"

    def test_eigenfunction_length_mismatch_rejected(self):
        model = fit(noisy_sample(seed=24), FitConfig(n_components=2))
        doc = serialize_model(model)
        doc["eigenfunctions"][0] = doc["eigenfunctions"][0] + [0.0]
        with pytest.raises(ParseError):
            deserialize_model(doc)

    def test_bad_schema_version_rejected(self):
        model = fit(noisy_sample(seed=25), FitConfig(n_components=2))
        doc = serialize_model(model)
        doc["schema_version"] = "99"
        with pytest.raises(ParseError):
            deserialize_model(doc)

    def test_non_numeric_scores_rejected(self):
        model = fit(noisy_sample(seed=26), FitConfig(n_components=2))
        doc = serialize_model(model)
        doc["scores"] = "bogus"
        with pytest.raises(ParseError):
            deserialize_model(doc)
