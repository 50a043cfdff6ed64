import csv
import json

import numpy as np
import pytest

from kfpca import SimulationScenario, generate, load_model
from kfpca.cli import main, read_dataset
from kfpca.errors import InputError, ParseError


def write_dataset(path, sample, with_id=False):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = [repr(float(t)) for t in sample.grid.points]
        if with_id:
            writer.writerow(["id"] + header)
            for i, row in enumerate(sample.values):
                writer.writerow([f"subj{i}"] + [repr(float(v)) for v in row])
        else:
            writer.writerow(header)
            for row in sample.values:
                writer.writerow([repr(float(v)) for v in row])


@pytest.fixture()
def activity_like_csv(tmp_path):
    """Synthetic stand-in with the motivating data's shape: 63 right-skewed
    subjects on 36 points."""
    scenario = SimulationScenario(
        distribution="skew_t", n_subjects=63, n_points=36, seed=99
    )
    sample = generate(scenario, 0).sample
    path = tmp_path / "activity.csv"
    write_dataset(path, sample)
    return path


class TestReadDataset:
    def test_round_trip(self, tmp_path, activity_like_csv):
        sample = read_dataset(activity_like_csv)
        assert sample.values.shape == (63, 36)

    def test_id_column_supported(self, tmp_path):
        scenario = SimulationScenario(n_subjects=5, n_points=9, seed=1)
        sample = generate(scenario, 0).sample
        path = tmp_path / "with_id.csv"
        write_dataset(path, sample, with_id=True)
        parsed = read_dataset(path)
        assert np.allclose(parsed.values, sample.values)
        assert np.allclose(parsed.grid.points, sample.grid.points)

    def test_empty_file_names_the_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ParseError) as err:
            read_dataset(path)
        assert "empty.csv" in str(err.value)

    def test_bad_cell_reports_line_and_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0,1,2,3,4\n1,2,3,4,5\n1,2,oops,4,5\n6,7,8,9,0\n")
        with pytest.raises(ParseError) as err:
            read_dataset(path)
        assert "line 3" in str(err.value)
        assert "column 3" in str(err.value)

    def test_minimum_shape_enforced(self, tmp_path):
        path = tmp_path / "narrow.csv"
        path.write_text("0,1,2\n1,2,3\n4,5,6\n7,8,9\n")
        with pytest.raises(InputError):
            read_dataset(path)
        path2 = tmp_path / "short.csv"
        path2.write_text("0,1,2,3\n1,2,3,4\n5,6,7,8\n")
        with pytest.raises(InputError):
            read_dataset(path2)


class TestCmdFit:
    def test_fit_activity_like(self, tmp_path, activity_like_csv, capsys):
        out = tmp_path / "model.json"
        code = main(["fit", str(activity_like_csv), "--out", str(out)])
        assert code == 0
        model = load_model(out)
        assert model.method == "kfpca"
        assert model.fraction_variance_explained() >= 0.95
        printed = capsys.readouterr().out
        assert "components:" in printed
        assert "fve:" in printed

    def test_empty_file_exits_2(self, tmp_path, capsys):
        path = tmp_path / "empty.csv"
        path.write_text("")
        code = main(["fit", str(path), "--out", str(tmp_path / "m.json")])
        assert code == 2
        assert "empty.csv" in capsys.readouterr().err

    def test_oversized_ncomp_exits_3(self, tmp_path, activity_like_csv):
        code = main(
            ["fit", str(activity_like_csv), "--ncomp", "100", "--out", str(tmp_path / "m.json")]
        )
        assert code == 3

    def test_cov_method_and_int_ncomp(self, tmp_path, activity_like_csv):
        out = tmp_path / "model.json"
        code = main(
            ["fit", str(activity_like_csv), "--method", "cov", "--ncomp", "3", "--out", str(out)]
        )
        assert code == 0
        assert load_model(out).n_components == 3


class TestCmdSimulate:
    def simulate(self, tmp_path, name, *extra):
        out = tmp_path / name
        args = [
            "simulate", "--case", "1", "--dist", "gaussian", "--n", "40",
            "--grid", "21", "--runs", "5", "--seed", "3", "--out", str(out),
        ]
        code = main(args + list(extra))
        return code, out

    def test_writes_results_table(self, tmp_path):
        code, out = self.simulate(tmp_path, "res.csv")
        assert code == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 8  # 2 methods x 4 metrics
        assert {r["method"] for r in rows} == {"kfpca", "cov"}
        assert {r["metric"] for r in rows} == {"imse1", "imse2", "mse1", "mse2"}
        for r in rows:
            assert float(r["mean"]) >= 0
            assert r["runs"] == "5"

    def test_deterministic_output_bytes(self, tmp_path):
        _, out1 = self.simulate(tmp_path, "a.csv")
        _, out2 = self.simulate(tmp_path, "b.csv")
        assert out1.read_bytes() == out2.read_bytes()

    def test_worker_count_does_not_change_output(self, tmp_path, monkeypatch):
        _, serial = self.simulate(tmp_path, "serial.csv")
        monkeypatch.setenv("KFPCA_THREADS", "2")
        _, parallel = self.simulate(tmp_path, "parallel.csv")
        assert serial.read_bytes() == parallel.read_bytes()

    def test_unknown_distribution_lists_names(self, tmp_path, capsys):
        code = main(
            ["simulate", "--dist", "cauchy", "--out", str(tmp_path / "r.csv")]
        )
        assert code == 2
        message = capsys.readouterr().err
        for name in ("gaussian", "mix_gaussian", "ec2", "skew_t"):
            assert name in message

    def test_hyphenated_distribution_accepted(self, tmp_path):
        out = tmp_path / "res.csv"
        code = main(
            [
                "simulate", "--dist", "skew-t", "--n", "30", "--grid", "21",
                "--runs", "3", "--out", str(out),
            ]
        )
        assert code == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert rows[0]["distribution"] == "skew_t"

    def test_single_method_restriction(self, tmp_path):
        code, out = self.simulate(tmp_path, "kf.csv", "--methods", "kfpca")
        assert code == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 4
        assert {r["method"] for r in rows} == {"kfpca"}

    def test_defaults_reproduce_gaussian_table_row(self, tmp_path):
        # flag defaults carry the full default design: N=100, d=51,
        # sigma2=0.25, 100 runs (expected IMSE1 near 0.035)
        out = tmp_path / "table.csv"
        code = main(["simulate", "--case", "1", "--dist", "gaussian", "--out", str(out)])
        assert code == 0
        with open(out) as fh:
            rows = {
                (r["method"], r["metric"]): r for r in csv.DictReader(fh)
            }
        row = rows[("kfpca", "imse1")]
        assert row["runs"] == "100"
        assert 0.015 <= float(row["mean"]) <= 0.060


class TestCmdMeanBand:
    def test_constant_dataset_zero_width(self, tmp_path):
        path = tmp_path / "const.csv"
        points = np.linspace(0, 1, 6)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([str(t) for t in points])
            for _ in range(5):
                writer.writerow(["2.5"] * 6)
        out = tmp_path / "band.csv"
        code = main(["mean-band", str(path), "--reps", "200", "--out", str(out)])
        assert code == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        for r in rows:
            assert float(r["lower"]) == float(r["mean"]) == float(r["upper"]) == 2.5

    def test_band_contains_mean(self, tmp_path, activity_like_csv):
        out = tmp_path / "band.csv"
        code = main(
            ["mean-band", str(activity_like_csv), "--reps", "300", "--out", str(out)]
        )
        assert code == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 36
        for r in rows:
            assert float(r["lower"]) <= float(r["mean"]) <= float(r["upper"])

    def test_too_few_reps_exits_2(self, tmp_path, activity_like_csv):
        code = main(
            ["mean-band", str(activity_like_csv), "--reps", "50", "--out", str(tmp_path / "b.csv")]
        )
        assert code == 2

    def test_bad_level_exits_2(self, tmp_path, activity_like_csv):
        code = main(
            ["mean-band", str(activity_like_csv), "--level", "1.5", "--out", str(tmp_path / "b.csv")]
        )
        assert code == 2

    def test_deterministic(self, tmp_path, activity_like_csv):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            assert main(
                ["mean-band", str(activity_like_csv), "--reps", "150", "--seed", "4", "--out", str(out)]
            ) == 0
        assert a.read_bytes() == b.read_bytes()


class TestCmdRate:
    def test_single_size_exits_2(self, tmp_path):
        code = main(["rate", "--sizes", "100", "--out", str(tmp_path / "r.csv")])
        assert code == 2

    def test_small_rate_run(self, tmp_path):
        out = tmp_path / "rate.csv"
        code = main(
            ["rate", "--sizes", "10,20,40", "--reps", "2", "--seed", "5", "--out", str(out)]
        )
        assert code == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert [r["n"] for r in rows] == ["10", "20", "40"]
        slopes = {r["fitted_slope"] for r in rows}
        assert len(slopes) == 1

    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            assert main(
                ["rate", "--sizes", "10,20,40", "--reps", "2", "--seed", "5", "--out", str(out)]
            ) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_default_sizes_slope_in_expected_band(self, tmp_path):
        out = tmp_path / "rate.csv"
        code = main(["rate", "--out", str(out)])
        assert code == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        slope = float(rows[0]["fitted_slope"])
        assert -0.75 <= slope <= -0.30


class TestMainPlumbing:
    def test_no_command_exits_2(self):
        assert main([]) == 2

    def test_unknown_flag_exits_2(self):
        assert main(["simulate", "--bogus", "1", "--out", "x.csv"]) == 2

    def test_model_json_is_valid_json(self, tmp_path, activity_like_csv):
        out = tmp_path / "model.json"
        main(["fit", str(activity_like_csv), "--out", str(out)])
        doc = json.loads(out.read_text())
        assert doc["schema_version"] == "1"
        assert len(doc["grid"]["points"]) == 36
