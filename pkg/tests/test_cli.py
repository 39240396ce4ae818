import json

import numpy as np
import pandas as pd
import pytest

from hidden_population.cli import run
from hidden_population.cli.constants import ExitCode
from hidden_population.io import read_draws

FIT_FLAGS = ["--iters", "600", "--burnin", "100", "--thin", "5", "--seed", "3"]


def manifest(directory):
    return json.loads((directory / "manifest.json").read_text())


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    out = tmp_path_factory.mktemp("simulate")
    args = ["simulate", "--grid", "3x3", "--periods", "3", "--seed", "2"]
    assert run([*args, "--out", str(out)]) == ExitCode.OK

    return out


@pytest.fixture(scope="module")
def fitted(simulated, tmp_path_factory):
    out = tmp_path_factory.mktemp("fit")
    code = run(
        [
            "fit",
            "--data",
            str(simulated / "panel.csv"),
            "--adjacency",
            str(simulated / "adjacency.txt"),
            *FIT_FLAGS,
            "--out",
            str(out),
        ]
    )
    assert code == ExitCode.OK

    return out


def test_simulate_writes_the_baseline_panel(tmp_path):
    assert run(["simulate", "--seed", "1", "--out", str(tmp_path)]) == ExitCode.OK

    panel = pd.read_csv(tmp_path / "panel.csv")
    assert len(panel) == 245
    assert panel.columns.tolist() == ["region", "time", "y", "z", "lag_z"]
    assert len(pd.read_csv(tmp_path / "truth.csv")) == 245
    assert (tmp_path / "adjacency.txt").read_text().startswith("# regions: 49")

    record = manifest(tmp_path)
    assert record["subcommand"] == "simulate"
    assert record["seed"] == 1
    assert record["config"]["lambda"] == pytest.approx(7.0)


def test_log_file_receives_run_records(tmp_path):
    log_file = tmp_path / "run.log"
    args = ["simulate", "--out", str(tmp_path / "sim"), "--log-file", str(log_file)]

    assert run(args) == ExitCode.OK
    assert "run_simulate finished in" in log_file.read_text()


def test_simulate_larger_grid(tmp_path):
    args = ["simulate", "--grid", "14x14", "--periods", "10", "--out", str(tmp_path)]

    assert run(args) == ExitCode.OK
    assert len(pd.read_csv(tmp_path / "panel.csv")) == 1960


def test_simulate_lambda_scenario(tmp_path):
    assert run(["simulate", "--lambda", "0.1", "--out", str(tmp_path)]) == ExitCode.OK

    config = manifest(tmp_path)["config"]
    assert config["sigma_eps"] == pytest.approx(7.0)
    assert config["lambda"] == pytest.approx(0.1)


def test_simulate_sweep_layout(tmp_path):
    args = ["simulate", "--lambda", "10", "--lambda-mode", "sweep"]

    assert run([*args, "--out", str(tmp_path)]) == ExitCode.OK
    assert manifest(tmp_path)["config"]["sigma_eps"] == pytest.approx(0.1)


def test_simulate_student_t(tmp_path):
    args = ["simulate", "--student-t-df", "4", "--out", str(tmp_path)]

    assert run(args) == ExitCode.OK
    assert manifest(tmp_path)["config"]["eps_law"] == "student_t"


@pytest.mark.parametrize(
    "args",
    [
        ["simulate", "--lambda-mode", "sweep"],
        ["simulate", "--student-t-df", "2"],
        ["simulate", "--periods", "0"],
        ["simulate", "--bogus"],
    ],
    ids=["mode-without-lambda", "df", "periods", "unknown-flag"],
)
def test_simulate_usage_errors(tmp_path, args):
    assert run([*args, "--out", str(tmp_path / "out")]) == ExitCode.USAGE
    assert not (tmp_path / "out").exists()


def test_fit_outputs(fitted):
    draws = read_draws(fitted / "draws")

    assert draws.n_draws == 100
    assert draws.u_plus.shape == (100, 9, 3)

    summary = pd.read_csv(fitted / "summary.csv")
    assert summary["parameter"].tolist()[:2] == ["z", "lag_z"]
    assert set(pd.read_csv(fitted / "acceptance.csv")["block"]) >= {
        "sigma2_alpha",
        "sigma2_eps",
    }

    record = manifest(fitted)
    assert record["config"]["chain"]["n_iter"] == 600
    assert record["outputs"] == ["draws", "summary.csv", "acceptance.csv"]


def test_fit_is_reproducible(simulated, fitted, tmp_path):
    args = [
        "fit",
        "--data",
        str(simulated / "panel.csv"),
        "--adjacency",
        str(simulated / "adjacency.txt"),
        *FIT_FLAGS,
        "--out",
        str(tmp_path),
    ]
    assert run(args) == ExitCode.OK

    for path in sorted((fitted / "draws").iterdir()):
        assert path.read_bytes() == (tmp_path / "draws" / path.name).read_bytes()


def test_fit_with_two_chains_and_csv_export(simulated, tmp_path):
    args = [
        "fit",
        "--data",
        str(simulated / "panel.csv"),
        "--grid",
        "3x3",
        *FIT_FLAGS,
        "--chains",
        "2",
        "--draws-csv",
        "--out",
        str(tmp_path),
    ]
    assert run(args) == ExitCode.OK

    draws = read_draws(tmp_path / "draws")
    assert draws.n_draws == 200
    assert np.unique(draws.chain).tolist() == [0, 1]
    assert len(pd.read_csv(tmp_path / "draws.csv")) == 200


def test_fit_with_site_updates(simulated, tmp_path):
    args = ["fit", "--data", str(simulated / "panel.csv"), "--grid", "3x3", *FIT_FLAGS]
    args += ["--spatial-update", "site", "--car-df", "n", "--out", str(tmp_path)]

    assert run(args) == ExitCode.OK

    chain = manifest(tmp_path)["config"]["chain"]
    assert (chain["spatial_update"], chain["car_df"]) == ("site", "n")
    acceptance = pd.read_csv(tmp_path / "acceptance.csv").set_index("block")
    assert acceptance.loc["sigma2_v", "rate"] == 1.0


def test_fit_reads_defaults_from_config_file(simulated, tmp_path):
    config = tmp_path / "fit.conf"
    config.write_text(
        "\n".join(
            [
                "# short run",
                f"data = {simulated / 'panel.csv'}",
                "grid = 3x3",
                "iters = 300",
                "burnin = 100",
                "thin = 4",
                "center-car = true",
            ]
        )
    )
    out = tmp_path / "out"

    assert run(["fit", "--config", str(config), "--thin", "2", "--out", str(out)]) == 0

    chain = manifest(out)["config"]["chain"]
    assert (chain["n_iter"], chain["thin"], chain["center_car"]) == (300, 2, True)
    assert read_draws(out / "draws").n_draws == 100


@pytest.mark.parametrize(
    "extra, code",
    [
        (["--iters", "100", "--burnin", "100"], ExitCode.USAGE),
        ([], ExitCode.USAGE),
        (["--grid", "3x3", "--adjacency", "missing.txt"], ExitCode.USAGE),
        (["--grid", "2x2"], ExitCode.FAILURE),
        (["--grid", "3x3", "--chains", "0"], ExitCode.USAGE),
    ],
    ids=["burn-in", "no-graph", "two-graphs", "wrong-grid", "chains"],
)
def test_fit_errors_leave_no_outputs(simulated, tmp_path, extra, code):
    out = tmp_path / "out"
    args = ["fit", "--data", str(simulated / "panel.csv"), *extra, "--out", str(out)]
    if "--iters" in extra:
        args += ["--grid", "3x3"]

    assert run(args) == code
    assert not out.exists()


def test_fit_missing_data_file(tmp_path):
    args = ["fit", "--data", str(tmp_path / "nope.csv"), "--grid", "3x3"]

    assert run([*args, "--out", str(tmp_path / "out")]) == ExitCode.USAGE


def test_analyze_with_truth(simulated, fitted, tmp_path):
    args = [
        "analyze",
        "--draws",
        str(fitted / "draws"),
        "--truth",
        str(simulated / "truth.csv"),
        "--beta-draws",
        "500",
        "--out",
        str(tmp_path),
    ]
    assert run(args) == ExitCode.OK

    coverage = pd.read_csv(tmp_path / "coverage.csv")
    assert coverage["level"].tolist() == [0.9, 0.95, 0.99]
    assert (coverage["cells"] == 27).all()
    assert (coverage["a"] + coverage["b"] == 29).all()

    mape = pd.read_csv(tmp_path / "mape.csv")
    assert mape["variant"].tolist() == ["point", "per_draw"]
    assert (mape["average"] >= 0).all()

    latent = pd.read_csv(tmp_path / "latent.csv")
    assert latent["component"].tolist() == ["eta_plus", "u_plus", "v"]

    assert len(pd.read_csv(tmp_path / "uncaptured.csv")) == 27
    components = pd.read_csv(tmp_path / "components.csv")
    assert components["lambda_stat"].iloc[0] > 0
    assert 0 < components["spatial_share"].iloc[0] < 1


def test_analyze_without_truth(fitted, tmp_path):
    args = ["analyze", "--draws", str(fitted / "draws"), "--by-region"]
    assert run([*args, "--out", str(tmp_path)]) == ExitCode.OK

    assert sorted(manifest(tmp_path)["outputs"]) == ["components.csv", "uncaptured.csv"]
    assert not (tmp_path / "coverage.csv").exists()
    assert len(pd.read_csv(tmp_path / "uncaptured.csv")) == 9


@pytest.mark.parametrize(
    "extra",
    [
        ["--levels", "0.9"],
        ["--by-region", "--by-period"],
        ["--beta-draws", "10"],
        ["--levels", "0.9,1.2", "--truth", "truth.csv"],
    ],
    ids=["levels-without-truth", "groupings", "beta-draws", "bad-level"],
)
def test_analyze_usage_errors(fitted, tmp_path, extra):
    args = ["analyze", "--draws", str(fitted / "draws"), *extra]

    assert run([*args, "--out", str(tmp_path / "out")]) == ExitCode.USAGE
    assert not (tmp_path / "out").exists()


def test_analyze_rejects_non_draws_directory(tmp_path):
    args = ["analyze", "--draws", str(tmp_path), "--out", str(tmp_path / "out")]

    assert run(args) == ExitCode.FAILURE


def test_sir_command(tmp_path):
    counts = tmp_path / "counts.csv"
    counts.write_text(
        "region,time,count,population\n0,0,10,100\n1,0,30,100\n0,1,5,50\n1,1,5,50\n"
    )
    out = tmp_path / "out"

    assert run(["sir", "--counts", str(counts), "--out", str(out)]) == ExitCode.OK

    frame = pd.read_csv(out / "sir.csv")
    assert frame["sir"].tolist() == pytest.approx([0.5, 1.0, 1.5, 1.0])
    assert manifest(out)["config"]["thresholds"] == [0.9, 0.95, 0.99]


def test_sir_rejects_non_positive_population(tmp_path):
    counts = tmp_path / "counts.csv"
    counts.write_text("region,time,count,population\n0,0,1,0\n1,0,1,10\n")

    args = ["sir", "--counts", str(counts), "--out", str(tmp_path / "out")]
    assert run(args) == ExitCode.FAILURE
    assert not (tmp_path / "out").exists()


def test_sir_needs_counts(tmp_path):
    assert run(["sir", "--out", str(tmp_path / "out")]) == ExitCode.USAGE


def test_version_flag(capsys):
    assert run(["--version"]) == ExitCode.OK
    assert capsys.readouterr().out.strip() == "0.1.0"
