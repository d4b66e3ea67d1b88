import pytest

import csv

import toml
from click.testing import CliRunner

from conftest import TINY
from strider._cli import main
from strider.data import load_feature_dir


@pytest.fixture(scope="module")
def cfg(tmp_path_factory):
    path = tmp_path_factory.mktemp("config") / "tiny.toml"
    with open(path, "w") as fl:
        toml.dump(TINY, fl)
    return str(path)


@pytest.fixture(scope="module")
def run_dir(cfg, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    result = CliRunner().invoke(main, ["train", "-i", cfg, "-o", str(out), "--lambda=0.05"])
    assert result.exit_code == 0, result.output
    return out


def test_train(run_dir):
    assert (run_dir / "report.txt").exists()
    assert "lam = 0.05" in (run_dir / "config.toml").read_text()


def test_train_output(cfg, run_dir):
    # A complete run is reported, not retrained.
    result = CliRunner().invoke(main, ["train", "-i", cfg, "-o", str(run_dir), "--lambda=0.05"])
    assert result.exit_code == 0
    assert "Final report" in result.output
    assert "Welcome to strider!" in result.output


def test_train_stop_after(cfg, tmp_path):
    result = CliRunner().invoke(
        main, ["train", "-i", cfg, "-o", str(tmp_path), "--stop-after", "warmup"]
    )
    assert result.exit_code == 0, result.output
    assert (tmp_path / "stage1.vimc").exists()
    assert not (tmp_path / "report.txt").exists()


def test_eval(run_dir):
    result = CliRunner().invoke(main, ["eval", str(run_dir), "-m", "uniform25"])
    assert result.exit_code == 0, result.output
    assert (run_dir / "eval_uniform25.txt").exists()


def test_eval_rejects_architecture_override(run_dir):
    result = CliRunner().invoke(
        main, ["eval", str(run_dir), "-m", "uniform25", "--temporal_model=MeanPool"]
    )
    assert result.exit_code == 2
    assert "temporal_model" in result.output


def test_eval_basis_override(run_dir):
    result = CliRunner().invoke(main, ["eval", str(run_dir), "--frame_basis=60.0"])
    assert result.exit_code == 0, result.output


def test_gen_data(cfg, tmp_path):
    result = CliRunner().invoke(main, ["gen-data", "-i", cfg, "-o", str(tmp_path)])
    assert result.exit_code == 0, result.output
    split = load_feature_dir(tmp_path)
    assert len(split.train) == TINY["n_train"]
    assert len(split.test) == TINY["n_test"]
    assert split.train[0].features.shape == (30, 12)


def test_plot(run_dir, tmp_path):
    out = tmp_path / "plots" / "acc"
    result = CliRunner().invoke(main, ["plot", str(run_dir), "-o", str(out)])
    assert result.exit_code == 0, result.output
    svg = (tmp_path / "plots" / "acc.svg").read_text()
    assert "<svg" in svg
    with open(tmp_path / "plots" / "acc.csv") as fl:
        rows = list(csv.DictReader(fl))
    assert list(rows[0]) == ["run", "accuracy", "mAP", "frame_rate", "gflops"]
    assert rows[0]["run"] == run_dir.name


def test_plot_missing_report(tmp_path):
    result = CliRunner().invoke(main, ["plot", str(tmp_path)])
    assert result.exit_code == 2


@pytest.mark.parametrize(
    "args",
    [["--delta=-1"], ["--strides=3"], ["--lam", "high"], ["lam=0.1"], ["--lam"]],
)
def test_config_errors(cfg, tmp_path, args):
    result = CliRunner().invoke(main, ["train", "-i", cfg, "-o", str(tmp_path), *args])
    assert result.exit_code == 1
    assert not (tmp_path / "config.toml").exists()


def test_missing_config_file(tmp_path):
    result = CliRunner().invoke(
        main, ["train", "-i", str(tmp_path / "nope.toml"), "-o", str(tmp_path)]
    )
    assert result.exit_code == 1


def test_bad_toml(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("lam = = 3\n")
    result = CliRunner().invoke(main, ["train", "-i", str(path), "-o", str(tmp_path / "run")])
    assert result.exit_code == 1


def test_unknown_axis():
    result = CliRunner().invoke(main, ["ablate", "dropout"])
    assert result.exit_code == 1


def test_ablate_stages(cfg, tmp_path):
    result = CliRunner().invoke(main, ["ablate", "stages", "-i", cfg, "-o", str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "ablation_stages.csv").exists()
    assert "Ablation over stages" in result.output
