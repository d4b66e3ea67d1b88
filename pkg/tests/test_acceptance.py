"""
Desk-scale training runs on the default synthetic dataset.

These take minutes each and only run with ``--runslow``.
"""
import pytest

import csv
from time import perf_counter

import numpy as np

from strider.metrics import CostReport
from strider.training import Experiment, train_run

SEEDS = (0, 1, 2)

#: Wall-clock budget of one default training run, in seconds.
RUN_BUDGET = 1800

pytestmark = pytest.mark.slow


@pytest.fixture(scope="session")
def runs(tmp_path_factory):
    """Train (once per session) and return the run directory of a configuration.

    ``runs.seconds`` holds the wall-clock training time of every run made.
    """
    cache = {}

    def get(seed, stop_after=None, **params):
        key = (seed, stop_after, tuple(sorted(params.items())))
        if key not in cache:
            run_dir = tmp_path_factory.mktemp(f"seed{seed}")
            exp = Experiment(seed=seed, init_seed=seed, **params)
            start = perf_counter()
            train_run(exp, run_dir, stop_after=stop_after)
            get.seconds[key] = perf_counter() - start
            cache[key] = run_dir
        return cache[key]

    get.seconds = {}
    return get


@pytest.fixture(scope="session")
def trained(runs):
    """The final report of a configuration (the warm-up report when stopped after it)."""

    def get(seed, stop_after=None, **params):
        name = "stage1_report.txt" if stop_after == "warmup" else "report.txt"
        return CostReport.read(runs(seed, stop_after, **params) / name)

    return get


def _majority(flags):
    return sum(flags) >= 2


def _column(path, name):
    with open(path) as fl:
        return np.array([float(row[name]) for row in csv.DictReader(fl)])


def test_default_run_within_budget(runs):
    runs(0)
    assert runs.seconds[(0, None, ())] < RUN_BUDGET


def test_warmup_loss_below_chance(runs):
    below = []
    for seed in SEEDS:
        path = runs(seed) / "warmup_loss.csv"
        epochs, losses = _column(path, "epoch"), _column(path, "loss")
        last = losses[epochs == epochs.max()].mean()
        below.append(last < np.log(Experiment().n_classes))
    assert _majority(below)


def test_policy_learning_spends_fewer_frames(runs):
    shrinking = []
    for seed in SEEDS:
        frames = _column(runs(seed) / "policy_loss.csv", "mean_frames")
        chunk = max(len(frames) // 10, 1)
        shrinking.append(frames[-chunk:].mean() < frames[:chunk].mean())
    assert _majority(shrinking)


def test_finetune_keeps_accuracy(runs):
    kept = []
    for seed in SEEDS:
        run_dir = runs(seed)
        after_policy = CostReport.read(run_dir / "stage2_report.txt")
        final = CostReport.read(run_dir / "report.txt")
        kept.append(final.top1 >= after_policy.top1)
    assert _majority(kept)


def test_adaptive_beats_uniform_baseline(trained):
    wins = []
    for seed in SEEDS:
        adaptive = trained(seed)
        uniform = trained(seed, stop_after="warmup", warmup_strategy="uniform25")
        wins.append(
            adaptive.top1 >= uniform.top1 and adaptive.frames_mean <= 0.6 * uniform.frames_mean
        )
    assert _majority(wins)


def test_frames_fall_with_lambda(trained):
    monotone = []
    for seed in SEEDS:
        # The default run is the lam=0.1 run.
        frames = [trained(seed, lam=0.05), trained(seed), trained(seed, lam=0.2)]
        frames = [r.frames_mean for r in frames]
        monotone.append(frames[0] >= frames[1] >= frames[2])
    assert _majority(monotone)


def test_lstm_beats_pooling(trained):
    wins = []
    for seed in SEEDS:
        lstm = trained(seed).top1
        pools = [trained(seed, temporal_model=k).top1 for k in ("MeanPool", "MaxPool", "SumPool")]
        wins.append(all(lstm >= p for p in pools))
    assert _majority(wins)


def test_transformer_beats_mean_pool(trained):
    wins = []
    for seed in SEEDS:
        wins.append(trained(seed).top1 >= trained(seed, integrator_model="MeanPool").top1)
    assert _majority(wins)


def test_reproducible(tmp_path):
    reports, checksums = [], []
    for name in ("a", "b"):
        exp = Experiment(seed=3, init_seed=3)
        reports.append(train_run(exp, tmp_path / name))
        checksums.append(exp.checksum())
    assert reports[0] == reports[1]
    assert checksums[0] == checksums[1]
    assert (tmp_path / "a" / "report.txt").read_text() == (
        tmp_path / "b" / "report.txt"
    ).read_text()
