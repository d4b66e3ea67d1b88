"""
Run directories: the on-disk record of a three-stage training run.

A run directory holds::

    config.toml                 resolved parameters
    stage1.vimc ... stage3.vimc checkpoints after each stage
    warmup_loss.csv             epoch, step, loss
    policy_loss.csv             SAC losses of policy learning
    finetune_loss.csv           backbone losses of fine-tuning
    finetune_policy_loss.csv    SAC losses of fine-tuning
    stage1_report.txt ...       cost reports after each stage (report.txt is final)
    trajectories.csv            locator trajectories of the final evaluation

Stages whose checkpoint exists are loaded rather than re-run. Every stage derives
its random stream from ``(seed, stage)`` and starts with fresh optimizer state, so a
resumed run ends exactly where an uninterrupted one does.
"""
import csv
import logging
from contextlib import contextmanager
from dataclasses import asdict, fields
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Union

import toml

from .._internals import obj_eq
from ..autodiff import read_checkpoint, write_checkpoint
from ..helpers.cfg_utils import dump_config, framework_to_dict, read_config_file
from ..metrics import CostReport
from ..recognizer import TrajectoryRow
from .experiment import Experiment
from .stages import STAGES

logger = logging.getLogger(__name__)

CONFIG = "config.toml"
FINAL_REPORT = "report.txt"
TRAJECTORIES = "trajectories.csv"
CHECKPOINTS = {stage: f"stage{i + 1}.vimc" for i, stage in enumerate(STAGES)}
STAGE_REPORTS = {"warmup": "stage1_report.txt", "policy_learning": "stage2_report.txt"}

WARMUP_FIELDS = ("epoch", "step", "loss")
POLICY_FIELDS = (
    "step",
    "policy_loss",
    "critic_loss",
    "alpha_loss",
    "alpha",
    "mean_reward",
    "mean_frames",
)
FINETUNE_FIELDS = ("block", "kind", "epoch", "step", "loss")
TRAJECTORY_FIELDS = tuple(f.name for f in fields(TrajectoryRow))


class RunDirError(RuntimeError):
    pass


@contextmanager
def csv_log(path: Path, fieldnames: Sequence[str]) -> Iterator:
    """A log callback appending rows to a freshly written CSV."""
    with open(path, "w", newline="") as fl:
        writer = csv.DictWriter(fl, fieldnames=list(fieldnames))
        writer.writeheader()

        def log(row: Dict):
            writer.writerow(row)

        yield log


def write_trajectories(path: Path, rows: List[TrajectoryRow]):
    with open(path, "w", newline="") as fl:
        writer = csv.DictWriter(fl, fieldnames=list(TRAJECTORY_FIELDS))
        writer.writeheader()
        for row in rows:
            writer.writerow(asdict(row))


def _comparable(params: dict) -> dict:
    return toml.loads(toml.dumps(params, encoder=toml.TomlNumpyEncoder()))


def _check_config(run_dir: Path, experiment: Experiment):
    path = run_dir / CONFIG
    if not path.exists():
        return
    have = _comparable(read_config_file(path))
    want = _comparable(framework_to_dict(experiment)["params"])
    if have != want:
        diff = sorted(k for k in set(have) | set(want) if have.get(k) != want.get(k))
        raise RunDirError(
            f"{run_dir} was created with a different configuration (differs in {diff}); "
            "use force to overwrite it"
        )


def is_complete(run_dir: Union[str, Path]) -> bool:
    return (Path(run_dir) / FINAL_REPORT).exists()


def _clear(run_dir: Path):
    names = [CONFIG, FINAL_REPORT, TRAJECTORIES, *CHECKPOINTS.values(), *STAGE_REPORTS.values()]
    names += ["warmup_loss.csv", "policy_loss.csv"]
    names += ["finetune_loss.csv", "finetune_policy_loss.csv"]
    for name in names:
        (run_dir / name).unlink(missing_ok=True)


def train_run(
    experiment: Experiment,
    run_dir: Union[str, Path],
    force: bool = False,
    stop_after: Optional[str] = None,
) -> Optional[CostReport]:
    """
    Run (or resume) the three training stages of ``experiment`` into ``run_dir``.

    Parameters
    ----------
    experiment
        The experiment to train. Its networks are trained in place.
    run_dir
        Output directory, created if needed.
    force
        Start from scratch even if the directory holds a (partial or complete) run.
    stop_after
        Stop after the named stage, leaving a resumable partial run.

    Returns
    -------
    CostReport or None
        The final report, or None if the run was stopped early.

    Raises
    ------
    RunDirError
        If ``run_dir`` holds a run with another configuration and ``force`` is off.
    """
    if stop_after is not None and stop_after not in STAGES:
        raise ValueError(f"stop_after must be one of {STAGES}, got '{stop_after}'")
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)

    if force:
        _clear(run_dir)
    elif is_complete(run_dir):
        logger.info(f"{run_dir} holds a complete run; nothing to do")
        return CostReport.read(run_dir / FINAL_REPORT)
    else:
        _check_config(run_dir, experiment)

    dump_config(framework_to_dict(experiment), run_dir / CONFIG)

    stage_fns = {
        "warmup": lambda: _run_warmup(experiment, run_dir),
        "policy_learning": lambda: _run_policy(experiment, run_dir),
        "finetune": lambda: _run_finetune(experiment, run_dir),
    }
    for stage in STAGES:
        ckpt = run_dir / CHECKPOINTS[stage]
        if ckpt.exists():
            logger.info(f"resuming: loading {ckpt.name}, skipping {stage}")
            experiment.load_state_dict(read_checkpoint(ckpt))
        else:
            stage_fns[stage]()
            write_checkpoint(ckpt, experiment.state_dict())
            logger.info(f"{stage} done; checkpoint {ckpt.name} ({experiment.checksum()[:12]})")

        report_name = STAGE_REPORTS.get(stage)
        if report_name and not (run_dir / report_name).exists():
            mode = experiment.warmup_strategy if stage == "warmup" else "argmax"
            experiment.evaluate(mode).write(
                run_dir / report_name, experiment.report_header(mode)
            )

        if stage == stop_after:
            logger.info(f"stopping after {stage}")
            return None

    rows = []
    report = experiment.evaluate("argmax", trajectories=rows)
    write_trajectories(run_dir / TRAJECTORIES, rows)
    report.write(run_dir / FINAL_REPORT, experiment.report_header("argmax"))
    return report


def _run_warmup(experiment: Experiment, run_dir: Path):
    with csv_log(run_dir / "warmup_loss.csv", WARMUP_FIELDS) as log:
        experiment.warmup(log=log)


def _run_policy(experiment: Experiment, run_dir: Path):
    with csv_log(run_dir / "policy_loss.csv", POLICY_FIELDS) as log:
        experiment.learn_policy(log=log)


def _run_finetune(experiment: Experiment, run_dir: Path):
    with csv_log(run_dir / "finetune_loss.csv", FINETUNE_FIELDS) as log, csv_log(
        run_dir / "finetune_policy_loss.csv", POLICY_FIELDS
    ) as policy_log:
        experiment.finetune(log=log, policy_log=policy_log)


def load_run(run_dir: Union[str, Path], **overrides) -> Experiment:
    """
    Rebuild the experiment of a run directory with its latest checkpoint loaded.

    ``overrides`` update evaluation-only parameters (e.g. ``frame_basis``). An override
    that would rebuild the networks (any parameter they were built from, such as
    ``temporal_model``) raises :class:`RunDirError`.
    """
    run_dir = Path(run_dir)
    if not (run_dir / CONFIG).exists():
        raise RunDirError(f"{run_dir} is not a run directory (no {CONFIG})")
    experiment = Experiment(**read_config_file(run_dir / CONFIG))

    for stage in reversed(STAGES):
        ckpt = run_dir / CHECKPOINTS[stage]
        if ckpt.exists():
            experiment.load_state_dict(read_checkpoint(ckpt))
            logger.info(f"loaded {ckpt}")
            break
    else:
        raise RunDirError(f"{run_dir} holds no checkpoint")

    if overrides:
        rebuilt = sorted(
            k
            for k in overrides
            if k in experiment.network_inputs() and _changes(experiment, k, overrides[k])
        )
        if rebuilt:
            raise RunDirError(
                f"overriding {', '.join(rebuilt)} would replace the trained networks of "
                f"{run_dir} with untrained ones; train a new run instead"
            )
        experiment.update(**overrides)
    return experiment


def _changes(experiment: Experiment, name: str, value) -> bool:
    old = getattr(experiment, name)
    if isinstance(old, type) and isinstance(value, str):
        return old.__name__ != value
    if isinstance(old, dict) and isinstance(value, dict) and value:
        value = {**old, **value}
    return not obj_eq(old, value)


def evaluate_run(run_dir: Union[str, Path], mode: str = "argmax", **overrides) -> CostReport:
    """Evaluate a trained run under ``mode``; writes ``eval_<mode>.txt`` and its trajectories."""
    run_dir = Path(run_dir)
    experiment = load_run(run_dir, **overrides)
    rows = []
    report = experiment.evaluate(mode, trajectories=rows)
    report.write(run_dir / f"eval_{mode}.txt", experiment.report_header(mode))
    write_trajectories(run_dir / f"eval_{mode}_trajectories.csv", rows)
    return report
