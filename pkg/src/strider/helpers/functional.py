"""
Ablation grids over :class:`~strider.training.Experiment` parameters.

Each axis varies one parameter (or the sampling strategy, or the training stage)
while holding the rest of a base configuration fixed. Every cell trains into its
own run directory, so cells are independent and can run in separate processes.
"""
import csv
import logging
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

from .._internals import get_mdl
from ..metrics import CostReport
from ..training import Experiment, train_run

logger = logging.getLogger(__name__)

ABLATION_FIELDS = ("axis", "value", "top1", "mAP", "frame_rate", "frames_mean", "gflops")

BASELINE_STRATEGIES = ("all", "uniform25", "uniform50", "random25", "random50")

#: The parameter varied by each axis and its grid.
AXES: Dict[str, Tuple[str, tuple]] = {
    "locators": ("n_locators", (1, 3, 5, 8)),
    "temporal": ("temporal_model", ("LSTM", "MeanPool", "MaxPool", "SumPool")),
    "integrator": ("integrator_model", ("Transformer", "Forward", "MeanPool", "MaxPool")),
    "strategy": ("warmup_strategy", BASELINE_STRATEGIES + ("adaptive",)),
    "lambda": ("lam", (0.05, 0.1, 0.15, 0.2)),
    "action_space": ("delta", (1, 2, 3, 4, 5)),
    "initial_frame": ("initial_frame_fusion", (True, False)),
    "max_moves": ("max_moves", (3, 4, 5, 6)),
    "stages": ("", ("warmup", "policy_learning", "finetune")),
}

# Axes that swap a component model, and the component kind.
MODEL_AXES = {"temporal": "TemporalNet", "integrator": "Integrator"}


@dataclass
class AblationCell:
    """One cell of an ablation: a run directory and how to read its result."""

    axis: str
    value: Any
    params: Dict[str, Any] = field(default_factory=dict)
    stop_after: Optional[str] = None
    report: str = "report.txt"

    @property
    def label(self) -> str:
        return f"{self.axis}={self.value}"

    def run_dir(self, out_dir: Union[str, Path]) -> Path:
        if self.axis == "stages":
            return Path(out_dir) / "stages"
        return Path(out_dir) / self.axis / str(self.value)


def _model_cell(base: Dict[str, Any], param: str, model: str, kind: str) -> Dict[str, Any]:
    """Swap a component model, keeping only the base model parameters it accepts."""
    key = param.replace("_model", "_params")
    accepted = get_mdl(model, kind)._defaults
    params = {k: v for k, v in (base.get(key) or {}).items() if k in accepted}
    return {**base, param: model, key: params}


def get_experiments(axis: str, base: Optional[Dict[str, Any]] = None) -> List[AblationCell]:
    """
    The cells of one ablation axis over a base configuration.

    Baseline cells of the ``strategy`` axis train only the warm-up, with that
    strategy, and report its evaluation; the ``adaptive`` cell runs the full
    pipeline. The ``stages`` axis is a single run read after each stage.

    Examples
    --------
    >>> [c.value for c in get_experiments("locators")]
    [1, 3, 5, 8]
    """
    if axis not in AXES:
        raise ValueError(f"unknown ablation axis '{axis}'; choose from {sorted(AXES)}")
    base = dict(base or {})
    param, grid = AXES[axis]

    if axis == "stages":
        reports = ("stage1_report.txt", "stage2_report.txt", "report.txt")
        return [AblationCell(axis, v, base, report=r) for v, r in zip(grid, reports)]

    cells = []
    for value in grid:
        if axis in MODEL_AXES:
            params = _model_cell(base, param, value, MODEL_AXES[axis])
            cells.append(AblationCell(axis, value, params))
        elif axis == "strategy" and value != "adaptive":
            cells.append(
                AblationCell(
                    axis,
                    value,
                    {**base, param: value},
                    stop_after="warmup",
                    report="stage1_report.txt",
                )
            )
        elif axis == "strategy":
            cells.append(AblationCell(axis, value, base))
        else:
            cells.append(AblationCell(axis, value, {**base, param: value}))
    return cells


def _train_cell(args) -> str:
    params, run_dir, stop_after, force = args
    train_run(Experiment(**params), run_dir, force=force, stop_after=stop_after)
    return str(run_dir)


def _jobs(cells: List[AblationCell], out_dir: Path, force: bool) -> Iterator[tuple]:
    seen = set()
    for cell in cells:
        run_dir = cell.run_dir(out_dir)
        if run_dir in seen:
            continue
        seen.add(run_dir)
        yield cell.params, run_dir, cell.stop_after, force


def run_ablation(
    axis: str,
    out_dir: Union[str, Path],
    base: Optional[Dict[str, Any]] = None,
    processes: int = 1,
    force: bool = False,
) -> List[Dict[str, Any]]:
    """
    Train every cell of ``axis`` and collect one result row per cell.

    Parameters
    ----------
    axis
        One of :data:`AXES`.
    out_dir
        Parent of the cells' run directories; ``ablation_<axis>.csv`` is written here.
    base
        Configuration shared by all cells.
    processes
        Cells trained in parallel. Each cell owns its run directory.
    force
        Retrain cells whose run directory is already complete.

    Returns
    -------
    list of dict
        Rows with the columns of :data:`ABLATION_FIELDS`.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = get_experiments(axis, base)
    jobs = list(_jobs(cells, out_dir, force))
    logger.info(f"ablation '{axis}': {len(cells)} cells, {len(jobs)} runs, {processes} processes")

    if processes > 1:
        with Pool(processes) as pool:
            pool.map(_train_cell, jobs)
    else:
        for job in jobs:
            _train_cell(job)

    rows = []
    for cell in cells:
        report = CostReport.read(cell.run_dir(out_dir) / cell.report)
        rows.append(
            {
                "axis": axis,
                "value": cell.value,
                "top1": report.top1,
                "mAP": report.mAP,
                "frame_rate": report.frame_rate,
                "frames_mean": report.frames_mean,
                "gflops": report.gflops,
            }
        )

    with open(out_dir / f"ablation_{axis}.csv", "w", newline="") as fl:
        writer = csv.DictWriter(fl, fieldnames=list(ABLATION_FIELDS))
        writer.writeheader()
        writer.writerows(rows)
    return rows
