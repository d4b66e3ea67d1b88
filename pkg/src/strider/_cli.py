"""Module that contains the command line app."""
import csv
import logging
import sys
from pathlib import Path
from time import time

import click
from rich import box
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.rule import Rule
from rich.table import Table

import strider

from .data import VideoSource, write_feature_dir
from .helpers import AXES, parse_config, run_ablation
from .helpers.cfg_utils import ConfigError, parse_literal
from .metrics import CostReport
from .training import Experiment, evaluate_run, train_run
from .training.stages import STAGES

console = Console(width=100)
logger = logging.getLogger("strider")

PLOT_FIELDS = ("run", "accuracy", "mAP", "frame_rate", "gflops")


class _Group(click.Group):
    """A command group mapping failures to exit codes: 1 for config, 2 for runtime."""

    def main(self, *args, **kwargs):
        kwargs["standalone_mode"] = False
        try:
            rv = super().main(*args, **kwargs)
        except (ConfigError, click.UsageError) as e:
            console.print(f"[red]Configuration error:[/red] {e}")
            sys.exit(1)
        except click.Abort:
            console.print("Aborted!")
            sys.exit(1)
        except Exception as e:
            logger.error(f"{type(e).__name__}: {e}")
            console.print(f"[red]Error:[/red] {e}")
            sys.exit(2)
        sys.exit(rv if isinstance(rv, int) else 0)


main = _Group()

_extra = {"ignore_unknown_options": True, "allow_extra_args": True}
_config_opt = click.option(
    "-i", "--config", type=click.Path(exists=True, dir_okay=False), default=None
)
_verbose_opt = click.option("-v", "--verbose", count=True, help="-v for INFO, -vv for DEBUG.")


def _setup_logging(verbose: int):
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logger.handlers = [RichHandler(console=console, show_path=False)]
    logger.setLevel(level)


def _ctx_to_dct(args) -> dict:
    """Parse ``--key=value`` / ``--key value`` extra arguments."""
    dct = {}
    args = [a for a in args if a != "--"]
    j = 0
    while j < len(args):
        arg = args[j]
        if not arg.startswith("--"):
            raise ConfigError(f"unexpected argument '{arg}'")
        if "=" in arg:
            k, v = arg[2:].split("=", maxsplit=1)
            j += 1
        else:
            if j + 1 >= len(args):
                raise ConfigError(f"no value given for '{arg}'")
            k, v = arg[2:], args[j + 1]
            j += 2
        dct[k.replace("-", "_")] = parse_literal(v)
    return dct


def _welcome(params: dict):
    console.print(Panel("Welcome to strider!", box=box.DOUBLE_EDGE), style="bold", justify="center")
    console.print()
    console.print(f"Using strider version [blue]{strider.__version__}[/blue]", style="strong")
    console.print()
    if params:
        console.print("You set the following parameters explicitly:", style="bold")
        for k, v in params.items():
            console.print(f"   {k}: {v}")
        console.print()


def _report_table(title: str, report: CostReport) -> Table:
    table = Table(title=title, box=box.SIMPLE)
    table.add_column("quantity", style="bold")
    table.add_column("value", style="blue", justify="right")
    for k, v in report.to_dict().items():
        table.add_row(k, f"{v:.6g}")
    table.add_row("gflops", f"{report.gflops:.4g}")
    return table


def _resolve(config, args) -> dict:
    explicit = _ctx_to_dct(args)
    _welcome(explicit)
    return parse_config(config, explicit)


@main.command(context_settings=_extra)
@_config_opt
@click.option(
    "-o", "--run-dir", type=click.Path(file_okay=False), required=True, help="Run directory."
)
@click.option("--force", is_flag=True, help="Overwrite an existing run.")
@click.option("--stop-after", type=click.Choice(STAGES), default=None)
@_verbose_opt
@click.pass_context
def train(ctx, config, run_dir, force, stop_after, verbose):
    """Train a recognizer through all three stages into RUN_DIR.

    Extra ``--key=value`` arguments override the config file and environment.
    """
    _setup_logging(verbose)
    cfg = _resolve(config, ctx.args)

    console.print(Rule("Training", style="grey53"))
    t = time()
    report = train_run(Experiment(**cfg), run_dir, force=force, stop_after=stop_after)
    console.print(f"Finished in [blue]{time() - t:.1f} sec[/blue]; run in [cyan]{run_dir}[/cyan]")
    if report is not None:
        console.print(_report_table("Final report", report))
    console.print(Rule("Finished!", style="grey53"), style="bold green")


@main.command("eval", context_settings=_extra)
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@click.option("-m", "--mode", default="argmax", help="argmax, sample, all, uniformNN, randomNN.")
@_verbose_opt
@click.pass_context
def eval_(ctx, run_dir, mode, verbose):
    """Evaluate the trained run in RUN_DIR under a sampling mode."""
    _setup_logging(verbose)
    overrides = _ctx_to_dct(ctx.args)
    report = evaluate_run(run_dir, mode, **overrides)
    console.print(_report_table(f"{run_dir} ({mode})", report))
    console.print(f"   Writing report to [cyan]{Path(run_dir) / f'eval_{mode}.txt'}[/cyan].")


@main.command(context_settings=_extra)
@click.argument("axis", type=click.Choice(sorted(AXES)))
@_config_opt
@click.option("-o", "--out-dir", type=click.Path(file_okay=False), default="ablations")
@click.option("-p", "--processes", type=int, default=1, help="Cells trained in parallel.")
@click.option("--force", is_flag=True, help="Retrain completed cells.")
@_verbose_opt
@click.pass_context
def ablate(ctx, axis, config, out_dir, processes, force, verbose):
    """Sweep one ablation AXIS, holding every other parameter at its configured value."""
    _setup_logging(verbose)
    cfg = _resolve(config, ctx.args)

    console.print(Rule(f"Ablation: {axis}", style="grey53"))
    rows = run_ablation(axis, out_dir, cfg, processes=processes, force=force)

    table = Table(title=f"Ablation over {axis}", box=box.SIMPLE)
    for name in ("value", "top1", "mAP", "frame_rate", "gflops"):
        table.add_column(name, justify="right")
    for row in rows:
        table.add_row(
            str(row["value"]),
            *(f"{row[k]:.4g}" for k in ("top1", "mAP", "frame_rate", "gflops")),
        )
    console.print(table)
    console.print(f"   Writing table to [cyan]{Path(out_dir) / f'ablation_{axis}.csv'}[/cyan].")


@main.command()
@click.argument("run_dirs", nargs=-1, required=True, type=click.Path(file_okay=False))
@click.option(
    "-o", "--output", default="accuracy_vs_gflops", help="Output path, without extension."
)
def plot(run_dirs, output):
    """Scatter accuracy against modeled GFLOPs, one point per run in RUN_DIRS."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = []
    for run_dir in sorted(run_dirs, key=lambda d: Path(d).name):
        path = Path(run_dir) / "report.txt"
        if not path.exists():
            raise FileNotFoundError(f"{run_dir} has no cost report (report.txt)")
        report = CostReport.read(path)
        rows.append(
            {
                "run": Path(run_dir).name,
                "accuracy": report.top1,
                "mAP": report.mAP,
                "frame_rate": report.frame_rate,
                "gflops": report.gflops,
            }
        )

    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    with open(output.with_suffix(".csv"), "w", newline="") as fl:
        writer = csv.DictWriter(fl, fieldnames=list(PLOT_FIELDS))
        writer.writeheader()
        writer.writerows(rows)

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.scatter([r["gflops"] for r in rows], [r["accuracy"] for r in rows])
    for r in rows:
        ax.annotate(r["run"], (r["gflops"], r["accuracy"]), fontsize=8)
    ax.set_xlabel("modeled GFLOPs per video")
    ax.set_ylabel("top-1 accuracy")
    fig.savefig(output.with_suffix(".svg"), format="svg", bbox_inches="tight")
    plt.close(fig)

    console.print(f"   Writing [cyan]{output}.svg[/cyan] and [cyan]{output}.csv[/cyan].")


@main.command("gen-data", context_settings=_extra)
@_config_opt
@click.option("-o", "--out-dir", type=click.Path(file_okay=False), required=True)
@_verbose_opt
@click.pass_context
def gen_data(ctx, config, out_dir, verbose):
    """Write the configured synthetic split as VIMF files under OUT_DIR/{train,test}."""
    _setup_logging(verbose)
    cfg = _resolve(config, ctx.args)
    names = VideoSource.get_all_parameter_names()
    source = VideoSource(**{k: v for k, v in cfg.items() if k in names and k != "feature_dir"})

    n = write_feature_dir(out_dir, source.split)
    console.print(f"   Wrote [blue]{n}[/blue] feature files to [cyan]{out_dir}[/cyan].")
