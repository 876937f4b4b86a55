"""CLI entry point: eval, batch, rank, permtest, summary, boxplot, phantom, config."""

import json
import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import List, Optional, Tuple

import typer
from pydantic import ValidationError

from lesionrank import __version__
from lesionrank.batch import run_batch
from lesionrank.config import dump_config, load_config
from lesionrank.errors import LesionRankError, UsageError
from lesionrank.metrics import evaluate_case
from lesionrank.phantom import Perturbation, PerturbationKind, PhantomSpec, generate_phantom
from lesionrank.ranking import (
    DEFAULT_SCALING,
    ScalingMode,
    build_rank_table,
    exact_permutation_test,
    pairwise_matrix,
    permutation_test,
)
from lesionrank.regions import RegionKind
from lesionrank.report import boxplot_svg, summarize, write_summary
from lesionrank.tables import frs_table, leaderboard_frs, metric_table, read_metrics_csv, write_rank_outputs
from lesionrank.volume import read_label_volume, validate_pair, write_label_volume

logger = logging.getLogger(__name__)

EXIT_INTERNAL = 1
EXIT_USAGE = 2
DEFAULT_PERMUTATIONS = 10000
EXCEEDANCE_CHOICES = ("ge", "gt")
ALTERNATIVE_CHOICES = ("two-sided", "greater")

app = typer.Typer(
    name="lesionrank",
    help="Lesion-wise segmentation evaluation and challenge ranking (Dice, HD95, FRS, permutation tests).",
    no_args_is_help=True,
)


@contextmanager
def _handled():
    """Map LesionRankError to exit 2 and anything unexpected to exit 1, message on stderr."""
    try:
        yield
    except typer.Exit:
        raise
    except LesionRankError as e:
        typer.echo(f"Error: {e}", err=True)
        raise typer.Exit(EXIT_USAGE)
    except Exception as e:
        logger.debug("internal error", exc_info=True)
        typer.echo(f"Internal error: {type(e).__name__}: {e}", err=True)
        raise typer.Exit(EXIT_INTERNAL)


def _choice(value: str, choices: tuple[str, ...], flag: str) -> str:
    if value not in choices:
        raise UsageError(f"{flag} must be one of {', '.join(choices)}, got {value!r}")
    return value


ConfigOption = typer.Option(None, "--config", "-c", help="EvalConfig YAML file (defaults to challenge settings)")


@app.command("eval")
def eval_cmd(
    gt: Path = typer.Argument(..., help="Ground-truth label volume"),
    pred: Path = typer.Argument(..., help="Predicted label volume"),
    config: Optional[Path] = ConfigOption,
):
    """Score one prediction against its ground truth; prints per-region JSON."""
    with _handled():
        cfg = load_config(config)
        gt_vol = read_label_volume(gt)
        pred_vol = read_label_volume(pred)
        validate_pair(gt_vol, pred_vol)
        case = evaluate_case(gt_vol, pred_vol, cfg)
    typer.echo(json.dumps(case.to_dict(), indent=2))


@app.command("batch")
def batch_cmd(
    gt_dir: Path = typer.Argument(..., help="Directory of ground-truth volumes, one per subject"),
    teams_dir: Path = typer.Argument(..., help="Directory with one subdirectory of predictions per team"),
    out_csv: Path = typer.Argument(..., help="Metrics CSV to write"),
    config: Optional[Path] = ConfigOption,
    jobs: int = typer.Option(1, "--jobs", "-j", help="Worker processes"),
    with_sensitivity: bool = typer.Option(False, "--with-sensitivity", help="Also emit sensitivity rows"),
):
    """Evaluate every team on every subject and write the ranking input table."""
    with _handled():
        cfg = load_config(config)
        result = run_batch(gt_dir, teams_dir, out_csv, cfg, jobs=jobs, with_sensitivity=with_sensitivity)
    typer.echo(f"Wrote {len(result.metrics)} rows to {result.out_csv}")
    if result.events:
        typer.echo(f"Flagged {len(result.events)} missing prediction(s): {result.sidecar}")


@app.command("rank")
def rank_cmd(
    metrics_csv: Path = typer.Argument(..., help="team,subject,region,metric,value CSV"),
    out_dir: Path = typer.Argument(..., help="Directory for ranks.csv, frs.csv, pvalues.csv"),
    permutations: int = typer.Option(DEFAULT_PERMUTATIONS, "--permutations", "-n", help="Permutations per team pair"),
    seed: int = typer.Option(0, "--seed", help="RNG seed for permutation tests"),
    scaling_mode: ScalingMode = typer.Option(DEFAULT_SCALING, "--scaling-mode", help="How six individual ranks combine"),
    exceedance: str = typer.Option("ge", "--exceedance", help="ge or gt"),
    alternative: str = typer.Option("two-sided", "--alternative", help="two-sided or greater"),
    unranked: List[str] = typer.Option([], "--unranked", help="Team scored but not ranked (repeatable)"),
):
    """Rank teams, write ranks/FRS/p-value tables, print the leaderboard."""
    with _handled():
        _choice(exceedance, EXCEEDANCE_CHOICES, "--exceedance")
        _choice(alternative, ALTERNATIVE_CHOICES, "--alternative")
        table = metric_table(read_metrics_csv(metrics_csv))
        ranks = build_rank_table(table, scaling_mode)
        unknown = sorted(set(unranked) - set(ranks.teams))
        if unknown:
            raise UsageError(f"--unranked names unknown team(s): {', '.join(unknown)}")
        matrix = pairwise_matrix(ranks, permutations, seed, exceedance, alternative)
        write_rank_outputs(ranks, out_dir, matrix, unranked)
        board = frs_table(ranks, unranked)

    typer.echo(f"{'rank':>4}  {'team':<24} {'cumulative':>12} {'FRS':>8}")
    for row in board.itertuples(index=False):
        typer.echo(f"{row.rank:>4}  {row.team:<24} {ranks.cumulative_total(row.team):>12g} {leaderboard_frs(row.frs):>8}")
    typer.echo(f"Outputs: {out_dir}")


@app.command("permtest")
def permtest_cmd(
    metrics_csv: Path = typer.Argument(..., help="team,subject,region,metric,value CSV"),
    team_a: str = typer.Argument(...),
    team_b: str = typer.Argument(...),
    permutations: int = typer.Option(DEFAULT_PERMUTATIONS, "--permutations", "-n"),
    seed: int = typer.Option(0, "--seed"),
    exact: bool = typer.Option(False, "--exact", help="Enumerate all swap patterns (at most 20 subjects)"),
    scaling_mode: ScalingMode = typer.Option(DEFAULT_SCALING, "--scaling-mode"),
    exceedance: str = typer.Option("ge", "--exceedance", help="ge or gt"),
    alternative: str = typer.Option("two-sided", "--alternative", help="two-sided or greater"),
):
    """Permutation test for one pair of teams; prints the result as JSON."""
    with _handled():
        _choice(exceedance, EXCEEDANCE_CHOICES, "--exceedance")
        _choice(alternative, ALTERNATIVE_CHOICES, "--alternative")
        ranks = build_rank_table(metric_table(read_metrics_csv(metrics_csv)), scaling_mode)
        if exact:
            result = exact_permutation_test(ranks, team_a, team_b, exceedance, alternative)
        else:
            result = permutation_test(ranks, team_a, team_b, permutations, seed, exceedance, alternative)
    typer.echo(json.dumps(result.to_dict(), indent=2))


@app.command("summary")
def summary_cmd(
    metrics_csv: Path = typer.Argument(..., help="team,subject,region,metric,value CSV"),
    out_path: Path = typer.Argument(..., help="Markdown output; a CSV is written beside it"),
    ddof: int = typer.Option(0, "--ddof", help="0 for population std, 1 for sample std"),
):
    """Mean ± std (median) per team, region and metric."""
    with _handled():
        if ddof not in (0, 1):
            raise UsageError(f"--ddof must be 0 or 1, got {ddof}")
        rows = summarize(read_metrics_csv(metrics_csv), ddof=ddof)
        md_path, csv_path = write_summary(rows, out_path)
    typer.echo(f"Wrote {len(rows)} summary rows to {md_path} and {csv_path}")


@app.command("boxplot")
def boxplot_cmd(
    metrics_csv: Path = typer.Argument(..., help="team,subject,region,metric,value CSV"),
    region: str = typer.Argument(..., help="ET, TC or WT"),
    metric: str = typer.Argument(..., help="dice, hd95 or sensitivity"),
    out_svg: Path = typer.Argument(..., help="SVG file to write"),
):
    """One box per team for a region and metric."""
    with _handled():
        teams = boxplot_svg(read_metrics_csv(metrics_csv), region, metric, out_svg)
    typer.echo(f"Wrote {len(teams)} box(es) to {out_svg}")


@app.command("phantom")
def phantom_cmd(
    out_gt: Path = typer.Argument(..., help="Ground-truth volume to write (.nii, .nii.gz or .rawvol)"),
    out_pred: Path = typer.Argument(..., help="Prediction volume to write"),
    seed: int = typer.Option(0, "--seed"),
    dims: Tuple[int, int, int] = typer.Option((32, 32, 32), "--dims", help="Grid size nx ny nz"),
    spacing: Tuple[float, float, float] = typer.Option((1.0, 1.0, 1.0), "--spacing", help="Voxel size in mm"),
    n_lesions: int = typer.Option(1, "--n-lesions", help="Blobs per label"),
    radius_min: int = typer.Option(3, "--radius-min"),
    radius_max: int = typer.Option(5, "--radius-max"),
    perturbation: PerturbationKind = typer.Option(PerturbationKind.NONE, "--perturbation"),
    shift: Tuple[int, int, int] = typer.Option((0, 0, 0), "--shift", help="dx dy dz for shift"),
    region: Optional[str] = typer.Option(None, "--region", help="Region for drop_region"),
    blob_count: int = typer.Option(1, "--blob-count", help="False blobs for add_false_blob"),
    blob_size: int = typer.Option(4, "--blob-size", help="Edge length of each false blob"),
    clearance: int = typer.Option(4, "--clearance", help="Gap between a false blob and existing foreground"),
):
    """Write a deterministic synthetic (gt, pred) pair and print the spec digest."""
    with _handled():
        try:
            spec = PhantomSpec(
                seed=seed,
                dims=dims,
                spacing=spacing,
                n_lesions=n_lesions,
                lesion_radius_range=(radius_min, radius_max),
                perturbation=Perturbation(
                    kind=perturbation,
                    shift=shift,
                    region=RegionKind.parse(region) if region else None,
                    count=blob_count,
                    size=blob_size,
                    clearance=clearance,
                ),
            )
        except ValidationError as e:
            problems = "; ".join(err["msg"] for err in e.errors())
            raise UsageError(f"invalid phantom spec: {problems}") from e
        gt, pred = generate_phantom(spec)
        write_label_volume(gt, out_gt)
        write_label_volume(pred, out_pred)
    typer.echo(spec.digest())


@app.command("config")
def config_cmd(
    config: Optional[Path] = ConfigOption,
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Write the YAML here instead of stdout"),
):
    """Print (or write) the effective evaluation settings."""
    with _handled():
        text = dump_config(load_config(config), output)
    if output is None:
        typer.echo(text, nl=False)
    else:
        typer.echo(f"Wrote {output}")


def _version(value: bool) -> None:
    if value:
        typer.echo(f"lesionrank {__version__}")
        raise typer.Exit()


@app.callback()
def main(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Log progress to stderr"),
    debug: bool = typer.Option(False, "--debug", help="Log everything to stderr"),
    version: bool = typer.Option(False, "--version", callback=_version, is_eager=True),
):
    """lesionrank: lesion-wise Dice/HD95 evaluation and FRS challenge ranking."""
    level = logging.DEBUG if debug else logging.INFO if verbose else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)


if __name__ == "__main__":
    app()
