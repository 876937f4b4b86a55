"""Directory-tree evaluation: every team's prediction for every ground-truth subject.

Layout:
    gt_dir/<subject>.nii.gz
    teams_dir/<team>/<subject>.nii.gz

A prediction file missing for a (team, subject) is scored as an all-background volume, so
the penalty rules apply, and flagged in a JSON-lines sidecar next to the output CSV.
"""

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import pandas as pd

from lesionrank.config import EvalConfig
from lesionrank.errors import UsageError, VolumeIOError
from lesionrank.formats import subject_id, volume_suffix
from lesionrank.metrics import CaseMetrics, evaluate_case
from lesionrank.ranking import Metric
from lesionrank.tables import write_metrics_csv
from lesionrank.volume import LabelVolume, read_label_volume

logger = logging.getLogger(__name__)

SIDECAR_SUFFIX = ".log.jsonl"


@dataclass(frozen=True)
class CaseTask:
    team: str
    subject: str
    gt_path: Path
    pred_path: Optional[Path]


@dataclass
class BatchResult:
    metrics: pd.DataFrame
    out_csv: Path
    sidecar: Path
    events: list[dict] = field(default_factory=list)


def _volume_files(directory: Path) -> dict[str, Path]:
    files = {}
    for p in sorted(directory.iterdir()):
        if p.is_file() and volume_suffix(p) is not None:
            files[subject_id(p)] = p
    return files


def discover_tasks(gt_dir: Path, teams_dir: Path) -> tuple[list[CaseTask], list[dict]]:
    """One task per (team, subject); missing prediction files become events."""
    gt_dir, teams_dir = Path(gt_dir), Path(teams_dir)
    for d in (gt_dir, teams_dir):
        if not d.is_dir():
            raise UsageError("not a directory", path=str(d))
    gt_files = _volume_files(gt_dir)
    if not gt_files:
        raise UsageError("no ground-truth volumes found", path=str(gt_dir))
    teams = sorted(p for p in teams_dir.iterdir() if p.is_dir())
    if not teams:
        raise UsageError("no team subdirectories found", path=str(teams_dir))

    tasks, events = [], []
    for team_dir in teams:
        team = team_dir.name
        preds = _volume_files(team_dir)
        for subject, gt_path in gt_files.items():
            pred_path = preds.get(subject)
            if pred_path is None:
                expected = team_dir / gt_path.name
                logger.warning("team %s has no prediction for %s; scoring as empty", team, subject)
                events.append({"event": "missing_prediction", "team": team, "subject": subject, "path": str(expected)})
            tasks.append(CaseTask(team, subject, gt_path, pred_path))
    return tasks, events


def case_rows(team: str, subject: str, case: CaseMetrics, with_sensitivity: bool = False) -> list[dict]:
    rows = []
    for region, m in case.items():
        values = {Metric.DICE: m.lesionwise_dice, Metric.HD95: m.lesionwise_hd95_mm}
        if with_sensitivity:
            values[Metric.SENSITIVITY] = m.sensitivity
        for metric, value in values.items():
            rows.append({"team": team, "subject": subject, "region": region.value, "metric": metric.value, "value": value})
    return rows


def evaluate_task(task: CaseTask, cfg: EvalConfig, with_sensitivity: bool = False) -> list[dict]:
    gt = read_label_volume(task.gt_path)
    pred = read_label_volume(task.pred_path) if task.pred_path is not None else LabelVolume.zeros(gt.geometry)
    return case_rows(task.team, task.subject, evaluate_case(gt, pred, cfg), with_sensitivity)


def write_sidecar(events: list[dict], path: Path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as f:
            for entry in events:
                f.write(json.dumps(entry, sort_keys=True) + "\n")
    except OSError as e:
        raise VolumeIOError(f"cannot write batch log: {e.strerror or e}", path=str(path)) from e


def run_batch(
    gt_dir: Path,
    teams_dir: Path,
    out_csv: Path,
    cfg: Optional[EvalConfig] = None,
    jobs: int = 1,
    with_sensitivity: bool = False,
) -> BatchResult:
    """Evaluate all cases with up to `jobs` worker processes; rows are written sorted."""
    cfg = cfg or EvalConfig()
    out_csv = Path(out_csv)
    if jobs < 1:
        raise UsageError(f"--jobs must be >= 1, got {jobs}")
    tasks, events = discover_tasks(gt_dir, teams_dir)
    logger.info("evaluating %d case(s) with %d worker(s)", len(tasks), jobs)

    rows: list[dict] = []
    if jobs == 1:
        for task in tasks:
            rows.extend(evaluate_task(task, cfg, with_sensitivity))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(evaluate_task, task, cfg, with_sensitivity) for task in tasks]
            for future in futures:
                rows.extend(future.result())

    df = write_metrics_csv(rows, out_csv)
    sidecar = out_csv.with_name(out_csv.name + SIDECAR_SUFFIX)
    write_sidecar(events, sidecar)
    if events:
        logger.warning("%d missing prediction(s) flagged in %s", len(events), sidecar)
    return BatchResult(df, out_csv, sidecar, events)
