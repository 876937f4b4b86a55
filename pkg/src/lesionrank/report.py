"""Summary tables (mean ± std (median) per team, region and metric) and box-plot SVGs."""

import logging
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from matplotlib import cbook  # noqa: E402
from pydantic import BaseModel, ConfigDict, Field  # noqa: E402

from lesionrank.errors import UsageError, VolumeIOError  # noqa: E402
from lesionrank.ranking import Metric  # noqa: E402
from lesionrank.regions import RegionKind  # noqa: E402

logger = logging.getLogger(__name__)

WHISKER_IQR = 1.5
SUMMARY_SUFFIXES = (".md", ".csv")
METRIC_TITLES = {
    Metric.DICE: "Dice Similarity Coefficient",
    Metric.HD95: "95% Hausdorff Distance",
    Metric.SENSITIVITY: "Sensitivity",
}


class SummaryRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    team: str
    region: RegionKind
    metric: Metric
    mean: float
    std: float = Field(ge=0)
    median: float

    def render(self, digits: int = 2) -> str:
        return f"{round_half_up(self.mean, digits)} ± {round_half_up(self.std, digits)} ({round_half_up(self.median, digits)})"


def round_half_up(value: float, digits: int = 2) -> str:
    quantum = Decimal(1).scaleb(-digits)
    return str(Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_UP))


def summarize(df: pd.DataFrame, ddof: int = 0) -> list[SummaryRow]:
    """One row per (team, region, metric); std is the population formula unless ddof=1."""
    if df.empty:
        raise UsageError("no metric rows to summarize")
    grouped = df.groupby(["team", "region", "metric"], sort=True)["value"]
    stats = grouped.agg(
        mean="mean",
        std=lambda v: float(np.std(v.to_numpy(), ddof=ddof)) if len(v) > ddof else 0.0,
        median="median",
    ).reset_index()
    return [
        SummaryRow(
            team=row.team,
            region=RegionKind(row.region),
            metric=Metric(row.metric),
            mean=row.mean,
            std=row.std,
            median=row.median,
        )
        for row in stats.itertuples(index=False)
    ]


def summary_frame(rows: Sequence[SummaryRow]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "team": r.team,
                "region": r.region.value,
                "metric": r.metric.value,
                "mean": r.mean,
                "std": r.std,
                "median": r.median,
            }
            for r in rows
        ]
    )


def render_markdown(rows: Sequence[SummaryRow]) -> str:
    """One table per region: teams as rows; Dice, HD95 and Sensitivity columns."""
    cells: dict[tuple[RegionKind, str], dict[Metric, str]] = {}
    teams: list[str] = []
    for r in rows:
        cells.setdefault((r.region, r.team), {})[r.metric] = r.render()
        if r.team not in teams:
            teams.append(r.team)

    metrics = [m for m in Metric if any(r.metric is m for r in rows)]
    out = []
    for region in RegionKind:
        region_teams = [t for t in teams if (region, t) in cells]
        if not region_teams:
            continue
        out.append(f"## {region.value}")
        out.append("")
        out.append("| Teams | " + " | ".join(METRIC_TITLES[m] for m in metrics) + " |")
        out.append("|---" * (len(metrics) + 1) + "|")
        for team in region_teams:
            row = cells[(region, team)]
            out.append(f"| {team} | " + " | ".join(row.get(m, "") for m in metrics) + " |")
        out.append("")
    return "\n".join(out)


def write_summary(rows: Sequence[SummaryRow], out_path: Path) -> tuple[Path, Path]:
    """Write <stem>.md and a full-precision <stem>.csv; a trailing .md or .csv on out_path is dropped first."""
    out_path = Path(out_path)
    stem = out_path.with_suffix("") if out_path.suffix.lower() in SUMMARY_SUFFIXES else out_path
    md_path = stem.with_name(stem.name + ".md")
    csv_path = stem.with_name(stem.name + ".csv")
    try:
        md_path.parent.mkdir(parents=True, exist_ok=True)
        md_path.write_text(render_markdown(rows), encoding="utf-8")
        summary_frame(rows).to_csv(csv_path, index=False, float_format="%.17g", lineterminator="\n")
    except OSError as e:
        raise VolumeIOError(f"cannot write summary: {e.strerror or e}", path=str(out_path)) from e
    return md_path, csv_path


# --- box plots ---

def box_stats(values: Sequence[float]) -> dict:
    """Median, quartiles (linear interpolation, numpy's default), whiskers at 1.5 IQR, outliers."""
    stats = cbook.boxplot_stats(np.asarray(values, dtype=float), whis=WHISKER_IQR)[0]
    return {
        "median": float(stats["med"]),
        "q1": float(stats["q1"]),
        "q3": float(stats["q3"]),
        "whislo": float(stats["whislo"]),
        "whishi": float(stats["whishi"]),
        "fliers": [float(v) for v in stats["fliers"]],
    }


def boxplot_svg(df: pd.DataFrame, region: str, metric: str, out_svg: Path) -> list[str]:
    """One box per team for one region and metric. Returns the teams in plotting order."""
    region_kind = RegionKind.parse(region)
    try:
        metric_kind = Metric(metric.strip().lower())
    except ValueError:
        raise UsageError(f"unknown metric {metric!r}; expected one of dice, hd95, sensitivity") from None

    sel = df[(df["region"] == region_kind.value) & (df["metric"] == metric_kind.value)]
    if sel.empty:
        raise UsageError(f"no {metric_kind.value} rows for region {region_kind.value}")
    teams = sorted(sel["team"].unique())
    stats = []
    for team in teams:
        s = cbook.boxplot_stats(sel.loc[sel["team"] == team, "value"].to_numpy(dtype=float), whis=WHISKER_IQR)[0]
        s["label"] = team
        stats.append(s)

    with plt.rc_context({"svg.hashsalt": "lesionrank", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(max(4.0, 1.0 + 0.8 * len(teams)), 4.0))
        artists = ax.bxp(stats, showfliers=True, patch_artist=False)
        for i, team in enumerate(teams):
            artists["boxes"][i].set_gid(f"box-{i}")
            artists["medians"][i].set_gid(f"median-{i}")
            for j in (0, 1):
                artists["whiskers"][2 * i + j].set_gid(f"whisker-{i}-{j}")
                artists["caps"][2 * i + j].set_gid(f"cap-{i}-{j}")
            artists["fliers"][i].set_gid(f"outliers-{i}")
        ax.set_title(f"{METRIC_TITLES[metric_kind]} ({region_kind.value})")
        ax.set_ylabel(metric_kind.value)
        ax.tick_params(axis="x", labelrotation=45)
        fig.tight_layout()
        try:
            Path(out_svg).parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(out_svg, format="svg", metadata={"Date": None})
        except OSError as e:
            raise VolumeIOError(f"cannot write plot: {e.strerror or e}", path=str(out_svg)) from e
        finally:
            plt.close(fig)
    logger.info("wrote %s box plot for %s with %d team(s) to %s", metric_kind.value, region_kind.value, len(teams), out_svg)
    return teams
