"""CSV tables: metrics input, cumulative ranks, FRS leaderboard, p-value matrix.

Floats are written with 17 significant digits so re-ranking a written table reproduces the
original ranks exactly; rounding happens only when rendering for people.
"""

import math
from decimal import ROUND_DOWN, Decimal
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import pandas as pd

from lesionrank.errors import FormatError, UsageError, VolumeIOError
from lesionrank.ranking import Metric, MetricTable, PermutationResult, RankTable
from lesionrank.regions import RegionKind

METRICS_COLUMNS = ["team", "subject", "region", "metric", "value"]
RANKS_COLUMNS = ["team", "subject", "cumulative_rank"]
FRS_COLUMNS = ["team", "frs", "rank"]
FLOAT_FORMAT = "%.17g"
UNRANKED = "-"

_METRIC_ORDER = {m.value: i for i, m in enumerate(Metric)}


def _write(df: pd.DataFrame, path: Path, **kwargs) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", **kwargs)
    except OSError as e:
        raise VolumeIOError(f"cannot write table: {e.strerror or e}", path=str(path)) from e


def _parse_value(text: str) -> float:
    # float() is correctly rounded, so %.17g text round-trips exactly
    try:
        return float(text)
    except ValueError:
        return math.nan


def read_metrics_csv(path: Path) -> pd.DataFrame:
    """Load and validate `team,subject,region,metric,value`; region/metric become canonical strings."""
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError as e:
        raise VolumeIOError(f"cannot read table: {e.strerror}", path=str(path)) from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise FormatError(f"malformed metrics CSV: {e}", path=str(path)) from e
    if list(df.columns) != METRICS_COLUMNS:
        raise FormatError(
            f"expected header {','.join(METRICS_COLUMNS)}, got {','.join(map(str, df.columns))}",
            path=str(path),
        )
    if df.empty:
        raise UsageError("metrics CSV has no rows", path=str(path))

    df["region"] = df["region"].str.strip().str.upper()
    df["metric"] = df["metric"].str.strip().str.lower()
    bad_region = ~df["region"].isin([r.value for r in RegionKind])
    bad_metric = ~df["metric"].isin([m.value for m in Metric])
    for mask, what in ((bad_region, "region"), (bad_metric, "metric")):
        if mask.any():
            row = int(mask.idxmax())
            raise FormatError(f"row {row + 2}: unknown {what} {df.loc[row, what]!r}", path=str(path))

    values = df["value"].map(_parse_value)
    bad_value = ~values.map(math.isfinite)
    if bad_value.any():
        row = int(bad_value.idxmax())
        raise FormatError(f"row {row + 2}: value {df.loc[row, 'value']!r} is not a finite number", path=str(path))
    df["value"] = values.astype(float)
    return df


def metric_table(df: pd.DataFrame) -> MetricTable:
    return MetricTable.from_records(
        (row.team, row.subject, RegionKind(row.region), Metric(row.metric), row.value)
        for row in df.itertuples(index=False)
    )


def sort_metric_rows(rows: Iterable[Mapping]) -> pd.DataFrame:
    """Rows in (team, subject, region, metric) order, whatever order they were produced in."""
    df = pd.DataFrame(list(rows), columns=METRICS_COLUMNS)
    df["_m"] = df["metric"].map(_METRIC_ORDER)
    df = df.sort_values(["team", "subject", "region", "_m"], kind="mergesort").drop(columns="_m")
    return df.reset_index(drop=True)


def write_metrics_csv(rows: Iterable[Mapping], path: Path) -> pd.DataFrame:
    df = sort_metric_rows(rows)
    _write(df, path)
    return df


def ranks_frame(r: RankTable) -> pd.DataFrame:
    return pd.DataFrame(
        [(t, s, r.cumulative[(t, s)]) for t in r.teams for s in r.subjects],
        columns=RANKS_COLUMNS,
    )


def frs_table(r: RankTable, unranked: Sequence[str] = ()) -> pd.DataFrame:
    """Teams in ascending FRS; unranked (organizer) teams keep their FRS but rank '-'."""
    unranked = set(unranked)
    rows = []
    position = 0
    for team in r.teams:
        if team in unranked:
            rank = UNRANKED
        else:
            position += 1
            rank = str(position)
        rows.append((team, r.frs[team], rank))
    return pd.DataFrame(rows, columns=FRS_COLUMNS)


def leaderboard_frs(value: float, digits: int = 2) -> str:
    """FRS as printed on the leaderboard: truncated toward zero, not rounded."""
    quantum = Decimal(1).scaleb(-digits)
    return str(Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_DOWN))


def pvalue_frame(matrix: Mapping[tuple[str, str], PermutationResult], teams: Sequence[str]) -> pd.DataFrame:
    """Square frame, teams as header row and first column; only the upper triangle is filled."""
    df = pd.DataFrame(index=pd.Index(list(teams), name="team"), columns=list(teams), dtype=object)
    for (a, b), result in matrix.items():
        df.loc[a, b] = result.p_value
    return df.reset_index()


def write_rank_outputs(
    r: RankTable,
    out_dir: Path,
    matrix: Optional[Mapping[tuple[str, str], PermutationResult]] = None,
    unranked: Sequence[str] = (),
) -> dict[str, Path]:
    out_dir = Path(out_dir)
    paths = {
        "ranks": out_dir / "ranks.csv",
        "frs": out_dir / "frs.csv",
        "pvalues": out_dir / "pvalues.csv",
    }
    _write(ranks_frame(r), paths["ranks"])
    _write(frs_table(r, unranked), paths["frs"])
    _write(pvalue_frame(matrix or {}, r.teams), paths["pvalues"], na_rep="")
    return paths
