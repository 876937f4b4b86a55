"""Challenge ranking: per-subject individual ranks, cumulative ranks, FRS, permutation tests.

Each team is ranked against the others for every (subject, region, metric). A team's
cumulative rank for a subject combines its six individual ranks (3 regions x 2 metrics);
its final ranking score (FRS) is the mean cumulative rank over subjects. Lower is better.
"""

import hashlib
import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Iterable, Literal, Mapping, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from lesionrank.errors import (
    ContractViolation,
    DuplicateRowError,
    IncompleteTableError,
    UnknownTeamError,
)
from lesionrank.regions import RegionKind

logger = logging.getLogger(__name__)

Exceedance = Literal["ge", "gt"]
Alternative = Literal["two-sided", "greater"]

# sign-pattern rows drawn per batch; bounds memory, fixed so the RNG stream never depends on it
PERMUTATION_BATCH = 8192
MAX_EXACT_SUBJECTS = 20


class Metric(Enum):
    DICE = "dice"
    HD95 = "hd95"
    SENSITIVITY = "sensitivity"

    @property
    def higher_is_better(self) -> bool:
        return self is not Metric.HD95


RANKED_METRICS = (Metric.DICE, Metric.HD95)


class ScalingMode(str, Enum):
    MEAN_OF_6 = "mean-of-6"
    SUM_OF_6 = "sum-of-6"
    REGION_SUM_METRIC_MEAN = "region-sum-metric-mean"

    @property
    def divisor(self) -> int:
        """What the sum of a subject's six individual ranks is divided by."""
        return {"mean-of-6": 6, "sum-of-6": 1, "region-sum-metric-mean": 2}[self.value]


# Default; matches leaderboard cumulative-rank magnitudes (mean over metrics, summed over regions).
DEFAULT_SCALING = ScalingMode.REGION_SUM_METRIC_MEAN

Key = tuple[str, str, RegionKind, Metric]


@dataclass(frozen=True, eq=False)
class MetricTable:
    teams: tuple[str, ...]
    subjects: tuple[str, ...]
    values: dict[Key, float]

    @property
    def orientation(self) -> dict[Metric, bool]:
        return {m: m.higher_is_better for m in RANKED_METRICS}

    @classmethod
    def from_records(cls, records: Iterable[tuple[str, str, RegionKind, Metric, float]]) -> "MetricTable":
        """Collect (team, subject, region, metric, value) rows; metrics other than dice/hd95 are skipped."""
        values: dict[Key, float] = {}
        duplicates: list[Key] = []
        teams, subjects = set(), set()
        for team, subject, region, metric, value in records:
            key = (str(team), str(subject), region, metric)
            teams.add(key[0])
            subjects.add(key[1])
            if metric not in RANKED_METRICS:
                continue
            if key in values:
                duplicates.append(key)
                continue
            value = float(value)
            if not math.isfinite(value):
                raise ContractViolation(f"non-finite value {value!r} for {_fmt_key(key)}")
            values[key] = value
        if duplicates:
            shown = ", ".join(_fmt_key(k) for k in duplicates[:5])
            raise DuplicateRowError(f"{len(duplicates)} duplicate row(s): {shown}")
        return cls(tuple(sorted(teams)), tuple(sorted(subjects)), values)

    def missing(self) -> list[Key]:
        return [
            (t, s, r, m)
            for t in self.teams
            for s in self.subjects
            for r in RegionKind
            for m in RANKED_METRICS
            if (t, s, r, m) not in self.values
        ]

    def array(self) -> np.ndarray:
        """Values shaped (teams, subjects, regions, metrics)."""
        out = np.empty((len(self.teams), len(self.subjects), len(RegionKind), len(RANKED_METRICS)))
        for i, t in enumerate(self.teams):
            for j, s in enumerate(self.subjects):
                for k, r in enumerate(RegionKind):
                    for l, m in enumerate(RANKED_METRICS):
                        out[i, j, k, l] = self.values[(t, s, r, m)]
        return out


def _fmt_key(key: Key) -> str:
    team, subject, region, metric = key
    return f"({team}, {subject}, {region.value}, {metric.value})"


@dataclass(frozen=True, eq=False)
class RankTable:
    teams: tuple[str, ...]  # ascending FRS
    subjects: tuple[str, ...]
    individual_ranks: dict[Key, float]
    cumulative: dict[tuple[str, str], float]
    frs: dict[str, float]
    scaling_mode: ScalingMode = DEFAULT_SCALING

    @classmethod
    def from_cumulative(
        cls,
        cumulative: Mapping[str, Sequence[float]],
        subjects: Optional[Sequence[str]] = None,
        scaling_mode: ScalingMode = DEFAULT_SCALING,
    ) -> "RankTable":
        """Rank table from per-subject cumulative ranks alone (no individual ranks)."""
        lengths = {len(v) for v in cumulative.values()}
        if len(lengths) != 1:
            raise ContractViolation("every team needs one cumulative rank per subject")
        n = lengths.pop()
        subjects = tuple(subjects) if subjects is not None else tuple(f"S{j + 1:03d}" for j in range(n))
        cum = {(t, s): float(v[j]) for t, v in cumulative.items() for j, s in enumerate(subjects)}
        frs = {t: float(np.mean(np.asarray(v, dtype=float))) for t, v in cumulative.items()}
        return cls(_frs_order(frs), subjects, {}, cum, frs, scaling_mode)

    def cumulative_vector(self, team: str) -> np.ndarray:
        if team not in self.frs:
            raise UnknownTeamError(f"unknown team {team!r}; known teams: {', '.join(self.teams)}")
        return np.array([self.cumulative[(team, s)] for s in self.subjects])

    def cumulative_total(self, team: str) -> float:
        return float(self.cumulative_vector(team).sum())


def _frs_order(frs: Mapping[str, float]) -> tuple[str, ...]:
    return tuple(sorted(frs, key=lambda t: (frs[t], t)))


def rank_values(values: Sequence[float], higher_is_better: bool) -> list[float]:
    """Rank 1 for the best value; ties share the average of the ranks they span."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ContractViolation("cannot rank an empty list")
    if not np.isfinite(arr).all():
        raise ContractViolation(f"cannot rank non-finite values: {list(values)}")
    return [float(r) for r in rankdata(-arr if higher_is_better else arr, method="average")]


def build_rank_table(m: MetricTable, scaling_mode: ScalingMode = DEFAULT_SCALING) -> RankTable:
    missing = m.missing()
    if missing:
        shown = ", ".join(_fmt_key(k) for k in missing[:5])
        more = f" (and {len(missing) - 5} more)" if len(missing) > 5 else ""
        raise IncompleteTableError(f"{len(missing)} missing tuple(s): {shown}{more}")
    scaling_mode = ScalingMode(scaling_mode)

    values = m.array()
    orientation = m.orientation
    signs = np.array([-1.0 if orientation[metric] else 1.0 for metric in RANKED_METRICS])
    ranks = rankdata(values * signs, method="average", axis=0)
    cumulative = ranks.sum(axis=(2, 3)) / scaling_mode.divisor
    frs_values = cumulative.mean(axis=1)

    individual = {}
    for i, t in enumerate(m.teams):
        for j, s in enumerate(m.subjects):
            for k, r in enumerate(RegionKind):
                for l, metric in enumerate(RANKED_METRICS):
                    individual[(t, s, r, metric)] = float(ranks[i, j, k, l])
    cum = {(t, s): float(cumulative[i, j]) for i, t in enumerate(m.teams) for j, s in enumerate(m.subjects)}
    frs = {t: float(frs_values[i]) for i, t in enumerate(m.teams)}
    logger.info("ranked %d teams over %d subjects (%s)", len(m.teams), len(m.subjects), scaling_mode.value)
    return RankTable(_frs_order(frs), m.subjects, individual, cum, frs, scaling_mode)


# --- permutation testing ---

@dataclass(frozen=True)
class PermutationResult:
    pair: tuple[str, str]
    observed_gap: float
    p_value: float
    n_permutations: int
    seed: Optional[int]
    exceed_count: int
    exceedance: Exceedance = "ge"
    alternative: Alternative = "two-sided"
    exact: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def pair_stream(seed: int, a: str, b: str) -> np.random.Generator:
    """PCG64 stream keyed by (seed, unordered pair), independent of evaluation order."""
    digest = hashlib.sha256("\x1f".join(sorted((a, b))).encode("utf-8")).digest()
    pair_key = int.from_bytes(digest[:8], "little")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), pair_key])))


def _differences(r: RankTable, a: str, b: str) -> np.ndarray:
    if a == b:
        raise ContractViolation(f"permutation test needs two different teams, got {a!r} twice")
    return r.cumulative_vector(b) - r.cumulative_vector(a)


def _statistic(sums: np.ndarray, n_subjects: int, alternative: Alternative) -> np.ndarray:
    gaps = np.asarray(sums, dtype=float) / n_subjects
    if alternative == "two-sided":
        return np.abs(gaps)
    if alternative == "greater":
        return gaps
    raise ContractViolation(f"alternative must be 'two-sided' or 'greater', got {alternative!r}")


def _count_exceeding(perm: np.ndarray, observed: float, exceedance: Exceedance) -> int:
    tol = 1e-9 * max(1.0, abs(observed))
    if exceedance == "ge":
        return int(np.count_nonzero(perm >= observed - tol))
    if exceedance == "gt":
        return int(np.count_nonzero(perm > observed + tol))
    raise ContractViolation(f"exceedance must be 'ge' or 'gt', got {exceedance!r}")


def permutation_test(
    r: RankTable,
    a: str,
    b: str,
    n: int,
    seed: int,
    exceedance: Exceedance = "ge",
    alternative: Alternative = "two-sided",
) -> PermutationResult:
    """Swap the two teams' cumulative ranks per subject with probability 1/2, n times.

    p = (1 + #permuted gaps exceeding the observed gap) / (1 + n).
    """
    if n < 1:
        raise ContractViolation(f"number of permutations must be >= 1, got {n}")
    diff = _differences(r, a, b)
    n_subjects = diff.size
    observed = float(_statistic(diff.sum(), n_subjects, alternative))
    rng = pair_stream(seed, a, b)

    exceed = 0
    done = 0
    while done < n:
        rows = min(PERMUTATION_BATCH, n - done)
        swaps = rng.integers(0, 2, size=(rows, n_subjects), dtype=np.int8)
        signs = 1.0 - 2.0 * swaps
        exceed += _count_exceeding(_statistic(signs @ diff, n_subjects, alternative), observed, exceedance)
        done += rows

    p = (1 + exceed) / (1 + n)
    logger.debug("permtest %s vs %s: gap=%.6g exceed=%d/%d p=%.6g", a, b, observed, exceed, n, p)
    return PermutationResult((a, b), observed, p, n, int(seed), exceed, exceedance, alternative)


def exact_permutation_test(
    r: RankTable,
    a: str,
    b: str,
    exceedance: Exceedance = "ge",
    alternative: Alternative = "two-sided",
) -> PermutationResult:
    """Enumerate all 2^S swap patterns; p is the exact exceedance proportion."""
    diff = _differences(r, a, b)
    n_subjects = diff.size
    if n_subjects > MAX_EXACT_SUBJECTS:
        raise ContractViolation(
            f"exact enumeration supports at most {MAX_EXACT_SUBJECTS} subjects, got {n_subjects}"
        )
    observed = float(_statistic(diff.sum(), n_subjects, alternative))
    total = 1 << n_subjects
    bits = np.arange(n_subjects)
    exceed = 0
    for start in range(0, total, PERMUTATION_BATCH):
        patterns = np.arange(start, min(start + PERMUTATION_BATCH, total))
        swaps = (patterns[:, None] >> bits) & 1
        signs = 1.0 - 2.0 * swaps
        exceed += _count_exceeding(_statistic(signs @ diff, n_subjects, alternative), observed, exceedance)
    return PermutationResult((a, b), observed, exceed / total, total, None, exceed, exceedance, alternative, exact=True)


def pairwise_matrix(
    r: RankTable,
    n: int,
    seed: int,
    exceedance: Exceedance = "ge",
    alternative: Alternative = "two-sided",
) -> dict[tuple[str, str], PermutationResult]:
    """One test per unordered pair (team_i, team_j), i < j in ascending FRS order."""
    if len(r.teams) < 2:
        return {}
    out = {}
    for i, a in enumerate(r.teams):
        for b in r.teams[i + 1:]:
            out[(a, b)] = permutation_test(r, a, b, n, seed, exceedance, alternative)
    logger.info("computed %d pairwise permutation tests (n=%d, seed=%d)", len(out), n, seed)
    return out
