"""Lesion-wise Dice and HD95 with dilation-based lesion matching, plus volume-wise scores.

Per region, the ground truth is split into lesions by labelling the dilated mask and
restricting the labels back to the original voxels, so blobs whose catchments touch form
one lesion; lesions under the voxel cutoff (counted undilated) are dropped. Each
lesion's catchment is its own footprint dilated by `dilation_iterations` passes of the 3x3x3
element. Every prediction component touching a catchment is assigned to that lesion, and
Dice/HD95 are measured between the undilated lesion and the union of its assigned
components. Unmatched lesions (FN) and components touching no catchment (FP) count in the
denominator with Dice 0 and HD95 `unmatched_lesion_hd95_mm`.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Iterator, Optional, Union

import numpy as np
from scipy import ndimage

from lesionrank.config import EvalConfig
from lesionrank.errors import ContractViolation, GeometryMismatchError
from lesionrank.morphology import (
    LesionComponent,
    bounding_box,
    components_from_labels,
    dilate_bits,
    label_grouped_components,
    pad_box,
    surface,
    union_box,
)
from lesionrank.regions import BinaryMask, RegionKind, compose_region, mask_volume_voxels
from lesionrank.volume import GridGeometry, LabelVolume, validate_pair

logger = logging.getLogger(__name__)

# A voxel set is a boolean grid (or BinaryMask) or a collection of x-fastest linear indices.
VoxelSet = Union[BinaryMask, np.ndarray, Iterable[int]]

QUANTILE_EPS = 1e-9


@dataclass(frozen=True)
class LesionMatch:
    gt_id: int
    pred_ids: tuple[int, ...]
    dice: float
    hd95_mm: float

    @property
    def matched(self) -> bool:
        return bool(self.pred_ids)


@dataclass(frozen=True, eq=False)
class LesionDecomposition:
    gt_lesions: list[LesionComponent]
    pred_components: list[LesionComponent]
    matches: list[LesionMatch]
    tp: int
    fn: int
    fp: int
    fp_ids: tuple[int, ...] = ()

    @property
    def n_lesions(self) -> int:
        return self.tp + self.fn + self.fp


@dataclass(frozen=True)
class RegionMetrics:
    lesionwise_dice: float
    lesionwise_hd95_mm: float
    volumewise_dice: float
    volumewise_hd95_mm: float
    sensitivity: float
    tp: int
    fn: int
    fp: int
    gt_empty: bool
    pred_empty: bool

    @property
    def counts(self) -> tuple[int, int, int]:
        return (self.tp, self.fn, self.fp)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CaseMetrics:
    regions: dict[RegionKind, RegionMetrics] = field(default_factory=dict)

    def __getitem__(self, region: RegionKind) -> RegionMetrics:
        return self.regions[region]

    def __iter__(self) -> Iterator[RegionKind]:
        return iter(self.regions)

    def items(self):
        return self.regions.items()

    def to_dict(self) -> dict:
        return {region.value: m.to_dict() for region, m in self.regions.items()}


# --- primitives ---

def _bits(x: VoxelSet, geometry: Optional[GridGeometry] = None) -> np.ndarray:
    if isinstance(x, BinaryMask):
        return x.bits
    arr = np.asarray(list(x) if isinstance(x, (set, frozenset)) else x)
    if arr.dtype == bool:
        return arr
    if geometry is None:
        raise ContractViolation("index-set input needs a grid geometry")
    flat = np.zeros(geometry.n_voxels, dtype=bool)
    flat[arr.astype(np.int64).ravel()] = True
    return flat.reshape(geometry.dims, order="F")


def _index_array(x: Iterable[int]) -> np.ndarray:
    arr = np.asarray(list(x) if isinstance(x, (set, frozenset)) else x, dtype=np.int64)
    return np.unique(arr.ravel())


def dice(a: VoxelSet, b: VoxelSet) -> float:
    """2|a∩b| / (|a|+|b|); 1 when both are empty."""
    if isinstance(a, BinaryMask) or isinstance(b, BinaryMask) or (
        isinstance(a, np.ndarray) and a.dtype == bool
    ):
        a_bits, b_bits = _bits(a), _bits(b)
        overlap = int(np.count_nonzero(a_bits & b_bits))
        total = int(np.count_nonzero(a_bits)) + int(np.count_nonzero(b_bits))
    else:
        a_idx, b_idx = _index_array(a), _index_array(b)
        overlap = int(np.intersect1d(a_idx, b_idx, assume_unique=True).size)
        total = int(a_idx.size + b_idx.size)
    if total == 0:
        return 1.0
    return 2.0 * overlap / total


def nearest_rank(values: np.ndarray, percentile: float) -> float:
    """Nearest-rank quantile: the ceil(p*n)-th smallest value (1-based, at least the first)."""
    n = values.size
    k = max(math.ceil(percentile * n - QUANTILE_EPS), 1)
    return float(np.partition(values, k - 1)[k - 1])


def _percentile_hausdorff(a: np.ndarray, b: np.ndarray, spacing, percentile: float) -> float:
    box = pad_box(union_box([bounding_box(a), bounding_box(b)]), 1, a.shape)
    surf_a = surface(a[box])
    surf_b = surface(b[box])
    to_b = ndimage.distance_transform_edt(~surf_b, sampling=spacing)[surf_a]
    to_a = ndimage.distance_transform_edt(~surf_a, sampling=spacing)[surf_b]
    return max(nearest_rank(to_b, percentile), nearest_rank(to_a, percentile))


def hd95(a: VoxelSet, b: VoxelSet, geom: GridGeometry, percentile: float = 0.95) -> float:
    """Symmetric percentile Hausdorff distance in mm between the surfaces of a and b."""
    a_bits, b_bits = _bits(a, geom), _bits(b, geom)
    if a_bits.shape != geom.dims or b_bits.shape != geom.dims:
        raise GeometryMismatchError(f"voxel sets do not match grid {geom}")
    if not a_bits.any() or not b_bits.any():
        raise ContractViolation("hd95 needs two nonempty voxel sets; empty regions take the penalty path")
    return _percentile_hausdorff(a_bits, b_bits, geom.spacing, percentile)


def sensitivity(gt: BinaryMask, pred: BinaryMask) -> float:
    """Voxel-wise |gt ∩ pred| / |gt|; 1 when gt is empty."""
    _check_geometry(gt, pred)
    n_gt = mask_volume_voxels(gt)
    if n_gt == 0:
        return 1.0
    return int(np.count_nonzero(gt.bits & pred.bits)) / n_gt


# --- lesion decomposition ---

def _check_geometry(gt: BinaryMask, pred: BinaryMask) -> GridGeometry:
    if not gt.geometry.matches(pred.geometry):
        raise GeometryMismatchError(
            f"geometry mismatch: ground truth {gt.geometry} vs prediction {pred.geometry}"
        )
    return gt.geometry


def _kept_components(bits: np.ndarray, connectivity: int, min_voxels: int, grow: int = 0):
    """Label map and component list with components under min_voxels removed.

    grow > 0 groups voxels through the dilated mask (ground-truth lesion identity); the
    voxel counts stay those of the undilated voxels.
    """
    labels, n = label_grouped_components(bits, connectivity, grow)
    components = components_from_labels(labels, n)
    kept = [c for c in components if c.voxel_count >= min_voxels]
    if len(kept) < n:
        keep = np.zeros(n + 1, dtype=bool)
        keep[np.array([c.id for c in kept], dtype=np.intp)] = True
        labels = np.where(keep[labels], labels, 0)
    return labels, kept


def decompose_lesions(gt: BinaryMask, pred: BinaryMask, cfg: EvalConfig) -> LesionDecomposition:
    geom = _check_geometry(gt, pred)
    dims = geom.dims
    iterations = cfg.dilation_iterations

    gt_labels, gt_lesions = _kept_components(gt.bits, cfg.connectivity, cfg.min_lesion_voxels, iterations)
    pred_min = cfg.min_lesion_voxels if cfg.filter_pred_components else 0
    pred_labels, pred_components = _kept_components(pred.bits, cfg.connectivity, pred_min)
    gt_boxes = ndimage.find_objects(gt_labels)
    pred_boxes = ndimage.find_objects(pred_labels)

    matches: list[LesionMatch] = []
    assigned: set[int] = set()
    for lesion in gt_lesions:
        box = pad_box(gt_boxes[lesion.id - 1], iterations, dims)
        catchment = dilate_bits(gt_labels[box] == lesion.id, iterations)
        hit = np.unique(pred_labels[box][catchment])
        hit = hit[hit > 0]
        if hit.size == 0:
            matches.append(LesionMatch(lesion.id, (), 0.0, cfg.unmatched_lesion_hd95_mm))
            continue
        ubox = pad_box(union_box([gt_boxes[lesion.id - 1], *(pred_boxes[h - 1] for h in hit)]), 1, dims)
        g = gt_labels[ubox] == lesion.id
        p = np.isin(pred_labels[ubox], hit)
        matches.append(
            LesionMatch(
                lesion.id,
                tuple(int(h) for h in hit),
                dice(g, p),
                _percentile_hausdorff(g, p, geom.spacing, cfg.hd_percentile),
            )
        )
        assigned.update(int(h) for h in hit)

    fp_ids = tuple(c.id for c in pred_components if c.id not in assigned)
    tp = sum(1 for m in matches if m.matched)
    return LesionDecomposition(
        gt_lesions=gt_lesions,
        pred_components=pred_components,
        matches=matches,
        tp=tp,
        fn=len(gt_lesions) - tp,
        fp=len(fp_ids),
        fp_ids=fp_ids,
    )


def lesionwise_dice(d: LesionDecomposition) -> float:
    """Sum of matched-lesion Dice over tp + fn + fp; 1 when nothing survives the cutoff."""
    if d.n_lesions == 0:
        return 1.0
    return sum(m.dice for m in d.matches if m.matched) / d.n_lesions


def lesionwise_hd95(d: LesionDecomposition, cfg: EvalConfig) -> float:
    """Matched-lesion HD95 plus the unmatched penalty per FN/FP, over tp + fn + fp."""
    if d.n_lesions == 0:
        return 0.0
    total = sum(m.hd95_mm for m in d.matches if m.matched)
    total += cfg.unmatched_lesion_hd95_mm * (d.fn + d.fp)
    return total / d.n_lesions


# --- per-case evaluation ---

def evaluate_region(gt: BinaryMask, pred: BinaryMask, cfg: EvalConfig) -> RegionMetrics:
    geom = _check_geometry(gt, pred)
    gt_empty, pred_empty = gt.is_empty(), pred.is_empty()
    vol_dice = dice(gt, pred)
    sens = sensitivity(gt, pred)

    if gt_empty and pred_empty:
        return RegionMetrics(1.0, 0.0, vol_dice, 0.0, sens, 0, 0, 0, True, True)
    if gt_empty or pred_empty:
        # Region missed, or predicted where none exists: whole-region penalty, no decomposition.
        penalty = cfg.missing_region_hd95_mm
        n_gt = len(_kept_components(gt.bits, cfg.connectivity, cfg.min_lesion_voxels, cfg.dilation_iterations)[1])
        n_pred = 0
        if not pred_empty:
            pred_min = cfg.min_lesion_voxels if cfg.filter_pred_components else 0
            n_pred = len(_kept_components(pred.bits, cfg.connectivity, pred_min)[1])
        return RegionMetrics(0.0, penalty, vol_dice, penalty, sens, 0, n_gt, n_pred, gt_empty, pred_empty)

    d = decompose_lesions(gt, pred, cfg)
    return RegionMetrics(
        lesionwise_dice=lesionwise_dice(d),
        lesionwise_hd95_mm=lesionwise_hd95(d, cfg),
        volumewise_dice=vol_dice,
        volumewise_hd95_mm=_percentile_hausdorff(gt.bits, pred.bits, geom.spacing, cfg.hd_percentile),
        sensitivity=sens,
        tp=d.tp,
        fn=d.fn,
        fp=d.fp,
        gt_empty=False,
        pred_empty=False,
    )


def evaluate_case(gt_vol: LabelVolume, pred_vol: LabelVolume, cfg: Optional[EvalConfig] = None) -> CaseMetrics:
    """Lesion-wise and volume-wise scores for ET, TC and WT of one subject."""
    cfg = cfg or EvalConfig()
    validate_pair(gt_vol, pred_vol)
    regions = {}
    for region in RegionKind:
        regions[region] = evaluate_region(compose_region(gt_vol, region), compose_region(pred_vol, region), cfg)
        logger.debug("%s: %s", region.value, regions[region])
    return CaseMetrics(regions)
