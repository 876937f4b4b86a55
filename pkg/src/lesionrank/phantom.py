"""Deterministic synthetic ground-truth/prediction pairs with known lesion structure."""

import hashlib
import logging
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import ndimage

from lesionrank.errors import GenerationError
from lesionrank.regions import RegionKind
from lesionrank.volume import LabelVolume

logger = logging.getLogger(__name__)

PLACEMENT_RETRIES = 1000
LESION_LABELS = (1, 2, 3)
FALSE_BLOB_LABEL = 3
# keeps separate blobs from touching under 26-connectivity
BLOB_GAP = 1


class PerturbationKind(str, Enum):
    NONE = "none"
    ERODE = "erode"
    DILATE = "dilate"
    SHIFT = "shift"
    DROP_REGION = "drop_region"
    ADD_FALSE_BLOB = "add_false_blob"


class Perturbation(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: PerturbationKind = PerturbationKind.NONE
    shift: tuple[int, int, int] = (0, 0, 0)
    region: Optional[RegionKind] = None
    count: int = Field(1, ge=0)
    size: int = Field(4, ge=1)
    # minimum Chebyshev gap between a false blob and any foreground voxel
    clearance: int = Field(4, ge=1)

    @model_validator(mode="after")
    def _check_params(self) -> "Perturbation":
        if self.kind is PerturbationKind.DROP_REGION and self.region is None:
            raise ValueError("drop_region needs a region (ET, TC or WT)")
        return self


class PhantomSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = Field(0, ge=0)
    dims: tuple[int, int, int] = (32, 32, 32)
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    n_lesions: int = Field(1, ge=0, description="blobs per label")
    lesion_radius_range: tuple[int, int] = (3, 5)
    perturbation: Perturbation = Perturbation()

    @model_validator(mode="after")
    def _check_geometry(self) -> "PhantomSpec":
        if any(d < 1 for d in self.dims):
            raise ValueError(f"dims must be positive, got {self.dims}")
        if any(s <= 0 for s in self.spacing):
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        low, high = self.lesion_radius_range
        if low < 1 or high < low:
            raise ValueError(f"radius range must satisfy 1 <= min <= max, got {self.lesion_radius_range}")
        if self.perturbation.kind is PerturbationKind.SHIFT:
            if any(abs(s) >= d for s, d in zip(self.perturbation.shift, self.dims)):
                raise ValueError(f"shift {self.perturbation.shift} must be smaller than dims {self.dims}")
        return self

    def digest(self) -> str:
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).hexdigest()


def _ellipsoid(radii: np.ndarray) -> np.ndarray:
    rx, ry, rz = (int(r) for r in radii)
    x, y, z = np.ogrid[-rx:rx + 1, -ry:ry + 1, -rz:rz + 1]
    return (x / rx) ** 2 + (y / ry) ** 2 + (z / rz) ** 2 <= 1.0


def _place(occupied: np.ndarray, shape: np.ndarray, rng: np.random.Generator, gap: int) -> Optional[tuple[slice, ...]]:
    """Random box for `shape` whose gap-padded footprint avoids occupied voxels."""
    dims = occupied.shape
    if any(s > d for s, d in zip(shape.shape, dims)):
        return None
    for _ in range(PLACEMENT_RETRIES):
        corner = [int(rng.integers(0, d - s + 1)) for s, d in zip(shape.shape, dims)]
        box = tuple(slice(c, c + s) for c, s in zip(corner, shape.shape))
        guard = tuple(slice(max(c - gap, 0), min(c + s + gap, d)) for c, s, d in zip(corner, shape.shape, dims))
        if not occupied[guard].any():
            return box
    return None


def _ground_truth(spec: PhantomSpec, rng: np.random.Generator) -> np.ndarray:
    labels = np.zeros(spec.dims, dtype=np.uint8)
    low, high = spec.lesion_radius_range
    for label in LESION_LABELS:
        for i in range(spec.n_lesions):
            radii = rng.integers(low, high + 1, size=3)
            blob = _ellipsoid(radii)
            box = _place(labels > 0, blob, rng, BLOB_GAP)
            if box is None:
                raise GenerationError(
                    f"could not place lesion {i + 1} of label {label} (radii {tuple(int(r) for r in radii)}) "
                    f"in a {spec.dims} grid after {PLACEMENT_RETRIES} tries"
                )
            labels[box][blob] = label
    return labels


def _shift(labels: np.ndarray, offset: tuple[int, int, int]) -> np.ndarray:
    """Translate with zero fill; voxels moved past the edge are lost."""
    out = np.zeros_like(labels)
    src, dst = [], []
    for o, n in zip(offset, labels.shape):
        src.append(slice(max(-o, 0), n - max(o, 0)))
        dst.append(slice(max(o, 0), n - max(-o, 0)))
    out[tuple(dst)] = labels[tuple(src)]
    return out


def _erode(labels: np.ndarray) -> np.ndarray:
    out = np.zeros_like(labels)
    for label in LESION_LABELS:
        kept = ndimage.binary_erosion(labels == label, structure=ndimage.generate_binary_structure(3, 3))
        out[kept] = label
    return out


def _dilate(labels: np.ndarray) -> np.ndarray:
    """Grow every label by one voxel into background; the higher label wins contested voxels."""
    grown = ndimage.grey_dilation(labels, footprint=np.ones((3, 3, 3), dtype=bool), mode="constant", cval=0)
    return np.where(labels == 0, grown, labels).astype(np.uint8)


def _add_false_blobs(labels: np.ndarray, p: Perturbation, rng: np.random.Generator) -> np.ndarray:
    out = labels.copy()
    cube = np.ones((p.size,) * 3, dtype=bool)
    for i in range(p.count):
        box = _place(out > 0, cube, rng, p.clearance)
        if box is None:
            raise GenerationError(
                f"could not place false blob {i + 1} of size {p.size} with clearance {p.clearance} "
                f"after {PLACEMENT_RETRIES} tries"
            )
        out[box] = FALSE_BLOB_LABEL
    return out


def perturb(labels: np.ndarray, p: Perturbation, rng: np.random.Generator) -> np.ndarray:
    if p.kind is PerturbationKind.NONE:
        return labels.copy()
    if p.kind is PerturbationKind.ERODE:
        return _erode(labels)
    if p.kind is PerturbationKind.DILATE:
        return _dilate(labels)
    if p.kind is PerturbationKind.SHIFT:
        return _shift(labels, p.shift)
    if p.kind is PerturbationKind.DROP_REGION:
        return np.where(np.isin(labels, p.region.labels), 0, labels).astype(np.uint8)
    if p.kind is PerturbationKind.ADD_FALSE_BLOB:
        return _add_false_blobs(labels, p, rng)
    raise GenerationError(f"unknown perturbation {p.kind!r}")


def generate_phantom(spec: PhantomSpec) -> tuple[LabelVolume, LabelVolume]:
    """Pure function of spec: the same spec yields bit-identical (gt, pred) on every platform."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    gt = _ground_truth(spec, rng)
    pred = perturb(gt, spec.perturbation, rng)
    logger.debug("phantom %s: gt=%d pred=%d foreground voxels", spec.digest()[:12], np.count_nonzero(gt), np.count_nonzero(pred))
    return LabelVolume(spec.dims, spec.spacing, gt), LabelVolume(spec.dims, spec.spacing, pred)
