"""Binary morphology on voxel grids: connected components, dilation, surface extraction."""

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy import ndimage

from lesionrank.errors import ContractViolation
from lesionrank.regions import BinaryMask

NEIGHBORHOODS = {
    6: ndimage.generate_binary_structure(3, 1),
    26: ndimage.generate_binary_structure(3, 3),
}
# Dilation always uses the full 3x3x3 element, whatever the component connectivity.
CUBE = ndimage.generate_binary_structure(3, 3)

Box = tuple[slice, slice, slice]


@dataclass(frozen=True, eq=False)
class LesionComponent:
    id: int
    voxel_indices: np.ndarray  # ascending x-fastest linear indices

    @property
    def voxel_count(self) -> int:
        return int(self.voxel_indices.size)


def _structure(connectivity: int) -> np.ndarray:
    try:
        return NEIGHBORHOODS[connectivity]
    except KeyError:
        raise ContractViolation(f"connectivity must be 6 or 26, got {connectivity!r}") from None


def _renumber(labels: np.ndarray, n: int) -> tuple[np.ndarray, int]:
    """Relabel the ids present in `labels` as 1..k, ordered by smallest x-fastest index."""
    flat = labels.ravel(order="F")
    nonzero = flat[np.flatnonzero(flat)]
    if nonzero.size == 0:
        return np.zeros_like(labels), 0
    present, first_seen = np.unique(nonzero, return_index=True)
    ordered = present[np.argsort(first_seen)]
    remap = np.zeros(n + 1, dtype=labels.dtype)
    remap[ordered] = np.arange(1, ordered.size + 1, dtype=labels.dtype)
    return remap[labels], int(ordered.size)


def label_components(bits: np.ndarray, connectivity: int = 26) -> tuple[np.ndarray, int]:
    """Label map with ids 1..n ordered by each component's smallest x-fastest index."""
    labels, n = ndimage.label(bits, structure=_structure(connectivity))
    return _renumber(labels, n)


def label_grouped_components(bits: np.ndarray, connectivity: int = 26, iterations: int = 0) -> tuple[np.ndarray, int]:
    """Components of the mask dilated `iterations` times, restricted back to the set voxels.

    Set voxels whose dilated footprints connect share one id; under 26-connectivity that
    joins blobs within Chebyshev distance 2 * iterations + 1. iterations = 0 is plain
    `label_components`.
    """
    bits = np.asarray(bits, dtype=bool)
    box = bounding_box(bits)
    if iterations == 0 or box is None:
        return label_components(bits, connectivity)
    box = pad_box(box, iterations, bits.shape)
    grown, n = ndimage.label(dilate_bits(bits[box], iterations), structure=_structure(connectivity))
    labels = np.zeros(bits.shape, dtype=grown.dtype)
    labels[box] = np.where(bits[box], grown, 0)
    return _renumber(labels, n)


def components_from_labels(labels: np.ndarray, n: int) -> list[LesionComponent]:
    flat = labels.ravel(order="F")
    idx = np.flatnonzero(flat)
    lab = flat[idx]
    grouped = idx[np.argsort(lab, kind="stable")]
    counts = np.bincount(lab, minlength=n + 1)[1:]
    parts = np.split(grouped, np.cumsum(counts)[:-1]) if n else []
    return [LesionComponent(i + 1, part) for i, part in enumerate(parts)]


def connected_components(mask: BinaryMask, connectivity: int = 26) -> list[LesionComponent]:
    """Partition the set voxels into connected lesions."""
    labels, n = label_components(mask.bits, connectivity)
    return components_from_labels(labels, n)


def dilate_bits(bits: np.ndarray, iterations: int) -> np.ndarray:
    if iterations < 0:
        raise ContractViolation(f"dilation iterations must be >= 0, got {iterations}")
    if iterations == 0:
        return np.array(bits, dtype=bool)
    # scipy treats iterations < 1 as "until stable", hence the explicit zero case above
    return ndimage.binary_dilation(bits, structure=CUBE, iterations=iterations, border_value=0)


def dilate(mask: BinaryMask, iterations: int) -> BinaryMask:
    """`iterations` successive 3x3x3 dilations, clipped at the grid boundary."""
    if iterations == 0:
        return mask
    return BinaryMask(mask.geometry, mask.region, dilate_bits(mask.bits, iterations))


def surface(bits: np.ndarray) -> np.ndarray:
    """Set voxels with at least one 6-neighbor outside the set; grid-edge voxels count."""
    bits = np.asarray(bits, dtype=bool)
    interior = ndimage.binary_erosion(bits, structure=NEIGHBORHOODS[6], border_value=0)
    return bits & ~interior


def pad_box(box: Box, pad: int, shape: tuple[int, ...]) -> Box:
    return tuple(
        slice(max(s.start - pad, 0), min(s.stop + pad, n)) for s, n in zip(box, shape)
    )


def union_box(boxes: Iterable[Optional[Box]]) -> Optional[Box]:
    boxes = [b for b in boxes if b is not None]
    if not boxes:
        return None
    return tuple(
        slice(min(b[d].start for b in boxes), max(b[d].stop for b in boxes)) for d in range(3)
    )


def bounding_box(bits: np.ndarray) -> Optional[Box]:
    found = ndimage.find_objects(np.asarray(bits, dtype=np.uint8))
    return found[0] if found else None
