"""Evaluation regions ET, TC, WT composed from the 3-label scheme."""

from dataclasses import dataclass
from enum import Enum
from typing import Literal, Union

import numpy as np

from lesionrank.errors import LesionRankError, UsageError
from lesionrank.volume import GridGeometry, LabelVolume


class RegionKind(Enum):
    ET = "ET"  # enhancing tumor
    TC = "TC"  # tumor core: ET + NC
    WT = "WT"  # whole tumor: ET + NC + ED

    @property
    def labels(self) -> tuple[int, ...]:
        return _COMPOSITION[self]

    @classmethod
    def parse(cls, name: str) -> "RegionKind":
        try:
            return cls(name.strip().upper())
        except ValueError:
            raise UsageError(f"unknown region {name!r}; expected one of ET, TC, WT") from None


_COMPOSITION = {
    RegionKind.ET: (3,),
    RegionKind.TC: (1, 3),
    RegionKind.WT: (1, 2, 3),
}


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Boolean grid indexed [x, y, z] on a fixed geometry."""
    geometry: GridGeometry
    region: Union[RegionKind, Literal["raw"]]
    bits: np.ndarray

    def __post_init__(self) -> None:
        bits = np.asarray(self.bits, dtype=bool)
        if bits.shape != self.geometry.dims:
            raise LesionRankError(f"mask shape {bits.shape} does not match dims {self.geometry.dims}")
        bits = bits.copy()
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @classmethod
    def raw(cls, geometry: GridGeometry, bits) -> "BinaryMask":
        return cls(geometry, "raw", bits)

    def is_empty(self) -> bool:
        return not self.bits.any()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.geometry == other.geometry and np.array_equal(self.bits, other.bits)

    __hash__ = None


def compose_region(vol: LabelVolume, region: RegionKind) -> BinaryMask:
    """Set a voxel iff its label belongs to the region's composition set."""
    return BinaryMask(vol.geometry, region, np.isin(vol.voxels, region.labels))


def mask_volume_voxels(mask: BinaryMask) -> int:
    return int(np.count_nonzero(mask.bits))
