"""Label volumes: 3D grids of tumor labels with physical spacing, plus file dispatch."""

from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from lesionrank.errors import FormatError, GeometryMismatchError, LabelDomainError, LesionRankError

LABELS = (0, 1, 2, 3)  # background, NC, ED, ET
SPACING_TOLERANCE_MM = 1e-6
INTEGRAL_TOLERANCE = 1e-6

PathLike = Union[str, Path]


def _pixdim(value: float) -> float:
    """Round a spacing to NIfTI pixdim (float32) precision."""
    return float(np.float32(value))


@dataclass(frozen=True)
class GridGeometry:
    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]

    def __post_init__(self) -> None:
        if len(self.dims) != 3 or any(int(d) < 1 for d in self.dims):
            raise LesionRankError(f"dims must be three positive voxel counts, got {self.dims}")
        if len(self.spacing) != 3 or any(not np.isfinite(s) or s <= 0 for s in self.spacing):
            raise LesionRankError(f"spacing must be three positive lengths in mm, got {self.spacing}")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @property
    def n_voxels(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    def matches(self, other: "GridGeometry", tol: float = SPACING_TOLERANCE_MM) -> bool:
        if self.dims != other.dims:
            return False
        return all(abs(a - b) <= tol for a, b in zip(self.spacing, other.spacing))

    def __str__(self) -> str:
        dims = "x".join(str(d) for d in self.dims)
        spacing = ", ".join(f"{s:g}" for s in self.spacing)
        return f"{dims} @ ({spacing}) mm"


@dataclass(frozen=True, eq=False)
class LabelVolume:
    """Dense label grid indexed [x, y, z]; flattening with order="F" gives x-fastest order."""
    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    voxels: np.ndarray

    def __post_init__(self) -> None:
        geometry = GridGeometry(self.dims, tuple(_pixdim(s) for s in self.spacing))
        object.__setattr__(self, "dims", geometry.dims)
        object.__setattr__(self, "spacing", geometry.spacing)
        voxels = np.asarray(self.voxels)
        if voxels.shape != geometry.dims:
            raise LesionRankError(
                f"voxel array shape {voxels.shape} does not match dims {geometry.dims}"
            )
        bad = ~np.isin(voxels, LABELS)
        if bad.any():
            index = int(np.flatnonzero(bad.ravel(order="F"))[0])
            value = voxels.ravel(order="F")[index].item()
            raise LabelDomainError(
                f"voxel {index} holds label {value!r}; allowed labels are 0, 1, 2, 3",
                value=value,
                index=index,
            )
        voxels = voxels.astype(np.uint8, copy=True)
        voxels.setflags(write=False)
        object.__setattr__(self, "voxels", voxels)

    @classmethod
    def zeros(cls, geometry: GridGeometry) -> "LabelVolume":
        return cls(geometry.dims, geometry.spacing, np.zeros(geometry.dims, dtype=np.uint8))

    @classmethod
    def from_flat(cls, dims, spacing, flat) -> "LabelVolume":
        """Build from a flat x-fastest sequence of labels."""
        arr = np.asarray(flat).reshape(tuple(dims), order="F")
        return cls(tuple(dims), tuple(spacing), arr)

    @property
    def geometry(self) -> GridGeometry:
        return GridGeometry(self.dims, self.spacing)

    def flat(self) -> np.ndarray:
        """Labels in x-fastest order."""
        return self.voxels.ravel(order="F")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabelVolume):
            return NotImplemented
        return (
            self.dims == other.dims
            and self.spacing == other.spacing
            and np.array_equal(self.voxels, other.voxels)
        )

    __hash__ = None


def labels_from_array(data: np.ndarray, spacing, path: PathLike | None = None) -> LabelVolume:
    """Coerce decoded voxel values to integer labels and build a LabelVolume.

    Float payloads must be finite and integral within 1e-6; nothing is clamped or rounded
    away silently.
    """
    loc = str(path) if path is not None else None
    data = np.asarray(data)
    if data.dtype.kind == "f":
        if not np.isfinite(data).all():
            raise FormatError("volume contains non-finite values", path=loc)
        rounded = np.rint(data)
        off = np.abs(data - rounded) > INTEGRAL_TOLERANCE
        if off.any():
            index = int(np.flatnonzero(off.ravel(order="F"))[0])
            value = data.ravel(order="F")[index].item()
            raise FormatError(f"voxel {index} holds non-integral value {value!r}", path=loc)
        data = rounded
    elif data.dtype.kind not in "iub":
        raise FormatError(f"unsupported voxel data type {data.dtype}", path=loc)
    try:
        return LabelVolume(tuple(data.shape), tuple(spacing), data.astype(np.int64))
    except LesionRankError as e:
        e.path = loc
        raise


def validate_pair(gt: LabelVolume, pred: LabelVolume) -> GridGeometry:
    """Return the shared geometry, or raise GeometryMismatchError listing both."""
    if not gt.geometry.matches(pred.geometry):
        raise GeometryMismatchError(
            f"geometry mismatch: ground truth {gt.geometry} vs prediction {pred.geometry}"
        )
    return gt.geometry


def read_label_volume(path: PathLike) -> LabelVolume:
    """Read a NIfTI-1 (.nii, .nii.gz) or raw debug (.rawvol) label volume."""
    from lesionrank.formats import reader_for

    return reader_for(Path(path))(Path(path))


def write_label_volume(vol: LabelVolume, path: PathLike) -> None:
    """Write a label volume; the suffix picks the container (NIfTI-1 uint8 unless .rawvol)."""
    from lesionrank.formats import writer_for

    writer_for(Path(path))(vol, Path(path))
