"""NIfTI-1 single-file label volumes (.nii, .nii.gz) via nibabel.

Only pixdim spacing is used; the affine and orientation codes are read but ignored because
all volumes are evaluated in one co-registered atlas space.
"""

import logging
from pathlib import Path

import nibabel as nib
import numpy as np
from nibabel.filebasedimages import ImageFileError
from nibabel.spatialimages import HeaderDataError

from lesionrank.errors import FormatError, VolumeIOError
from lesionrank.volume import LabelVolume, labels_from_array

logger = logging.getLogger(__name__)

# (kind, itemsize) of accepted on-disk datatypes: uint8, int16, uint16, int32, float32, float64
ACCEPTED_DTYPES = {("u", 1), ("i", 2), ("u", 2), ("i", 4), ("f", 4), ("f", 8)}


def _to_3d(data: np.ndarray, path: Path) -> np.ndarray:
    if data.ndim > 3:
        if any(n != 1 for n in data.shape[3:]):
            raise FormatError(f"expected a 3D label map, got shape {data.shape}", path=str(path))
        data = data.reshape(data.shape[:3])
    while data.ndim < 3:
        data = data[..., np.newaxis]
    return data


def _apply_scaling(data: np.ndarray, header) -> np.ndarray:
    """Apply scl_slope/scl_inter only when the slope is set and not the identity."""
    slope = float(header["scl_slope"])
    inter = float(header["scl_inter"])
    if not np.isfinite(slope) or slope in (0.0, 1.0):
        return data
    if not np.isfinite(inter):
        inter = 0.0
    return data.astype(np.float64) * slope + inter


def read_nifti(path: Path) -> LabelVolume:
    try:
        img = nib.load(str(path))
    except FileNotFoundError as e:
        raise VolumeIOError(f"cannot read volume: {e.strerror}", path=str(path)) from e
    except (ImageFileError, HeaderDataError, EOFError, ValueError, OSError) as e:
        raise FormatError(f"malformed NIfTI file: {e}", path=str(path)) from e
    if isinstance(img, nib.Nifti2Image) or not isinstance(img, nib.Nifti1Image):
        raise FormatError(f"not a NIfTI-1 image ({type(img).__name__})", path=str(path))
    header = img.header
    magic = header["magic"].item()
    if magic != b"n+1":
        raise FormatError(f"expected single-file NIfTI-1 magic 'n+1', got {magic!r}", path=str(path))
    dtype = header.get_data_dtype()
    if (dtype.kind, dtype.itemsize) not in ACCEPTED_DTYPES:
        raise FormatError(f"unsupported NIfTI datatype {dtype}", path=str(path))

    try:
        raw = np.asanyarray(img.dataobj.get_unscaled())
    except (EOFError, ValueError, OSError) as e:
        raise FormatError(f"truncated or unreadable voxel data: {e}", path=str(path)) from e
    data = _apply_scaling(_to_3d(raw, path), header)

    zooms = tuple(float(z) for z in header.get_zooms()[:3])
    zooms = zooms + (1.0,) * (3 - len(zooms))
    if any(not np.isfinite(z) or z <= 0 for z in zooms):
        raise FormatError(f"pixdim spacing must be positive, got {zooms}", path=str(path))
    logger.debug("read %s: shape=%s dtype=%s spacing=%s", path, data.shape, dtype, zooms)
    return labels_from_array(data, zooms, path=path)


def write_nifti(vol: LabelVolume, path: Path) -> None:
    """Write uint8 NIfTI-1; nibabel gzips when the name ends in .nii.gz."""
    affine = np.diag([*vol.spacing, 1.0])
    img = nib.Nifti1Image(np.array(vol.voxels, dtype=np.uint8), affine)
    img.header.set_data_dtype(np.uint8)
    img.header.set_zooms(vol.spacing)
    img.header.set_xyzt_units("mm")
    try:
        nib.save(img, str(path))
    except OSError as e:
        raise VolumeIOError(f"cannot write volume: {e.strerror or e}", path=str(path)) from e
    logger.debug("wrote %s: dims=%s", path, vol.dims)
