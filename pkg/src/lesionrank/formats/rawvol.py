"""Raw debug format: header line `RAWVOL nx ny nz sx sy sz` then nx*ny*nz labels, x-fastest.

Exists so test fixtures can be written by hand.
"""

from pathlib import Path

import numpy as np

from lesionrank.errors import FormatError, VolumeIOError
from lesionrank.volume import LabelVolume, labels_from_array

MAGIC = "RAWVOL"


def read_rawvol(path: Path) -> LabelVolume:
    try:
        text = path.read_text(encoding="ascii")
    except FileNotFoundError as e:
        raise VolumeIOError(f"cannot read volume: {e.strerror}", path=str(path)) from e
    except (OSError, UnicodeDecodeError) as e:
        raise FormatError(f"unreadable raw volume: {e}", path=str(path)) from e

    tokens = text.split()
    if len(tokens) < 7 or tokens[0] != MAGIC:
        raise FormatError(f"expected header '{MAGIC} nx ny nz sx sy sz'", path=str(path))
    try:
        dims = tuple(int(t) for t in tokens[1:4])
        spacing = tuple(float(t) for t in tokens[4:7])
    except ValueError as e:
        raise FormatError(f"malformed header: {e}", path=str(path)) from e
    if any(d < 1 for d in dims) or any(not np.isfinite(s) or s <= 0 for s in spacing):
        raise FormatError(f"invalid dims {dims} or spacing {spacing}", path=str(path))

    body = tokens[7:]
    expected = dims[0] * dims[1] * dims[2]
    if len(body) != expected:
        raise FormatError(f"expected {expected} voxel values, found {len(body)}", path=str(path))
    try:
        flat = np.array([int(t) for t in body], dtype=np.int64)
    except (ValueError, OverflowError) as e:
        raise FormatError(f"voxel values must be integers in label range: {e}", path=str(path)) from e
    return labels_from_array(flat.reshape(dims, order="F"), spacing, path=path)


def write_rawvol(vol: LabelVolume, path: Path) -> None:
    """One text line per (y, z) row of nx labels."""
    nx, ny, nz = vol.dims
    header = " ".join([MAGIC, *(str(d) for d in vol.dims), *(repr(s) for s in vol.spacing)])
    lines = [header]
    for z in range(nz):
        for y in range(ny):
            lines.append(" ".join(str(v) for v in vol.voxels[:, y, z]))
    try:
        path.write_text("\n".join(lines) + "\n", encoding="ascii")
    except OSError as e:
        raise VolumeIOError(f"cannot write volume: {e.strerror or e}", path=str(path)) from e
