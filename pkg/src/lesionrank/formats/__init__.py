"""Volume containers: NIfTI-1 and the raw debug format. All volume file I/O goes through these."""

from pathlib import Path
from typing import Callable

from lesionrank.errors import FormatError
from lesionrank.formats.nifti import read_nifti, write_nifti
from lesionrank.formats.rawvol import read_rawvol, write_rawvol

READERS: dict[str, Callable] = {
    ".nii": read_nifti,
    ".nii.gz": read_nifti,
    ".rawvol": read_rawvol,
}

WRITERS: dict[str, Callable] = {
    ".nii": write_nifti,
    ".nii.gz": write_nifti,
    ".rawvol": write_rawvol,
}

VOLUME_SUFFIXES = tuple(READERS)


def volume_suffix(path: Path) -> str | None:
    """Registered suffix of path (longest match first), or None."""
    name = path.name.lower()
    for suffix in sorted(READERS, key=len, reverse=True):
        if name.endswith(suffix):
            return suffix
    return None


def subject_id(path: Path) -> str:
    """File name with its volume suffix removed."""
    suffix = volume_suffix(path)
    return path.name[: -len(suffix)] if suffix else path.stem


def reader_for(path: Path) -> Callable:
    suffix = volume_suffix(path)
    if suffix is None:
        raise FormatError(f"unsupported volume file type; expected one of {', '.join(READERS)}", path=str(path))
    return READERS[suffix]


def writer_for(path: Path) -> Callable:
    suffix = volume_suffix(path)
    if suffix is None:
        raise FormatError(f"unsupported volume file type; expected one of {', '.join(WRITERS)}", path=str(path))
    return WRITERS[suffix]
