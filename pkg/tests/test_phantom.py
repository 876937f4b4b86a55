"""Synthetic phantom generation: determinism, placement and perturbations."""

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import ndimage

from lesionrank.errors import GenerationError
from lesionrank.morphology import connected_components
from lesionrank.phantom import Perturbation, PhantomSpec, generate_phantom
from lesionrank.regions import BinaryMask, RegionKind, compose_region


def test_same_spec_same_volumes():
    spec = PhantomSpec(seed=17, n_lesions=2, perturbation=Perturbation(kind="dilate"))
    a = generate_phantom(spec)
    b = generate_phantom(spec)
    assert a[0] == b[0] and a[1] == b[1]
    assert spec.digest() == PhantomSpec(seed=17, n_lesions=2, perturbation=Perturbation(kind="dilate")).digest()


def test_different_seed_differs():
    assert generate_phantom(PhantomSpec(seed=1))[0] != generate_phantom(PhantomSpec(seed=2))[0]
    assert PhantomSpec(seed=1).digest() != PhantomSpec(seed=2).digest()


def test_blob_count_per_label():
    gt, pred = generate_phantom(PhantomSpec(seed=4, n_lesions=2, lesion_radius_range=(2, 4)))
    for label in (1, 2, 3):
        bits = gt.voxels == label
        comps = connected_components(BinaryMask.raw(gt.geometry, bits))
        assert len(comps) == 2
    assert gt == pred


def test_blobs_do_not_touch():
    gt, _ = generate_phantom(PhantomSpec(seed=9, n_lesions=2, lesion_radius_range=(2, 3)))
    comps = connected_components(BinaryMask.raw(gt.geometry, gt.voxels > 0))
    assert len(comps) == 6


def test_zero_lesions_is_all_background():
    gt, pred = generate_phantom(PhantomSpec(seed=0, n_lesions=0))
    assert not gt.voxels.any() and not pred.voxels.any()


def test_drop_region_clears_labels():
    _, pred = generate_phantom(PhantomSpec(seed=3, perturbation=Perturbation(kind="drop_region", region="TC")))
    assert not np.isin(pred.voxels, (1, 3)).any()
    assert (pred.voxels == 2).any()


def test_erode_shrinks_and_dilate_grows():
    base = dict(seed=6, lesion_radius_range=(3, 4))
    gt, eroded = generate_phantom(PhantomSpec(**base, perturbation=Perturbation(kind="erode")))
    _, dilated = generate_phantom(PhantomSpec(**base, perturbation=Perturbation(kind="dilate")))
    n = np.count_nonzero(gt.voxels)
    assert np.count_nonzero(eroded.voxels) < n < np.count_nonzero(dilated.voxels)
    assert not (eroded.voxels.astype(bool) & ~gt.voxels.astype(bool)).any()


def test_shift_moves_labels():
    gt, pred = generate_phantom(PhantomSpec(seed=5, perturbation=Perturbation(kind="shift", shift=(2, 0, -1))))
    assert np.array_equal(pred.voxels[2:, :, :-1], gt.voxels[:-2, :, 1:])


def test_false_blob_keeps_clearance():
    spec = PhantomSpec(seed=12, perturbation=Perturbation(kind="add_false_blob", count=2, size=4, clearance=4))
    gt, pred = generate_phantom(spec)
    added = (pred.voxels == 3) & (gt.voxels == 0)
    assert np.count_nonzero(added) == 2 * 64
    wt = compose_region(gt, RegionKind.WT).bits
    halo = ndimage.binary_dilation(wt, structure=np.ones((3, 3, 3), dtype=bool), iterations=3)
    assert not (added & halo).any()


def test_infeasible_placement_raises():
    spec = PhantomSpec(seed=0, dims=(8, 8, 8), n_lesions=3, lesion_radius_range=(3, 3))
    with pytest.raises(GenerationError, match="could not place"):
        generate_phantom(spec)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"lesion_radius_range": (0, 2)},
        {"lesion_radius_range": (4, 2)},
        {"n_lesions": -1},
        {"dims": (0, 4, 4)},
        {"perturbation": {"kind": "shift", "shift": (32, 0, 0)}},
        {"perturbation": {"kind": "drop_region"}},
    ],
)
def test_invalid_specs(kwargs):
    with pytest.raises(ValidationError):
        PhantomSpec(**kwargs)
