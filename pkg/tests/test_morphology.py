"""Connected components, catchment dilation and surface extraction."""

import numpy as np
import pytest

import oracles
from lesionrank.errors import ContractViolation
from lesionrank.morphology import (
    connected_components,
    dilate,
    dilate_bits,
    label_components,
    label_grouped_components,
    surface,
)
from lesionrank.regions import BinaryMask
from lesionrank.volume import GridGeometry


def _mask(bits):
    bits = np.asarray(bits, dtype=bool)
    return BinaryMask.raw(GridGeometry(bits.shape, (1.0, 1.0, 1.0)), bits)


def test_two_cubes_are_two_components(make_mask):
    mask = make_mask((slice(0, 3), slice(0, 3), slice(0, 3)), (slice(10, 12), slice(10, 12), slice(10, 12)))
    comps = connected_components(mask)
    assert [c.voxel_count for c in comps] == [27, 8]
    assert [c.id for c in comps] == [1, 2]


def test_diagonal_touch_depends_on_connectivity():
    bits = np.zeros((3, 3, 3), dtype=bool)
    bits[0, 0, 0] = bits[1, 1, 1] = True
    assert len(connected_components(_mask(bits), 26)) == 1
    assert len(connected_components(_mask(bits), 6)) == 2


def test_ids_follow_smallest_x_fastest_index():
    bits = np.zeros((4, 4, 1), dtype=bool)
    bits[3, 0, 0] = True  # index 3
    bits[0, 2, 0] = True  # index 8
    bits[0, 3, 0] = True  # index 12, same component as 8
    comps = connected_components(_mask(bits))
    assert [c.voxel_indices.tolist() for c in comps] == [[3], [8, 12]]


def test_components_partition_the_mask(phantom_pair):
    gt, _ = phantom_pair(seed=11, dims=(24, 24, 24), n_lesions=2, lesion_radius_range=(2, 3))
    bits = gt.voxels > 0
    comps = connected_components(_mask(bits))
    all_idx = np.concatenate([c.voxel_indices for c in comps])
    assert sorted(all_idx.tolist()) == np.flatnonzero(bits.ravel(order="F")).tolist()


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("connectivity", [6, 26])
def test_components_match_flood_fill(phantom_pair, seed, connectivity):
    gt, pred = phantom_pair(
        seed=seed, dims=(20, 20, 20), n_lesions=1, lesion_radius_range=(2, 3), perturbation={"kind": "dilate"}
    )
    for vol in (gt, pred):
        bits = vol.voxels > 0
        ours = [frozenset(c.voxel_indices.tolist()) for c in connected_components(_mask(bits), connectivity)]
        assert ours == oracles.flood_fill_components(bits, connectivity)


def test_empty_mask_has_no_components():
    labels, n = label_components(np.zeros((3, 3, 3), dtype=bool))
    assert n == 0 and not labels.any()


@pytest.mark.parametrize("gap, groups", [(7, 1), (8, 2)])
def test_grouping_joins_blobs_whose_catchments_touch(gap, groups):
    # blobs at x = 0..2 and x = 2+gap..4+gap; footprints dilated by 3 touch while gap <= 7
    bits = np.zeros((20, 5, 5), dtype=bool)
    bits[0:3, 1:4, 1:4] = True
    bits[2 + gap:5 + gap, 1:4, 1:4] = True
    labels, n = label_grouped_components(bits, 26, 3)
    assert n == groups
    assert set(np.unique(labels[bits]).tolist()) == set(range(1, groups + 1))
    assert not labels[~bits].any()


def test_grouping_without_dilation_is_plain_labelling(make_mask):
    mask = make_mask((slice(0, 3), slice(0, 3), slice(0, 3)), (slice(4, 6), slice(0, 3), slice(0, 3)))
    grouped, n = label_grouped_components(mask.bits, 26, 0)
    plain, m = label_components(mask.bits, 26)
    assert n == m == 2
    assert np.array_equal(grouped, plain)


@pytest.mark.parametrize("seed", range(4))
def test_grouping_matches_oracle(phantom_pair, seed):
    gt, _ = phantom_pair(seed=seed, dims=(24, 24, 24), n_lesions=2, lesion_radius_range=(2, 3))
    for label in (1, 2, 3):
        bits = gt.voxels == label
        labels, n = label_grouped_components(bits, 26, 3)
        ours = [frozenset(np.flatnonzero((labels == i).ravel(order="F")).tolist()) for i in range(1, n + 1)]
        assert ours == oracles.grouped_lesions(bits, 3, 26)


def test_dilate_center_voxel():
    bits = np.zeros((7, 7, 7), dtype=bool)
    bits[3, 3, 3] = True
    assert np.count_nonzero(dilate_bits(bits, 1)) == 27
    assert np.count_nonzero(dilate_bits(bits, 3)) == 343


def test_dilate_corner_clips_at_boundary():
    bits = np.zeros((5, 5, 5), dtype=bool)
    bits[0, 0, 0] = True
    assert np.count_nonzero(dilate_bits(bits, 1)) == 8


def test_dilate_zero_iterations_is_identity(make_mask):
    mask = make_mask((slice(2, 4), slice(2, 4), slice(2, 4)))
    assert dilate(mask, 0) == mask


def test_dilate_negative_iterations():
    with pytest.raises(ContractViolation):
        dilate_bits(np.zeros((2, 2, 2), dtype=bool), -1)


@pytest.mark.parametrize("iterations", [1, 2, 3])
def test_dilate_matches_chebyshev_ball(phantom_pair, iterations):
    gt, _ = phantom_pair(seed=4, dims=(16, 16, 16), n_lesions=1, lesion_radius_range=(2, 2))
    bits = gt.voxels == 3
    assert np.array_equal(dilate_bits(bits, iterations), oracles.chebyshev_dilate(bits, iterations))


def test_surface_of_solid_cube():
    bits = np.zeros((5, 5, 5), dtype=bool)
    bits[1:4, 1:4, 1:4] = True
    s = surface(bits)
    assert np.count_nonzero(s) == 26
    assert not s[2, 2, 2]


def test_surface_counts_grid_edge_voxels():
    bits = np.ones((3, 3, 3), dtype=bool)
    assert np.count_nonzero(surface(bits)) == 26


def test_surface_matches_oracle(phantom_pair):
    gt, _ = phantom_pair(seed=8, dims=(20, 20, 20), n_lesions=1, lesion_radius_range=(2, 3))
    bits = gt.voxels > 0
    idx = np.flatnonzero(bits.ravel(order="F"))
    expected = {tuple(int(v) for v in c) for c in oracles.surface_coords(idx, bits.shape)}
    ours = {tuple(int(v) for v in c) for c in np.argwhere(surface(bits))}
    assert ours == expected
