"""Shared pytest fixtures."""

import numpy as np
import pandas as pd
import pytest
from pathlib import Path

from lesionrank.config import EvalConfig
from lesionrank.phantom import Perturbation, PhantomSpec, generate_phantom
from lesionrank.regions import BinaryMask, RegionKind
from lesionrank.volume import GridGeometry


@pytest.fixture
def examples_dir():
    """Path to tests/examples/ containing hand-written .rawvol volumes."""
    return Path(__file__).parent / "examples"


@pytest.fixture
def tiny_case(examples_dir):
    return examples_dir / "tiny_case.rawvol"


@pytest.fixture
def geom():
    return GridGeometry((20, 20, 20), (1.0, 1.0, 1.0))


@pytest.fixture
def cfg():
    return EvalConfig()


@pytest.fixture
def no_cutoff():
    """Challenge settings without the 50-voxel cutoff, for small hand-built masks."""
    return EvalConfig(min_lesion_voxels=0)


@pytest.fixture
def make_mask(geom):
    """Build a BinaryMask from (x-slice, y-slice, z-slice) boxes on the 20^3 grid."""

    def _make(*boxes, geometry=None, region=RegionKind.ET):
        g = geometry or geom
        bits = np.zeros(g.dims, dtype=bool)
        for box in boxes:
            bits[box] = True
        return BinaryMask(g, region, bits)

    return _make


@pytest.fixture
def phantom_pair():
    def _pair(**kwargs):
        perturbation = kwargs.pop("perturbation", {})
        spec = PhantomSpec(perturbation=Perturbation(**perturbation), **kwargs)
        return generate_phantom(spec)

    return _pair


def metric_rows(values: dict) -> pd.DataFrame:
    """values[(team, subject)] = (dice, hd95) applied to every region."""
    rows = []
    for (team, subject), (d, h) in values.items():
        for region in RegionKind:
            rows.append({"team": team, "subject": subject, "region": region.value, "metric": "dice", "value": d})
            rows.append({"team": team, "subject": subject, "region": region.value, "metric": "hd95", "value": h})
    return pd.DataFrame(rows, columns=["team", "subject", "region", "metric", "value"])


@pytest.fixture
def metrics_csv(tmp_path):
    """Three teams over four subjects; team_a is best everywhere, team_c worst."""
    values = {}
    for j in range(4):
        subject = f"S{j + 1:02d}"
        values[("team_a", subject)] = (0.90 - 0.01 * j, 2.0 + j)
        values[("team_b", subject)] = (0.80 - 0.01 * j, 5.0 + j)
        values[("team_c", subject)] = (0.50 - 0.01 * j, 40.0 + j)
    path = tmp_path / "metrics.csv"
    metric_rows(values).to_csv(path, index=False)
    return path
