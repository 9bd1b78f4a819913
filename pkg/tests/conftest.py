# conftest.py

from pathlib import Path

import numpy as np
import pytest

from spaces import Metric, PointSample, SpaceSpec

DATA_DIR = Path(__file__).parent / "data"


def write_pdb(path, coords, chain="A"):
    """Write one C-alpha ATOM record per coordinate row in fixed-column PDB layout."""
    lines = []
    for i, (x, y, z) in enumerate(coords, start=1):
        lines.append(
            f"ATOM  {i:5d}  CA  ALA {chain}{i:4d}    {x:8.3f}{y:8.3f}{z:8.3f}  1.00  0.00           C"
        )
    lines.append("END")
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


@pytest.fixture
def data_dir():
    return DATA_DIR


@pytest.fixture
def square():
    return SpaceSpec.unit_square()


@pytest.fixture
def square_sup():
    return SpaceSpec.unit_square(Metric.SUP_NORM)


@pytest.fixture
def triangle():
    return PointSample([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
