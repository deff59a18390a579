import json
from pathlib import Path

import numpy as np
import pytest

from bsurf.gl2 import MatrixGroup, full_gl2, split_cartan
from bsurf.modring import ResidueMatrix
from bsurf.simulation import random_equivariant_instance
from bsurf.torsionhom import ActionPair, PairAction, synthesize_isogeny


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def prime_powers():
    return [(2, 1), (3, 1), (2, 2), (5, 1), (2, 3), (3, 2)]


@pytest.fixture
def unipotent9():
    return ResidueMatrix([[1, 3], [0, 1]], 9)


@pytest.fixture
def gl2_mod5():
    return full_gl2(5)


@pytest.fixture
def cartan_mod5():
    return split_cartan(5)


@pytest.fixture
def trivial_mod6():
    return MatrixGroup([], 6)


@pytest.fixture
def split_instance():
    """Diagonal action mod 4 with the degree 2 isogeny diag(2, 1)"""
    return random_equivariant_instance(4, 2, twisted=False, kind="split", n_generators=2, seed=1)


@pytest.fixture
def twisted_instance():
    return random_equivariant_instance(8, 2, twisted=True, kind="random", n_generators=2, seed=3)


@pytest.fixture
def identity_action():
    pair = ActionPair([[1, 0], [0, 1]], [[1, 0], [0, 1]], 1)
    return PairAction([pair], 6), synthesize_isogeny(1, 6)


@pytest.fixture
def scenario_file(tmp_path: Path):
    """Writes a scenario document and returns its path"""

    def write(payload: dict, name: str = "scenario.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps({"version": 1, **payload}))
        return path

    return write
