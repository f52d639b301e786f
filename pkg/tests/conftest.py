import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from latmol.data import Molecule


def _mol(symbols, bond_list, coords):
    from latmol.data import ATOM_INDEX

    v = len(symbols)
    types = np.array([ATOM_INDEX[s] for s in symbols], dtype=np.int64)
    bonds = np.zeros((v, v), dtype=np.int64)
    for i, j, c in bond_list:
        bonds[i, j] = bonds[j, i] = c
    return Molecule(types, bonds, np.array(coords, dtype=np.float64))


@pytest.fixture
def water():
    return _mol(
        ["O", "H", "H"],
        [(0, 1, 1), (0, 2, 1)],
        [[0.0, 0.0, 0.117], [0.0, 0.757, -0.469], [0.0, -0.757, -0.469]],
    )


@pytest.fixture
def methane():
    d = 1.09 / np.sqrt(3.0)
    return _mol(
        ["C", "H", "H", "H", "H"],
        [(0, 1, 1), (0, 2, 1), (0, 3, 1), (0, 4, 1)],
        [[0, 0, 0], [d, d, d], [d, -d, -d], [-d, d, -d], [-d, -d, d]],
    )


@pytest.fixture
def ethane():
    return _mol(
        ["C", "C", "H", "H", "H", "H", "H", "H"],
        [(0, 1, 1), (0, 2, 1), (0, 3, 1), (0, 4, 1), (1, 5, 1), (1, 6, 1), (1, 7, 1)],
        [
            [0.0, 0.0, 0.0], [1.54, 0.0, 0.0],
            [-0.36, 1.03, 0.0], [-0.36, -0.51, 0.89], [-0.36, -0.51, -0.89],
            [1.90, 1.03, 0.0], [1.90, -0.51, 0.89], [1.90, -0.51, -0.89],
        ],
    )


@pytest.fixture
def ethene():
    return _mol(
        ["C", "C", "H", "H", "H", "H"],
        [(0, 1, 2), (0, 2, 1), (0, 3, 1), (1, 4, 1), (1, 5, 1)],
        [
            [0.0, 0.0, 0.0], [1.34, 0.0, 0.0],
            [-0.55, 0.94, 0.0], [-0.55, -0.94, 0.0],
            [1.89, 0.94, 0.0], [1.89, -0.94, 0.0],
        ],
    )


@pytest.fixture
def pentavalent_carbon():
    """Six atoms, one carbon with five single bonds: 5/6 atoms stable."""
    pts = np.array([
        [0, 0, 0], [1.1, 0, 0], [-1.1, 0, 0], [0, 1.1, 0], [0, -1.1, 0], [0, 0, 1.1],
    ], dtype=np.float64)
    return _mol(
        ["C", "H", "H", "H", "H", "H"],
        [(0, k, 1) for k in range(1, 6)],
        pts,
    )


def make_molecule(symbols, bond_list, coords):
    return _mol(symbols, bond_list, coords)
