import itertools
import json

import numpy as np
import pytest

from latmol.data import (
    ATOM_INDEX,
    DatasetSplit,
    Molecule,
    ParseError,
    canonical_key,
    generate_toy_dataset,
    molecule_from_json,
    molecule_to_json,
    parse_sdf_v2000,
    parse_xyz,
    read_jsonl,
    split_dataset,
    write_jsonl,
    write_xyz,
)
from latmol.metrics import atom_stability

from helpers import graphs_isomorphic


# ---------------------------------------------------------------------------
# XYZ

def test_parse_xyz_h2():
    mol = parse_xyz("2\n\nH 0 0 0\nH 0 0 0.74\n")
    assert mol.n_atoms == 2
    assert mol.symbols() == ["H", "H"]
    assert np.all(mol.bonds == 0)
    assert mol.coords[1, 2] == 0.74


def test_parse_xyz_count_mismatch_names_line():
    with pytest.raises(ParseError, match="line 5"):
        parse_xyz("3\ncomment\nH 0 0 0\nH 0 0 0.74\n")


def test_parse_xyz_extra_lines_rejected():
    with pytest.raises(ParseError, match="line 5"):
        parse_xyz("2\n\nH 0 0 0\nH 0 0 0.74\nH 1 1 1\n")


def test_parse_xyz_unknown_element():
    with pytest.raises(ParseError, match="Xx"):
        parse_xyz("1\n\nXx 0 0 0\n")


def test_parse_xyz_bad_coordinate():
    with pytest.raises(ParseError, match="line 3"):
        parse_xyz("1\n\nH 0 zero 0\n")


def test_xyz_text_roundtrip(water):
    text = write_xyz(water)
    assert write_xyz(parse_xyz(text)) == text


def test_xyz_molecule_roundtrip_fixtures(water, methane, ethane):
    for mol in (water, methane, ethane):
        back = parse_xyz(write_xyz(mol))
        assert np.array_equal(back.atom_types, mol.atom_types)
        # coords survive to printed precision (6 decimals)
        assert np.allclose(back.coords, mol.coords, atol=5e-7)


# ---------------------------------------------------------------------------
# SDF

ETHANE_SDF = """ethane
  toy

  8  7  0  0  0  0  0  0  0  0999 V2000
    0.0000    0.0000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
    1.5400    0.0000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
   -0.3600    1.0300    0.0000 H   0  0  0  0  0  0  0  0  0  0  0  0
   -0.3600   -0.5100    0.8900 H   0  0  0  0  0  0  0  0  0  0  0  0
   -0.3600   -0.5100   -0.8900 H   0  0  0  0  0  0  0  0  0  0  0  0
    1.9000    1.0300    0.0000 H   0  0  0  0  0  0  0  0  0  0  0  0
    1.9000   -0.5100    0.8900 H   0  0  0  0  0  0  0  0  0  0  0  0
    1.9000   -0.5100   -0.8900 H   0  0  0  0  0  0  0  0  0  0  0  0
  1  2  1  0
  1  3  1  0
  1  4  1  0
  1  5  1  0
  2  6  1  0
  2  7  1  0
  2  8  1  0
M  END
"""


def test_parse_sdf_ethane():
    mol = parse_sdf_v2000(ETHANE_SDF)
    assert mol.n_atoms == 8
    assert mol.symbols()[:2] == ["C", "C"]
    # 7 bonds -> 14 symmetric nonzero entries; verified by independent count
    nonzero = [(i, j) for i in range(8) for j in range(8) if mol.bonds[i, j] != 0]
    assert len(nonzero) == 14
    assert all((j, i) in nonzero for i, j in nonzero)
    assert np.array_equal(mol.bonds, mol.bonds.T)


def test_parse_sdf_bond_out_of_range():
    bad = ETHANE_SDF.replace("  2  8  1  0", "  1  9  1  0")
    with pytest.raises(ParseError, match=r"\(1, 9\)"):
        parse_sdf_v2000(bad)


def test_parse_sdf_zero_bonds():
    text = (
        "one atom\n\n\n  1  0  0  0  0  0  0  0  0  0999 V2000\n"
        "    0.0000    0.0000    0.0000 C   0  0\n"
        "M  END\n"
    )
    mol = parse_sdf_v2000(text)
    assert mol.n_atoms == 1
    assert np.all(mol.bonds == 0)


def test_parse_sdf_truncated_block():
    truncated = "\n".join(ETHANE_SDF.splitlines()[:8])
    with pytest.raises(ParseError, match="truncated"):
        parse_sdf_v2000(truncated)


def test_parse_sdf_rejects_v3000():
    text = "m\n\n\n  0  0  0  0  0  0  0  0  0  0999 V3000\n"
    with pytest.raises(ParseError, match="V3000"):
        parse_sdf_v2000(text)


def test_parse_sdf_aromatic_maps_to_class_4():
    text = (
        "pair\n\n\n  2  1  0  0  0  0  0  0  0  0999 V2000\n"
        "    0.0000    0.0000    0.0000 C   0  0\n"
        "    1.3900    0.0000    0.0000 C   0  0\n"
        "  1  2  4  0\n"
        "M  END\n"
    )
    mol = parse_sdf_v2000(text)
    assert mol.bonds[0, 1] == 4


# ---------------------------------------------------------------------------
# JSON

def test_json_roundtrip(ethene):
    back = molecule_from_json(molecule_to_json(ethene))
    assert back.same_as(ethene)


def test_jsonl_roundtrip(tmp_path, water, methane):
    path = tmp_path / "mols.jsonl"
    write_jsonl(path, [water, methane])
    mols = read_jsonl(path)
    assert len(mols) == 2
    assert mols[0].same_as(water)
    assert mols[1].same_as(methane)


# ---------------------------------------------------------------------------
# Molecule invariants

def test_molecule_rejects_asymmetric_bonds(water):
    bonds = water.bonds.copy()
    bonds[0, 1] = 2
    with pytest.raises(ValueError, match="symmetric"):
        Molecule(water.atom_types, bonds, water.coords)


def test_molecule_rejects_nonfinite_coords(water):
    coords = water.coords.copy()
    coords[0, 0] = np.inf
    with pytest.raises(ValueError, match="finite"):
        Molecule(water.atom_types, water.bonds, coords)


def test_molecule_rejects_bad_bond_class(water):
    bonds = water.bonds.copy()
    bonds[1, 2] = bonds[2, 1] = 7
    with pytest.raises(ValueError, match="bond class"):
        Molecule(water.atom_types, bonds, water.coords)


# ---------------------------------------------------------------------------
# toy dataset

def test_toy_dataset_empty():
    assert generate_toy_dataset(0, seed=1) == []


def test_toy_dataset_deterministic():
    a = generate_toy_dataset(40, seed=123, max_atoms=12)
    b = generate_toy_dataset(40, seed=123, max_atoms=12)
    assert all(x.same_as(y) for x, y in zip(a, b))


def test_toy_dataset_byte_identical_serialization(tmp_path):
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_jsonl(p1, generate_toy_dataset(60, seed=9, max_atoms=10))
    write_jsonl(p2, generate_toy_dataset(60, seed=9, max_atoms=10))
    assert p1.read_bytes() == p2.read_bytes()


def test_toy_dataset_all_atoms_stable():
    mols = generate_toy_dataset(1000, seed=5, max_atoms=12)
    assert len(mols) == 1000
    for mol in mols:
        assert atom_stability(mol) == 1.0


def test_toy_dataset_respects_max_atoms():
    for max_atoms in (2, 5, 9, 12, 32):
        for mol in generate_toy_dataset(80, seed=3, max_atoms=max_atoms):
            assert 1 <= mol.n_atoms <= max_atoms


def test_toy_dataset_varied_geometry():
    mols = generate_toy_dataset(50, seed=11, max_atoms=12)
    sizes = {m.n_atoms for m in mols}
    assert len(sizes) >= 4
    # coordinates are centered per molecule
    for mol in mols:
        assert np.abs(mol.coords.mean(axis=0)).max() < 1e-9


# ---------------------------------------------------------------------------
# canonical key

def test_canonical_key_permutation_invariant_exhaustive(ethene):
    base = canonical_key(ethene)
    n = ethene.n_atoms
    for perm in itertools.permutations(range(n)):
        assert canonical_key(ethene.permuted(list(perm))) == base


def test_canonical_key_distinct_for_nonisomorphic(ethane, ethene):
    # brute-force oracle: these graphs are genuinely non-isomorphic
    assert not graphs_isomorphic(
        ethane.atom_types, ethane.bonds, ethene.atom_types, ethene.bonds
    )
    assert canonical_key(ethane) != canonical_key(ethene)


def test_canonical_key_bond_class_sensitivity(ethene):
    single = ethene.bonds.copy()
    single[0, 1] = single[1, 0] = 1
    other = Molecule(ethene.atom_types, single, ethene.coords)
    assert canonical_key(other) != canonical_key(ethene)


def test_canonical_key_ignores_coordinates(methane):
    moved = Molecule(methane.atom_types, methane.bonds, methane.coords + 5.0)
    assert canonical_key(moved) == canonical_key(methane)


def test_canonical_key_deterministic(methane):
    assert canonical_key(methane) == canonical_key(methane.copy())


def test_canonical_key_agrees_with_isomorphism_oracle():
    mols = generate_toy_dataset(25, seed=21, max_atoms=8)
    keys = [canonical_key(m) for m in mols]
    for i in range(len(mols)):
        for j in range(i + 1, len(mols)):
            iso = graphs_isomorphic(
                mols[i].atom_types, mols[i].bonds,
                mols[j].atom_types, mols[j].bonds,
            )
            if iso:
                assert keys[i] == keys[j]
            else:
                assert keys[i] != keys[j]


# ---------------------------------------------------------------------------
# splits

def test_split_sizes_floor_remainder():
    s = split_dataset(10, (0.8, 0.1, 0.1), seed=0)
    assert (len(s.train), len(s.val), len(s.test)) == (8, 1, 1)


def test_split_deterministic():
    a = split_dataset(137, (0.7, 0.2, 0.1), seed=42)
    b = split_dataset(137, (0.7, 0.2, 0.1), seed=42)
    assert a == b


def test_split_ratio_sum_enforced():
    with pytest.raises(ValueError, match="sum to 1"):
        split_dataset(10, (0.5, 0.2, 0.2), seed=0)


def test_split_union_covers_corpus():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(3, 200))
        r = rng.dirichlet([3, 1, 1])
        r = r / r.sum()
        s = split_dataset(n, tuple(r), seed=int(rng.integers(1 << 30)))
        assert sorted(s.train + s.val + s.test) == list(range(n))


def test_split_rejects_overlap():
    with pytest.raises(ValueError):
        DatasetSplit(train=[0, 1], val=[1], test=[2], seed=0)
