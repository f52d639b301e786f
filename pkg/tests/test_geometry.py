import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latmol.geometry import (
    GbfConfig,
    Se3Transform,
    apply_se3,
    compose_se3,
    gbf_expand,
    internal_coords,
    kabsch_align,
    pairwise_distances,
    rmsd,
    sample_se3,
)

from conftest import make_molecule


# ---------------------------------------------------------------------------
# GBF

def test_gbf_peak_at_center():
    cfg = GbfConfig(n_centers=8, d_min=0.0, d_max=7.0)
    centers = cfg.centers()
    feats = gbf_expand(centers[3], cfg)
    assert feats[3] == 1.0


def test_gbf_tail_vanishes():
    cfg = GbfConfig(n_centers=8, d_min=0.0, d_max=4.0, width=0.25)
    feats = gbf_expand(4.0 + 20 * 0.25, cfg)
    assert np.all(feats < 1e-8)


def test_gbf_matches_scalar_formula():
    cfg = GbfConfig(n_centers=16, d_min=0.0, d_max=5.0, width=0.3)
    d = 1.5
    feats = gbf_expand(d, cfg)
    for k in range(16):
        c_k = 0.0 + k * (5.0 - 0.0) / 15
        expected = math.exp(-((d - c_k) ** 2) / (2 * 0.3 ** 2))
        assert abs(feats[k] - expected) <= 1e-15


@given(st.floats(min_value=0.0, max_value=12.0))
@settings(max_examples=50, deadline=None)
def test_gbf_values_in_unit_interval(d):
    feats = gbf_expand(d, GbfConfig())
    assert np.all(feats >= 0.0) and np.all(feats <= 1.0)


def test_gbf_invariant_under_se3():
    rng = np.random.default_rng(0)
    cfg = GbfConfig()
    x = rng.normal(size=(6, 3))
    for _ in range(100):
        t = sample_se3(rng)
        xt = apply_se3(x, t)
        d0 = pairwise_distances(x)
        d1 = pairwise_distances(xt)
        f0 = gbf_expand(d0, cfg)
        f1 = gbf_expand(d1, cfg)
        assert np.abs(f0 - f1).max() <= 1e-10


# ---------------------------------------------------------------------------
# SE(3)

def test_sample_se3_rotation_is_proper():
    rng = np.random.default_rng(1)
    for _ in range(50):
        t = sample_se3(rng)
        r = t.rotation
        assert np.abs(r.T @ r - np.eye(3)).max() <= 1e-12
        assert abs(np.linalg.det(r) - 1.0) <= 1e-12


def test_sample_se3_translation_variance():
    rng = np.random.default_rng(2)
    draws = np.array([sample_se3(rng, trans_var=0.01).translation for _ in range(10 ** 5)])
    var = draws.var(axis=0)
    assert np.all(np.abs(var - 0.01) <= 0.05 * 0.01)


def test_sample_se3_deterministic_per_seed():
    a = sample_se3(np.random.default_rng(7))
    b = sample_se3(np.random.default_rng(7))
    assert np.array_equal(a.rotation, b.rotation)
    assert np.array_equal(a.translation, b.translation)


def test_apply_identity():
    x = np.random.default_rng(3).normal(size=(5, 3))
    assert np.array_equal(apply_se3(x, Se3Transform.identity()), x)


def test_apply_preserves_distances():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(7, 3))
    for _ in range(20):
        t = sample_se3(rng)
        d0 = pairwise_distances(x)
        d1 = pairwise_distances(apply_se3(x, t))
        assert np.abs(d0 - d1).max() <= 1e-10


def test_apply_composition():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(6, 3))
    for _ in range(20):
        t1 = sample_se3(rng)
        t2 = sample_se3(rng)
        direct = apply_se3(apply_se3(x, t1), t2)
        composed = apply_se3(x, compose_se3(t2, t1))
        assert np.abs(direct - composed).max() <= 1e-10


def test_se3_transform_validates_rotation():
    with pytest.raises(ValueError):
        Se3Transform(np.eye(3) * 2.0, np.zeros(3))
    with pytest.raises(ValueError):  # reflection
        Se3Transform(np.diag([1.0, 1.0, -1.0]), np.zeros(3))


# ---------------------------------------------------------------------------
# pairwise distances

def test_pairwise_345():
    d = pairwise_distances(np.array([[0.0, 0, 0], [3.0, 4.0, 0]]))
    assert d[0, 1] == 5.0
    assert d[1, 0] == 5.0


def test_pairwise_diagonal_zero_and_symmetric():
    rng = np.random.default_rng(6)
    for _ in range(100):
        x = rng.normal(size=(5, 3))
        d = pairwise_distances(x)
        assert np.all(np.diag(d) == 0.0)
        assert np.array_equal(d, d.T)


# ---------------------------------------------------------------------------
# internal coordinates

def test_right_angle():
    mol = make_molecule(
        ["C", "C", "C"], [(0, 1, 1), (1, 2, 1)],
        [[0, 0, 0], [1, 0, 0], [1, 1, 0]],
    )
    ic = internal_coords(mol)
    assert ic["bond_angles"] == pytest.approx([90.0])
    assert ic["bond_lengths"] == pytest.approx([1.0, 1.0])


def test_collinear_angle():
    mol = make_molecule(
        ["C", "C", "C"], [(0, 1, 1), (1, 2, 1)],
        [[0, 0, 0], [1, 0, 0], [2, 0, 0]],
    )
    assert internal_coords(mol)["bond_angles"] == pytest.approx([180.0])


def test_planar_cis_and_trans_dihedrals():
    cis = make_molecule(
        ["C", "C", "C", "C"], [(0, 1, 1), (1, 2, 1), (2, 3, 1)],
        [[-0.5, 1.0, 0.0], [0, 0, 0], [1, 0, 0], [1.5, 1.0, 0.0]],
    )
    assert internal_coords(cis)["dihedrals"] == pytest.approx([0.0], abs=1e-12)
    trans = make_molecule(
        ["C", "C", "C", "C"], [(0, 1, 1), (1, 2, 1), (2, 3, 1)],
        [[-0.5, 1.0, 0.0], [0, 0, 0], [1, 0, 0], [1.5, -1.0, 0.0]],
    )
    assert internal_coords(trans)["dihedrals"] == pytest.approx([180.0])


def test_degenerate_bond_skipped():
    mol = make_molecule(
        ["C", "C", "C", "C"], [(0, 1, 1), (1, 2, 1), (2, 3, 1)],
        [[0, 0, 0], [0, 0, 0], [1, 0, 0], [1, 1, 0]],
    )
    ic = internal_coords(mol)
    assert ic["skipped"] >= 1


def test_internal_coords_se3_invariant():
    rng = np.random.default_rng(8)
    mol = make_molecule(
        ["C", "C", "C", "C"], [(0, 1, 1), (1, 2, 1), (2, 3, 1)],
        [[0, 0, 0], [1.5, 0, 0], [2.1, 1.3, 0.2], [3.0, 1.8, 1.1]],
    )
    ref = internal_coords(mol)
    for _ in range(100):
        t = sample_se3(rng)
        moved = make_molecule(
            ["C", "C", "C", "C"], [(0, 1, 1), (1, 2, 1), (2, 3, 1)],
            apply_se3(mol.coords, t),
        )
        ic = internal_coords(moved)
        assert np.abs(np.array(ic["bond_lengths"]) - ref["bond_lengths"]).max() <= 1e-8
        assert np.abs(np.array(ic["bond_angles"]) - ref["bond_angles"]).max() <= 1e-8
        assert np.abs(
            np.abs(np.array(ic["dihedrals"])) - np.abs(np.array(ref["dihedrals"]))
        ).max() <= 1e-8


# ---------------------------------------------------------------------------
# RMSD

def test_rmsd_identity():
    x = np.random.default_rng(9).normal(size=(6, 3))
    assert rmsd(x, x) == 0.0


def test_rmsd_uniform_translation():
    rng = np.random.default_rng(10)
    x = rng.normal(size=(5, 3))
    t = np.array([1.0, -2.0, 0.5])
    assert rmsd(x, x + t) == pytest.approx(np.linalg.norm(t), abs=1e-12)


def test_rmsd_aligned_rotated_copy():
    rng = np.random.default_rng(11)
    x = rng.normal(size=(8, 3))
    for _ in range(20):
        t = sample_se3(rng, trans_var=1.0)
        y = apply_se3(x, t)
        assert rmsd(x, y, align=True) <= 1e-8


def test_rmsd_symmetric():
    rng = np.random.default_rng(12)
    x = rng.normal(size=(6, 3))
    y = rng.normal(size=(6, 3))
    assert abs(rmsd(x, y) - rmsd(y, x)) <= 1e-12
    assert abs(rmsd(x, y, align=True) - rmsd(y, x, align=True)) <= 1e-9


def test_rmsd_shape_mismatch():
    with pytest.raises(ValueError):
        rmsd(np.zeros((3, 3)), np.zeros((4, 3)))


def test_kabsch_handles_reflection_free_case():
    # alignment never uses a reflection: mirrored point sets keep a residual
    x = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float)
    y = x.copy()
    y[:, 2] = -y[:, 2]
    aligned = kabsch_align(x, y)
    assert rmsd(x, aligned) > 0.1
