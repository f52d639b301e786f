"""Geometric kernels: Gaussian distance featurization, SE(3) transforms,
pairwise distances, internal coordinates and RMSD."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from latmol.data import Molecule


@dataclass(frozen=True)
class Se3Transform:
    """Proper rigid motion: x -> R x + t."""

    rotation: np.ndarray     # (3, 3), orthonormal, det +1
    translation: np.ndarray  # (3,)

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)
        if np.abs(r.T @ r - np.eye(3)).max() > 1e-12:
            raise ValueError("rotation must be orthonormal")
        if abs(np.linalg.det(r) - 1.0) > 1e-12:
            raise ValueError("rotation must have determinant +1")

    @classmethod
    def identity(cls) -> "Se3Transform":
        return cls(np.eye(3), np.zeros(3))


@dataclass(frozen=True)
class GbfConfig:
    """Gaussian basis layout: n_centers evenly spaced on [d_min, d_max]."""

    n_centers: int = 32
    d_min: float = 0.0
    d_max: float = 8.0
    width: float | None = None  # defaults to the center spacing

    def __post_init__(self):
        if self.n_centers < 1:
            raise ValueError("need at least one center")
        if not self.d_min < self.d_max:
            raise ValueError("require d_min < d_max")
        if self.width is None:
            spacing = (self.d_max - self.d_min) / max(self.n_centers - 1, 1)
            object.__setattr__(self, "width", spacing)
        if self.width <= 0:
            raise ValueError("width must be positive")

    def centers(self) -> np.ndarray:
        return np.linspace(self.d_min, self.d_max, self.n_centers)


def gbf_expand(d, cfg: GbfConfig) -> np.ndarray:
    """Expand distances into Gaussian radial features.

    Accepts a scalar or any array of distances; one trailing axis of size
    n_centers is appended.  Component k is exp(-(d - c_k)^2 / (2 width^2)).
    """
    d = np.asarray(d, dtype=np.float64)
    diff = d[..., None] - cfg.centers()
    return np.exp(-(diff ** 2) / (2.0 * cfg.width ** 2))


def sample_se3(rng: np.random.Generator, trans_var: float = 0.01) -> Se3Transform:
    """Uniform SO(3) rotation (normalized random quaternion) plus a Gaussian
    translation with per-axis variance `trans_var` (Angstrom^2)."""
    if trans_var < 0:
        raise ValueError("trans_var must be nonnegative")
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    rotation = np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])
    # re-orthonormalize so the Se3Transform invariants hold to 1e-12
    u, _, vt = np.linalg.svd(rotation)
    rotation = u @ vt
    if np.linalg.det(rotation) < 0:
        u[:, -1] = -u[:, -1]
        rotation = u @ vt
    translation = rng.normal(0.0, math.sqrt(trans_var), size=3)
    return Se3Transform(rotation, translation)


def apply_se3(coords: np.ndarray, t: Se3Transform) -> np.ndarray:
    coords = np.asarray(coords, dtype=np.float64)
    return coords @ t.rotation.T + t.translation


def compose_se3(second: Se3Transform, first: Se3Transform) -> Se3Transform:
    """Transform equal to applying `first`, then `second`."""
    return Se3Transform(
        second.rotation @ first.rotation,
        second.rotation @ first.translation + second.translation,
    )


def pairwise_distances(coords: np.ndarray) -> np.ndarray:
    coords = np.asarray(coords, dtype=np.float64)
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt(np.sum(diff ** 2, axis=-1))


def internal_coords(mol: "Molecule") -> dict:
    """Bond lengths (A), bond angles and signed dihedrals (degrees).

    Angles cover bonded triples i-j-k, dihedrals bonded chains i-j-k-l; each
    is counted once up to reversal.  Degenerate (zero-length) bond vectors
    are skipped and counted under 'skipped'.
    """
    coords = mol.coords
    v = mol.n_atoms
    adjacency = [np.nonzero(mol.bonds[i])[0] for i in range(v)]
    skipped = 0

    lengths = []
    for i in range(v):
        for j in adjacency[i]:
            if i < j:
                lengths.append(float(np.linalg.norm(coords[i] - coords[j])))

    angles = []
    for j in range(v):
        nb = adjacency[j]
        for a in range(len(nb)):
            for c in range(a + 1, len(nb)):
                i, k = nb[a], nb[c]
                u = coords[i] - coords[j]
                w = coords[k] - coords[j]
                nu, nw = np.linalg.norm(u), np.linalg.norm(w)
                if nu < 1e-10 or nw < 1e-10:
                    skipped += 1
                    continue
                cos = np.clip(np.dot(u, w) / (nu * nw), -1.0, 1.0)
                angles.append(math.degrees(math.acos(cos)))

    dihedrals = []
    for j in range(v):
        for k in adjacency[j]:
            if j >= k:
                continue
            for i in adjacency[j]:
                if i == k:
                    continue
                for l in adjacency[k]:
                    if l == j or l == i:
                        continue
                    d = _dihedral(coords[i], coords[j], coords[k], coords[l])
                    if d is None:
                        skipped += 1
                    else:
                        dihedrals.append(d)

    return {
        "bond_lengths": lengths,
        "bond_angles": angles,
        "dihedrals": dihedrals,
        "skipped": skipped,
    }


def _dihedral(p0, p1, p2, p3) -> float | None:
    """Signed dihedral in (-180, 180] via the atan2 convention."""
    b1 = p1 - p0
    b2 = p2 - p1
    b3 = p3 - p2
    n2 = np.linalg.norm(b2)
    if n2 < 1e-10:
        return None
    n_a = np.cross(b1, b2)
    n_b = np.cross(b2, b3)
    if np.linalg.norm(n_a) < 1e-10 or np.linalg.norm(n_b) < 1e-10:
        return None
    x = float(np.dot(n_a, n_b))
    y = float(np.dot(np.cross(n_a, n_b), b2 / n2))
    deg = math.degrees(math.atan2(y, x))
    if deg <= -180.0:
        deg += 360.0
    return deg


def rmsd(x: np.ndarray, y: np.ndarray, align: bool = False) -> float:
    """Root-mean-square coordinate deviation, optionally after Kabsch
    superposition of y onto x."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    if align:
        y = kabsch_align(x, y)
    return float(np.sqrt(np.mean(np.sum((x - y) ** 2, axis=-1))))


def kabsch_align(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Optimal proper-rotation + translation of y onto x."""
    xc = x - x.mean(axis=0)
    yc = y - y.mean(axis=0)
    cov = yc.T @ xc
    u, _, vt = np.linalg.svd(cov)
    d = np.sign(np.linalg.det(u @ vt))
    flip = np.diag([1.0, 1.0, d])
    rot = u @ flip @ vt
    return yc @ rot + x.mean(axis=0)
