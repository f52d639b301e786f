"""Evaluation metrics: valency-based atom/molecule stability, validity and
completeness, uniqueness/novelty over canonical graph keys, and kernel MMD
between pooled geometry distributions."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from latmol.data import ATOM_VOCAB, Molecule, canonical_key
from latmol.geometry import internal_coords

SCHEMA_VERSION = 1

BOND_ORDER = {0: 0.0, 1: 1.0, 2: 2.0, 3: 3.0, 4: 1.5}


@dataclass(frozen=True)
class ValencyTable:
    """Allowed valences per element; aromatic bonds contribute order 1.5 and
    the per-atom total is rounded to the nearest integer before lookup."""

    allowed: dict = field(default_factory=lambda: {
        "H": (1,), "C": (4,), "N": (3,), "O": (2,), "F": (1,),
    })

    def allowed_for(self, symbol: str):
        if symbol not in self.allowed:
            raise KeyError(f"element {symbol!r} missing from valency table")
        return self.allowed[symbol]


DEFAULT_VALENCY = ValencyTable()


def atom_valences(mol: Molecule) -> np.ndarray:
    """Summed bond order per atom, aromatic counted as 1.5, total rounded."""
    orders = np.array([BOND_ORDER[c] for c in range(len(BOND_ORDER))])
    raw = orders[mol.bonds].sum(axis=1)
    return np.floor(raw + 0.5).astype(np.int64)


def atom_stability(mol: Molecule, table: ValencyTable = DEFAULT_VALENCY) -> float:
    """Fraction of atoms whose rounded valence lies in the allowed set."""
    valences = atom_valences(mol)
    ok = 0
    for sym, val in zip(mol.symbols(), valences):
        if int(val) in table.allowed_for(sym):
            ok += 1
    return ok / mol.n_atoms


def molecule_stability(mol: Molecule, table: ValencyTable = DEFAULT_VALENCY) -> bool:
    return atom_stability(mol, table) == 1.0


def is_connected(mol: Molecule) -> bool:
    """Single connected component under nonzero bonds."""
    v = mol.n_atoms
    seen = np.zeros(v, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        i = stack.pop()
        for j in np.nonzero(mol.bonds[i])[0]:
            if not seen[j]:
                seen[j] = True
                stack.append(int(j))
    return bool(seen.all())


def is_valid_complete(mol: Molecule, table: ValencyTable = DEFAULT_VALENCY) -> bool:
    return molecule_stability(mol, table) and is_connected(mol)


def validity_completeness(batch: list[Molecule],
                          table: ValencyTable = DEFAULT_VALENCY) -> float:
    if not batch:
        raise ValueError("empty batch")
    return sum(is_valid_complete(m, table) for m in batch) / len(batch)


def uniqueness_novelty(batch: list[Molecule], train_keys: set[str],
                       table: ValencyTable = DEFAULT_VALENCY) -> dict:
    """V&U: distinct canonical keys among valid molecules over batch size;
    V&U&N additionally excludes keys seen in training."""
    if not batch:
        raise ValueError("empty batch")
    keys = {canonical_key(m) for m in batch if is_valid_complete(m, table)}
    novel = keys - set(train_keys)
    return {
        "v_and_u": len(keys) / len(batch),
        "v_and_u_and_n": len(novel) / len(batch),
    }


# ---------------------------------------------------------------------------
# MMD

def mmd(sample_a, sample_b, bandwidth: float) -> float:
    """Biased (V-statistic) squared MMD with a Gaussian kernel, clamped at 0."""
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample")
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")

    def kmean(x, y):
        d2 = (x[:, None] - y[None, :]) ** 2
        return float(np.exp(-d2 / (2.0 * bandwidth ** 2)).mean())

    value = kmean(a, a) + kmean(b, b) - 2.0 * kmean(a, b)
    return max(value, 0.0)


def median_heuristic_bandwidth(sample_a, sample_b) -> float:
    """Median pairwise distance over the pooled sample (floor 1e-6)."""
    pooled = np.concatenate([
        np.asarray(sample_a, dtype=np.float64).ravel(),
        np.asarray(sample_b, dtype=np.float64).ravel(),
    ])
    if pooled.size < 2:
        return 1.0
    d = np.abs(pooled[:, None] - pooled[None, :])
    med = float(np.median(d[np.triu_indices(pooled.size, k=1)]))
    return max(med, 1e-6)


# ---------------------------------------------------------------------------
# reports

@dataclass
class MetricsReport:
    atom_stability: float
    mol_stability: float
    validity_completeness: float
    validity_uniqueness: float
    validity_uniqueness_novelty: float
    mmd_bond_length: float | None
    mmd_bond_angle: float | None
    mmd_dihedral: float | None
    bandwidths: dict
    n_generated: int
    n_reference: int
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        for name in ("atom_stability", "mol_stability", "validity_completeness",
                     "validity_uniqueness", "validity_uniqueness_novelty"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} = {v} outside [0, 1]")
        if not (self.validity_uniqueness_novelty
                <= self.validity_uniqueness + 1e-12):
            raise ValueError("V&U&N must not exceed V&U")
        if not (self.validity_uniqueness <= self.validity_completeness + 1e-12):
            raise ValueError("V&U must not exceed V&C")
        for name in ("mmd_bond_length", "mmd_bond_angle", "mmd_dihedral"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be nonnegative")

    def to_json(self) -> str:
        d = {
            "schema_version": self.schema_version,
            "atom_stability": self.atom_stability,
            "mol_stability": self.mol_stability,
            "validity_completeness": self.validity_completeness,
            "validity_uniqueness": self.validity_uniqueness,
            "validity_uniqueness_novelty": self.validity_uniqueness_novelty,
            "mmd_bond_length": self.mmd_bond_length,
            "mmd_bond_angle": self.mmd_bond_angle,
            "mmd_dihedral": self.mmd_dihedral,
            "bandwidths": self.bandwidths,
            "n_generated": self.n_generated,
            "n_reference": self.n_reference,
        }
        return json.dumps(d, indent=2, sort_keys=True)


def pooled_geometry(mols: list[Molecule]) -> dict:
    """Bond lengths, angles and |dihedrals| pooled across a molecule list."""
    pools = {"bond_lengths": [], "bond_angles": [], "dihedrals": []}
    for mol in mols:
        ic = internal_coords(mol)
        pools["bond_lengths"].extend(ic["bond_lengths"])
        pools["bond_angles"].extend(ic["bond_angles"])
        pools["dihedrals"].extend(abs(d) for d in ic["dihedrals"])
    return pools


def geometry_report(generated: list[Molecule], reference: list[Molecule],
                    table: ValencyTable = DEFAULT_VALENCY,
                    bandwidths: dict | None = None,
                    train_keys: set[str] | None = None) -> MetricsReport:
    """Score a generated batch against a reference set.

    Novelty is judged against `train_keys` when given, otherwise against the
    canonical keys of the reference list.  MMD bandwidths default to the
    median heuristic and are recorded in the report.
    """
    if not generated or not reference:
        raise ValueError("need non-empty generated and reference lists")
    if train_keys is None:
        train_keys = {canonical_key(m) for m in reference}

    total_atoms = sum(m.n_atoms for m in generated)
    stable_atoms = sum(round(atom_stability(m, table) * m.n_atoms) for m in generated)
    mol_stable = sum(molecule_stability(m, table) for m in generated) / len(generated)
    vc = validity_completeness(generated, table)
    un = uniqueness_novelty(generated, train_keys, table)

    gen_pools = pooled_geometry(generated)
    ref_pools = pooled_geometry(reference)
    used_bw: dict = {}
    values: dict = {}
    for name in ("bond_lengths", "bond_angles", "dihedrals"):
        # sorting makes the pooled statistics exactly order-invariant
        g, r = sorted(gen_pools[name]), sorted(ref_pools[name])
        if not g or not r:
            values[name] = None
            used_bw[name] = None
            continue
        bw = bandwidths.get(name) if bandwidths else None
        if bw is None:
            bw = median_heuristic_bandwidth(g, r)
        used_bw[name] = bw
        values[name] = mmd(g, r, bw)

    return MetricsReport(
        atom_stability=stable_atoms / total_atoms,
        mol_stability=mol_stable,
        validity_completeness=vc,
        validity_uniqueness=un["v_and_u"],
        validity_uniqueness_novelty=un["v_and_u_and_n"],
        mmd_bond_length=values["bond_lengths"],
        mmd_bond_angle=values["bond_angles"],
        mmd_dihedral=values["dihedrals"],
        bandwidths=used_bw,
        n_generated=len(generated),
        n_reference=len(reference),
    )


def write_samples_csv(path, gen_pools: dict, ref_pools: dict) -> None:
    """Pooled geometry samples as CSV (feature, set, value) for plotting."""
    with open(path, "w") as f:
        f.write("feature,set,value\n")
        for name in ("bond_lengths", "bond_angles", "dihedrals"):
            for v in gen_pools.get(name, []):
                f.write(f"{name},generated,{v!r}\n")
            for v in ref_pools.get(name, []):
                f.write(f"{name},reference,{v!r}\n")
