"""Molecule data model, file ingestion and toy dataset generation.

Molecules are plain numpy containers: integer atom types over a fixed
five-element vocabulary, a symmetric integer bond-class matrix (class 0
means "no bond") and Cartesian coordinates in Angstrom.  File formats:
XYZ, a V2000 molfile subset, and an internal JSON schema used by the CLI
and the checkpointing fixtures.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ATOM_VOCAB = ("H", "C", "N", "O", "F")
ATOM_INDEX = {s: i for i, s in enumerate(ATOM_VOCAB)}
N_ATOM_TYPES = len(ATOM_VOCAB)

# bond classes: 0=none, 1=single, 2=double, 3=triple, 4=aromatic
BOND_VOCAB_SIZE = 5

VALENCE = {"H": (1,), "C": (4,), "N": (3,), "O": (2,), "F": (1,)}


class ParseError(ValueError):
    """Raised for malformed molecule files; message names the line."""


@dataclass(eq=False)
class Molecule:
    """One 3D molecule: atom types, bond-class matrix, coordinates."""

    atom_types: np.ndarray  # (V,) int64, indices into ATOM_VOCAB
    bonds: np.ndarray       # (V, V) int64, symmetric, zero diagonal
    coords: np.ndarray      # (V, 3) float64, Angstrom

    def __post_init__(self):
        self.atom_types = np.asarray(self.atom_types, dtype=np.int64)
        self.bonds = np.asarray(self.bonds, dtype=np.int64)
        self.coords = np.asarray(self.coords, dtype=np.float64)
        self.validate()

    @property
    def n_atoms(self) -> int:
        return int(self.atom_types.shape[0])

    def validate(self):
        v = self.n_atoms
        if v < 1:
            raise ValueError("molecule must have at least one atom")
        if self.bonds.shape != (v, v):
            raise ValueError(f"bonds shape {self.bonds.shape} != ({v}, {v})")
        if self.coords.shape != (v, 3):
            raise ValueError(f"coords shape {self.coords.shape} != ({v}, 3)")
        if not np.array_equal(self.bonds, self.bonds.T):
            raise ValueError("bond matrix must be symmetric")
        if np.any(np.diag(self.bonds) != 0):
            raise ValueError("bond matrix diagonal must be zero")
        if self.bonds.min() < 0 or self.bonds.max() >= BOND_VOCAB_SIZE:
            raise ValueError("bond class out of range")
        if self.atom_types.min() < 0 or self.atom_types.max() >= N_ATOM_TYPES:
            raise ValueError("atom type out of range")
        if not np.all(np.isfinite(self.coords)):
            raise ValueError("coordinates must be finite")

    def symbols(self) -> list[str]:
        return [ATOM_VOCAB[t] for t in self.atom_types]

    def heavy_atom_count(self) -> int:
        return int(np.sum(self.atom_types != ATOM_INDEX["H"]))

    def copy(self) -> "Molecule":
        return Molecule(self.atom_types.copy(), self.bonds.copy(), self.coords.copy())

    def same_as(self, other: "Molecule") -> bool:
        return (
            np.array_equal(self.atom_types, other.atom_types)
            and np.array_equal(self.bonds, other.bonds)
            and np.array_equal(self.coords, other.coords)
        )

    def permuted(self, perm) -> "Molecule":
        """Reorder atoms by `perm`, where new atom i is old atom perm[i]."""
        p = np.asarray(perm)
        return Molecule(self.atom_types[p], self.bonds[np.ix_(p, p)], self.coords[p])

    def to_json_dict(self) -> dict:
        bonds = []
        v = self.n_atoms
        for i in range(v):
            for j in range(i + 1, v):
                if self.bonds[i, j] != 0:
                    bonds.append([i, j, int(self.bonds[i, j])])
        return {
            "atoms": self.symbols(),
            "bonds": bonds,
            "coords": [[float(x) for x in row] for row in self.coords],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Molecule":
        symbols = d["atoms"]
        try:
            types = np.array([ATOM_INDEX[s] for s in symbols], dtype=np.int64)
        except KeyError as e:
            raise ParseError(f"unknown element symbol {e.args[0]!r}") from None
        v = len(symbols)
        bonds = np.zeros((v, v), dtype=np.int64)
        for i, j, c in d["bonds"]:
            if not (0 <= i < v and 0 <= j < v):
                raise ParseError(f"bond ({i}, {j}) references atom out of range")
            bonds[i, j] = bonds[j, i] = c
        return cls(types, bonds, np.array(d["coords"], dtype=np.float64))


@dataclass
class DatasetSplit:
    """Disjoint train/val/test index lists over a molecule corpus."""

    train: list[int]
    val: list[int]
    test: list[int]
    seed: int = 0

    def __post_init__(self):
        all_idx = sorted(self.train + self.val + self.test)
        if all_idx != list(range(len(all_idx))):
            raise ValueError("splits must cover the corpus exactly once")


# ---------------------------------------------------------------------------
# XYZ

def parse_xyz(text: str) -> Molecule:
    """Parse XYZ text (count line, comment line, atom lines) into a Molecule.

    XYZ carries no bond information, so the bond matrix is all zero.
    """
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty XYZ input at line 1")
    try:
        count = int(lines[0].strip())
    except ValueError:
        raise ParseError(f"expected atom count at line 1, got {lines[0]!r}") from None
    if count < 1:
        raise ParseError(f"atom count must be >= 1 at line 1, got {count}")

    types = []
    coords = []
    for k in range(count):
        lineno = 3 + k
        if lineno - 1 >= len(lines):
            raise ParseError(
                f"declared {count} atoms but input ends before line {lineno}"
            )
        tokens = lines[lineno - 1].split()
        if len(tokens) < 4:
            raise ParseError(f"expected 'element x y z' at line {lineno}")
        sym = tokens[0]
        if sym not in ATOM_INDEX:
            raise ParseError(f"unknown element symbol {sym!r} at line {lineno}")
        try:
            xyz = [float(t) for t in tokens[1:4]]
        except ValueError:
            raise ParseError(f"non-numeric coordinate at line {lineno}") from None
        types.append(ATOM_INDEX[sym])
        coords.append(xyz)

    for extra, line in enumerate(lines[2 + count:], start=3 + count):
        if line.strip():
            raise ParseError(
                f"declared {count} atoms but found extra content at line {extra}"
            )

    v = len(types)
    return Molecule(
        np.array(types, dtype=np.int64),
        np.zeros((v, v), dtype=np.int64),
        np.array(coords, dtype=np.float64),
    )


def write_xyz(mol: Molecule, comment: str = "") -> str:
    lines = [str(mol.n_atoms), comment]
    for sym, (x, y, z) in zip(mol.symbols(), mol.coords):
        lines.append(f"{sym} {x:.6f} {y:.6f} {z:.6f}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# SDF (V2000 subset)

_SDF_BOND_CLASS = {1: 1, 2: 2, 3: 3, 4: 4}  # molfile order 4 = aromatic


def parse_sdf_v2000(text: str) -> Molecule:
    """Parse the first record of a V2000 molfile into a Molecule.

    Only the atom and bond blocks are read; the properties block and any
    trailing records are ignored.  V3000 files are rejected.
    """
    lines = text.splitlines()
    if len(lines) < 4:
        raise ParseError("truncated molfile: missing counts line at line 4")
    counts = lines[3]
    if "V3000" in counts:
        raise ParseError("V3000 molfiles are not supported (line 4)")
    try:
        n_atoms = int(counts[0:3])
        n_bonds = int(counts[3:6])
    except ValueError:
        raise ParseError(f"malformed counts line at line 4: {counts!r}") from None
    if n_atoms < 1:
        raise ParseError(f"atom count must be >= 1 at line 4, got {n_atoms}")

    types = []
    coords = []
    for k in range(n_atoms):
        lineno = 5 + k
        if lineno - 1 >= len(lines):
            raise ParseError(f"truncated atom block at line {lineno}")
        line = lines[lineno - 1]
        try:
            xyz = [float(line[0:10]), float(line[10:20]), float(line[20:30])]
        except ValueError:
            raise ParseError(f"non-numeric coordinate at line {lineno}") from None
        sym = line[31:34].strip()
        if sym not in ATOM_INDEX:
            raise ParseError(f"unknown element symbol {sym!r} at line {lineno}")
        types.append(ATOM_INDEX[sym])
        coords.append(xyz)

    bonds = np.zeros((n_atoms, n_atoms), dtype=np.int64)
    for k in range(n_bonds):
        lineno = 5 + n_atoms + k
        if lineno - 1 >= len(lines):
            raise ParseError(f"truncated bond block at line {lineno}")
        line = lines[lineno - 1]
        try:
            i = int(line[0:3])
            j = int(line[3:6])
            order = int(line[6:9])
        except ValueError:
            raise ParseError(f"malformed bond line at line {lineno}") from None
        if not (1 <= i <= n_atoms and 1 <= j <= n_atoms) or i == j:
            raise ParseError(
                f"bond ({i}, {j}) out of range for {n_atoms} atoms at line {lineno}"
            )
        if order not in _SDF_BOND_CLASS:
            raise ParseError(f"unsupported bond type {order} at line {lineno}")
        bonds[i - 1, j - 1] = bonds[j - 1, i - 1] = _SDF_BOND_CLASS[order]

    return Molecule(
        np.array(types, dtype=np.int64),
        bonds,
        np.array(coords, dtype=np.float64),
    )


# ---------------------------------------------------------------------------
# JSON / JSONL

def molecule_to_json(mol: Molecule) -> str:
    return json.dumps(mol.to_json_dict(), separators=(",", ":"))


def molecule_from_json(s: str) -> Molecule:
    return Molecule.from_json_dict(json.loads(s))


def write_jsonl(path, mols) -> None:
    with open(path, "w") as f:
        for mol in mols:
            f.write(molecule_to_json(mol) + "\n")


def read_jsonl(path) -> list[Molecule]:
    mols = []
    with open(path) as f:
        for line in f:
            if line.strip():
                mols.append(molecule_from_json(line))
    return mols


# ---------------------------------------------------------------------------
# Toy dataset generation

# typical bond lengths in Angstrom, keyed by sorted element pair + class
_BOND_LENGTH = {
    ("C", "C", 1): 1.54, ("C", "C", 2): 1.34, ("C", "C", 3): 1.20, ("C", "C", 4): 1.39,
    ("C", "N", 1): 1.47, ("C", "N", 2): 1.29, ("C", "N", 3): 1.16, ("C", "N", 4): 1.34,
    ("C", "O", 1): 1.43, ("C", "O", 2): 1.21,
    ("C", "F", 1): 1.35, ("C", "H", 1): 1.09,
    ("N", "N", 1): 1.45, ("N", "O", 1): 1.40, ("H", "N", 1): 1.01,
    ("O", "O", 1): 1.48, ("H", "O", 1): 0.96,
    ("H", "H", 1): 0.74, ("F", "H", 1): 0.92,
}

_JITTER_STD = 0.02  # Angstrom, keeps geometric reference distributions nondegenerate

_TETRAHEDRAL = np.array(
    [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=np.float64
) / math.sqrt(3.0)
_TRIGONAL = np.array(
    [[1.0, 0.0, 0.0],
     [-0.5, math.sqrt(3) / 2, 0.0],
     [-0.5, -math.sqrt(3) / 2, 0.0]]
)
_BENT = np.array(
    [[1.0, 0.0, 0.0],
     [math.cos(math.radians(109.47)), math.sin(math.radians(109.47)), 0.0]]
)
_LINEAR = np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])


def _bond_length(sym_a: str, sym_b: str, cls: int) -> float:
    a, b = sorted((sym_a, sym_b))
    return _BOND_LENGTH.get((a, b, cls), 1.50)


def _random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform SO(3) rotation matrix from a normalized random quaternion."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def _rotation_aligning(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Rotation matrix sending unit vector a onto unit vector b (Rodrigues)."""
    v = np.cross(a, b)
    c = float(np.dot(a, b))
    s = np.linalg.norm(v)
    if s < 1e-12:
        if c > 0:
            return np.eye(3)
        # antiparallel: rotate pi about any axis orthogonal to a
        axis = np.cross(a, [1.0, 0.0, 0.0])
        if np.linalg.norm(axis) < 1e-6:
            axis = np.cross(a, [0.0, 1.0, 0.0])
        axis /= np.linalg.norm(axis)
        return _axis_angle(axis, math.pi)
    axis = v / s
    return _axis_angle(axis, math.atan2(s, c))


def _axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    kx, ky, kz = axis
    k = np.array([[0, -kz, ky], [kz, 0, -kx], [-ky, kx, 0]])
    return np.eye(3) + math.sin(angle) * k + (1 - math.cos(angle)) * (k @ k)


def _direction_template(degree: int, linear: bool) -> np.ndarray:
    if degree == 1:
        return np.array([[1.0, 0.0, 0.0]])
    if degree == 2:
        return _LINEAR if linear else _BENT
    if degree == 3:
        return _TRIGONAL
    return _TETRAHEDRAL


class _Builder:
    """Incremental molecular graph with valence bookkeeping."""

    def __init__(self):
        self.symbols: list[str] = []
        self.edges: list[tuple[int, int, int]] = []
        self.spare: list[int] = []

    def add_atom(self, sym: str) -> int:
        self.symbols.append(sym)
        self.spare.append(VALENCE[sym][0])
        return len(self.symbols) - 1

    def add_bond(self, i: int, j: int, cls: int):
        order = {1: 1, 2: 2, 3: 3, 4: 1.5}[cls]
        self.edges.append((i, j, cls))
        self.spare[i] -= order
        self.spare[j] -= order

    def n_atoms(self) -> int:
        return len(self.symbols)


def _fill_hydrogens(b: _Builder, rng: np.random.Generator):
    """Saturate every remaining valence slot with H (occasionally F on carbon)."""
    for i in range(b.n_atoms()):
        spare = b.spare[i]
        n_h = int(round(spare))
        for _ in range(n_h):
            sym = "F" if (b.symbols[i] == "C" and rng.random() < 0.05) else "H"
            j = b.add_atom(sym)
            b.add_bond(i, j, 1)


def _tree_skeleton(b: _Builder, rng: np.random.Generator, n_heavy: int):
    first = rng.choice(["C", "C", "C", "C", "N", "O"])
    b.add_atom(str(first))
    while b.n_atoms() < n_heavy:
        hosts = [i for i in range(b.n_atoms()) if b.spare[i] >= 1]
        if not hosts:
            break
        parent = int(rng.choice(hosts))
        child_sym = str(rng.choice(["C", "C", "C", "N", "O"]))
        cls = 1
        r = rng.random()
        if b.spare[parent] >= 3 and VALENCE[child_sym][0] >= 3 and r < 0.04:
            cls = 3
        elif b.spare[parent] >= 2 and VALENCE[child_sym][0] >= 2 and r < 0.18:
            cls = 2
        child = b.add_atom(child_sym)
        b.add_bond(parent, child, cls)


def _ring_skeleton(b: _Builder, rng: np.random.Generator, size: int) -> list[int]:
    ring = []
    for k in range(size):
        sym = "O" if (k > 0 and rng.random() < 0.1) else "C"
        ring.append(b.add_atom(sym))
    for k in range(size):
        b.add_bond(ring[k], ring[(k + 1) % size], 1)
    return ring


def _aromatic_skeleton(b: _Builder, rng: np.random.Generator) -> list[int]:
    ring = []
    for k in range(6):
        sym = "N" if (k > 0 and rng.random() < 0.15) else "C"
        ring.append(b.add_atom(sym))
    for k in range(6):
        b.add_bond(ring[k], ring[(k + 1) % 6], 4)
    return ring


def _finish(b: _Builder, coords: np.ndarray, rng: np.random.Generator) -> Molecule:
    v = b.n_atoms()
    bonds = np.zeros((v, v), dtype=np.int64)
    for i, j, cls in b.edges:
        bonds[i, j] = bonds[j, i] = cls
    coords = coords + rng.normal(0.0, _JITTER_STD, size=(v, 3))
    coords = coords - coords.mean(axis=0)
    coords = coords @ _random_rotation(rng).T
    types = np.array([ATOM_INDEX[s] for s in b.symbols], dtype=np.int64)
    return Molecule(types, bonds, coords)


def _place_tree(b: _Builder, rng: np.random.Generator) -> np.ndarray:
    v = b.n_atoms()
    adj: list[list[tuple[int, int]]] = [[] for _ in range(v)]
    for i, j, cls in b.edges:
        adj[i].append((j, cls))
        adj[j].append((i, cls))

    pos = np.zeros((v, 3))
    placed = np.zeros(v, dtype=bool)
    placed[0] = True
    linear0 = any(cls == 3 for _, cls in adj[0])
    dirs = _direction_template(len(adj[0]), linear0) @ _random_rotation(rng).T
    queue = []
    for slot, (j, cls) in enumerate(adj[0]):
        pos[j] = dirs[slot] * _bond_length(b.symbols[0], b.symbols[j], cls)
        placed[j] = True
        queue.append((j, 0))

    while queue:
        a, parent = queue.pop(0)
        rest = [(j, cls) for j, cls in adj[a] if j != parent]
        if not rest:
            continue
        u = pos[parent] - pos[a]
        u /= np.linalg.norm(u)
        linear = any(cls == 3 for _, cls in adj[a])
        template = _direction_template(len(adj[a]), linear)
        rot = _rotation_aligning(template[0], u)
        spin = _axis_angle(u, rng.uniform(0.0, 2.0 * math.pi))
        dirs = template @ rot.T @ spin.T
        for slot, (j, cls) in enumerate(rest, start=1):
            if placed[j]:
                continue
            pos[j] = pos[a] + dirs[slot] * _bond_length(b.symbols[a], b.symbols[j], cls)
            placed[j] = True
            queue.append((j, a))
    return pos


def _place_ring(b: _Builder, ring: list[int], aromatic: bool) -> np.ndarray:
    v = b.n_atoms()
    m = len(ring)
    length = 1.39 if aromatic else _bond_length("C", "C", 1)
    radius = length / (2.0 * math.sin(math.pi / m))
    pos = np.zeros((v, 3))
    for k, idx in enumerate(ring):
        ang = 2.0 * math.pi * k / m
        pos[idx] = [radius * math.cos(ang), radius * math.sin(ang), 0.0]

    # hydrogens: in-plane outward for aromatic, tetrahedral pair otherwise
    half_tet = math.radians(54.74)
    ring_set = set(ring)
    for k, idx in enumerate(ring):
        subs = [(i, j, cls) for (i, j, cls) in b.edges
                if (i == idx and j not in ring_set) or (j == idx and i not in ring_set)]
        if not subs:
            continue
        out = pos[idx] / np.linalg.norm(pos[idx])
        z = np.array([0.0, 0.0, 1.0])
        if aromatic or len(subs) == 1 and b.symbols[idx] != "C":
            dirs = [out]
        elif len(subs) == 1:
            dirs = [out * math.cos(half_tet) + z * math.sin(half_tet)]
        else:
            dirs = [
                out * math.cos(half_tet) + z * math.sin(half_tet),
                out * math.cos(half_tet) - z * math.sin(half_tet),
            ]
        for d, (i, j, cls) in zip(dirs, subs):
            other = j if i == idx else i
            ln = _bond_length(b.symbols[idx], b.symbols[other], cls)
            pos[other] = pos[idx] + d * ln
    return pos


def _tiny_molecule(b: _Builder, max_atoms: int, rng: np.random.Generator):
    """Budgets below 5 atoms only fit small hydrides and diatomics."""
    options = [("H", "H")]  # H2 always fits
    if max_atoms >= 2:
        options.append(("F", "H"))
    if max_atoms >= 3:
        options.append(("O",))
    if max_atoms >= 4:
        options.append(("N",))
    choice = options[int(rng.integers(len(options)))]
    if len(choice) == 2:
        i = b.add_atom(choice[0])
        j = b.add_atom(choice[1])
        b.add_bond(i, j, 1)
    else:
        b.add_atom(choice[0])


def generate_toy_dataset(n: int, seed: int, max_atoms: int = 12) -> list[Molecule]:
    """Generate `n` small hydrocarbon-like molecules with idealized geometry.

    Deterministic per seed.  Every molecule satisfies the default valency
    table exactly (atom stability 1.0): heavy skeletons are trees, saturated
    rings or aromatic six-rings, and all remaining valences are filled with
    hydrogens (occasionally fluorine).
    """
    n = max(int(n), 0)
    max_atoms = min(max(int(max_atoms), 2), 32)
    rng = np.random.default_rng(seed)
    mols = []
    for _ in range(n):
        b = _Builder()
        if max_atoms < 5:
            _tiny_molecule(b, max_atoms, rng)
            _fill_hydrogens(b, rng)
            pos = _place_tree(b, rng)
        else:
            r = rng.random()
            if r < 0.15 and max_atoms >= 12:
                ring = _aromatic_skeleton(b, rng)
                _fill_hydrogens(b, rng)
                pos = _place_ring(b, ring, aromatic=True)
            elif r < 0.40 and max_atoms >= 9:
                size = int(rng.integers(3, min(6, max_atoms // 3) + 1))
                ring = _ring_skeleton(b, rng, size)
                _fill_hydrogens(b, rng)
                pos = _place_ring(b, ring, aromatic=False)
            else:
                heavy_budget = max(1, (max_atoms - 2) // 3)
                n_heavy = int(rng.integers(1, heavy_budget + 1))
                _tree_skeleton(b, rng, n_heavy)
                _fill_hydrogens(b, rng)
                pos = _place_tree(b, rng)
        mols.append(_finish(b, pos, rng))
    return mols


# ---------------------------------------------------------------------------
# Canonical graph hashing (uniqueness / novelty)

def canonical_key(mol: Molecule) -> str:
    """Permutation-invariant hash of the atom-typed bond graph.

    Weisfeiler-Leman color refinement iterated to a fixed point of the
    induced atom partition, then a sha256 over the sorted color multiset.
    Coordinates and atom order do not affect the key.
    """
    v = mol.n_atoms
    neighbors = [
        [(int(mol.bonds[i, j]), j) for j in range(v) if mol.bonds[i, j] != 0]
        for i in range(v)
    ]
    colors = [f"atom:{ATOM_VOCAB[t]}" for t in mol.atom_types]

    def partition(cs):
        groups: dict[str, list[int]] = {}
        for i, c in enumerate(cs):
            groups.setdefault(c, []).append(i)
        return sorted(tuple(g) for g in groups.values())

    prev = partition(colors)
    for _ in range(v):
        new_colors = []
        for i in range(v):
            sig = ",".join(sorted(f"{cls}:{colors[j]}" for cls, j in neighbors[i]))
            digest = hashlib.sha256(f"{colors[i]}|{sig}".encode()).hexdigest()
            new_colors.append(digest)
        colors = new_colors
        part = partition(colors)
        if part == prev:
            break
        prev = part

    payload = f"{v};" + ";".join(sorted(colors))
    return hashlib.sha256(payload.encode()).hexdigest()


# ---------------------------------------------------------------------------
# Dataset splitting

def split_dataset(corpus_size: int, ratios, seed: int) -> DatasetSplit:
    """Shuffle 0..corpus_size-1 and split by three ratios (floor + remainder)."""
    ratios = [float(r) for r in ratios]
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError("need three positive split ratios")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {sum(ratios)!r}")

    sizes = [int(math.floor(r * corpus_size)) for r in ratios]
    remainder = corpus_size - sum(sizes)
    fractional = [(-(r * corpus_size - math.floor(r * corpus_size)), k) for k, r in enumerate(ratios)]
    for _, k in sorted(fractional)[:remainder]:
        sizes[k] += 1

    perm = np.random.default_rng(seed).permutation(corpus_size)
    train = [int(i) for i in perm[: sizes[0]]]
    val = [int(i) for i in perm[sizes[0]: sizes[0] + sizes[1]]]
    test = [int(i) for i in perm[sizes[0] + sizes[1]:]]
    return DatasetSplit(train=train, val=val, test=test, seed=seed)


def atom_count_histogram(mols) -> dict[int, int]:
    """Counts of molecule sizes, used to draw atom counts at sampling time."""
    hist: dict[int, int] = {}
    for m in mols:
        hist[m.n_atoms] = hist.get(m.n_atoms, 0) + 1
    return dict(sorted(hist.items()))
