"""Unified molecular VAE: a relational-attention encoder maps atom types,
bonds and coordinates to one latent vector per atom; a plain transformer
decoder reconstructs coordinates, atom-type logits and bond-type logits.

Training pairs the reconstruction losses (atom/bond cross-entropy,
coordinate MSE, pair-distance MSE with extra weight on bonded pairs) with a
KL term against a standard normal prior.  SE(3) augmentation replaces the
input coordinates with a rigidly transformed copy; the loss always targets
the transformed molecule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from latmol import geometry
from latmol.blocks import MLP, RTransBlock, TransformerBlock, layernorm
from latmol.data import BOND_VOCAB_SIZE, N_ATOM_TYPES, Molecule
from latmol.geometry import GbfConfig, Se3Transform, apply_se3, sample_se3

_DIST_EPS = 1e-12  # inside sqrt, keeps pair-distance gradients finite


@dataclass
class LossWeights:
    """Weights for [atom, bond, coordinate, distance] plus gamma_d and beta."""

    gamma: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    gamma_d: float = 10.0
    beta: float = 1e-4

    def __post_init__(self):
        if len(self.gamma) != 4 or any(g < 0 for g in self.gamma):
            raise ValueError("gamma must be four nonnegative weights")
        if self.gamma_d < 0 or self.beta < 0:
            raise ValueError("gamma_d and beta must be nonnegative")


@dataclass
class LatentSequence:
    """Per-atom latents; mu/sigma are present when encoder-produced."""

    z: torch.Tensor
    mu: torch.Tensor | None = None
    sigma: torch.Tensor | None = None


@dataclass
class VaePrediction:
    coords_hat: torch.Tensor   # (V, 3)
    atom_logits: torch.Tensor  # (V, N_a)
    bond_logits: torch.Tensor  # (V, V, N_b)


# ---------------------------------------------------------------------------
# featurization

def featurize(mol: Molecule, dtype=torch.float32) -> dict:
    types = torch.from_numpy(np.ascontiguousarray(mol.atom_types))
    bonds = torch.from_numpy(np.ascontiguousarray(mol.bonds))
    return {
        "types": types,
        "bonds": bonds,
        "atom_onehot": F.one_hot(types, N_ATOM_TYPES).to(dtype),
        "bond_onehot": F.one_hot(bonds, BOND_VOCAB_SIZE).to(dtype),
        "coords": torch.from_numpy(mol.coords).to(dtype),
    }


def collate(mols: list[Molecule], dtype=torch.float32) -> dict:
    """Zero-pad a list of molecules to a common atom count; mask marks valid."""
    b = len(mols)
    vmax = max(m.n_atoms for m in mols)
    out = {
        "types": torch.zeros(b, vmax, dtype=torch.long),
        "bonds": torch.zeros(b, vmax, vmax, dtype=torch.long),
        "atom_onehot": torch.zeros(b, vmax, N_ATOM_TYPES, dtype=dtype),
        "bond_onehot": torch.zeros(b, vmax, vmax, BOND_VOCAB_SIZE, dtype=dtype),
        "coords": torch.zeros(b, vmax, 3, dtype=dtype),
        "mask": torch.zeros(b, vmax, dtype=torch.bool),
    }
    for i, mol in enumerate(mols):
        f = featurize(mol, dtype)
        v = mol.n_atoms
        out["types"][i, :v] = f["types"]
        out["bonds"][i, :v, :v] = f["bonds"]
        out["atom_onehot"][i, :v] = f["atom_onehot"]
        out["bond_onehot"][i, :v, :v] = f["bond_onehot"]
        out["coords"][i, :v] = f["coords"]
        out["mask"][i, :v] = True
    return out


# ---------------------------------------------------------------------------
# model

class VaeEncoder(nn.Module):
    def __init__(self, latent_dim: int = 16, width: int = 128, depth: int = 6,
                 n_heads: int = 4, gbf: GbfConfig | None = None):
        super().__init__()
        self.latent_dim = latent_dim
        self.gbf = gbf or GbfConfig()
        self.register_buffer("gbf_centers", torch.tensor(self.gbf.centers(), dtype=torch.float32))
        self.embed_nodes = MLP([3 + N_ATOM_TYPES, width, width])
        self.embed_edges = MLP([BOND_VOCAB_SIZE + self.gbf.n_centers, width, width])
        self.blocks = nn.ModuleList(RTransBlock(width, n_heads) for _ in range(depth))
        self.head_mu = nn.Linear(width, latent_dim)
        self.head_sigma = nn.Linear(width, latent_dim)

    def gbf_features(self, coords: torch.Tensor) -> torch.Tensor:
        diff = coords[:, :, None, :] - coords[:, None, :, :]
        dist = torch.sqrt((diff ** 2).sum(-1) + _DIST_EPS)
        centers = self.gbf_centers.to(coords.dtype)
        return torch.exp(-((dist[..., None] - centers) ** 2) / (2.0 * self.gbf.width ** 2))

    def forward(self, batch: dict):
        coords, mask = batch["coords"], batch["mask"]
        nodes = self.embed_nodes(torch.cat([coords, batch["atom_onehot"]], dim=-1))
        edges = self.embed_edges(
            torch.cat([batch["bond_onehot"], self.gbf_features(coords)], dim=-1)
        )
        for block in self.blocks:
            nodes = block(nodes, edges, mask)
        nodes = layernorm(nodes)
        mu = self.head_mu(nodes)
        sigma = F.softplus(self.head_sigma(nodes)) + 1e-4
        return mu, sigma


class VaeDecoder(nn.Module):
    def __init__(self, latent_dim: int = 16, width: int = 128, depth: int = 4,
                 n_heads: int = 4):
        super().__init__()
        self.latent_dim = latent_dim
        self.proj = nn.Linear(latent_dim, width)
        self.blocks = nn.ModuleList(TransformerBlock(width, n_heads) for _ in range(depth))
        self.head_coords = MLP([width, width, 3])
        self.head_atoms = MLP([width, width, N_ATOM_TYPES])
        self.head_bonds = MLP([width, width, BOND_VOCAB_SIZE])

    def forward(self, z: torch.Tensor, mask: torch.Tensor | None = None):
        x = self.proj(z)
        for block in self.blocks:
            x = block(x, mask)
        x = layernorm(x)
        coords_hat = self.head_coords(x)
        atom_logits = self.head_atoms(x)
        pair = x[:, :, None, :] + x[:, None, :, :]
        bond_logits = self.head_bonds(pair)
        return coords_hat, atom_logits, bond_logits


class MolVae(nn.Module):
    """Encoder/decoder pair with a shared latent width."""

    def __init__(self, latent_dim: int = 16, width: int = 128,
                 enc_depth: int = 6, dec_depth: int = 4, n_heads: int = 4,
                 gbf: GbfConfig | None = None):
        super().__init__()
        self.latent_dim = latent_dim
        self.encoder = VaeEncoder(latent_dim, width, enc_depth, n_heads, gbf)
        self.decoder = VaeDecoder(latent_dim, width, dec_depth, n_heads)


# ---------------------------------------------------------------------------
# single-molecule API

def encode(mol: Molecule, model: MolVae | VaeEncoder) -> LatentSequence:
    """Encode one molecule; z defaults to the posterior mean."""
    encoder = model.encoder if isinstance(model, MolVae) else model
    dtype = next(encoder.parameters()).dtype
    batch = collate([mol], dtype)
    mu, sigma = encoder(batch)
    return LatentSequence(z=mu[0].detach(), mu=mu[0], sigma=sigma[0])


def reparameterize(mu: torch.Tensor, sigma: torch.Tensor,
                   generator: torch.Generator | None = None) -> torch.Tensor:
    eps = torch.randn(mu.shape, dtype=mu.dtype, generator=generator)
    return mu + sigma * eps


def decode(z: torch.Tensor | LatentSequence, model: MolVae | VaeDecoder) -> VaePrediction:
    decoder = model.decoder if isinstance(model, MolVae) else model
    if isinstance(z, LatentSequence):
        z = z.z
    coords, atoms, bonds = decoder(z.unsqueeze(0))
    return VaePrediction(coords[0], atoms[0], bonds[0])


def prediction_to_molecule(pred: VaePrediction) -> Molecule:
    """Argmax atom/bond classes; bond matrix symmetrized with zero diagonal."""
    types = pred.atom_logits.argmax(-1).cpu().numpy().astype(np.int64)
    bonds = pred.bond_logits.argmax(-1).cpu().numpy().astype(np.int64)
    bonds = np.triu(bonds, k=1)
    bonds = bonds + bonds.T
    coords = pred.coords_hat.detach().cpu().numpy().astype(np.float64)
    return Molecule(types, bonds, coords)


# ---------------------------------------------------------------------------
# losses

def _pair_masks(mask: torch.Tensor):
    pm = mask[:, :, None] & mask[:, None, :]
    eye = torch.eye(mask.shape[1], dtype=torch.bool, device=mask.device)
    return pm & ~eye


def reconstruction_loss_batched(batch: dict, coords_hat, atom_logits, bond_logits,
                                w: LossWeights) -> dict:
    mask = batch["mask"]
    fmask = mask.to(coords_hat.dtype)
    n_atoms = fmask.sum(1)

    ce_atom = F.cross_entropy(
        atom_logits.flatten(0, 1), batch["types"].flatten(0, 1), reduction="none"
    ).view(mask.shape)
    l_atom = ((ce_atom * fmask).sum(1) / n_atoms).mean()

    pair_mask = _pair_masks(mask)
    fpair = pair_mask.to(coords_hat.dtype)
    n_pairs = fpair.sum((1, 2))
    ce_bond = F.cross_entropy(
        bond_logits.flatten(0, 2), batch["bonds"].flatten(0, 2), reduction="none"
    ).view(pair_mask.shape)
    l_bond = ((ce_bond * fpair).sum((1, 2)) / n_pairs.clamp(min=1.0)).mean()

    se_coord = ((coords_hat - batch["coords"]) ** 2).mean(-1)
    l_coord = ((se_coord * fmask).sum(1) / n_atoms).mean()

    diff_hat = coords_hat[:, :, None, :] - coords_hat[:, None, :, :]
    d_hat = torch.sqrt((diff_hat ** 2).sum(-1) + _DIST_EPS)
    diff_true = batch["coords"][:, :, None, :] - batch["coords"][:, None, :, :]
    d_true = torch.sqrt((diff_true ** 2).sum(-1) + _DIST_EPS)
    bonded = batch["bonds"] > 0
    wts = torch.where(bonded, torch.as_tensor(w.gamma_d, dtype=fpair.dtype),
                      torch.as_tensor(1.0, dtype=fpair.dtype)) * fpair
    l_dist = ((wts * (d_hat - d_true) ** 2).sum((1, 2))
              / wts.sum((1, 2)).clamp(min=_DIST_EPS)).mean()

    g = w.gamma
    total = g[0] * l_atom + g[1] * l_bond + g[2] * l_coord + g[3] * l_dist
    return {"total": total, "atom": l_atom, "bond": l_bond,
            "coordinate": l_coord, "distance": l_dist}


def reconstruction_loss(mol: Molecule, pred: VaePrediction, w: LossWeights) -> dict:
    """Losses for one molecule against a prediction of matching shapes."""
    dtype = pred.coords_hat.dtype
    batch = collate([mol], dtype)
    return reconstruction_loss_batched(
        batch, pred.coords_hat.unsqueeze(0), pred.atom_logits.unsqueeze(0),
        pred.bond_logits.unsqueeze(0), w,
    )


def kl_term(mu: torch.Tensor, sigma: torch.Tensor,
            mask: torch.Tensor | None = None) -> torch.Tensor:
    """KL(q || N(0, I)) summed over latent dims, averaged over atoms."""
    per_atom = 0.5 * (mu ** 2 + sigma ** 2 - 1.0 - 2.0 * torch.log(sigma)).sum(-1)
    if mask is None:
        return per_atom.mean()
    fmask = mask.to(per_atom.dtype)
    return ((per_atom * fmask).sum(-1) / fmask.sum(-1)).mean()


def vae_loss(mol: Molecule, pred: VaePrediction, mu, sigma, w: LossWeights) -> torch.Tensor:
    recon = reconstruction_loss(mol, pred, w)
    return recon["total"] + w.beta * kl_term(mu, sigma)


# ---------------------------------------------------------------------------
# SE(3) augmentation

def augment(mol: Molecule, rng: np.random.Generator, trans_var: float = 0.01) -> Molecule:
    """Random rotation + Gaussian translation of the coordinates only."""
    t = sample_se3(rng, trans_var)
    return Molecule(mol.atom_types.copy(), mol.bonds.copy(), apply_se3(mol.coords, t))


def augment_mode(mol: Molecule, rng: np.random.Generator, mode: str,
                 trans_var: float = 0.01) -> Molecule:
    """Augmentation variants: none, rot, trans, both."""
    if mode == "none":
        return mol.copy()
    if mode == "rot":
        return augment(mol, rng, trans_var=0.0)
    if mode == "trans":
        shift = rng.normal(0.0, np.sqrt(trans_var), size=3)
        t = Se3Transform(np.eye(3), shift)
        return Molecule(mol.atom_types.copy(), mol.bonds.copy(), apply_se3(mol.coords, t))
    if mode == "both":
        return augment(mol, rng, trans_var)
    raise ValueError(f"unknown augmentation mode {mode!r}")
