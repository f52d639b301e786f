"""Latent diffusion over per-atom latent sequences.

A discrete schedule holds cumulative signal coefficients alpha_bar(t_k) on
the grid t_k = k/K.  The denoiser is a transformer whose layer norms are
modulated by the timestep embedding (plus an optional scalar-property
condition); sampling runs the DDPM reverse chain with classifier-free
guidance blending.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from latmol.blocks import MLP, AdaLayerNorm, DiTBlock, timestep_embed
from latmol.data import Molecule
from latmol.vae import MolVae, VaeDecoder, prediction_to_molecule, VaePrediction

# per-step alpha is clamped here for reverse-step stability; alpha_bar keeps
# the exact schedule-formula values
_ALPHA_FLOOR = 1e-4


@dataclass(frozen=True)
class DiffusionSchedule:
    """K-step discretization with alpha_bar on t_k = k/K, k = 0..K."""

    n_steps: int
    alpha_bar: np.ndarray      # (K+1,), alpha_bar[0] = 1
    alpha: np.ndarray          # (K+1,), alpha[k] = clamped alpha_bar ratio
    posterior_std: np.ndarray  # (K+1,), reverse-step noise scale

    def __post_init__(self):
        ab = self.alpha_bar
        if self.n_steps < 2:
            raise ValueError("need at least two diffusion steps")
        if ab.shape != (self.n_steps + 1,):
            raise ValueError("alpha_bar must have K+1 entries")
        if ab[0] != 1.0:
            raise ValueError("alpha_bar[0] must be exactly 1")
        if np.any(np.diff(ab) >= 0):
            raise ValueError("alpha_bar must be strictly decreasing")
        if ab[-1] > 1e-4:
            raise ValueError(f"alpha_bar[K] = {ab[-1]:g} exceeds 1e-4")
        if np.any(ab <= 0) or np.any(ab > 1):
            raise ValueError("alpha_bar values must lie in (0, 1]")

    def timestep(self, k: int) -> float:
        return k / self.n_steps


def make_schedule(n_steps: int, kind: str = "cosine") -> DiffusionSchedule:
    """Build a schedule; `kind` is "cosine" (squared-cosine signal decay)
    or "linear" (linearly growing noise rate integrated in time)."""
    if n_steps < 2:
        raise ValueError("need at least two diffusion steps")
    t = np.arange(n_steps + 1, dtype=np.float64) / n_steps
    if kind == "cosine":
        s = 0.008
        f = np.cos((t + s) / (1.0 + s) * math.pi / 2.0) ** 2
        alpha_bar = f / f[0]
    elif kind == "linear":
        beta_min, beta_max = 0.1, 20.0
        alpha_bar = np.exp(-(beta_min * t + 0.5 * (beta_max - beta_min) * t ** 2))
    else:
        raise ValueError(f"unknown schedule kind {kind!r}")
    alpha_bar[0] = 1.0

    alpha = np.ones_like(alpha_bar)
    alpha[1:] = np.clip(alpha_bar[1:] / alpha_bar[:-1], _ALPHA_FLOOR, None)
    posterior_std = np.zeros_like(alpha_bar)
    posterior_std[1:] = np.sqrt(
        (1.0 - alpha_bar[:-1]) / (1.0 - alpha_bar[1:]) * (1.0 - alpha[1:])
    )
    return DiffusionSchedule(n_steps, alpha_bar, alpha, posterior_std)


def subsample_schedule(s: DiffusionSchedule, stride: int) -> DiffusionSchedule:
    """Uniformly strided sub-grid of an existing schedule (coarser chain)."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if stride == 1:
        return s
    idx = np.arange(0, s.n_steps + 1, stride)
    if idx[-1] != s.n_steps:
        idx = np.append(idx, s.n_steps)
    ab = s.alpha_bar[idx]
    alpha = np.ones_like(ab)
    alpha[1:] = np.clip(ab[1:] / ab[:-1], _ALPHA_FLOOR, None)
    std = np.zeros_like(ab)
    std[1:] = np.sqrt((1.0 - ab[:-1]) / (1.0 - ab[1:]) * (1.0 - alpha[1:]))
    return DiffusionSchedule(len(idx) - 1, ab, alpha, std)


@dataclass(frozen=True)
class Condition:
    """Sampling/training condition; kind is "none" or "scalar-property"."""

    kind: str = "none"
    value: float | None = None
    property_id: str | None = None

    def __post_init__(self):
        if self.kind not in ("none", "scalar-property"):
            raise ValueError(f"unknown condition kind {self.kind!r}")
        if self.kind == "scalar-property":
            if self.value is None or not math.isfinite(self.value):
                raise ValueError("scalar-property condition needs a finite value")


NO_CONDITION = Condition()


def heavy_atom_condition(mol: Molecule, max_atoms: int = 32) -> Condition:
    """Desk-scale conditioning signal: heavy-atom count scaled to [0, 1]."""
    return Condition("scalar-property", mol.heavy_atom_count() / max_atoms, "heavy-atoms")


@dataclass
class BatchCondition:
    """Per-sample scalar conditions for training batches; inactive rows
    contribute a zero condition embedding (same as kind "none")."""

    values: torch.Tensor  # (B,)
    active: torch.Tensor  # (B,) bool


# ---------------------------------------------------------------------------
# forward process

def forward_noise(z0: torch.Tensor, k: int, eps: torch.Tensor,
                  s: DiffusionSchedule) -> torch.Tensor:
    """Closed-form noising: sqrt(ab_k) z0 + sqrt(1 - ab_k) eps."""
    if not 0 <= k <= s.n_steps:
        raise ValueError(f"step {k} out of range 0..{s.n_steps}")
    if eps.shape != z0.shape:
        raise ValueError("noise shape must match z0")
    ab = s.alpha_bar[k]
    return math.sqrt(ab) * z0 + math.sqrt(1.0 - ab) * eps


# ---------------------------------------------------------------------------
# denoiser

class DiT(nn.Module):
    """Transformer denoiser with adaptive layer norms driven by the timestep
    (+ condition) embedding; permutation-equivariant over latent rows."""

    def __init__(self, latent_dim: int = 16, width: int = 128, depth: int = 4,
                 n_heads: int = 4):
        super().__init__()
        self.latent_dim = latent_dim
        self.width = width
        self.proj_in = nn.Linear(latent_dim, width)
        self.time_mlp = MLP([width, width, width])
        self.cond_mlp = MLP([1, width, width])
        self.blocks = nn.ModuleList(DiTBlock(width, width, n_heads) for _ in range(depth))
        self.norm_out = AdaLayerNorm(width, width)
        self.head = nn.Linear(width, latent_dim)

    def conditioning(self, t: torch.Tensor, cond) -> torch.Tensor:
        emb = self.time_mlp(timestep_embed(t, self.width))
        if isinstance(cond, BatchCondition):
            c = self.cond_mlp(cond.values.to(emb.dtype).unsqueeze(-1))
            emb = emb + c * cond.active.to(emb.dtype).unsqueeze(-1)
        elif cond.kind != "none":
            val = torch.full(
                (*t.shape, 1), float(cond.value),
                dtype=emb.dtype, device=emb.device,
            )
            emb = emb + self.cond_mlp(val)
        return emb

    def forward(self, z: torch.Tensor, t: torch.Tensor, cond=NO_CONDITION,
                mask: torch.Tensor | None = None) -> torch.Tensor:
        if z.dim() != 3:
            raise ValueError("expected latents of shape (B, V, d)")
        t = torch.as_tensor(t, dtype=z.dtype, device=z.device)
        if t.dim() == 0:
            t = t.expand(z.shape[0])
        s = self.conditioning(t, cond)
        x = self.proj_in(z)
        for block in self.blocks:
            x = block(x, s, mask)
        x = self.norm_out(x, s)
        return self.head(x)


def dit_denoise(model: DiT, z_k: torch.Tensor, k: int, s: DiffusionSchedule,
                cond: Condition = NO_CONDITION) -> torch.Tensor:
    """Predict the noise in a single latent sequence (V, d) at step k."""
    t = torch.tensor(s.timestep(k), dtype=z_k.dtype)
    return model(z_k.unsqueeze(0), t, cond)[0]


def noise_prediction_loss(eps_hat: torch.Tensor, eps: torch.Tensor,
                          mask: torch.Tensor | None = None) -> torch.Tensor:
    """Mean squared error between predicted and true noise."""
    se = (eps_hat - eps) ** 2
    if mask is None:
        return se.mean()
    fmask = mask.to(se.dtype)[..., None]
    return (se * fmask).sum() / (fmask.sum() * se.shape[-1])


# ---------------------------------------------------------------------------
# guidance and reverse process

def condition_dropout(cond: Condition, p: float,
                      generator: torch.Generator | None = None) -> Condition:
    """Replace the condition with none with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("dropout probability must lie in [0, 1]")
    if cond.kind == "none" or p == 0.0:
        return cond
    if p >= 1.0:
        return NO_CONDITION
    u = torch.rand((), generator=generator).item()
    return NO_CONDITION if u < p else cond


def cfg_blend(eps_cond: torch.Tensor, eps_uncond: torch.Tensor, w: float) -> torch.Tensor:
    """Classifier-free guidance: (1 + w) eps_cond - w eps_uncond."""
    if eps_cond.shape != eps_uncond.shape:
        raise ValueError("guidance inputs must have equal shapes")
    if w < 0:
        raise ValueError("guidance strength must be nonnegative")
    if w == 0.0:
        return eps_cond
    return (1.0 + w) * eps_cond - w * eps_uncond


def ddpm_step(z_k: torch.Tensor, eps_hat: torch.Tensor, k: int, s: DiffusionSchedule,
              generator: torch.Generator | None = None) -> torch.Tensor:
    """One reverse step; the final step (k = 1) is deterministic."""
    if not 1 <= k <= s.n_steps:
        raise ValueError(f"reverse step {k} out of range 1..{s.n_steps}")
    alpha = s.alpha[k]
    ab = s.alpha_bar[k]
    mean = (z_k - (1.0 - alpha) / math.sqrt(1.0 - ab) * eps_hat) / math.sqrt(alpha)
    if k == 1:
        return mean
    noise = torch.randn(z_k.shape, dtype=z_k.dtype, generator=generator)
    return mean + s.posterior_std[k] * noise


# ---------------------------------------------------------------------------
# sampling

@dataclass
class LatentNormalization:
    """Per-dimension standardization of latents before diffusion."""

    mean: torch.Tensor  # (d,)
    std: torch.Tensor   # (d,)

    def apply(self, z: torch.Tensor) -> torch.Tensor:
        return (z - self.mean.to(z.dtype)) / self.std.to(z.dtype)

    def invert(self, z: torch.Tensor) -> torch.Tensor:
        return z * self.std.to(z.dtype) + self.mean.to(z.dtype)

    @classmethod
    def identity(cls, dim: int) -> "LatentNormalization":
        return cls(torch.zeros(dim), torch.ones(dim))


def _reverse_chain(model: DiT, z: torch.Tensor, s: DiffusionSchedule, w: float,
                   cond: Condition, generator: torch.Generator,
                   mask: torch.Tensor | None = None) -> torch.Tensor:
    with torch.no_grad():
        for k in range(s.n_steps, 0, -1):
            t = torch.tensor(s.timestep(k), dtype=z.dtype)
            if w > 0 or cond.kind != "none":
                eps_c = model(z, t, cond, mask)
                eps_u = model(z, t, NO_CONDITION, mask)
                eps = cfg_blend(eps_c, eps_u, w)
            else:
                eps = model(z, t, cond, mask)
            z = ddpm_step(z, eps, k, s, generator)
    return z


def sample(model: DiT, decoder: MolVae | VaeDecoder, n_atoms: int,
           s: DiffusionSchedule, w: float = 0.0, cond: Condition = NO_CONDITION,
           seed: int = 0, norm: LatentNormalization | None = None) -> Molecule:
    """Draw one molecule: noise -> reverse chain -> decode -> argmax classes."""
    if n_atoms < 1:
        raise ValueError("n_atoms must be >= 1")
    dec = decoder.decoder if isinstance(decoder, MolVae) else decoder
    dtype = next(dec.parameters()).dtype
    generator = torch.Generator().manual_seed(seed)
    z = torch.randn((1, n_atoms, model.latent_dim), dtype=dtype, generator=generator)
    z = _reverse_chain(model, z, s, w, cond, generator)
    if norm is not None:
        z = norm.invert(z)
    with torch.no_grad():
        coords, atoms, bonds = dec(z)
    return prediction_to_molecule(VaePrediction(coords[0], atoms[0], bonds[0]))


def sample_batch(model: DiT, decoder: MolVae | VaeDecoder, sizes: list[int],
                 s: DiffusionSchedule, w: float = 0.0,
                 cond: Condition = NO_CONDITION, seed: int = 0,
                 norm: LatentNormalization | None = None) -> list[Molecule]:
    """Sample several molecules in one padded reverse chain."""
    if not sizes or any(v < 1 for v in sizes):
        raise ValueError("need positive atom counts")
    dec = decoder.decoder if isinstance(decoder, MolVae) else decoder
    dtype = next(dec.parameters()).dtype
    generator = torch.Generator().manual_seed(seed)
    b, vmax = len(sizes), max(sizes)
    mask = torch.zeros(b, vmax, dtype=torch.bool)
    for i, v in enumerate(sizes):
        mask[i, :v] = True
    z = torch.randn((b, vmax, model.latent_dim), dtype=dtype, generator=generator)
    z = _reverse_chain(model, z, s, w, cond, generator, mask)
    if norm is not None:
        z = norm.invert(z)
    with torch.no_grad():
        coords, atoms, bonds = dec(z, mask)
    out = []
    for i, v in enumerate(sizes):
        pred = VaePrediction(coords[i, :v], atoms[i, :v], bonds[i, :v, :v])
        out.append(prediction_to_molecule(pred))
    return out


def sample_atom_count(histogram: dict[int, int], rng: np.random.Generator) -> int:
    """Draw a molecule size proportionally to training-set frequencies."""
    if not histogram:
        raise ValueError("empty atom-count histogram")
    sizes = np.array(sorted(histogram.keys()), dtype=np.int64)
    counts = np.array([histogram[int(v)] for v in sizes], dtype=np.float64)
    probs = counts / counts.sum()
    return int(rng.choice(sizes, p=probs))
