"""Two-stage training harness, checkpoint assembly and evaluation drivers.

Stage 1 fits the VAE with SE(3) augmentation; stage 2 freezes the encoder,
standardizes its latents and fits the diffusion denoiser on noised latents.
Every stochastic component is driven by explicit seeds, so a fixed
(config, seed, dataset) triple reproduces checkpoints byte for byte.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import torch

from latmol import geometry
from latmol.checkpoint import (
    Checkpoint,
    generator_state_bytes,
    params_to_state_dict,
    state_dict_to_params,
)
from latmol.data import Molecule, atom_count_histogram
from latmol.diffusion import (
    NO_CONDITION,
    BatchCondition,
    Condition,
    DiT,
    LatentNormalization,
    make_schedule,
    noise_prediction_loss,
    sample_atom_count,
    sample_batch,
    subsample_schedule,
)
from latmol.metrics import MetricsReport, geometry_report
from latmol.vae import (
    LossWeights,
    MolVae,
    augment_mode,
    collate,
    kl_term,
    reconstruction_loss_batched,
)

COND_NORM_ATOMS = 32  # heavy-atom counts are scaled by the corpus-wide cap

AUGMENTATION_MODES = ("none", "rot", "trans", "both")


@dataclass
class TrainConfig:
    stage: str = "vae"            # "vae" or "ldm"
    epochs: int = 50
    steps: int | None = None      # optional cap on optimizer steps
    batch_size: int = 32
    learning_rate: float = 1e-3
    warmup_steps: int = 0
    seed: int = 0
    # model sizes
    latent_dim: int = 16
    width: int = 128
    enc_depth: int = 6
    dec_depth: int = 4
    n_heads: int = 4
    # stage "vae"
    loss_weights: LossWeights = field(default_factory=LossWeights)
    augmentation: str = "both"
    trans_var: float = 0.01
    # stage "ldm"
    schedule_kind: str = "cosine"
    n_schedule_steps: int = 1000
    cond_dropout: float = 0.1
    guidance_w: float = 0.0
    condition: str = "none"       # "none" or "heavy-atoms"
    dit_depth: int = 4
    dit_width: int = 128

    def __post_init__(self):
        if self.stage not in ("vae", "ldm"):
            raise ValueError(f"unknown stage {self.stage!r}")
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("epochs, batch_size and learning_rate must be positive")
        if self.steps is not None and self.steps < 1:
            raise ValueError("steps must be positive when given")
        if self.augmentation not in AUGMENTATION_MODES:
            raise ValueError(f"augmentation must be one of {AUGMENTATION_MODES}")
        if not 0.0 <= self.cond_dropout <= 1.0:
            raise ValueError("cond_dropout must lie in [0, 1]")
        if self.guidance_w < 0:
            raise ValueError("guidance_w must be nonnegative")
        if self.condition not in ("none", "heavy-atoms"):
            raise ValueError(f"unknown condition {self.condition!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["loss_weights"] = {
            "gamma": list(self.loss_weights.gamma),
            "gamma_d": self.loss_weights.gamma_d,
            "beta": self.loss_weights.beta,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        lw = d.pop("loss_weights", None)
        if lw is not None:
            d["loss_weights"] = LossWeights(
                gamma=tuple(lw.get("gamma", (1.0, 1.0, 1.0, 1.0))),
                gamma_d=lw.get("gamma_d", 10.0),
                beta=lw.get("beta", 1e-4),
            )
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)


class CsvLogger:
    """Tiny per-epoch CSV logger; silently off when no path is given."""

    def __init__(self, path, fields):
        self.path = path
        self.fields = fields
        if path is not None:
            with open(path, "w") as f:
                f.write(",".join(fields) + "\n")

    def log(self, row: dict):
        if self.path is None:
            return
        with open(self.path, "a") as f:
            f.write(",".join(str(row[k]) for k in self.fields) + "\n")


# ---------------------------------------------------------------------------
# model factories

def vae_model_config(cfg: TrainConfig) -> dict:
    return {
        "latent_dim": cfg.latent_dim,
        "width": cfg.width,
        "enc_depth": cfg.enc_depth,
        "dec_depth": cfg.dec_depth,
        "n_heads": cfg.n_heads,
    }


def dit_model_config(cfg: TrainConfig, latent_dim: int) -> dict:
    return {
        "latent_dim": latent_dim,
        "width": cfg.dit_width,
        "depth": cfg.dit_depth,
        "n_heads": cfg.n_heads,
    }


def build_vae(model_config: dict) -> MolVae:
    return MolVae(**model_config)


def build_dit(model_config: dict) -> DiT:
    return DiT(**model_config)


def load_vae(ckpt: Checkpoint):
    if ckpt.kind != "vae":
        raise ValueError(f"expected a vae checkpoint, got {ckpt.kind!r}")
    model = build_vae(ckpt.model_config)
    model.load_state_dict(params_to_state_dict(ckpt.params, "uae"))
    model.eval()
    norm = checkpoint_normalization(ckpt)
    return model, norm


def load_dit(ckpt: Checkpoint) -> DiT:
    if ckpt.kind != "ldm":
        raise ValueError(f"expected an ldm checkpoint, got {ckpt.kind!r}")
    model = build_dit(ckpt.model_config)
    model.load_state_dict(params_to_state_dict(ckpt.params, "udm"))
    model.eval()
    return model


def checkpoint_normalization(ckpt: Checkpoint) -> LatentNormalization | None:
    if ckpt.norm_mean is None:
        return None
    return LatentNormalization(
        torch.tensor(ckpt.norm_mean, dtype=torch.float32),
        torch.tensor(ckpt.norm_std, dtype=torch.float32),
    )


# ---------------------------------------------------------------------------
# stage 1: VAE

def _batches(n: int, batch_size: int, order: np.ndarray):
    for start in range(0, n, batch_size):
        yield order[start: start + batch_size]


def _apply_warmup(optimizer, cfg: TrainConfig, step: int):
    if cfg.warmup_steps > 0:
        scale = min(1.0, (step + 1) / cfg.warmup_steps)
        for group in optimizer.param_groups:
            group["lr"] = cfg.learning_rate * scale


def train_vae(cfg: TrainConfig, dataset: list[Molecule], log_path=None) -> Checkpoint:
    """Stage-1 training: augment, encode, reparameterize, decode, optimize."""
    if cfg.stage != "vae":
        raise ValueError("config stage must be 'vae'")
    if not dataset:
        raise ValueError("empty dataset")

    torch.manual_seed(cfg.seed)
    model = build_vae(vae_model_config(cfg))
    np_rng = np.random.default_rng(cfg.seed)
    noise_gen = torch.Generator().manual_seed(cfg.seed)
    optimizer = torch.optim.Adam(
        model.parameters(), lr=cfg.learning_rate, betas=(0.9, 0.999), eps=1e-8
    )
    logger = CsvLogger(log_path, [
        "epoch", "total", "atom", "bond", "coordinate", "distance", "kl", "wall_time",
    ])

    w = cfg.loss_weights
    n = len(dataset)
    step = 0
    done = False
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        sums = {k: 0.0 for k in ("total", "atom", "bond", "coordinate", "distance", "kl")}
        seen = 0
        order = np_rng.permutation(n)
        for idx in _batches(n, cfg.batch_size, order):
            mols = [
                augment_mode(dataset[i], np_rng, cfg.augmentation, cfg.trans_var)
                for i in idx
            ]
            batch = collate(mols)
            mu, sigma = model.encoder(batch)
            eps = torch.randn(mu.shape, dtype=mu.dtype, generator=noise_gen)
            z = mu + sigma * eps
            coords, atoms, bonds = model.decoder(z, batch["mask"])
            losses = reconstruction_loss_batched(batch, coords, atoms, bonds, w)
            kl = kl_term(mu, sigma, batch["mask"])
            loss = losses["total"] + w.beta * kl
            if not torch.isfinite(loss):
                raise RuntimeError(f"divergence: non-finite loss at epoch {epoch}")
            _apply_warmup(optimizer, cfg, step)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            step += 1
            bsz = len(idx)
            seen += bsz
            for key in ("total", "atom", "bond", "coordinate", "distance"):
                sums[key] += float(losses[key]) * bsz
            sums["kl"] += float(kl) * bsz
            if cfg.steps is not None and step >= cfg.steps:
                done = True
                break
        logger.log({
            "epoch": epoch,
            **{k: sums[k] / max(seen, 1) for k in sums},
            "wall_time": time.perf_counter() - t0,
        })
        if done:
            break

    mean, std = latent_stats(model, dataset, cfg.batch_size)
    return Checkpoint(
        kind="vae",
        config=cfg.to_dict(),
        model_config=vae_model_config(cfg),
        params=state_dict_to_params(model.state_dict(), "uae"),
        norm_mean=[float(x) for x in mean],
        norm_std=[float(x) for x in std],
        rng_state=generator_state_bytes(noise_gen),
        extra={"atom_histogram": {str(k): v for k, v in
                                  atom_count_histogram(dataset).items()}},
    )


def latent_stats(model: MolVae, dataset: list[Molecule], batch_size: int = 64):
    """Per-dimension mean/std of the encoder's latent marginal (mu plus the
    posterior noise) over a dataset."""
    model.eval()
    mus, sig2s = [], []
    with torch.no_grad():
        for start in range(0, len(dataset), batch_size):
            batch = collate(dataset[start: start + batch_size])
            mu, sigma = model.encoder(batch)
            mask = batch["mask"]
            mus.append(mu[mask])
            sig2s.append(sigma[mask] ** 2)
    mu_all = torch.cat(mus)
    var = mu_all.var(dim=0, unbiased=False) + torch.cat(sig2s).mean(dim=0)
    std = torch.sqrt(var).clamp(min=1e-6)
    return mu_all.mean(dim=0), std


# ---------------------------------------------------------------------------
# stage 2: latent diffusion

def train_ldm(cfg: TrainConfig, dataset: list[Molecule], vae_ckpt: Checkpoint,
              log_path=None) -> Checkpoint:
    """Stage-2 training: frozen encoder, standardized latents, noise
    prediction with per-sample timesteps and condition dropout."""
    if cfg.stage != "ldm":
        raise ValueError("config stage must be 'ldm'")
    if not dataset:
        raise ValueError("empty dataset")

    vae, norm = load_vae(vae_ckpt)
    if norm is None:
        raise ValueError("vae checkpoint is missing latent normalization stats")
    for p in vae.parameters():
        p.requires_grad_(False)

    torch.manual_seed(cfg.seed)
    model = build_dit(dit_model_config(cfg, vae.latent_dim))
    np_rng = np.random.default_rng(cfg.seed)
    noise_gen = torch.Generator().manual_seed(cfg.seed)
    # separate stream: dropout draws must not perturb the noise sequence
    drop_gen = torch.Generator().manual_seed(cfg.seed ^ 0x9E3779B9)
    optimizer = torch.optim.Adam(
        model.parameters(), lr=cfg.learning_rate, betas=(0.9, 0.999), eps=1e-8
    )
    schedule = make_schedule(cfg.n_schedule_steps, cfg.schedule_kind)
    alpha_bar = torch.from_numpy(schedule.alpha_bar).to(torch.float32)
    logger = CsvLogger(log_path, ["step", "loss", "wall_time"])

    n = len(dataset)
    steps_per_epoch = math.ceil(n / cfg.batch_size)
    total_steps = cfg.steps if cfg.steps is not None else cfg.epochs * steps_per_epoch

    t0 = time.perf_counter()
    for step in range(total_steps):
        idx = np_rng.integers(0, n, size=min(cfg.batch_size, n))
        mols = [dataset[int(i)] for i in idx]
        batch = collate(mols)
        mask = batch["mask"]
        with torch.no_grad():
            mu, sigma = vae.encoder(batch)
            eps_r = torch.randn(mu.shape, dtype=mu.dtype, generator=noise_gen)
            z0 = norm.apply(mu + sigma * eps_r)

        k = torch.randint(1, schedule.n_steps + 1, (len(mols),), generator=noise_gen)
        ab = alpha_bar[k]
        eps = torch.randn(z0.shape, dtype=z0.dtype, generator=noise_gen)
        z_k = (torch.sqrt(ab)[:, None, None] * z0
               + torch.sqrt(1.0 - ab)[:, None, None] * eps)
        t = k.to(z0.dtype) / schedule.n_steps

        if cfg.condition == "heavy-atoms":
            values = torch.tensor(
                [m.heavy_atom_count() / COND_NORM_ATOMS for m in mols],
                dtype=z0.dtype,
            )
            keep = torch.rand(len(mols), generator=noise_gen) >= cfg.cond_dropout
            cond = BatchCondition(values, keep)
        else:
            cond = NO_CONDITION

        eps_hat = model(z_k, t, cond, mask)
        loss = noise_prediction_loss(eps_hat, eps, mask)
        if not torch.isfinite(loss):
            raise RuntimeError(f"divergence: non-finite loss at step {step}")
        _apply_warmup(optimizer, cfg, step)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        if step % 100 == 0 or step == total_steps - 1:
            logger.log({"step": step, "loss": float(loss),
                        "wall_time": time.perf_counter() - t0})

    return Checkpoint(
        kind="ldm",
        config=cfg.to_dict(),
        model_config=dit_model_config(cfg, vae.latent_dim),
        params=state_dict_to_params(model.state_dict(), "udm"),
        norm_mean=vae_ckpt.norm_mean,
        norm_std=vae_ckpt.norm_std,
        rng_state=generator_state_bytes(noise_gen),
        extra={"atom_histogram": {str(k): v for k, v in
                                  atom_count_histogram(dataset).items()}},
    )


# ---------------------------------------------------------------------------
# evaluation drivers

def reconstruct_eval(vae_ckpt: Checkpoint | MolVae, mols: list[Molecule],
                     batch_size: int = 64) -> dict:
    """Deterministic reconstruction metrics (z = mu, no sampling): atom and
    bond argmax accuracies plus mean unaligned coordinate RMSD."""
    if not mols:
        raise ValueError("empty evaluation split")
    model = vae_ckpt if isinstance(vae_ckpt, MolVae) else load_vae(vae_ckpt)[0]
    model.eval()

    atom_correct = atom_total = 0
    bond_correct = bond_total = 0
    rmsds = []
    with torch.no_grad():
        for start in range(0, len(mols), batch_size):
            chunk = mols[start: start + batch_size]
            batch = collate(chunk)
            mask = batch["mask"]
            mu, _ = model.encoder(batch)
            coords, atom_logits, bond_logits = model.decoder(mu, mask)

            atom_hit = (atom_logits.argmax(-1) == batch["types"]) & mask
            atom_correct += int(atom_hit.sum())
            atom_total += int(mask.sum())

            pair = mask[:, :, None] & mask[:, None, :]
            pair &= ~torch.eye(mask.shape[1], dtype=torch.bool)[None]
            bond_hit = (bond_logits.argmax(-1) == batch["bonds"]) & pair
            bond_correct += int(bond_hit.sum())
            bond_total += int(pair.sum())

            for i, mol in enumerate(chunk):
                v = mol.n_atoms
                rmsds.append(geometry.rmsd(
                    mol.coords, coords[i, :v].numpy().astype(np.float64), align=False
                ))
    return {
        "atom_acc": atom_correct / atom_total,
        "bond_acc": bond_correct / max(bond_total, 1),
        "coord_rmsd": float(np.mean(rmsds)),
    }


def sample_from_checkpoints(vae_ckpt: Checkpoint, ldm_ckpt: Checkpoint,
                            n_samples: int, w: float = 0.0, seed: int = 0,
                            cond: Condition = NO_CONDITION,
                            n_steps: int | None = None,
                            schedule_kind: str | None = None, stride: int = 1):
    """Draw molecules from a trained pipeline; atom counts follow the
    training-set histogram.  Returns (samples, manifest)."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    vae, norm = load_vae(vae_ckpt)
    dit = load_dit(ldm_ckpt)

    k_steps = n_steps if n_steps is not None else ldm_ckpt.config["n_schedule_steps"]
    kind = schedule_kind if schedule_kind is not None else ldm_ckpt.config["schedule_kind"]
    schedule = make_schedule(k_steps, kind)
    if stride > 1:
        schedule = subsample_schedule(schedule, stride)

    hist = {int(k): int(v) for k, v in ldm_ckpt.extra["atom_histogram"].items()}
    rng = np.random.default_rng(seed)
    sizes = [sample_atom_count(hist, rng) for _ in range(n_samples)]
    samples = sample_batch(dit, vae, sizes, schedule, w, cond, seed=seed, norm=norm)

    cond_dict = {"kind": cond.kind, "value": cond.value, "property_id": cond.property_id}
    manifest = [
        {
            "index": i,
            "seed": seed,
            "n_atoms": sizes[i],
            "K": schedule.n_steps,
            "schedule": kind,
            "w": w,
            "condition": cond_dict,
        }
        for i in range(n_samples)
    ]
    return samples, manifest


def evaluate(vae_ckpt: Checkpoint, ldm_ckpt: Checkpoint, n_samples: int,
             reference: list[Molecule], w: float = 0.0, seed: int = 0,
             cond: Condition = NO_CONDITION, n_steps: int | None = None,
             schedule_kind: str | None = None, stride: int = 1):
    """Sample molecules from the trained pipeline and score them against a
    reference set.  Returns (MetricsReport, manifest, samples)."""
    if not reference:
        raise ValueError("empty reference set")
    samples, manifest = sample_from_checkpoints(
        vae_ckpt, ldm_ckpt, n_samples, w=w, seed=seed, cond=cond,
        n_steps=n_steps, schedule_kind=schedule_kind, stride=stride,
    )
    report = geometry_report(samples, reference)
    return report, manifest, samples
