"""Command-line entry point.

Subcommands: gen-data, train-vae, train-ldm, sample, eval, reconstruct,
report.  Exit codes: 0 success, 1 usage error, 2 runtime error.  Every
stochastic component is seeded through --seed; training options may also
come from a JSON config file (--config), with CLI flags taking precedence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from latmol.checkpoint import load_checkpoint, save_checkpoint
from latmol.data import generate_toy_dataset, read_jsonl, write_jsonl
from latmol.diffusion import NO_CONDITION, Condition
from latmol.metrics import geometry_report, pooled_geometry, write_samples_csv
from latmol.plots import render_geometry_figures, write_histogram_csv
from latmol.training import (
    TrainConfig,
    evaluate,
    reconstruct_eval,
    sample_from_checkpoints,
    train_ldm,
    train_vae,
)


class _Parser(argparse.ArgumentParser):
    """Argument parser that shows the subcommand help on usage errors."""

    def error(self, message):
        sys.stderr.write(f"error: {message}\n\n")
        self.print_help(sys.stderr)
        raise SystemExit(2)


def _add_train_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file with TrainConfig fields")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--latent-dim", type=int, default=None)
    p.add_argument("--log", default=None, help="per-epoch CSV log path")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="latmol", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a toy molecule dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-atoms", type=int, default=12)
    p.add_argument("--out", required=True, help="output JSONL path")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train-vae", help="stage 1: train the molecular VAE")
    p.add_argument("--data", required=True, help="training JSONL")
    p.add_argument("--out", required=True, help="checkpoint path")
    _add_train_flags(p)
    p.add_argument("--gamma-d", type=float, default=None,
                   help="bonded-pair weight inside the distance loss")
    p.add_argument("--beta", type=float, default=None, help="KL weight")
    p.add_argument("--aug", choices=["none", "rot", "trans", "both"], default=None)
    p.set_defaults(func=cmd_train_vae)

    p = sub.add_parser("train-ldm", help="stage 2: train the latent diffusion model")
    p.add_argument("--data", required=True, help="training JSONL")
    p.add_argument("--vae-ckpt", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    _add_train_flags(p)
    p.add_argument("--train-steps", type=int, default=None,
                   help="optimizer step count (overrides --epochs)")
    p.add_argument("--steps", type=int, default=None, help="diffusion step count K")
    p.add_argument("--schedule", choices=["linear", "cosine"], default=None)
    p.add_argument("--cond", choices=["none", "heavy-atoms"], default=None)
    p.add_argument("--cond-dropout", type=float, default=None)
    p.set_defaults(func=cmd_train_ldm)

    p = sub.add_parser("sample", help="sample molecules from trained checkpoints")
    p.add_argument("--vae-ckpt", required=True)
    p.add_argument("--ldm-ckpt", required=True)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--w", type=float, default=0.0, help="guidance strength")
    p.add_argument("--cond", choices=["none", "heavy-atoms"], default="none")
    p.add_argument("--cond-value", type=float, default=None,
                   help="condition scalar in [0, 1] when --cond is set")
    p.add_argument("--steps", type=int, default=None, help="diffusion step count K")
    p.add_argument("--schedule", choices=["linear", "cosine"], default=None)
    p.add_argument("--stride", type=int, default=1, help="sampling step stride")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output JSONL path")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", help="sample and score against a reference set")
    p.add_argument("--vae-ckpt", required=True)
    p.add_argument("--ldm-ckpt", required=True)
    p.add_argument("--ref", required=True, help="reference JSONL")
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--w", type=float, default=0.0)
    p.add_argument("--cond", choices=["none", "heavy-atoms"], default="none")
    p.add_argument("--cond-value", type=float, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--schedule", choices=["linear", "cosine"], default=None)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("reconstruct", help="deterministic reconstruction metrics")
    p.add_argument("--vae-ckpt", required=True)
    p.add_argument("--data", required=True, help="evaluation JSONL")
    p.add_argument("--out", default=None, help="optional metrics JSON path")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("report", help="score a generated set against a reference set")
    p.add_argument("--gen", required=True, help="generated JSONL")
    p.add_argument("--ref", required=True, help="reference JSONL")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_report)

    return parser


# ---------------------------------------------------------------------------
# config assembly

def _merge_config(args, stage: str, overrides: dict) -> TrainConfig:
    base: dict = {}
    if getattr(args, "config", None):
        base = json.loads(Path(args.config).read_text())
    base["stage"] = stage
    plain = {
        "seed": args.seed,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "learning_rate": args.lr,
        "latent_dim": args.latent_dim,
    }
    plain.update(overrides)
    for key, value in plain.items():
        if value is not None:
            base[key] = value
    lw_over = {k: base.pop(k) for k in ("gamma_d", "beta") if k in base}
    if lw_over:
        lw = dict(base.get("loss_weights", {}))
        lw.update(lw_over)
        base["loss_weights"] = lw
    return TrainConfig.from_dict(base)


def _condition_from_args(args) -> Condition:
    if args.cond == "none":
        return NO_CONDITION
    if args.cond_value is None:
        raise ValueError("--cond heavy-atoms requires --cond-value")
    return Condition("scalar-property", args.cond_value, "heavy-atoms")


# ---------------------------------------------------------------------------
# subcommands

def cmd_gen_data(args) -> int:
    mols = generate_toy_dataset(args.n, args.seed, args.max_atoms)
    write_jsonl(args.out, mols)
    print(f"wrote {len(mols)} molecules to {args.out}")
    return 0


def cmd_train_vae(args) -> int:
    dataset = read_jsonl(args.data)
    cfg = _merge_config(args, "vae", {
        "gamma_d": args.gamma_d,
        "beta": args.beta,
        "augmentation": args.aug,
    })
    ckpt = train_vae(cfg, dataset, log_path=args.log)
    save_checkpoint(args.out, ckpt)
    print(f"trained VAE on {len(dataset)} molecules -> {args.out}")
    return 0


def cmd_train_ldm(args) -> int:
    dataset = read_jsonl(args.data)
    vae_ckpt = load_checkpoint(args.vae_ckpt)
    cfg = _merge_config(args, "ldm", {
        "steps": args.train_steps,
        "n_schedule_steps": args.steps,
        "schedule_kind": args.schedule,
        "condition": args.cond,
        "cond_dropout": args.cond_dropout,
    })
    ckpt = train_ldm(cfg, dataset, vae_ckpt, log_path=args.log)
    save_checkpoint(args.out, ckpt)
    print(f"trained LDM on {len(dataset)} molecules -> {args.out}")
    return 0


def cmd_sample(args) -> int:
    vae_ckpt = load_checkpoint(args.vae_ckpt)
    ldm_ckpt = load_checkpoint(args.ldm_ckpt)
    samples, manifest = sample_from_checkpoints(
        vae_ckpt, ldm_ckpt, args.n, w=args.w, seed=args.seed,
        cond=_condition_from_args(args), n_steps=args.steps,
        schedule_kind=args.schedule, stride=args.stride,
    )
    write_jsonl(args.out, samples)
    manifest_path = Path(args.out).with_suffix(".manifest.json")
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(samples)} samples to {args.out} (manifest: {manifest_path})")
    return 0


def cmd_eval(args) -> int:
    vae_ckpt = load_checkpoint(args.vae_ckpt)
    ldm_ckpt = load_checkpoint(args.ldm_ckpt)
    reference = read_jsonl(args.ref)
    report, manifest, samples = evaluate(
        vae_ckpt, ldm_ckpt, args.n, reference, w=args.w, seed=args.seed,
        cond=_condition_from_args(args), n_steps=args.steps,
        schedule_kind=args.schedule, stride=args.stride,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json() + "\n")
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    write_jsonl(out / "samples.jsonl", samples)
    print(report.to_json())
    return 0


def cmd_reconstruct(args) -> int:
    ckpt = load_checkpoint(args.vae_ckpt)
    mols = read_jsonl(args.data)
    metrics = reconstruct_eval(ckpt, mols)
    text = json.dumps(metrics, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def cmd_report(args) -> int:
    generated = read_jsonl(args.gen)
    reference = read_jsonl(args.ref)
    report = geometry_report(generated, reference)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json() + "\n")
    gen_pools = pooled_geometry(generated)
    ref_pools = pooled_geometry(reference)
    write_samples_csv(out / "geometry_samples.csv", gen_pools, ref_pools)
    write_histogram_csv(out / "geometry_histograms.csv", gen_pools, ref_pools)
    figures = render_geometry_figures(out, gen_pools, ref_pools)
    print(report.to_json())
    print(f"figures: {', '.join(str(p) for p in figures)}")
    return 0


# ---------------------------------------------------------------------------

def run(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 1
    try:
        return args.func(args) or 0
    except Exception as e:  # runtime failures map to exit code 2
        print(f"error: {e}", file=sys.stderr)
        return 2


def main():
    raise SystemExit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
