"""Figure rendering for the report path: overlaid histograms of the pooled
bond-length / bond-angle / dihedral distributions, written as PNG files."""

from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_LABELS = {
    "bond_lengths": "bond length (Å)",
    "bond_angles": "bond angle (deg)",
    "dihedrals": "|dihedral| (deg)",
}


def render_geometry_figures(out_dir, gen_pools: dict, ref_pools: dict,
                            bins: int = 60) -> list[Path]:
    """One figure per geometric feature, generated vs reference, density
    normalized with shared bin edges.  Returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, label in _LABELS.items():
        gen = np.asarray(gen_pools.get(name, []), dtype=np.float64)
        ref = np.asarray(ref_pools.get(name, []), dtype=np.float64)
        if gen.size == 0 and ref.size == 0:
            continue
        pooled = np.concatenate([gen, ref]) if gen.size and ref.size else (gen if gen.size else ref)
        edges = np.histogram_bin_edges(pooled, bins=bins)
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        if ref.size:
            ax.hist(ref, bins=edges, density=True, alpha=0.55, label="reference")
        if gen.size:
            ax.hist(gen, bins=edges, density=True, alpha=0.55, label="generated")
        ax.set_xlabel(label)
        ax.set_ylabel("density")
        ax.legend(frameon=False)
        fig.tight_layout()
        path = out_dir / f"{name}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written


def write_histogram_csv(path, gen_pools: dict, ref_pools: dict, bins: int = 60) -> None:
    """Binned counts per feature and set, shared edges, as one CSV."""
    with open(path, "w") as f:
        f.write("feature,set,bin_lo,bin_hi,count\n")
        for name in _LABELS:
            gen = np.asarray(gen_pools.get(name, []), dtype=np.float64)
            ref = np.asarray(ref_pools.get(name, []), dtype=np.float64)
            if gen.size == 0 and ref.size == 0:
                continue
            pooled = np.concatenate([gen, ref]) if gen.size and ref.size else (gen if gen.size else ref)
            edges = np.histogram_bin_edges(pooled, bins=bins)
            for label, values in (("generated", gen), ("reference", ref)):
                counts, _ = np.histogram(values, bins=edges)
                for lo, hi, c in zip(edges[:-1], edges[1:], counts):
                    f.write(f"{name},{label},{lo!r},{hi!r},{int(c)}\n")
