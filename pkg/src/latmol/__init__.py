"""3D molecule generation: unified multi-modal VAE + latent diffusion.

The library encodes molecules (atom types, bonds, 3D coordinates) into a
single per-atom latent sequence, trains a diffusion denoiser on those
latents, samples new molecules, and scores them with stability, validity
and geometry-distribution metrics.
"""

from latmol.data import Molecule, ATOM_VOCAB, BOND_VOCAB_SIZE

__all__ = ["Molecule", "ATOM_VOCAB", "BOND_VOCAB_SIZE"]

__version__ = "0.1.0"
