"""Single-file checkpoint container.

Layout: magic bytes "UAE3D", little-endian u32 format version, u64 header
length, a JSON header (parameter paths/shapes/dtypes, train config, model
config, latent normalization stats, RNG-resume state), then the raw
parameter arrays as little-endian float32 in header order.
"""

from __future__ import annotations

import base64
import json
import struct
from dataclasses import dataclass, field

import numpy as np
import torch

MAGIC = b"UAE3D"
FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


@dataclass
class Checkpoint:
    kind: str                      # "vae" or "ldm"
    config: dict                   # TrainConfig as a plain dict
    model_config: dict             # enough to rebuild the module
    params: dict                   # name -> float32 ndarray, ordered
    norm_mean: list | None = None  # latent standardization stats
    norm_std: list | None = None
    rng_state: bytes = b""
    extra: dict = field(default_factory=dict)
    version: int = FORMAT_VERSION


def state_dict_to_params(state_dict: dict, prefix: str) -> dict:
    params = {}
    for name, tensor in state_dict.items():
        params[f"{prefix}.{name}"] = (
            tensor.detach().cpu().numpy().astype(np.float32)
        )
    return params


def params_to_state_dict(params: dict, prefix: str) -> dict:
    out = {}
    pre = prefix + "."
    for name, array in params.items():
        if name.startswith(pre):
            out[name[len(pre):]] = torch.from_numpy(array.copy())
    return out


def generator_state_bytes(generator: torch.Generator) -> bytes:
    return bytes(generator.get_state().numpy().tobytes())


def restore_generator(state: bytes) -> torch.Generator:
    g = torch.Generator()
    g.set_state(torch.from_numpy(np.frombuffer(state, dtype=np.uint8).copy()))
    return g


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    for name, arr in ckpt.params.items():
        if not np.all(np.isfinite(arr)):
            raise CheckpointError(f"parameter {name!r} contains non-finite values")
    header = {
        "version": ckpt.version,
        "kind": ckpt.kind,
        "config": ckpt.config,
        "model": ckpt.model_config,
        "params": [
            {"name": n, "shape": list(a.shape), "dtype": "float32"}
            for n, a in ckpt.params.items()
        ],
        "norm": (
            None if ckpt.norm_mean is None
            else {"mean": list(ckpt.norm_mean), "std": list(ckpt.norm_std)}
        ),
        "rng_state": base64.b64encode(ckpt.rng_state).decode("ascii"),
        "extra": ckpt.extra,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", ckpt.version))
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        for arr in ckpt.params.values():
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise CheckpointError(f"bad checkpoint magic {magic!r}")
        version = struct.unpack("<I", f.read(4))[0]
        if version != FORMAT_VERSION:
            raise CheckpointError(
                f"checkpoint version mismatch: file has {version}, "
                f"expected {FORMAT_VERSION}"
            )
        header_len = struct.unpack("<Q", f.read(8))[0]
        header = json.loads(f.read(header_len).decode("utf-8"))
        params = {}
        for entry in header["params"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = f.read(count * 4)
            if len(raw) != count * 4:
                raise CheckpointError(f"truncated array for {entry['name']!r}")
            params[entry["name"]] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
    norm = header.get("norm")
    return Checkpoint(
        kind=header["kind"],
        config=header["config"],
        model_config=header["model"],
        params=params,
        norm_mean=None if norm is None else norm["mean"],
        norm_std=None if norm is None else norm["std"],
        rng_state=base64.b64decode(header["rng_state"]),
        extra=header.get("extra", {}),
        version=version,
    )
