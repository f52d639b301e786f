"""Neural building blocks: MLP, layer norms, timestep embedding, standard
self-attention and the relational attention block that mixes per-pair edge
states into queries, keys and values.

All modules are batch-first: node states (B, V, d), edge states (B, V, V, d),
masks (B, V) with True marking valid atoms.  Gradients come from autograd;
the test suite holds every block to a central finite-difference contract.
"""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn

LN_EPS = 1e-5


class MLP(nn.Module):
    """Affine stack with SiLU between layers and no activation on the output."""

    def __init__(self, widths: list[int]):
        super().__init__()
        if len(widths) < 2:
            raise ValueError("need at least input and output widths")
        self.layers = nn.ModuleList(
            nn.Linear(a, b) for a, b in zip(widths[:-1], widths[1:])
        )

    def forward(self, x):
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = F.silu(x)
        return x


def layernorm(h: torch.Tensor) -> torch.Tensor:
    """Normalize the last axis to zero mean, unit variance (no affine)."""
    return F.layer_norm(h, h.shape[-1:], eps=LN_EPS)


def ada_layernorm(h: torch.Tensor, shift: torch.Tensor, scale: torch.Tensor) -> torch.Tensor:
    """scale * layernorm(h) + shift, broadcasting over leading axes."""
    if shift.shape[-1] != h.shape[-1] or scale.shape[-1] != h.shape[-1]:
        raise ValueError("shift/scale width must match input width")
    return scale * layernorm(h) + shift


class AdaLayerNorm(nn.Module):
    """Layer norm whose shift and scale come from a conditioning vector.

    The conditioning MLP emits [shift; scale]; it is initialized so the
    module starts out as a plain layer norm (shift 0, scale 1).
    """

    def __init__(self, width: int, cond_width: int):
        super().__init__()
        self.width = width
        self.modulation = nn.Linear(cond_width, 2 * width)
        nn.init.zeros_(self.modulation.weight)
        with torch.no_grad():
            self.modulation.bias.copy_(
                torch.cat([torch.zeros(width), torch.ones(width)])
            )

    def forward(self, h: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        mod = self.modulation(F.silu(cond))
        shift, scale = mod.chunk(2, dim=-1)
        while shift.dim() < h.dim():
            shift = shift.unsqueeze(-2)
            scale = scale.unsqueeze(-2)
        return ada_layernorm(h, shift, scale)


def timestep_embed(t: torch.Tensor, dim: int) -> torch.Tensor:
    """Sinusoidal features of a timestep in (0, 1]; frequencies geometric
    from 1 to 1e4."""
    if dim % 2 != 0:
        raise ValueError(f"embedding dim must be even, got {dim}")
    t = torch.as_tensor(t)
    half = dim // 2
    freqs = torch.exp(
        torch.linspace(0.0, math.log(1e4), half, dtype=t.dtype, device=t.device)
    )
    angles = t.unsqueeze(-1) * freqs
    return torch.cat([torch.sin(angles), torch.cos(angles)], dim=-1)


def _masked_softmax(logits: torch.Tensor, key_mask: torch.Tensor | None, dim: int) -> torch.Tensor:
    if key_mask is not None:
        neg = torch.finfo(logits.dtype).min / 2
        logits = logits.masked_fill(~key_mask, neg)
    return torch.softmax(logits, dim=dim)


class SelfAttention(nn.Module):
    """Multi-head scaled dot-product self-attention, no positional signal."""

    def __init__(self, width: int, n_heads: int = 4):
        super().__init__()
        if width % n_heads != 0:
            raise ValueError("width must be divisible by head count")
        self.n_heads = n_heads
        self.head_dim = width // n_heads
        self.qkv = nn.Linear(width, 3 * width)
        self.proj = nn.Linear(width, width)

    def forward(self, x: torch.Tensor, mask: torch.Tensor | None = None) -> torch.Tensor:
        b, v, d = x.shape
        q, k, val = self.qkv(x).chunk(3, dim=-1)
        q = q.view(b, v, self.n_heads, self.head_dim).transpose(1, 2)
        k = k.view(b, v, self.n_heads, self.head_dim).transpose(1, 2)
        val = val.view(b, v, self.n_heads, self.head_dim).transpose(1, 2)
        logits = q @ k.transpose(-1, -2) / math.sqrt(self.head_dim)
        key_mask = mask[:, None, None, :] if mask is not None else None
        att = _masked_softmax(logits, key_mask, dim=-1)
        out = (att @ val).transpose(1, 2).reshape(b, v, d)
        return self.proj(out)


class RelationalAttention(nn.Module):
    """Attention whose queries, keys and values concatenate the node state
    with the per-pair edge state.

    Query for pair (i, j) is built from [node_i; edge_ij], key/value from
    [node_j; edge_ij]; attention rows are normalized over j.  Edge states are
    read-only: they are never updated here.
    """

    def __init__(self, width: int, n_heads: int = 4):
        super().__init__()
        if width % n_heads != 0:
            raise ValueError("width must be divisible by head count")
        self.n_heads = n_heads
        self.head_dim = width // n_heads
        self.wq = nn.Linear(2 * width, width)
        self.wkv = nn.Linear(2 * width, 2 * width)

    def forward(
        self,
        nodes: torch.Tensor,             # (B, V, d)
        edges: torch.Tensor,             # (B, V, V, d)
        mask: torch.Tensor | None = None,  # (B, V)
        return_weights: bool = False,
    ):
        b, v, d = nodes.shape
        node_i = nodes[:, :, None, :].expand(b, v, v, d)
        node_j = nodes[:, None, :, :].expand(b, v, v, d)
        q = self.wq(torch.cat([node_i, edges], dim=-1))
        k, val = self.wkv(torch.cat([node_j, edges], dim=-1)).chunk(2, dim=-1)

        q = q.view(b, v, v, self.n_heads, self.head_dim)
        k = k.view(b, v, v, self.n_heads, self.head_dim)
        val = val.view(b, v, v, self.n_heads, self.head_dim)
        logits = (q * k).sum(-1) / math.sqrt(self.head_dim)  # (B, V, V, H)
        key_mask = mask[:, None, :, None] if mask is not None else None
        att = _masked_softmax(logits, key_mask, dim=2)
        gathered = torch.einsum("bijh,bijhd->bihd", att, val).reshape(b, v, d)
        if return_weights:
            return gathered, att
        return gathered


class RTransBlock(nn.Module):
    """Pre-norm residual block around relational attention plus a feed-forward."""

    def __init__(self, width: int, n_heads: int = 4, ff_mult: int = 4):
        super().__init__()
        self.attn = RelationalAttention(width, n_heads)
        self.ff = MLP([width, ff_mult * width, width])

    def forward(self, nodes, edges, mask=None):
        nodes = nodes + self.attn(layernorm(nodes), edges, mask)
        nodes = nodes + self.ff(layernorm(nodes))
        return nodes


class TransformerBlock(nn.Module):
    """Plain pre-norm transformer block (self-attention + feed-forward)."""

    def __init__(self, width: int, n_heads: int = 4, ff_mult: int = 4):
        super().__init__()
        self.attn = SelfAttention(width, n_heads)
        self.ff = MLP([width, ff_mult * width, width])

    def forward(self, x, mask=None):
        x = x + self.attn(layernorm(x), mask)
        x = x + self.ff(layernorm(x))
        return x


class DiTBlock(nn.Module):
    """Transformer block whose two norms are adaptive: shift/scale are
    generated from the timestep (+ condition) embedding."""

    def __init__(self, width: int, cond_width: int, n_heads: int = 4, ff_mult: int = 4):
        super().__init__()
        self.norm1 = AdaLayerNorm(width, cond_width)
        self.attn = SelfAttention(width, n_heads)
        self.norm2 = AdaLayerNorm(width, cond_width)
        self.ff = MLP([width, ff_mult * width, width])

    def forward(self, x, cond, mask=None):
        x = x + self.attn(self.norm1(x, cond), mask)
        x = x + self.ff(self.norm2(x, cond))
        return x
