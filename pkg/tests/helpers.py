"""Shared test oracles: central finite differences and a brute-force graph
isomorphism check.  These stay independent of the library code they verify."""

from __future__ import annotations

import itertools

import numpy as np
import torch


def finite_difference_grads(f, tensors, h=1e-5, coords_per_tensor=None, rng=None):
    """Central-difference gradients of the scalar f() w.r.t. each tensor.

    When coords_per_tensor is given, only that many randomly chosen
    coordinates per tensor are probed (the rest stay None in the mask).
    Returns (grads, masks); masks flag which entries were evaluated.
    """
    grads, masks = [], []
    for p in tensors:
        flat = p.data.view(-1)
        n = flat.numel()
        if coords_per_tensor is None or coords_per_tensor >= n:
            idx = np.arange(n)
        else:
            idx = rng.choice(n, size=coords_per_tensor, replace=False)
        g = torch.zeros(n, dtype=p.dtype)
        m = torch.zeros(n, dtype=torch.bool)
        for i in idx:
            orig = flat[i].item()
            flat[i] = orig + h
            fp = float(f().detach())
            flat[i] = orig - h
            fm = float(f().detach())
            flat[i] = orig
            g[i] = (fp - fm) / (2.0 * h)
            m[i] = True
        grads.append(g.view_as(p))
        masks.append(m.view_as(p))
    return grads, masks


def max_rel_grad_error(f, tensors, h=1e-5, coords_per_tensor=None, rng=None):
    """Largest relative deviation between autograd and finite differences.

    Relative scale is the max-norm of the finite-difference gradient over
    the probed coordinates (floored at 1e-8).
    """
    for p in tensors:
        p.grad = None
    loss = f()
    loss.backward()
    analytic = [p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p)
                for p in tensors]
    numeric, masks = finite_difference_grads(
        f, tensors, h=h, coords_per_tensor=coords_per_tensor, rng=rng
    )
    worst = 0.0
    for a, nmr, msk in zip(analytic, numeric, masks):
        if not msk.any():
            continue
        diff = (a - nmr)[msk].abs().max().item()
        scale = max(nmr[msk].abs().max().item(), 1e-8)
        worst = max(worst, diff / scale)
    return worst


def graphs_isomorphic(types_a, bonds_a, types_b, bonds_b) -> bool:
    """Exhaustive isomorphism test over all atom permutations (small graphs)."""
    types_a, types_b = np.asarray(types_a), np.asarray(types_b)
    bonds_a, bonds_b = np.asarray(bonds_a), np.asarray(bonds_b)
    if types_a.shape != types_b.shape:
        return False
    n = len(types_a)
    for perm in itertools.permutations(range(n)):
        p = np.array(perm)
        if np.array_equal(types_a[p], types_b) and np.array_equal(
            bonds_a[np.ix_(p, p)], bonds_b
        ):
            return True
    return False
