"""Coarse-to-fine lattice search over products of simplex-ball sets.

Shared machinery for the brute-force oracles.  A weight block of size n
lives on {w >= 0, sum w = n, ||w - 1|| <= R}; the lattice runs over the
first n-1 coordinates of each block and the last coordinate closes the sum
exactly.  Each level grids the bounding box of the surviving candidates at a
finer resolution and keeps every point whose objective is within a Lipschitz
margin of the incumbent, so the final answer is within
``lipschitz * total_dim * resolution`` of the continuous optimum.
"""
from __future__ import annotations

import numpy as np

_SHRINK = 4
_MAX_POINTS = 4_000_000


def _project_block(W: np.ndarray, R: float) -> np.ndarray:
    """Push near-feasible rows onto {w>=0, sum=n, ||w-1||<=R} (approximate)."""
    n = W.shape[1]
    W = np.maximum(W, 0.0)
    s = W.sum(axis=1, keepdims=True)
    W = np.where(s > 0, W * (n / np.maximum(s, 1e-300)), 1.0)
    d = W - 1.0
    nrm = np.linalg.norm(d, axis=1, keepdims=True)
    W = 1.0 + d * np.minimum(1.0, R / np.maximum(nrm, 1e-300))
    W = np.maximum(W, 0.0)
    s = W.sum(axis=1, keepdims=True)
    return np.where(s > 0, W * (n / np.maximum(s, 1e-300)), 1.0)


def _near_feasible(W: np.ndarray, R: float, slack: float) -> np.ndarray:
    n = W.shape[1]
    ok = np.all(W >= -slack, axis=1)
    ok &= np.linalg.norm(W - 1.0, axis=1) <= R + slack * n
    return ok


def _grid_box(lo: np.ndarray, hi: np.ndarray, res: float) -> np.ndarray:
    axes = [np.arange(l, h + res / 2, res) for l, h in zip(lo, hi)]
    count = int(np.prod([len(ax) for ax in axes]))
    if count > _MAX_POINTS:
        raise MemoryError(f"lattice of {count} points exceeds budget")
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def zoom_minimize(objective, sizes, radii, resolution, lipschitz, coarse=0.25):
    """Minimize `objective` over a product of scaled simplex-ball blocks.

    objective: callable taking a list of (N, n_i) weight arrays, one per
        block, returning (N,) values; rows passed in are exactly feasible.
    Returns (list of per-block optimal weight vectors, optimal value).
    """
    sizes = list(sizes)
    radii = [float(r) for r in radii]
    dims = [n - 1 for n in sizes]
    tot_dim = sum(dims)
    lipschitz = max(float(lipschitz), 1e-12)

    def split_blocks(F):
        out, at = [], 0
        for n in sizes:
            head = F[:, at : at + n - 1]
            last = n - head.sum(axis=1, keepdims=True)
            out.append(np.concatenate([head, last], axis=1))
            at += n - 1
        return out

    def center_point():
        return np.ones((1, tot_dim))

    if tot_dim == 0:
        blocks = split_blocks(np.zeros((1, 0)))
        val = float(np.asarray(objective(blocks))[0])
        return [W[0] for W in blocks], val

    lo = np.empty(tot_dim)
    hi = np.empty(tot_dim)
    at = 0
    for n, R in zip(sizes, radii):
        lo[at : at + n - 1] = max(0.0, 1.0 - R)
        hi[at : at + n - 1] = min(float(n), 1.0 + R)
        at += n - 1

    res = max(coarse, resolution)
    best_val = np.inf
    best_blocks = None
    while True:
        F = None
        for shrink in (None, 8, 4, 2, 1):
            if shrink is not None:
                # box too fine for the budget: shrink around the incumbent
                c = _best_free(best_blocks)
                lo = np.maximum(lo, c - shrink * res)
                hi = np.minimum(hi, c + shrink * res)
            try:
                F = _grid_box(lo, hi, res)
                break
            except MemoryError:
                if shrink == 1:
                    raise
        blocks = split_blocks(F)
        keep = np.ones(F.shape[0], dtype=bool)
        for W, R in zip(blocks, radii):
            keep &= _near_feasible(W, R, slack=res)
        F = F[keep]
        if F.shape[0] == 0:
            F = center_point()
        blocks = [
            _project_block(W, R) for W, R in zip(split_blocks(F), radii)
        ]
        vals = np.asarray(objective(blocks), dtype=float)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val = float(vals[k])
            best_blocks = [W[k].copy() for W in blocks]
        if res <= resolution * (1 + 1e-9):
            break
        margin = 3.0 * lipschitz * tot_dim * res
        sel = vals <= best_val + margin
        Fs = F[sel]
        lo = np.maximum(lo, Fs.min(axis=0) - res)
        hi = np.minimum(hi, Fs.max(axis=0) + res)
        res = max(res / _SHRINK, resolution)
    return best_blocks, best_val


def _best_free(blocks):
    return np.concatenate([W[:-1] for W in blocks])
