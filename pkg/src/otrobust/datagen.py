"""Seeded synthetic data: Gaussian ring mixtures and outlier contamination.

Streams come from numpy's SeedSequence spawning, one substream per mixture
mode, so results are deterministic per (params, seed) within this
implementation; cross-implementation matches are distributional only.
"""
from __future__ import annotations

import numpy as np

from .errors import DomainError
from .measures import DiscreteMeasure, make_measure

RING_RADIUS_DEFAULT = 4.0
RING_SIGMA_DEFAULT = 0.4
RING_SAMPLES_DEFAULT = 200


def gaussian_ring(
    n_modes: int,
    radius: float = RING_RADIUS_DEFAULT,
    sigma: float = RING_SIGMA_DEFAULT,
    n_samples: int = RING_SAMPLES_DEFAULT,
    rotation_rad: float = 0.0,
    seed: int = 0,
) -> DiscreteMeasure:
    """Uniform-mass samples from an equal-weight ring of isotropic Gaussians.

    Mode j sits at angle 2*pi*j/n_modes + rotation on a circle of the given
    radius.  Sample counts per mode are balanced deterministically (the first
    ``n_samples mod n_modes`` modes get one extra sample).
    """
    if n_modes < 1:
        raise DomainError(f"n_modes must be >= 1, got {n_modes}")
    if sigma <= 0:
        raise DomainError(f"sigma must be > 0, got {sigma}")
    if n_samples < n_modes:
        raise DomainError(
            f"need n_samples >= n_modes, got {n_samples} < {n_modes}"
        )
    angles = 2.0 * np.pi * np.arange(n_modes) / n_modes + rotation_rad
    centers = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    base, extra = divmod(n_samples, n_modes)
    streams = np.random.SeedSequence(seed).spawn(n_modes)
    chunks = []
    for j in range(n_modes):
        cnt = base + (1 if j < extra else 0)
        rng = np.random.default_rng(streams[j])
        chunks.append(centers[j] + sigma * rng.standard_normal((cnt, 2)))
    return make_measure(np.concatenate(chunks, axis=0))


class FarCluster:
    """Outlier sampler: isotropic Gaussian cluster at a distant center."""

    def __init__(self, center, sigma: float = 0.5):
        self.center = np.asarray(center, dtype=float).ravel()
        if sigma <= 0:
            raise DomainError(f"sigma must be > 0, got {sigma}")
        self.sigma = float(sigma)

    def sample(self, rng, count: int, dim: int) -> np.ndarray:
        if self.center.size != dim:
            raise DomainError(
                f"cluster center has dim {self.center.size}, data has {dim}"
            )
        return self.center + self.sigma * rng.standard_normal((count, dim))


class UniformBox:
    """Outlier sampler: uniform draws from an axis-aligned box."""

    def __init__(self, bounds):
        b = np.asarray(bounds, dtype=float)  # (d, 2) rows of (lo, hi)
        if b.ndim != 2 or b.shape[1] != 2 or np.any(b[:, 0] > b[:, 1]):
            raise DomainError("bounds must be (d, 2) with lo <= hi per row")
        self.bounds = b

    def sample(self, rng, count: int, dim: int) -> np.ndarray:
        if self.bounds.shape[0] != dim:
            raise DomainError(
                f"box has dim {self.bounds.shape[0]}, data has {dim}"
            )
        u = rng.random((count, dim))
        return self.bounds[:, 0] + u * (self.bounds[:, 1] - self.bounds[:, 0])


def inject_outliers(mu: DiscreteMeasure, gamma: float, outlier_sampler, seed: int = 0):
    """Replace floor(gamma*n) randomly chosen atoms with outlier samples.

    Returns (contaminated measure, boolean labels) with labels True at the
    replaced atoms.  Atom count and uniform mass are preserved.
    """
    if not (0.0 <= gamma < 1.0):
        raise DomainError(f"gamma must be in [0, 1), got {gamma}")
    n = mu.n
    k = int(np.floor(gamma * n))
    labels = np.zeros(n, dtype=bool)
    if k == 0:
        return mu, labels
    ss = np.random.SeedSequence(seed).spawn(2)
    idx = np.random.default_rng(ss[0]).choice(n, size=k, replace=False)
    pts = np.array(mu.points, copy=True)
    pts[idx] = outlier_sampler.sample(np.random.default_rng(ss[1]), k, mu.dim)
    labels[idx] = True
    return DiscreteMeasure(pts, mu.mass), labels
