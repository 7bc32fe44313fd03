"""Choosing the relaxation radius without knowing the contamination rate.

Sweeping rho produces a non-increasing value curve; the elbow of that curve
sits near gamma / (2 (1 - gamma)), the radius that exactly absorbs a
fraction gamma of outlier mass.

Run: python3 demos/03_rho_sweep_elbow.py
"""
import numpy as np

from otrobust import (
    FarCluster,
    cost_matrix,
    detect_elbow,
    gaussian_ring,
    inject_outliers,
    rho_for_known_gamma,
    sweep_rho,
)

gamma = 0.05
clean = gaussian_ring(4, n_samples=80, seed=3)
target = gaussian_ring(4, n_samples=80, rotation_rad=np.pi / 4, seed=10_003)
corrupted, _ = inject_outliers(clean, gamma, FarCluster([60.0, 60.0]), seed=3)
C = cost_matrix(corrupted, target)

grid = np.logspace(-3, np.log10(0.3), 12)
curve = sweep_rho(corrupted, target, C, grid, max_outer_iter=40, rel_tol=1e-4)

for r, v in zip(curve.rho_grid, curve.values):
    print(f"rho {r:8.4f}   value {v:10.4f}")

elbow = detect_elbow(curve)
print(f"\nelbow at rho = {elbow.rho:.4f} (index {elbow.index})")
print(f"oracle radius for gamma={gamma}: {rho_for_known_gamma(gamma):.4f}")
