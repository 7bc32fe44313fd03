"""Exact transport vs the entropic solver on a small random instance.

Run: python3 demos/01_exact_vs_entropic.py
"""
import numpy as np

from otrobust import cost_matrix, make_measure, solve_exact, solve_sinkhorn

rng = np.random.default_rng(0)
mu = make_measure(rng.random((12, 2)))
nu = make_measure(rng.random((15, 2)))
C = cost_matrix(mu, nu)

exact = solve_exact(mu, nu, C)
print(f"exact value      {exact.value:.6f}  (duality gap {exact.gap:.1e})")

for eps in (1e-1, 1e-2, 1e-3):
    sk = solve_sinkhorn(mu, nu, C, epsilon=eps, tol=1e-6)
    P = sk.coupling_dense()
    marg = max(
        np.abs(P.sum(1) - mu.mass).max(), np.abs(P.sum(0) - nu.mass).max()
    )
    print(
        f"sinkhorn eps={eps:<6g} {sk.value:.6f}  "
        f"err {abs(sk.value - exact.value):.2e}  marginal residual {marg:.1e}"
    )
