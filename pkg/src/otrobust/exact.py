"""Exact discrete optimal transport with dual potentials.

The workhorse is the transportation linear program solved by HiGHS (dual
simplex), which returns a basic optimal coupling and exact dual potentials.
For very small cost matrices a :class:`DenseDualEvaluator` enumerates the
vertices of the dual polytope once per cost matrix; afterwards the optimal
value and potentials for *any* pair of marginals are a single matrix product,
which is what makes the robust solver and its brute-force oracles affordable
at oracle scale.
"""
from __future__ import annotations

from itertools import combinations
from math import comb

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import DimensionMismatch, SolverStall
from .measures import CostMatrix, DiscreteMeasure, OtSolution

COUPLING_EPS = 1e-12
DUAL_FEAS_TOL = 1e-9


def _lp_transport(a: np.ndarray, b: np.ndarray, C: np.ndarray):
    """Solve the transportation LP; returns (plan, u, v)."""
    m, n = C.shape
    A = sparse.vstack(
        [
            sparse.kron(sparse.eye(m), np.ones((1, n))),
            sparse.kron(np.ones((1, m)), sparse.eye(n)),
        ]
    ).tocsc()
    res = linprog(
        C.ravel(),
        A_eq=A,
        b_eq=np.concatenate([a, b]),
        bounds=(0, None),
        method="highs",
    )
    if res.status != 0:
        raise SolverStall(f"transport LP failed: {res.message}")
    plan = res.x.reshape(m, n)
    y = res.eqlin.marginals
    return plan, y[:m], y[m:]


def _normalize_potentials(phi, psi, a):
    """Shift the pair so the mass-weighted mean of phi over supp(a) is 0."""
    shift = float(phi @ a) / max(float(a.sum()), 1e-300)
    return phi - shift, psi - shift


def solve_exact(
    mu: DiscreteMeasure, nu: DiscreteMeasure, cost: CostMatrix
) -> OtSolution:
    """Exact OT between two measures under the given cost matrix.

    Returns the optimal value, a basic optimal coupling, and dual potentials
    (phi, psi) with ``phi_i - psi_j <= c_ij`` and zero duality gap up to
    solver precision.  Atoms with zero mass are dropped from the LP; their
    potentials are imputed as the tightest dual-feasible value.
    """
    C = cost.entries
    if C.shape != (mu.n, nu.n):
        raise DimensionMismatch(
            f"cost is {C.shape}, measures are {mu.n} x {nu.n}"
        )
    a, b = mu.mass, nu.mass
    ia = np.flatnonzero(a > 0)
    jb = np.flatnonzero(b > 0)
    Csub = C[np.ix_(ia, jb)]
    plan_sub, u_sub, v_sub = _lp_transport(a[ia], b[jb], Csub)

    # duals come out of HiGHS as u_i + v_j <= c_ij with value u.a + v.b;
    # map to the (phi, psi) convention phi_i - psi_j <= c_ij.
    phi = np.empty(mu.n)
    psi = np.empty(nu.n)
    phi[ia] = u_sub
    psi[jb] = -v_sub
    if jb.size < nu.n:
        # zero-mass columns: tightest feasible psi_j >= max_i phi_i - c_ij
        rest = np.setdiff1d(np.arange(nu.n), jb)
        psi[rest] = np.max(phi[ia, None] - C[np.ix_(ia, rest)], axis=0)
    if ia.size < mu.n:
        rest = np.setdiff1d(np.arange(mu.n), ia)
        phi[rest] = np.min(C[np.ix_(rest, jb)] + psi[None, jb], axis=1)
    phi, psi = _normalize_potentials(phi, psi, a)

    triplets = []
    value = 0.0
    for ii, jj in zip(*np.nonzero(plan_sub > COUPLING_EPS)):
        i, j = int(ia[ii]), int(jb[jj])
        pij = float(plan_sub[ii, jj])
        triplets.append((i, j, pij))
        value += pij * C[i, j]
    dual_value = float(phi @ a - psi @ b)
    gap = abs(value - dual_value)
    return OtSolution(
        value=float(value),
        coupling=tuple(triplets),
        potential_x=phi,
        potential_y=psi,
        gap=gap,
    )


def duality_gap(sol: OtSolution, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """|primal value - dual objective| of a solved instance."""
    dual = float(sol.potential_x @ mu.mass - sol.potential_y @ nu.mass)
    return abs(sol.value - dual)


# ---------------------------------------------------------------------------
# Dense dual-vertex evaluation for small instances
# ---------------------------------------------------------------------------

_MAX_BASES = 200_000


def dual_vertex_budget(m: int, n: int) -> int:
    """Number of candidate dual bases for an m x n instance."""
    return comb(m * n, m + n - 1)


class DenseDualEvaluator:
    """Exact OT value/potentials for a fixed small cost matrix.

    Enumerates all vertices of the bounded dual polytope
    ``{(u, v): u_i + v_j <= c_ij, v_n = 0}``.  By LP duality the optimal
    value for marginals (a, b) is ``max_k u_k.a + v_k.b`` over the vertex
    list, so repeated evaluations (e.g. along a weight-update trajectory or
    a brute-force grid) are a single matmul.
    """

    def __init__(self, C: np.ndarray):
        C = np.asarray(C, dtype=float)
        m, n = C.shape
        if dual_vertex_budget(m, n) > _MAX_BASES:
            raise SolverStall(
                f"{m}x{n} too large for dual vertex enumeration"
            )
        self.C = C
        self.m, self.n = m, n
        self._enumerate_vertices()

    def _enumerate_vertices(self):
        m, n = self.m, self.n
        k = m + n - 1  # free dual variables after fixing v_{n-1} = 0
        # constraint rows: u_i + v_j <= C_ij over free vars (u, v[:-1])
        G = np.zeros((m * n, k))
        rhs = self.C.ravel()
        for i in range(m):
            for j in range(n):
                r = i * n + j
                G[r, i] = 1.0
                if j < n - 1:
                    G[r, m + j] = 1.0
        combos = np.array(list(combinations(range(m * n), k)), dtype=int)
        Gs = G[combos]  # (B, k, k)
        ok = np.abs(np.linalg.det(Gs)) > 1e-10
        Gs, rs = Gs[ok], rhs[combos[ok]]
        z = np.linalg.solve(Gs, rs[..., None])[..., 0]  # (B', k)
        feas = np.all(z @ G.T <= rhs[None, :] + 1e-9, axis=1)
        z = z[feas]
        if z.size == 0:  # degenerate fallback, should not happen
            z = np.zeros((1, k))
            z[0, :m] = self.C.min(axis=1)
        self.U = z[:, :m]  # (K, m)
        self.V = np.concatenate(
            [z[:, m:], np.zeros((z.shape[0], 1))], axis=1
        )  # (K, n)

    def value_batch(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        """Optimal values for batches of marginals A (N, m), B (N, n)."""
        scores = A @ self.U.T + B @ self.V.T
        return scores.max(axis=1)

    def value_and_potentials(self, a: np.ndarray, b: np.ndarray):
        """Value plus optimal potentials (phi, psi) for one marginal pair."""
        scores = self.U @ a + self.V @ b
        k = int(np.argmax(scores))
        phi = self.U[k].copy()
        psi = -self.V[k]
        # tighten potentials of zero-mass atoms so they remain valid
        # one-sided derivatives of the value in the mass direction
        zi = a <= 0
        if zi.any():
            phi[zi] = np.min(self.C[zi] + psi[None, :], axis=1)
        phi, psi = _normalize_potentials(phi, psi, a)
        return float(scores[k]), phi, psi


def make_evaluator(C: np.ndarray):
    """DenseDualEvaluator when affordable, else None."""
    m, n = C.shape
    if dual_vertex_budget(m, n) <= _MAX_BASES:
        return DenseDualEvaluator(C)
    return None
