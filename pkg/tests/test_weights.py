import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from otrobust.errors import InstanceTooLarge
from otrobust.measures import WeightVector, weight_radius
from otrobust.weights import (
    WeightSubproblem,
    brute_force_weights,
    penalized_weight_step,
    project_simplex_ball,
    solve_weight_socp,
)


def socp(d, rho, sense="minimize"):
    return solve_weight_socp(WeightSubproblem(np.asarray(d, float), rho, sense))


def test_rho_zero_returns_ones():
    w = socp([1.0, 2.0, 3.0], 0.0)
    np.testing.assert_allclose(w.w, 1.0)


def test_constant_d_returns_ones():
    w = socp([7.0, 7.0, 7.0, 7.0], 0.3)
    np.testing.assert_allclose(w.w, 1.0)


def test_large_ball_vertex_optimum():
    w = socp([1.0, 2.0, 3.0], 2.0)
    np.testing.assert_allclose(w.w, [3.0, 0.0, 0.0], atol=1e-9)
    assert w.w @ [1.0, 2.0, 3.0] == pytest.approx(3.0, abs=1e-9)


def test_small_ball_matches_brute_force():
    d = np.array([1.0, 2.0, 3.0])
    w = socp(d, 1 / 12)
    wb = brute_force_weights(d, 1 / 12, grid_resolution=1e-3)
    assert np.abs(w.w - wb.w).max() <= 1e-3


def test_two_atom_geometry():
    w = socp([0.0, 1.0], 0.125)
    np.testing.assert_allclose(w.w, [1.5, 0.5], atol=1e-9)


def test_maximize_sense_mirrors():
    d = np.array([1.0, 2.0, 3.0])
    wmin = socp(d, 1 / 12).w
    wmax = socp(-d, 1 / 12, "maximize").w
    np.testing.assert_allclose(wmin, wmax, atol=1e-9)


def test_objective_dominance_over_grid():
    rng = np.random.default_rng(0)
    for _ in range(15):
        n = int(rng.integers(2, 5))
        d = rng.normal(0, 2, n)
        rho = float(rng.choice([0.0, 0.05, 0.1, 0.5, 2.0]))
        w = socp(d, rho)
        wb = brute_force_weights(d, rho, grid_resolution=1e-3)
        slack = np.abs(d).max() * 1e-3 * n
        assert w.w @ d <= wb.w @ d + slack


def test_monotone_in_rho():
    d = np.array([0.3, -1.2, 0.8, 2.0])
    vals = [socp(d, r).w @ d for r in [0.0, 0.01, 0.05, 0.2, 1.0, 3.0]]
    assert np.all(np.diff(vals) <= 1e-10)


def test_shift_invariance():
    rng = np.random.default_rng(4)
    d = rng.normal(size=5)
    w1 = socp(d, 0.07).w
    w2 = socp(d + 42.0, 0.07).w
    assert np.abs(w1 - w2).max() <= 1e-9


@given(
    n=st.integers(min_value=2, max_value=8),
    rho=st.floats(min_value=0.0, max_value=3.0),
    seed=st.integers(min_value=0, max_value=10**6),
)
@settings(max_examples=60, deadline=None)
def test_socp_output_always_feasible(n, rho, seed):
    d = np.random.default_rng(seed).normal(0, 3, n)
    w = socp(d, rho)
    # WeightVector construction already validates; re-check the raw numbers
    assert np.all(w.w >= 0)
    assert w.w.sum() == pytest.approx(n, abs=1e-8)
    assert np.linalg.norm(w.w - 1.0) <= weight_radius(rho, n) + 1e-8


def test_brute_force_size_cap():
    with pytest.raises(InstanceTooLarge):
        brute_force_weights(np.arange(5.0), 0.1)


def test_brute_force_large_rho_vertex():
    wb = brute_force_weights(np.array([1.0, 2.0, 3.0]), 10.0, 1e-2)
    assert np.abs(wb.w - [3.0, 0.0, 0.0]).max() <= 2e-2


def test_penalized_step_constant_d_no_move():
    w = WeightVector(np.ones(3), 0.1)
    out = penalized_weight_step(w, np.array([2.0, 2.0, 2.0]), 0.1)
    np.testing.assert_allclose(out.w, 1.0, atol=1e-12)
    assert not out.stalled


def test_penalized_step_descends_on_high_cost_atom():
    w = WeightVector(np.ones(2), 0.25)
    out = penalized_weight_step(w, np.array([0.0, 10.0]), 0.25)
    assert out.w[1] < 1.0
    assert not out.stalled


def test_penalized_iteration_approaches_socp():
    d = np.array([1.0, 2.0, 3.0])
    rho = 1 / 12
    w = WeightVector(np.ones(3), rho)
    for _ in range(4000):
        w = penalized_weight_step(w, d, rho, lam=1000.0, step=1e-3)
        if w.stalled:
            break
    target = socp(d, rho).w
    assert np.abs(w.w - target).max() <= 5e-2


def test_projection_identity_inside_set():
    z = np.array([1.1, 0.9, 1.0])
    w = project_simplex_ball(z, 1.0)
    np.testing.assert_allclose(w, z, atol=1e-9)


def test_projection_feasibility_random():
    rng = np.random.default_rng(9)
    for _ in range(30):
        n = int(rng.integers(2, 7))
        rho = float(rng.uniform(0, 0.5))
        z = rng.normal(1, 2, n)
        w = project_simplex_ball(z, rho)
        assert np.all(w >= 0)
        assert w.sum() == pytest.approx(n, abs=1e-8)
        assert np.linalg.norm(w - 1.0) <= weight_radius(rho, n) + 1e-8


def test_projection_is_closest_point_vs_grid():
    # 2-atom case has a 1-parameter feasible set; check against dense scan
    rho = 0.1
    R = weight_radius(rho, 2)
    ts = np.linspace(-R, R, 20001)
    cand = np.stack([1 + ts / np.sqrt(2), 1 - ts / np.sqrt(2)], axis=1)
    cand = cand[np.all(cand >= 0, axis=1)]
    rng = np.random.default_rng(13)
    for _ in range(10):
        z = rng.normal(1, 1.5, 2)
        w = project_simplex_ball(z, rho)
        dists = np.linalg.norm(cand - z, axis=1)
        assert np.linalg.norm(w - z) <= dists.min() + 1e-6
