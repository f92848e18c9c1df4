"""
Copyright 2026 TESCAN 3DIM, s.r.o.
All rights reserved
"""

import numpy as np
import pytest

from puccigrad.exceptions import InnerNonConvergenceError
from puccigrad.grid.Grid import INTERIOR, build_grid
from puccigrad.grid.boundary import AffineBoundary, BoundaryTrace, ConstantBoundary
from puccigrad.grid.domains import DiskDomain
from puccigrad.operators.pucci import Ellipticity
from puccigrad.solvers import inner_solver
from puccigrad.solvers.inner_solver import (
    InnerConfig,
    harmonic_extension,
    policy_accelerated_solve,
    pseudo_time_solve,
    residual,
    solve_inner,
)

POISSON = InnerConfig(eps=1e-3, gamma=0.0, ell=Ellipticity(lam=1.0, Lam=1.0))


def _radius2(grid):
    return np.einsum("ij,ij->i", grid.coordinates, grid.coordinates)


# Test 1 - residual of the zero field
def test_residual_zero_field(disk16):
    """
    Verify that u = 0 and h = 1 give R = -1 everywhere.
    """
    R = residual(np.zeros(disk16.size), np.ones(disk16.size), InnerConfig(gamma=1.0), disk16)
    assert np.all(R == -1.0), ("u = 0, h = 1 must give R = -1")


# Test 2 - residual of a quadratic
def test_residual_quadratic(disk16):
    """
    Verify that u = r^2/4 with h = 1 + eps gives R ~ 0 for gamma = 0, lam = Lam = 1.
    """
    trace = BoundaryTrace(disk16, ConstantBoundary(value=0.25))
    u = 0.25 * _radius2(disk16)
    R = residual(u, np.full(disk16.size, 1.0 + POISSON.eps), POISSON, disk16, trace)
    interior = disk16.active_class == INTERIOR
    assert np.abs(R[interior]).max() <= 1e-10, (f"Interior residual {np.abs(R[interior]).max()}")


# Test 3 - trivial problem
@pytest.mark.parametrize("method", ["pseudo_time", "policy"])
def test_zero_problem(disk16, method):
    """
    Verify that h = 0, g = 0 returns u = 0 without iterating.
    """
    cfg = InnerConfig(gamma=1.0, method=method)
    u, report = solve_inner(np.zeros(disk16.size), np.zeros(disk16.size), cfg, disk16)
    assert np.all(u == 0.0), ("Zero data must give the zero solution")
    assert report.iterations == 0, (f"Expected 0 iterations, got {report.iterations}")
    assert report.method == method


# Test 4 - harmonic extension reproduces affine data
def test_harmonic_extension_affine(disk16):
    """
    Verify that the harmonic extension of affine boundary data is the affine function.
    """
    g = AffineBoundary(offset=0.5, gradient=(1.0, -0.5))
    u = harmonic_extension(disk16, BoundaryTrace(disk16, g))
    expected = g.evaluate(disk16.coordinates)
    assert np.abs(u - expected).max() <= 1e-8, (f"Deviation {np.abs(u - expected).max()}")
    assert np.all(harmonic_extension(disk16) == 0.0), ("Homogeneous data must extend by zero")


# Test 5 - discrete maximum principle
@pytest.mark.parametrize("method", ["pseudo_time", "policy"])
def test_maximum_principle(disk16, rng, method):
    """
    Verify that h >= 0 keeps the solution below the boundary maximum.
    """
    cfg = InnerConfig(eps=5e-2, gamma=1.0, ell=Ellipticity(lam=0.5, Lam=1.5), method=method)
    trace = BoundaryTrace(disk16, AffineBoundary(gradient=(0.4, 0.2)))
    h = rng.uniform(0.0, 2.0, size=disk16.size)
    u, _ = solve_inner(harmonic_extension(disk16, trace), h, cfg, disk16, trace)
    assert u.max() <= trace.max + 1e-6, (f"max u = {u.max()} exceeds max g = {trace.max}")


# Test 6 - comparison in h and in g
def test_comparison(disk16, rng):
    """
    Verify h1 <= h2 gives u1 >= u2 and g1 <= g2 gives u1 <= u2, both up to 1e-6.
    """
    cfg = InnerConfig(eps=5e-2, gamma=1.0, ell=Ellipticity(lam=0.5, Lam=1.5))
    u0 = np.zeros(disk16.size)
    for _ in range(3):
        h1 = rng.uniform(0.0, 1.0, size=disk16.size)
        h2 = h1 + rng.uniform(0.0, 0.5, size=disk16.size)
        u1, _ = solve_inner(u0, h1, cfg, disk16)
        u2, _ = solve_inner(u0, h2, cfg, disk16)
        assert np.all(u1 >= u2 - 1e-6), (f"Comparison in h violated by {(u2 - u1).max()}")

    h = np.full(disk16.size, 1.0)
    low = BoundaryTrace(disk16, ConstantBoundary(value=0.0))
    high = BoundaryTrace(disk16, ConstantBoundary(value=0.3))
    u_low, _ = solve_inner(u0, h, cfg, disk16, low)
    u_high, _ = solve_inner(np.full(disk16.size, 0.3), h, cfg, disk16, high)
    assert np.all(u_low <= u_high + 1e-6), (f"Comparison in g violated by {(u_low - u_high).max()}")


# Test 7 - residual decrease of the relaxation
def test_pseudo_time_residual_decrease(disk16):
    """
    Verify that the residual infinity norm does not increase over the last 90% of iterations.
    """
    cfg = POISSON.model_copy(update={"method": "pseudo_time", "history_stride": 1})
    h = _radius2(disk16)
    _, report = pseudo_time_solve(np.zeros(disk16.size), h, cfg, disk16)
    residuals = np.array([row[1] for row in report.history])
    assert residuals[-1] <= report.tolerance, ("Final residual above tolerance")
    tail = residuals[len(residuals) // 10 :]
    assert np.all(np.diff(tail) <= 1e-12 * (1.0 + tail[:-1])), ("Residual increased after the transient")
    assert report.history[0][0] == 0 and report.history[-1][0] == report.iterations


# Test 8 - policy and pseudo-time agree
@pytest.mark.parametrize(
    "cfg, rhs",
    [
        (POISSON, 1.0),
        (InnerConfig(eps=0.1, gamma=1.0, ell=Ellipticity(lam=1.0, Lam=1.0)), 1.5),
        (InnerConfig(eps=0.1, gamma=0.5, ell=Ellipticity(lam=0.5, Lam=2.0)), 1.0),
    ],
)
def test_policy_matches_pseudo_time(disk16, cfg, rhs):
    """
    Verify that both inner solvers land within 10 * tol of each other.
    """
    h = np.full(disk16.size, rhs)
    u_pt, report_pt = pseudo_time_solve(np.zeros(disk16.size), h, cfg, disk16)
    u_pi, report_pi = policy_accelerated_solve(np.zeros(disk16.size), h, cfg, disk16)
    assert report_pt.residual_inf <= report_pt.tolerance and report_pi.residual_inf <= report_pi.tolerance
    gap = np.abs(u_pt - u_pi).max()
    assert gap <= 10.0 * report_pt.tolerance, (f"Solvers disagree by {gap}")


# Test 9 - thread count does not change the result
def test_threads_bit_identical(disk16):
    """
    Verify that the chunked residual evaluation gives bit-identical iterates.
    """
    cfg = InnerConfig(eps=0.1, gamma=1.0, method="pseudo_time")
    h = np.full(disk16.size, 1.5)
    u1, r1 = pseudo_time_solve(np.zeros(disk16.size), h, cfg, disk16)
    u3, r3 = pseudo_time_solve(np.zeros(disk16.size), h, cfg.model_copy(update={"threads": 3}), disk16)
    assert np.array_equal(u1, u3), ("Thread count changed the solution")
    assert r1.iterations == r3.iterations


# Test 10 - second-order accuracy on a Poisson problem
def test_poisson_second_order():
    """
    Verify error ratio >= 3 from resolution 16 to 32 for (1 + eps) Laplace(u) = r^2 on the unit disk.
    """
    errors = []
    for resolution in (16, 32):
        grid = build_grid(DiskDomain(radius=1.0), resolution)
        r2 = _radius2(grid)
        u, _ = policy_accelerated_solve(np.zeros(grid.size), r2, POISSON, grid)
        exact = (r2**2 - 1.0) / (16.0 * (1.0 + POISSON.eps))
        errors.append(np.abs(u - exact).max())
    assert errors[0] / errors[1] >= 3.0, (f"Observed error ratio {errors[0] / errors[1]:.2f}")


# Test 11 - iteration cap
def test_pseudo_time_non_convergence(disk16):
    """
    Verify that an exhausted iteration budget raises with the residual history attached.
    """
    cfg = InnerConfig(gamma=1.0, method="pseudo_time", max_iters=5, history_stride=1)
    with pytest.raises(InnerNonConvergenceError) as info:
        pseudo_time_solve(np.zeros(disk16.size), np.ones(disk16.size), cfg, disk16)
    assert len(info.value.history) == 6, (f"Expected 6 history rows, got {len(info.value.history)}")
    assert info.value.exit_code == 3


# Test 12 - linear-solve breakdown falls back to relaxation
def test_policy_fallback(disk16, monkeypatch):
    """
    Verify that a failing sparse solve hands over to pseudo-time and still converges.
    """

    def broken(*args, **kwargs):
        raise RuntimeError("factor is exactly singular")

    monkeypatch.setattr(inner_solver, "spsolve", broken)
    h = np.full(disk16.size, 1.0)
    u, report = policy_accelerated_solve(np.zeros(disk16.size), h, POISSON, disk16)
    assert report.fallback, ("Fallback flag not set")
    assert report.residual_inf <= report.tolerance
    assert np.abs(residual(u, h, POISSON, disk16)).max() <= report.tolerance


# Test 13 - sup bound calibrated on the coarse grid holds under refinement
def test_sup_bound_under_refinement():
    """
    Verify max|u| <= max|g| + C max|h|^(1/(gamma+1)) (1 + delta) at resolutions 32 and 64 with C fitted at 16.
    """
    cfg = InnerConfig(eps=5e-2, gamma=1.0, ell=Ellipticity(lam=0.5, Lam=1.5))
    g = ConstantBoundary(value=0.2)
    delta = 0.1

    def solve_at(resolution):
        grid = build_grid(DiskDomain(radius=1.0), resolution)
        trace = BoundaryTrace(grid, g)
        h = 1.0 + grid.coordinates[:, 0] ** 2
        u, _ = solve_inner(harmonic_extension(grid, trace), h, cfg, grid, trace)
        return float(np.abs(u).max()), float(h.max()) ** (1.0 / (cfg.gamma + 1.0)), trace.max_abs

    sup_u, scale, sup_g = solve_at(16)
    C = (sup_u - sup_g) / scale
    assert C > 0.0, ("A positive source must lift max|u| above max|g|")
    for resolution in (32, 64):
        sup_u, scale, sup_g = solve_at(resolution)
        bound = sup_g + C * scale * (1.0 + delta)
        assert sup_u <= bound, (f"max|u| = {sup_u:.4e} exceeds {bound:.4e} at resolution {resolution}")
