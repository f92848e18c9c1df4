"""
Copyright 2026 TESCAN 3DIM, s.r.o.
All rights reserved
"""

import itertools
import math

import numpy as np
import pytest

from puccigrad.exceptions import ContractViolation
from puccigrad.grid.Grid import build_grid
from puccigrad.grid.domains import DiskDomain
from puccigrad.levelset.measure import MonotoneRHS, distribution_function
from puccigrad.oracle.radial_oracle import (
    RadialProfile,
    closed_form_constant_rhs,
    radial_rhs,
    shoot_radial,
    verify_radial_substitution,
)


# Test 1 - closed forms from hand computation
def test_closed_form_examples():
    """
    Verify u = (2/3)(r^{3/2} - 1) for (gamma, lam, Lam, c) = (1, 1, 1, 3/2) and (1, 1, 2, 3), and (r^2 - 1)/4 for Poisson.
    """
    for lam, Lam, c in ((1.0, 1.0, 1.5), (1.0, 2.0, 3.0)):
        profile = closed_form_constant_rhs(1.0, lam, Lam, 2, c)
        expected = (2.0 / 3.0) * (profile.radii**1.5 - 1.0)
        assert np.allclose(profile.values, expected, atol=1e-14), (f"Closed form mismatch for Lam={Lam}")
        assert profile.slopes[0] == 0.0, ("w(0) must vanish")
    poisson = closed_form_constant_rhs(0.0, 1.0, 1.0, 2, 1.0)
    assert np.allclose(poisson.values, (poisson.radii**2 - 1.0) / 4.0, atol=1e-14)
    assert poisson(1.0) == 0.0 and poisson(0.0) == pytest.approx(-0.25)


# Test 2 - substitution residual over a parameter sweep
@pytest.mark.parametrize(
    "gamma, ell, dimension",
    list(itertools.product([0.0, 1.0, 2.0], [(1.0, 1.0), (1.0, 2.0)], [2, 3])),
)
def test_closed_form_substitution(gamma, ell, dimension):
    """
    Verify that every closed form satisfies the radial equation to 1e-6 at 4096 samples.
    """
    lam, Lam = ell
    profile = closed_form_constant_rhs(gamma, lam, Lam, dimension, 1.5, R=1.0, g_const=0.3)
    residual = verify_radial_substitution(profile, 1.5)
    assert residual <= 1e-6, (f"Substitution residual {residual:.3e}")
    assert profile.values[-1] == pytest.approx(0.3)


# Test 3 - trivial and perturbed profiles
def test_substitution_controls():
    """
    Verify a zero residual for the zero profile and a large one for a perturbed closed form.
    """
    zero = closed_form_constant_rhs(1.0, 1.0, 1.0, 2, 0.0)
    assert verify_radial_substitution(zero, 0.0) == 0.0
    profile = closed_form_constant_rhs(1.0, 1.0, 1.0, 2, 1.5)
    r = profile.radii
    perturbed = RadialProfile(
        r.copy(), profile.values + 0.01 * r**2, profile.slopes.copy(), 1.0, 1.0, 1.0, 2, 0.0
    )
    assert verify_radial_substitution(perturbed, 1.5) > 1e-3, ("Perturbation must be visible in the residual")
    coarse = closed_form_constant_rhs(1.0, 1.0, 1.0, 2, 1.5, samples=64)
    with pytest.raises(ContractViolation):
        verify_radial_substitution(coarse, 1.5)


# Test 4 - scaling law
@pytest.mark.parametrize("gamma", [0.0, 1.0, 2.0])
def test_closed_form_scaling(gamma):
    """
    Verify that c -> 2^(gamma+1) c doubles w and u - g.
    """
    base = closed_form_constant_rhs(gamma, 1.0, 2.0, 2, 0.7, g_const=1.0)
    scaled = closed_form_constant_rhs(gamma, 1.0, 2.0, 2, 0.7 * 2.0 ** (gamma + 1.0), g_const=1.0)
    assert np.allclose(scaled.slopes, 2.0 * base.slopes, rtol=0.0, atol=1e-8)
    assert np.allclose(scaled.values - 1.0, 2.0 * (base.values - 1.0), rtol=0.0, atol=1e-8)


# Test 5 - shooting reproduces the closed form
@pytest.mark.parametrize("gamma, lam, Lam, dimension", [(1.0, 1.0, 1.0, 2), (1.0, 1.0, 2.0, 2), (0.0, 1.0, 1.0, 2), (2.0, 0.5, 1.5, 3)])
def test_shooting_matches_closed_form(gamma, lam, Lam, dimension):
    """
    Verify agreement within 1e-6 relative L-infinity for a constant right-hand side.
    """
    c = 1.5
    shot = shoot_radial(MonotoneRHS.constant(c), gamma, lam, Lam, dimension)
    closed = closed_form_constant_rhs(gamma, lam, Lam, dimension, c)
    scale = np.abs(closed.values).max()
    assert np.abs(shot.values - closed.values).max() <= 1e-6 * scale, ("Shooting drifted from the closed form")
    assert shot.valid and not shot.curvature_changes


# Test 6 - shooting with zero data
def test_shooting_zero():
    """
    Verify that f = 0, g = 0 gives u = 0.
    """
    profile = shoot_radial(MonotoneRHS.constant(0.0), 1.0, 1.0, 1.0, 2)
    assert np.all(profile.values == 0.0) and profile.valid


# Test 7 - nonlocal radial profile
def test_shooting_identity_rhs():
    """
    Verify that f(s) = s gives a valid monotone profile whose substitution residual is below 1e-5.
    """
    f = MonotoneRHS.identity(4.0)
    profile = shoot_radial(f, 1.0, 1.0, 1.0, 2)
    assert profile.valid, ("Profile must be radially non-decreasing")
    assert np.all(np.diff(profile.values) >= 0.0), ("u must increase with r")
    residual = verify_radial_substitution(profile, radial_rhs(f, 2))
    assert residual <= 1e-5, (f"Self-residual {residual:.3e}")
    # c(r) = pi (1 - r^2) vanishes at the rim, so u'' turns negative before it
    assert profile.curvature_changes, ("Expected a curvature sign change")


# Test 8 - superlevel measure matches the level-set module
def test_superlevel_consistency():
    """
    Verify omega_N (R^N - r^N) against the discrete superlevel measure on a fine grid within 2%.
    """
    profile = shoot_radial(MonotoneRHS.identity(4.0), 1.0, 1.0, 1.0, 2)
    grid = build_grid(DiskDomain(radius=1.0), 128)
    u = profile.on_points(grid.coordinates)
    mu = distribution_function(u, grid)
    for r in (0.2, 0.4, 0.6, 0.8):
        node = grid.node_near((r, 0.0))
        radius = float(np.linalg.norm(grid.coordinates[node]))
        discrete = mu(u[node])
        assert abs(discrete - profile.superlevel_measure(radius)) <= 0.02 * math.pi, (f"Superlevel mismatch at r = {radius:.3f}")


# Test 9 - CSV export
def test_profile_csv(tmp_path):
    """
    Verify the r,u,w export of a profile.
    """
    profile = closed_form_constant_rhs(1.0, 1.0, 1.0, 2, 1.5, samples=256)
    path = tmp_path / "profile.csv"
    profile.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "r,u,w" and len(lines) == 258, (f"Unexpected CSV layout with {len(lines)} lines")
    assert lines[-1].split(",")[1] == "0", ("u(R) must be written exactly")


# Test 10 - invalid constants
def test_oracle_contracts():
    """
    Verify that lam > Lam, negative c and unsupported dimensions are rejected.
    """
    with pytest.raises(ContractViolation):
        closed_form_constant_rhs(1.0, 2.0, 1.0, 2, 1.0)
    with pytest.raises(ContractViolation):
        closed_form_constant_rhs(1.0, 1.0, 1.0, 2, -1.0)
    with pytest.raises(ContractViolation):
        shoot_radial(MonotoneRHS.constant(1.0), 1.0, 1.0, 1.0, 4)
