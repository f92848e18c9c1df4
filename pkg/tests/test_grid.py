"""
Copyright 2026 TESCAN 3DIM, s.r.o.
All rights reserved
"""

import math

import numpy as np
import pytest

from puccigrad.exceptions import ConfigError, ContractViolation
from puccigrad.grid.Grid import BOUNDARY_ADJACENT, EXTERIOR, INTERIOR, build_grid
from puccigrad.grid.domains import AnnulusDomain, DiskDomain, RectangleDomain
from puccigrad.operators.frames import FrameSet


# Test 1 - disk measure and spacing
def test_disk_measure():
    """
    Verify that the unit disk at resolution 64 has h = 2/64 and a total cell measure within 5% of pi.
    """
    grid = build_grid(DiskDomain(radius=1.0), 64)
    assert grid.spacing == pytest.approx(2.0 / 64), (f"Expected h = 2/64, got {grid.spacing}")
    assert abs(grid.measure - math.pi) <= 0.05 * math.pi, (f"Disk measure {grid.measure} is not within 5% of pi")


# Test 2 - grid-aligned rectangle tiles exactly
def test_rectangle_exact_tiling(square10):
    """
    Verify that the unit square at resolution 10 is tiled exactly by its 100 cells.
    """
    assert square10.size == 100, (f"Expected 100 active nodes, got {square10.size}")
    assert square10.measure == pytest.approx(1.0, abs=1e-12), (f"Expected measure 1, got {square10.measure}")


# Test 3 - annulus measure
def test_annulus_measure():
    """
    Verify that the annulus 0.5 < r < 1 at resolution 64 has measure within 5% of 3 pi / 4.
    """
    grid = build_grid(AnnulusDomain(r_in=0.5, r_out=1.0), 64)
    expected = 0.75 * math.pi
    assert abs(grid.measure - expected) <= 0.05 * expected, (f"Annulus measure {grid.measure} is not within 5% of {expected}")


# Test 4 - degenerate domains and resolutions are rejected
def test_degenerate_inputs():
    """
    Verify that r_in >= r_out raises ConfigError and a resolution below 8 raises ContractViolation.
    """
    with pytest.raises(ConfigError, match="r_in < r_out"):
        build_grid({"shape": "annulus", "r_in": 1.0, "r_out": 0.5}, 16)
    with pytest.raises(ContractViolation):
        build_grid(DiskDomain(), 4)
    with pytest.raises(ContractViolation):
        build_grid(DiskDomain(), 16, FrameSet.default(3))


# Test 5 - classification is a partition
def test_classification_partition(disk16):
    """
    Verify that every lattice node has exactly one class and active nodes are the non-exterior ones.
    """
    classes = disk16.node_class.ravel()
    assert set(np.unique(classes)) <= {EXTERIOR, INTERIOR, BOUNDARY_ADJACENT}, ("Unexpected node class found")
    assert int((classes != EXTERIOR).sum()) == disk16.size, ("Active node count does not match non-exterior classes")
    interior = disk16.active_class == INTERIOR
    assert np.all(disk16.neighbors[:, interior] >= 0), ("Interior nodes must have their full stencil inside the domain")
    assert np.all(disk16.cut_mask.any(axis=0)[~interior]), ("Boundary-adjacent nodes must have at least one cut arm")


# Test 6 - Shortley-Weller arms hit the circle exactly
@pytest.mark.parametrize("resolution", [16, 33])
def test_arm_lengths_on_circle(resolution):
    """
    Verify that theta lies in (0, 1] and every cut point lies on the unit circle to 1e-12.
    """
    grid = build_grid(DiskDomain(radius=1.0), resolution)
    assert np.all(grid.arms > 0.0) and np.all(grid.arms <= 1.0), ("Arm fractions must lie in (0, 1]")
    cut_points = grid.cut_points[grid.cut_mask]
    radii = np.linalg.norm(cut_points, axis=1)
    assert np.abs(radii - 1.0).max() <= 1e-12, (f"Cut points deviate from the circle by {np.abs(radii - 1.0).max()}")


# Test 7 - rectangle cut points lie on the sides
def test_arm_lengths_on_rectangle():
    """
    Verify that rectangle cut points lie on the boundary and axis arms end half a cell away.
    """
    grid = build_grid(RectangleDomain(widths=(1.0, 0.5)), 12)
    cut_points = grid.cut_points[grid.cut_mask]
    distance = grid.domain.boundary_distance(cut_points)
    assert distance.max() <= 1e-12, (f"Rectangle cut points are {distance.max()} off the boundary")
    axis_cut = grid.cut_mask[: 2 * grid.dimension]
    assert np.allclose(grid.arms[: 2 * grid.dimension][axis_cut], 0.5), ("Axis arms should be cut at half a cell")


# Test 8 - refinement never turns an interior node exterior
def test_refinement_monotonicity():
    """
    Verify that interior nodes of a coarse disk grid are not exterior on the refined grid.
    """
    coarse = build_grid(DiskDomain(), 16)
    fine = build_grid(DiskDomain(), 32)
    points = coarse.coordinates[coarse.active_class == INTERIOR]
    assert np.all(fine.classify_points(points) != EXTERIOR), ("A coarse interior node became exterior after refinement")


# Test 9 - discrete measure converges to the disk area
def test_measure_convergence():
    """
    Verify that |sum of cell measures - pi| stays within 2 h * perimeter at several resolutions.
    """
    for resolution in (16, 32, 64, 128):
        grid = build_grid(DiskDomain(), resolution)
        assert abs(grid.measure - math.pi) <= 2.0 * grid.spacing * 2.0 * math.pi, (f"Measure error too large at resolution {resolution}")


# Test 10 - three-dimensional ball
def test_ball_3d():
    """
    Verify that a 3D ball uses the 3D default frames and approximates 4 pi / 3.
    """
    grid = build_grid(DiskDomain(radius=1.0, dimension=3), 24)
    assert grid.dimension == 3, (f"Expected a 3D grid, got N={grid.dimension}")
    assert len(grid.frame_lines) == 4, (f"Expected 4 frames in 3D, got {len(grid.frame_lines)}")
    expected = 4.0 * math.pi / 3.0
    assert abs(grid.measure - expected) <= 0.1 * expected, (f"Ball measure {grid.measure} is off")
    radii = np.linalg.norm(grid.cut_points[grid.cut_mask], axis=1)
    assert np.abs(radii - 1.0).max() <= 1e-12, ("3D cut points must lie on the sphere")


# Test 11 - lattice scatter helpers
def test_to_lattice_and_node_near(disk16):
    """
    Verify that to_lattice puts NaN on exterior nodes and node_near finds the centre node.
    """
    lattice = disk16.to_lattice(np.ones(disk16.size))
    assert np.isnan(lattice[disk16.node_class == EXTERIOR]).all(), ("Exterior nodes must be NaN")
    assert np.all(lattice[disk16.node_class != EXTERIOR] == 1.0), ("Active nodes must carry the field")
    node = disk16.node_near((0.0, 0.0))
    assert np.linalg.norm(disk16.coordinates[node]) <= disk16.spacing, ("node_near should return a node next to the origin")
    with pytest.raises(ContractViolation):
        disk16.check_node(disk16.size)
