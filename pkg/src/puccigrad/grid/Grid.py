"""
Copyright 2026 TESCAN 3DIM, s.r.o.
All rights reserved
"""

import math
from typing import Any

import numpy as np
from loguru import logger
from pydantic import ValidationError

from puccigrad.exceptions import ConfigError, ContractViolation
from puccigrad.grid.domains import Domain, DomainAdapter
from puccigrad.operators.frames import FrameSet, Offset, canonical

EXTERIOR = 0
INTERIOR = 1
BOUNDARY_ADJACENT = 2


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


class Grid:
    """
    Cell-centred lattice over a bounded domain with Shortley-Weller arms.

    Unknowns live on the non-exterior ("active") nodes, which are numbered
    0..size-1. For every stencil line l (axis lines first, then the frame
    diagonals) the grid stores two arms: slot 2l points along +d_l, slot
    2l+1 along -d_l. An arm is either a full lattice step to another active
    node (theta = 1) or is cut by the boundary at theta * |d| * h with
    theta in (0, 1]; cut arms take their value from the Dirichlet data at
    the recorded cut point.

    Instances are immutable and may be shared between threads.

    Parameters
    ----------
    domain : Domain
        The domain the lattice covers.
    resolution : int
        Number of cells across the widest side of the bounding box.
    frames : FrameSet
        Frames the stencil must support.
    """

    def __init__(self, domain: Domain, resolution: int, frames: FrameSet):
        self.domain = domain
        self.resolution = resolution
        self.frames = frames
        self.dimension = domain.dimension

        lo, hi = domain.bounding_box()
        widths = hi - lo
        self.spacing = float(widths.max() / resolution)
        h = self.spacing
        self.lattice_shape = tuple(
            int(math.ceil(w / h - 1e-9)) for w in widths
        )
        self.origin = _frozen(lo + 0.5 * h)

        axes = [self.origin[k] + h * np.arange(n) for k, n in enumerate(self.lattice_shape)]
        mesh = np.meshgrid(*axes, indexing="ij")
        lattice_points = np.stack([m.ravel() for m in mesh], axis=1)
        inside = domain.contains(lattice_points)

        self.lattice_index = _frozen(np.flatnonzero(inside))
        active_map = np.full(inside.size, -1, dtype=np.int64)
        active_map[self.lattice_index] = np.arange(self.lattice_index.size)
        self._active_map = _frozen(active_map)
        self.coordinates = _frozen(lattice_points[self.lattice_index])
        self.size = int(self.lattice_index.size)
        if self.size == 0:
            raise ContractViolation(
                f"Resolution {resolution} leaves no lattice node inside the domain."
            )

        self.lines: list[Offset] = frames.lines()
        self._line_lookup = {d: k for k, d in enumerate(self.lines)}
        self.frame_lines: list[list[int]] = [
            [self.line_of(d) for d in frame] for frame in frames.frames
        ]
        self.axis_lines: list[int] = list(range(self.dimension))
        self.line_lengths = _frozen(
            np.array([math.sqrt(sum(c * c for c in d)) for d in self.lines])
        )

        n_arms = 2 * len(self.lines)
        neighbors = np.full((n_arms, self.size), -1, dtype=np.int64)
        arms = np.ones((n_arms, self.size))
        cut_points = np.full((n_arms, self.size, self.dimension), np.nan)
        multi_index = np.stack(
            np.unravel_index(self.lattice_index, self.lattice_shape), axis=1
        )
        shape = np.asarray(self.lattice_shape)
        for l, d in enumerate(self.lines):
            for sign in (1, -1):
                slot = 2 * l + (0 if sign == 1 else 1)
                offset = sign * np.asarray(d)
                step = np.broadcast_to(h * offset.astype(float), self.coordinates.shape)
                s = domain.exit_parameter(self.coordinates, step)

                target = multi_index + offset
                in_lattice = np.all((target >= 0) & (target < shape), axis=1)
                flat = np.zeros(self.size, dtype=np.int64)
                flat[in_lattice] = np.ravel_multi_index(
                    tuple(target[in_lattice].T), self.lattice_shape
                )
                target_active = np.where(in_lattice, active_map[flat], -1)

                cut = (s <= 1.0) | (target_active < 0)
                theta = np.where(cut, np.clip(s, np.finfo(float).tiny, 1.0), 1.0)
                neighbors[slot] = np.where(cut, -1, target_active)
                arms[slot] = theta
                cut_points[slot][cut] = (
                    self.coordinates[cut] + theta[cut, None] * step[cut]
                )
        self.neighbors = _frozen(neighbors)
        self.arms = _frozen(arms)
        self.cut_points = _frozen(cut_points)
        self.cut_mask = _frozen(neighbors < 0)

        adjacent = self.cut_mask.any(axis=0)
        node_class = np.full(inside.size, EXTERIOR, dtype=np.int8)
        node_class[self.lattice_index] = np.where(adjacent, BOUNDARY_ADJACENT, INTERIOR)
        self.node_class = _frozen(node_class.reshape(self.lattice_shape))
        self.active_class = _frozen(node_class[self.lattice_index])

    def __repr__(self) -> str:
        return (
            f"Grid(shape={self.domain.shape}, N={self.dimension}, "
            f"resolution={self.resolution}, h={self.spacing:.6g}, nodes={self.size})"
        )

    def line_of(self, offset: Offset) -> int:
        """
        Index of the stencil line spanned by an offset.

        Raises
        ------
        ContractViolation
            If the grid was not built with that direction.
        """
        key = canonical(tuple(int(c) for c in offset))
        if key not in self._line_lookup:
            raise ContractViolation(f"Direction {offset} is not part of this grid's stencil.")
        return self._line_lookup[key]

    @property
    def cell_measure(self) -> float:
        return self.spacing**self.dimension

    @property
    def cell_measures(self) -> np.ndarray:
        """
        Measure h^N of every active node, including boundary-adjacent cells.
        """
        return np.full(self.size, self.cell_measure)

    @property
    def measure(self) -> float:
        """
        Discrete |Omega|: the summed cell measure of all active nodes.
        """
        return float(self.size * self.cell_measure)

    def arm_lengths(self, slot: int) -> np.ndarray:
        """
        Physical arm lengths theta * |d| * h for one arm slot.
        """
        return self.arms[slot] * self.line_lengths[slot // 2] * self.spacing

    def classify_points(self, points: np.ndarray) -> np.ndarray:
        """
        Node class of the lattice node nearest to each point, EXTERIOR for
        points outside the lattice.
        """
        points = np.atleast_2d(points)
        idx = np.floor((points - self.origin) / self.spacing + 0.5).astype(np.int64)
        shape = np.asarray(self.lattice_shape)
        valid = np.all((idx >= 0) & (idx < shape), axis=1)
        out = np.full(points.shape[0], EXTERIOR, dtype=np.int8)
        out[valid] = self.node_class[tuple(idx[valid].T)]
        return out

    def node_near(self, point: Any) -> int:
        """
        Active index of the node nearest to a point.
        """
        distance = np.linalg.norm(self.coordinates - np.asarray(point, dtype=float), axis=1)
        return int(np.argmin(distance))

    def to_lattice(self, field: np.ndarray) -> np.ndarray:
        """
        Scatter an active-node field into the full lattice, NaN on exterior nodes.
        """
        out = np.full(int(np.prod(self.lattice_shape)), np.nan)
        out[self.lattice_index] = field
        return out.reshape(self.lattice_shape)

    def check_node(self, node: int) -> int:
        if not 0 <= node < self.size:
            raise ContractViolation(
                f"Node {node} is not an active node of the grid (size {self.size})."
            )
        return int(node)


def build_grid(
    domain: Domain | dict,
    resolution: int,
    frames: FrameSet | None = None,
) -> Grid:
    """
    Build and classify the computational lattice over a bounded domain.

    Parameters
    ----------
    domain : Domain | dict
        The domain, or its configuration mapping.
    resolution : int
        Cells across the widest side of the bounding box, at least 8.
    frames : FrameSet | None
        Stencil frames; the default frame set of the domain's dimension if None.

    Returns
    -------
    Grid
        The classified grid with per-direction Shortley-Weller arms.

    Raises
    ------
    ConfigError
        If the domain mapping is degenerate (e.g. r_in >= r_out).
    ContractViolation
        If the resolution is below 8 or the frames do not match the dimension.
    """
    if isinstance(domain, dict):
        try:
            domain = DomainAdapter.validate_python(domain)
        except ValidationError as e:
            raise ConfigError(f"Invalid domain: {e.errors()[0]['msg']}") from e
    if resolution < 8:
        raise ContractViolation(f"Resolution must be at least 8, got {resolution}.")
    if frames is None:
        frames = FrameSet.default(domain.dimension)
    if frames.dimension != domain.dimension:
        raise ContractViolation(
            f"Frames are {frames.dimension}-dimensional but the domain is {domain.dimension}-dimensional."
        )

    grid = Grid(domain, resolution, frames)
    logger.bind(log_type="GRID").debug(
        f"Built {grid!r}: {int((grid.active_class == INTERIOR).sum())} interior, "
        f"{int((grid.active_class == BOUNDARY_ADJACENT).sum())} boundary-adjacent nodes."
    )
    return grid
