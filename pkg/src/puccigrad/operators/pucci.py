"""
Copyright 2026 TESCAN 3DIM, s.r.o.
All rights reserved
"""

import math
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from puccigrad.grid.Grid import Grid
from puccigrad.operators.frames import FrameSet

Nodes = slice | np.ndarray


class Ellipticity(BaseModel):
    """
    Ellipticity constants 0 < lam <= Lam of the Pucci operator.

    The model is configured to forbid extra fields that are not defined in the model.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)
    lam: float = 1.0
    Lam: float = 1.0

    @model_validator(mode="after")
    def check_order(self):
        if not self.lam > 0.0:
            raise ValueError(f"lam must be positive, got {self.lam}.")
        if not self.lam <= self.Lam:
            raise ValueError(f"Ellipticity needs lam <= Lam, got lam={self.lam}, Lam={self.Lam}.")
        return self

    def weight(self, value):
        """
        Lam * value^+ - lam * value^-, elementwise.
        """
        return self.Lam * np.maximum(value, 0.0) + self.lam * np.minimum(value, 0.0)


class SymMatrix:
    """
    Real symmetric N x N matrix (N = 2 or 3) stored as its upper triangle,
    so symmetry holds by construction.

    Parameters
    ----------
    upper : array_like
        Row-major upper triangle including the diagonal: (s00, s01, s11) for
        N = 2, (s00, s01, s02, s11, s12, s22) for N = 3.
    """

    _SIZES = {3: 2, 6: 3}

    def __init__(self, upper):
        upper = np.asarray(upper, dtype=float).ravel()
        if upper.size not in self._SIZES:
            raise ValueError(
                f"Upper triangle must have 3 (N=2) or 6 (N=3) entries, got {upper.size}."
            )
        self.upper = upper
        self.dimension = self._SIZES[upper.size]

    @classmethod
    def from_array(cls, matrix) -> "SymMatrix":
        """
        Build from a square array; only the upper triangle is read.
        """
        matrix = np.asarray(matrix, dtype=float)
        return cls(matrix[np.triu_indices(matrix.shape[0])])

    def to_array(self) -> np.ndarray:
        n = self.dimension
        out = np.zeros((n, n))
        out[np.triu_indices(n)] = self.upper
        return out + np.triu(out, 1).T

    def __add__(self, other: "SymMatrix") -> "SymMatrix":
        return SymMatrix(self.upper + other.upper)

    def __sub__(self, other: "SymMatrix") -> "SymMatrix":
        return SymMatrix(self.upper - other.upper)

    def __mul__(self, scalar: float) -> "SymMatrix":
        return SymMatrix(scalar * self.upper)

    __rmul__ = __mul__

    def __neg__(self) -> "SymMatrix":
        return SymMatrix(-self.upper)

    def __repr__(self) -> str:
        return f"SymMatrix({self.to_array().tolist()})"

    def trace(self) -> float:
        a = self.to_array()
        return float(np.trace(a))

    def eigenvalues(self) -> np.ndarray:
        """
        Eigenvalues in ascending order, by closed form.
        """
        if self.dimension == 2:
            a, b, d = self.upper
            mean = 0.5 * (a + d)
            radius = math.hypot(0.5 * (a - d), b)
            return np.array([mean - radius, mean + radius])

        a00, a01, a02, a11, a12, a22 = self.upper
        off = a01 * a01 + a02 * a02 + a12 * a12
        if off == 0.0:
            return np.sort(np.array([a00, a11, a22]))
        q = (a00 + a11 + a22) / 3.0
        p = math.sqrt(
            ((a00 - q) ** 2 + (a11 - q) ** 2 + (a22 - q) ** 2 + 2.0 * off) / 6.0
        )
        b = (self.to_array() - q * np.eye(3)) / p
        r = min(1.0, max(-1.0, 0.5 * float(np.linalg.det(b))))
        phi = math.acos(r) / 3.0
        largest = q + 2.0 * p * math.cos(phi)
        smallest = q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)
        return np.array([smallest, 3.0 * q - largest - smallest, largest])


def pucci_plus_exact(S: SymMatrix | np.ndarray, ell: Ellipticity) -> float:
    """
    Pucci maximal operator of a symmetric matrix.

    Parameters
    ----------
    S : SymMatrix | np.ndarray
        The matrix; an array is read through its upper triangle.
    ell : Ellipticity
        The ellipticity constants.

    Returns
    -------
    float
        Lam * (sum of positive eigenvalues) + lam * (sum of negative eigenvalues).
    """
    if not isinstance(S, SymMatrix):
        S = SymMatrix.from_array(S)
    if ell.lam == ell.Lam:
        return ell.Lam * S.trace()
    return float(ell.weight(S.eigenvalues()).sum())


# -- discrete operators -------------------------------------------------------


def neighbor_values(
    u: np.ndarray, grid: Grid, boundary, slot: int, nodes: Nodes = slice(None)
) -> np.ndarray:
    """
    Values at the far end of one arm: the neighbouring node's value, or the
    Dirichlet data at the cut point.
    """
    nb = grid.neighbors[slot][nodes]
    inner = u[np.where(nb >= 0, nb, 0)]
    if boundary is None:
        return np.where(nb >= 0, inner, 0.0)
    return np.where(nb >= 0, inner, boundary.values[slot][nodes])


def line_weights(grid: Grid, line: int, nodes: Nodes = slice(None)):
    """
    Shortley-Weller weights along one stencil line.

    Returns
    -------
    tuple
        ``(second, first)`` where each entry is a (plus, centre, minus) triple
        of weight arrays. ``second`` differentiates twice along the unit
        direction of the line, ``first`` once; both are exact on quadratics.
    """
    a = grid.arm_lengths(2 * line)[nodes]
    b = grid.arm_lengths(2 * line + 1)[nodes]
    ab = a * b
    s = a + b
    second = (2.0 / (a * s), -2.0 / ab, 2.0 / (b * s))
    first = (b / (a * s), (a - b) / ab, -a / (b * s))
    return second, first


def second_differences(
    u: np.ndarray,
    grid: Grid,
    boundary=None,
    lines: Sequence[int] | None = None,
    nodes: Nodes = slice(None),
) -> np.ndarray:
    """
    Directional second differences along stencil lines.

    Returns
    -------
    np.ndarray
        Array of shape (len(lines), n_nodes).
    """
    if lines is None:
        lines = range(len(grid.lines))
    center = u[nodes]
    rows = []
    for line in lines:
        (wp, wc, wm), _ = line_weights(grid, line, nodes)
        plus = neighbor_values(u, grid, boundary, 2 * line, nodes)
        minus = neighbor_values(u, grid, boundary, 2 * line + 1, nodes)
        rows.append(wp * plus + wc * center + wm * minus)
    return np.asarray(rows)


def pucci_plus_field(
    u: np.ndarray,
    grid: Grid,
    ell: Ellipticity,
    boundary=None,
    frame_lines: list[list[int]] | None = None,
    nodes: Nodes = slice(None),
    return_policy: bool = False,
):
    """
    Wide-stencil Pucci maximal operator at many nodes.

    For every frame the sign-split sum Lam * (delta)^+ - lam * (delta)^- of its
    second differences is formed; the operator is the maximum over frames.

    Parameters
    ----------
    u : np.ndarray
        Field on the grid's active nodes.
    grid : Grid
        The grid.
    ell : Ellipticity
        Ellipticity constants.
    boundary : BoundaryTrace | None
        Dirichlet data at the cut points; homogeneous if None.
    frame_lines : list[list[int]] | None
        Frames as lists of line indices; the grid's frames if None.
    nodes : slice | np.ndarray
        Nodes to evaluate.
    return_policy : bool
        Also return the index of the maximising frame per node.

    Returns
    -------
    np.ndarray | tuple[np.ndarray, np.ndarray]
        The operator values, and the active frames if requested.
    """
    if frame_lines is None:
        frame_lines = grid.frame_lines
    used = sorted({line for frame in frame_lines for line in frame})
    deltas = dict(zip(used, second_differences(u, grid, boundary, used, nodes)))
    sums = np.asarray(
        [sum(ell.weight(deltas[line]) for line in frame) for frame in frame_lines]
    )
    policy = np.argmax(sums, axis=0)
    values = np.take_along_axis(sums, policy[None, :], axis=0)[0]
    if return_policy:
        return values, policy
    return values


def pucci_plus_discrete(
    u: np.ndarray,
    node: int,
    frames: FrameSet,
    ell: Ellipticity,
    grid: Grid,
    boundary=None,
) -> float:
    """
    Discrete Pucci maximal operator at one node.

    The scheme is monotone: nondecreasing in every neighbour value and in the
    boundary data, nonincreasing in the centre value. Near the boundary the
    second differences use the Shortley-Weller arm lengths.

    Parameters
    ----------
    u : np.ndarray
        Field on the grid's active nodes.
    node : int
        Active node index (interior or boundary-adjacent).
    frames : FrameSet
        Frames to maximise over; their directions must be part of the grid.
    ell : Ellipticity
        Ellipticity constants.
    grid : Grid
        The grid.
    boundary : BoundaryTrace | None
        Dirichlet data at the cut points; homogeneous if None.

    Returns
    -------
    float
        The operator value.
    """
    node = grid.check_node(node)
    frame_lines = [[grid.line_of(d) for d in frame] for frame in frames.frames]
    value = pucci_plus_field(
        u, grid, ell, boundary, frame_lines, nodes=np.array([node])
    )
    return float(value[0])


def gradient_field(
    u: np.ndarray, grid: Grid, boundary=None, nodes: Nodes = slice(None)
) -> np.ndarray:
    """
    Arm-weighted central-difference gradient, shape (n_nodes, N).
    """
    center = u[nodes]
    columns = []
    for line in grid.axis_lines:
        _, (gp, gc, gm) = line_weights(grid, line, nodes)
        plus = neighbor_values(u, grid, boundary, 2 * line, nodes)
        minus = neighbor_values(u, grid, boundary, 2 * line + 1, nodes)
        columns.append(gp * plus + gc * center + gm * minus)
    return np.stack(columns, axis=-1)


def gradient_central(u: np.ndarray, node: int, grid: Grid, boundary=None) -> np.ndarray:
    """
    Centred-difference gradient at one node.

    On interior nodes this is the plain central difference; at boundary
    adjacent nodes the three-point formula on the unequal arms is used, which
    stays exact on quadratics.

    Parameters
    ----------
    u : np.ndarray
        Field on the grid's active nodes.
    node : int
        Active node index.
    grid : Grid
        The grid.
    boundary : BoundaryTrace | None
        Dirichlet data at the cut points; homogeneous if None.

    Returns
    -------
    np.ndarray
        Gradient vector of length N.
    """
    node = grid.check_node(node)
    return gradient_field(u, grid, boundary, np.array([node]))[0]


def degeneracy_factor(gradient, gamma: float):
    """
    |Du|^gamma, equal to one for gamma = 0 whatever the gradient.

    Parameters
    ----------
    gradient : array_like
        A gradient vector, or an (n, N) stack of them.
    gamma : float
        Degeneracy exponent, gamma >= 0.

    Returns
    -------
    float | np.ndarray
        The factor (a float for a single vector).
    """
    if gamma < 0.0:
        raise ValueError(f"gamma must be non-negative, got {gamma}.")
    gradient = np.asarray(gradient, dtype=float)
    norm = np.linalg.norm(gradient, axis=-1)
    factor = np.ones_like(norm) if gamma == 0.0 else norm**gamma
    return float(factor) if factor.ndim == 0 else factor


def laplacian_field(
    u: np.ndarray, grid: Grid, boundary=None, nodes: Nodes = slice(None)
) -> np.ndarray:
    """
    Axis-frame discrete Laplacian.
    """
    return second_differences(u, grid, boundary, grid.axis_lines, nodes).sum(axis=0)
