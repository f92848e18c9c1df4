"""
Copyright 2026 TESCAN 3DIM, s.r.o.
All rights reserved
"""

import csv
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, TypeAdapter, model_validator
from scipy.spatial import cKDTree

from puccigrad.exceptions import ContractViolation
from puccigrad.grid.Grid import Grid


class ConstantBoundary(BaseModel):
    """
    g(x) = value.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)
    kind: Literal["constant"] = "constant"
    value: float = 0.0

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return np.full(np.atleast_2d(points).shape[0], self.value)


class AffineBoundary(BaseModel):
    """
    g(x) = offset + <gradient, x>.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)
    kind: Literal["affine"] = "affine"
    offset: float = 0.0
    gradient: tuple[float, ...] = (1.0, 0.0)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        if points.shape[1] != len(self.gradient):
            raise ContractViolation(
                f"Affine boundary data is {len(self.gradient)}-dimensional, "
                f"points are {points.shape[1]}-dimensional."
            )
        return self.offset + points @ np.asarray(self.gradient)


class RadialBoundary(BaseModel):
    """
    g(x) = G(|x|) with G interpolated linearly from a (radius, value) table
    and clamped at its ends. A single row is a constant.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)
    kind: Literal["radial"] = "radial"
    table: tuple[tuple[float, float], ...] = ((1.0, 0.0),)

    @model_validator(mode="after")
    def check_table(self):
        if not self.table:
            raise ValueError("Radial boundary table must not be empty.")
        radii = [r for r, _ in self.table]
        for k in range(1, len(radii)):
            if not radii[k] > radii[k - 1]:
                raise ValueError(
                    f"Radial boundary radii must be increasing at row {k}."
                )
        return self

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(np.atleast_2d(points), axis=1)
        radii, values = np.asarray(self.table, dtype=float).T
        return np.interp(r, radii, values)


class TableBoundary(BaseModel):
    """
    Boundary values sampled at scattered points, read from a CSV file with
    one coordinate column per dimension followed by a value column. Each
    query returns the value of the nearest sample.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)
    kind: Literal["table"] = "table"
    path: str
    _points: np.ndarray | None = PrivateAttr(default=None)
    _values: np.ndarray | None = PrivateAttr(default=None)
    _tree: cKDTree | None = PrivateAttr(default=None)

    def _load(self) -> None:
        with open(self.path, newline="") as f:
            rows = [row for row in csv.reader(f) if row]
        # tolerate a header row
        try:
            [float(c) for c in rows[0]]
        except ValueError:
            rows = rows[1:]
        data = np.asarray(rows, dtype=float)
        if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] < 3:
            raise ContractViolation(
                f"Boundary table {self.path} needs rows of coordinates followed by a value."
            )
        self._points = data[:, :-1]
        self._values = data[:, -1]
        self._tree = cKDTree(self._points)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        if self._tree is None:
            self._load()
        _, idx = self._tree.query(np.atleast_2d(points))
        return self._values[idx]


BoundarySpec = Annotated[
    Union[ConstantBoundary, AffineBoundary, RadialBoundary, TableBoundary],
    Field(discriminator="kind"),
]

BoundaryAdapter = TypeAdapter(BoundarySpec)


def boundary_value(g: BoundarySpec, point, grid: Grid) -> float:
    """
    Evaluate the Dirichlet data at a point of the boundary.

    Parameters
    ----------
    g : BoundarySpec
        The boundary data.
    point : array_like
        A point on the boundary of ``grid.domain``.
    grid : Grid
        Supplies the domain and the tolerance (one grid spacing).

    Returns
    -------
    float
        g(point).

    Raises
    ------
    ContractViolation
        If the point lies farther than one grid spacing from the boundary.
    """
    point = np.asarray(point, dtype=float).reshape(1, -1)
    distance = float(grid.domain.boundary_distance(point)[0])
    if distance > grid.spacing:
        raise ContractViolation(
            f"Point {point[0].tolist()} is {distance:.3g} away from the boundary "
            f"(tolerance {grid.spacing:.3g})."
        )
    return float(g.evaluate(point)[0])


class BoundaryTrace:
    """
    Dirichlet data evaluated at the cut points of a grid.

    ``values[slot, node]`` is g at the boundary point where arm ``slot`` of
    ``node`` is cut, and zero for arms that reach another node.

    Parameters
    ----------
    grid : Grid
        The grid whose cut points are evaluated.
    g : BoundarySpec | None
        The boundary data; homogeneous data if None.
    """

    def __init__(self, grid: Grid, g: BoundarySpec | None = None):
        self.g = g if g is not None else ConstantBoundary(value=0.0)
        values = np.zeros(grid.arms.shape)
        cut = grid.cut_mask
        if cut.any():
            values[cut] = self.g.evaluate(grid.cut_points[cut])
        values.setflags(write=False)
        self.values = values
        self.max_abs = float(np.abs(values[cut]).max()) if cut.any() else 0.0
        self.max = float(values[cut].max()) if cut.any() else 0.0
        self.min = float(values[cut].min()) if cut.any() else 0.0
