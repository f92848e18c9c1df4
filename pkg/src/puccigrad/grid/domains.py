"""
Copyright 2026 TESCAN 3DIM, s.r.o.
All rights reserved
"""

import math
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, model_validator


def unit_ball_volume(dimension: int) -> float:
    """
    Volume of the unit ball in R^N for the supported dimensions.

    Parameters
    ----------
    dimension : int
        Spatial dimension N, 2 or 3.

    Returns
    -------
    float
        pi for N = 2, 4 pi / 3 for N = 3.
    """
    if dimension == 2:
        return math.pi
    if dimension == 3:
        return 4.0 * math.pi / 3.0
    raise ValueError(f"Unsupported dimension {dimension}, expected 2 or 3.")


def _sphere_exit(points: np.ndarray, steps: np.ndarray, radius: float) -> np.ndarray:
    """
    Smallest s > 0 with |x + s d| = radius for points strictly inside the sphere.
    """
    a = np.einsum("ij,ij->i", steps, steps)
    b = np.einsum("ij,ij->i", points, steps)
    c = np.einsum("ij,ij->i", points, points) - radius**2
    root = np.sqrt(np.maximum(b * b - a * c, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        # the two forms avoid cancellation for either sign of b
        s = np.where(b > 0.0, -c / (b + root), (root - b) / a)
    return s


def _sphere_entry(points: np.ndarray, steps: np.ndarray, radius: float) -> np.ndarray:
    """
    Smallest s > 0 with |x + s d| = radius for points strictly outside the
    sphere, np.inf where the ray misses it.
    """
    a = np.einsum("ij,ij->i", steps, steps)
    b = np.einsum("ij,ij->i", points, steps)
    c = np.einsum("ij,ij->i", points, points) - radius**2
    disc = b * b - a * c
    hits = (b < 0.0) & (disc >= 0.0)
    root = np.sqrt(np.maximum(disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(hits, c / (root - b), np.inf)
    return s


class DiskDomain(BaseModel):
    """
    Origin-centred disk (N = 2) or ball (N = 3).
    """

    model_config = ConfigDict(extra="forbid", frozen=True)
    shape: Literal["disk"] = "disk"
    radius: float = Field(default=1.0, gt=0.0)
    dimension: Literal[2, 3] = 2

    def measure(self) -> float:
        return unit_ball_volume(self.dimension) * self.radius**self.dimension

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.full(self.dimension, -self.radius)
        return lo, -lo

    def enclosing_radius(self) -> float:
        return self.radius

    def contains(self, points: np.ndarray) -> np.ndarray:
        return np.einsum("ij,ij->i", points, points) < self.radius**2

    def exit_parameter(self, points: np.ndarray, steps: np.ndarray) -> np.ndarray:
        return _sphere_exit(points, steps, self.radius)

    def boundary_distance(self, points: np.ndarray) -> np.ndarray:
        return np.abs(np.linalg.norm(points, axis=1) - self.radius)


class RectangleDomain(BaseModel):
    """
    Axis-aligned box [0, w_1] x ... x [0, w_N].

    The corners put this shape outside the C^{1,1} theory; it is kept as a
    grid-aligned test geometry.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)
    shape: Literal["rectangle"] = "rectangle"
    widths: tuple[float, ...] = (1.0, 1.0)

    @model_validator(mode="after")
    def check_widths(self):
        if len(self.widths) not in (2, 3):
            raise ValueError(
                f"Rectangle needs 2 or 3 widths, got {len(self.widths)}."
            )
        for k, w in enumerate(self.widths):
            if not w > 0.0:
                raise ValueError(f"Rectangle width {k} must be positive, got {w}.")
        return self

    @property
    def dimension(self) -> int:
        return len(self.widths)

    def measure(self) -> float:
        return float(np.prod(self.widths))

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return np.zeros(self.dimension), np.asarray(self.widths, dtype=float)

    def enclosing_radius(self) -> float:
        return 0.5 * float(np.linalg.norm(self.widths))

    def contains(self, points: np.ndarray) -> np.ndarray:
        widths = np.asarray(self.widths)
        return np.all((points > 0.0) & (points < widths), axis=1)

    def exit_parameter(self, points: np.ndarray, steps: np.ndarray) -> np.ndarray:
        widths = np.asarray(self.widths)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(
                steps > 0.0,
                (widths - points) / steps,
                np.where(steps < 0.0, -points / steps, np.inf),
            )
        return s.min(axis=1)

    def boundary_distance(self, points: np.ndarray) -> np.ndarray:
        widths = np.asarray(self.widths)
        outside = np.linalg.norm(
            np.maximum(points - widths, 0.0) + np.maximum(-points, 0.0), axis=1
        )
        inside = np.minimum(points, widths - points).min(axis=1)
        return np.where(outside > 0.0, outside, np.abs(inside))


class AnnulusDomain(BaseModel):
    """
    Origin-centred annulus (N = 2) or spherical shell (N = 3).
    """

    model_config = ConfigDict(extra="forbid", frozen=True)
    shape: Literal["annulus"] = "annulus"
    r_in: float = Field(default=0.5, gt=0.0)
    r_out: float = Field(default=1.0, gt=0.0)
    dimension: Literal[2, 3] = 2

    @model_validator(mode="after")
    def check_radii(self):
        if not self.r_in < self.r_out:
            raise ValueError(
                f"Annulus needs r_in < r_out, got r_in={self.r_in}, r_out={self.r_out}."
            )
        return self

    def measure(self) -> float:
        n = self.dimension
        return unit_ball_volume(n) * (self.r_out**n - self.r_in**n)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.full(self.dimension, -self.r_out)
        return lo, -lo

    def enclosing_radius(self) -> float:
        return self.r_out

    def contains(self, points: np.ndarray) -> np.ndarray:
        r2 = np.einsum("ij,ij->i", points, points)
        return (r2 > self.r_in**2) & (r2 < self.r_out**2)

    def exit_parameter(self, points: np.ndarray, steps: np.ndarray) -> np.ndarray:
        return np.minimum(
            _sphere_exit(points, steps, self.r_out),
            _sphere_entry(points, steps, self.r_in),
        )

    def boundary_distance(self, points: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(points, axis=1)
        return np.minimum(np.abs(r - self.r_in), np.abs(r - self.r_out))


Domain = Annotated[
    Union[DiskDomain, RectangleDomain, AnnulusDomain],
    Field(discriminator="shape"),
]

DomainAdapter = TypeAdapter(Domain)
