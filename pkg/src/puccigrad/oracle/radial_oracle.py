"""
Copyright 2026 TESCAN 3DIM, s.r.o.
All rights reserved
"""

import csv
from typing import Callable

import numpy as np
from loguru import logger

from puccigrad.exceptions import ContractViolation, OracleInvalidError
from puccigrad.grid.domains import unit_ball_volume
from puccigrad.levelset.measure import MonotoneRHS

_log = logger.bind(log_type="ORACLE")


class RadialProfile:
    """
    Radial solution u(r) on [0, R], sampled on a uniform set of radii.

    Parameters
    ----------
    radii : np.ndarray
        Uniform sample radii from 0 to R.
    values : np.ndarray
        u at the radii.
    slopes : np.ndarray
        w = u' at the radii, zero at the centre.
    gamma, lam, Lam : float
        Problem constants the profile was built for.
    dimension : int
        Spatial dimension N.
    boundary_value : float
        u(R).
    valid : bool
        False when the profile left the radially non-decreasing regime.
    curvature_changes : list[float]
        Radii at which u'' changes sign.
    """

    def __init__(
        self,
        radii: np.ndarray,
        values: np.ndarray,
        slopes: np.ndarray,
        gamma: float,
        lam: float,
        Lam: float,
        dimension: int,
        boundary_value: float,
        valid: bool = True,
        curvature_changes: list[float] | None = None,
    ):
        for array in (radii, values, slopes):
            array.setflags(write=False)
        self.radii = radii
        self.values = values
        self.slopes = slopes
        self.gamma = gamma
        self.lam = lam
        self.Lam = Lam
        self.dimension = dimension
        self.radius = float(radii[-1])
        self.boundary_value = boundary_value
        self.valid = valid
        self.curvature_changes = list(curvature_changes or [])

    def __repr__(self) -> str:
        return (
            f"RadialProfile(N={self.dimension}, gamma={self.gamma:g}, lam={self.lam:g}, "
            f"Lam={self.Lam:g}, R={self.radius:g}, samples={self.radii.size}, valid={self.valid})"
        )

    def __call__(self, r):
        out = np.interp(r, self.radii, self.values)
        return float(out) if np.ndim(out) == 0 else out

    def on_points(self, points: np.ndarray) -> np.ndarray:
        """
        u(|x|) at a set of points, e.g. the grid coordinates.
        """
        return np.asarray(self(np.linalg.norm(np.atleast_2d(points), axis=1)))

    def superlevel_measure(self, r):
        """
        |{u >= u(r)}| = omega_N (R^N - r^N) for a radially non-decreasing profile.
        """
        n = self.dimension
        return unit_ball_volume(n) * (self.radius**n - np.asarray(r, dtype=float) ** n)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["r", "u", "w"])
            for row in zip(self.radii, self.values, self.slopes):
                writer.writerow([f"{x:.17g}" for x in row])


def _check_constants(gamma: float, lam: float, Lam: float, dimension: int, R: float) -> None:
    if gamma < 0.0:
        raise ContractViolation(f"gamma must be non-negative, got {gamma}.")
    if not 0.0 < lam <= Lam:
        raise ContractViolation(f"Ellipticity needs 0 < lam <= Lam, got lam={lam}, Lam={Lam}.")
    if dimension not in (2, 3):
        raise ContractViolation(f"Unsupported dimension {dimension}, expected 2 or 3.")
    if not R > 0.0:
        raise ContractViolation(f"Radius must be positive, got {R}.")


def _series_coefficient(c: float, gamma: float, Lam: float, dimension: int) -> float:
    beta = 1.0 / (gamma + 1.0)
    return (c / (Lam * (beta + dimension - 1.0))) ** beta


def closed_form_constant_rhs(
    gamma: float,
    lam: float,
    Lam: float,
    dimension: int,
    c: float,
    R: float = 1.0,
    g_const: float = 0.0,
    samples: int = 4096,
) -> RadialProfile:
    """
    Radial solution for a constant right-hand side c.

    u(r) = g - a (R^(beta+1) - r^(beta+1)) / (beta+1) with beta = 1/(gamma+1)
    and a = (c / (Lam (beta + N - 1)))^(1/(gamma+1)). Both u' and u'' are
    non-negative, so M+ applies Lam to every eigenvalue.

    Parameters
    ----------
    gamma : float
        Degeneracy exponent.
    lam, Lam : float
        Ellipticity constants.
    dimension : int
        Spatial dimension N.
    c : float
        The constant right-hand side, c >= 0.
    R : float
        Ball radius.
    g_const : float
        Boundary value.
    samples : int
        Number of radial intervals.

    Returns
    -------
    RadialProfile
        The sampled closed form.
    """
    _check_constants(gamma, lam, Lam, dimension, R)
    if c < 0.0:
        raise ContractViolation(f"c must be non-negative, got {c}.")
    beta = 1.0 / (gamma + 1.0)
    a = _series_coefficient(c, gamma, Lam, dimension)
    r = np.linspace(0.0, R, samples + 1)
    u = g_const - a * (R ** (beta + 1.0) - r ** (beta + 1.0)) / (beta + 1.0)
    w = a * r**beta
    return RadialProfile(r, u, w, gamma, lam, Lam, dimension, g_const)


def _radial_pucci(w, slope, r, lam: float, Lam: float, dimension: int):
    """
    Sign-split Pucci form of a radial Hessian: eigenvalue u'' once and u'/r
    with multiplicity N - 1.
    """

    def split(x):
        return Lam * np.maximum(x, 0.0) + lam * np.minimum(x, 0.0)

    return split(slope) + (dimension - 1) * split(w / r)


def verify_radial_substitution(
    profile: RadialProfile,
    f_of_r: Callable[[np.ndarray], np.ndarray] | float,
    tol: float | None = None,
) -> float:
    """
    Substitute a profile into the radial equation by finite differences.

    u' and u'' are taken from the sampled u alone with fourth-order centred
    differences, so perturbing u is always visible in the residual.

    Parameters
    ----------
    profile : RadialProfile
        Uniformly sampled profile with at least 256 intervals.
    f_of_r : callable | float
        The right-hand side as a function of r, or a constant.
    tol : float | None
        If given, a residual above it is logged as a warning.

    Returns
    -------
    float
        max |w|^gamma [M+ radial form] - f(r) over r in [R/10, R (1 - 1/256)].
    """
    r, u = profile.radii, profile.values
    if r.size < 257:
        raise ContractViolation(f"Profile needs at least 256 intervals, got {r.size - 1}.")
    dr = r[1] - r[0]
    R = profile.radius
    k = np.flatnonzero((r >= R / 10.0) & (r <= R * (1.0 - 1.0 / 256.0)))
    k = k[(k >= 2) & (k <= r.size - 3)]

    um2, um1, u0, up1, up2 = u[k - 2], u[k - 1], u[k], u[k + 1], u[k + 2]
    w = (-up2 + 8.0 * up1 - 8.0 * um1 + um2) / (12.0 * dr)
    slope = (-up2 + 16.0 * up1 - 30.0 * u0 + 16.0 * um1 - um2) / (12.0 * dr * dr)

    rk = r[k]
    rhs = f_of_r(rk) if callable(f_of_r) else np.full(rk.shape, float(f_of_r))
    factor = np.ones_like(w) if profile.gamma == 0.0 else np.abs(w) ** profile.gamma
    residual = factor * _radial_pucci(w, slope, rk, profile.lam, profile.Lam, profile.dimension) - rhs
    worst = float(np.abs(residual).max())
    if tol is not None and worst > tol:
        _log.warning(f"Radial substitution residual {worst:.3e} exceeds {tol:.3e} for {profile!r}.")
    return worst


def shoot_radial(
    f: MonotoneRHS,
    gamma: float,
    lam: float,
    Lam: float,
    dimension: int,
    R: float = 1.0,
    g_const: float = 0.0,
    samples: int = 4096,
) -> RadialProfile:
    """
    Radially non-decreasing solution for a general profile f.

    For such a solution |{u >= u(r)}| = omega_N (R^N - r^N), so the equation
    becomes the radial ODE |w|^gamma [Lam (w')^+ - lam (w')^- + (N-1) T(w/r)] = c(r)
    with c(r) = f(omega_N (R^N - r^N)). It is integrated for z = |w|^gamma w,
    which obeys z' = (gamma+1) Q(c - |w|^gamma (N-1) T(w/r)), Q dividing by
    Lam or lam according to the sign, so the Lam/lam choice follows the
    current curvature sign at every stage. u is carried in the same classical
    RK4 system. The start r_0 = R / samples uses the frozen-coefficient series
    w = a r^beta with a from c(0); u is shifted so that u(R) = g.

    Parameters
    ----------
    f : MonotoneRHS
        Right-hand side profile on [0, omega_N R^N].
    gamma : float
        Degeneracy exponent.
    lam, Lam : float
        Ellipticity constants.
    dimension : int
        Spatial dimension N.
    R : float
        Ball radius.
    g_const : float
        Boundary value.
    samples : int
        Number of radial intervals.

    Returns
    -------
    RadialProfile
        The profile; ``valid`` is False if w < 0 anywhere.

    Raises
    ------
    OracleInvalidError
        If z drops to zero or below while c(r) > 0.
    """
    _check_constants(gamma, lam, Lam, dimension, R)
    n = dimension
    omega = unit_ball_volume(n)
    p1 = gamma + 1.0
    beta = 1.0 / p1

    def c_of(r: float) -> float:
        return f(omega * (R**n - r**n))

    def slope_of(z: float) -> float:
        return np.sign(z) * abs(z) ** beta

    def curvature_source(r: float, z: float) -> float:
        w = slope_of(z)
        t = (n - 1) * (Lam * max(w / r, 0.0) + lam * min(w / r, 0.0))
        return c_of(r) - abs(w) ** gamma * t

    def rhs(r: float, z: float) -> tuple[float, float]:
        s = curvature_source(r, z)
        return p1 * (s / Lam if s >= 0.0 else s / lam), slope_of(z)

    r = np.linspace(0.0, R, samples + 1)
    dr = r[1] - r[0]
    z = np.zeros(r.size)
    u = np.zeros(r.size)

    a = _series_coefficient(c_of(0.0), gamma, Lam, n)
    z[1] = a**p1 * r[1]
    u[1] = a * r[1] ** (beta + 1.0) / (beta + 1.0)

    changes = []
    sign = np.sign(curvature_source(r[1], z[1]))
    for k in range(1, samples):
        rk, zk, uk = r[k], z[k], u[k]
        k1z, k1u = rhs(rk, zk)
        k2z, k2u = rhs(rk + 0.5 * dr, zk + 0.5 * dr * k1z)
        k3z, k3u = rhs(rk + 0.5 * dr, zk + 0.5 * dr * k2z)
        k4z, k4u = rhs(rk + dr, zk + dr * k3z)
        z[k + 1] = zk + dr * (k1z + 2.0 * k2z + 2.0 * k3z + k4z) / 6.0
        u[k + 1] = uk + dr * (k1u + 2.0 * k2u + 2.0 * k3u + k4u) / 6.0

        if z[k + 1] <= 0.0 and c_of(r[k + 1]) > 0.0:
            raise OracleInvalidError(
                f"Radial shooting lost monotonicity at r={r[k + 1]:.6g} while c(r)={c_of(r[k + 1]):.6g} > 0."
            )
        new_sign = np.sign(curvature_source(r[k + 1], z[k + 1]))
        if new_sign != 0 and sign != 0 and new_sign != sign:
            changes.append(float(r[k + 1]))
        if new_sign != 0:
            sign = new_sign

    w = np.sign(z) * np.abs(z) ** beta
    u += g_const - u[-1]
    valid = bool(np.all(w >= 0.0))
    if not valid:
        _log.warning("Radial shooting produced a decreasing profile; marking it invalid.")
    if changes:
        _log.debug(f"Curvature sign changes at r = {changes}.")
    return RadialProfile(r, u, w, gamma, lam, Lam, n, g_const, valid, changes)


def radial_rhs(f: MonotoneRHS, dimension: int, R: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """
    c(r) = f(omega_N (R^N - r^N)), the right-hand side a radially
    non-decreasing solution sees at radius r.
    """
    omega = unit_ball_volume(dimension)

    def c_of(r):
        return np.asarray(f(omega * (R**dimension - np.asarray(r, dtype=float) ** dimension)))

    return c_of
