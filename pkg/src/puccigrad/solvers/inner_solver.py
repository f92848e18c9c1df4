"""
Copyright 2026 TESCAN 3DIM, s.r.o.
All rights reserved
"""

import time
from concurrent.futures import ThreadPoolExecutor
from typing import Literal

import numpy as np
import scipy.sparse as sparse
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field
from scipy.sparse.linalg import spsolve

from puccigrad.exceptions import InnerNonConvergenceError
from puccigrad.grid.Grid import Grid
from puccigrad.operators.pucci import (
    Ellipticity,
    Nodes,
    gradient_field,
    laplacian_field,
    line_weights,
    pucci_plus_field,
    second_differences,
)

_log = logger.bind(log_type="SOLVER")

SMALL_FLOOR = 1e-14


class InnerConfig(BaseModel):
    """
    Parameters of the frozen right-hand side solve
    |Du|^gamma M+(D^2 u) + eps * Laplace(u) = h.

    The model is configured to forbid extra fields that are not defined in the model.
    """

    model_config = ConfigDict(extra="forbid")
    eps: float = Field(default=1e-3, gt=0.0)
    gamma: float = Field(default=1.0, ge=0.0)
    ell: Ellipticity = Ellipticity()
    method: Literal["pseudo_time", "policy"] = "policy"
    cfl_safety: float = Field(default=0.5, gt=0.0, le=1.0)
    # None means tol_scale * (1 + max|h|)
    tol_residual: float | None = Field(default=None, gt=0.0)
    tol_scale: float = Field(default=1e-8, gt=0.0)
    max_iters: int = Field(default=2_000_000, gt=0)
    max_newton: int = Field(default=100, gt=0)
    history_stride: int = Field(default=100, gt=0)
    threads: int = Field(default=1, ge=1)

    def residual_tolerance(self, h: np.ndarray) -> float:
        if self.tol_residual is not None:
            return self.tol_residual
        return self.tol_scale * (1.0 + float(np.abs(h).max(initial=0.0)))


class SolveReport(BaseModel):
    """
    Convergence record of one inner solve. ``history`` rows are
    (iteration, residual infinity norm, wall milliseconds).
    """

    method: str
    iterations: int = 0
    residual_inf: float = np.inf
    tolerance: float = 0.0
    history: list[tuple[int, float, float]] = Field(default_factory=list)
    wall_time: float = 0.0
    fallback: bool = False


def _operator_parts(
    u: np.ndarray,
    h: np.ndarray,
    cfg: InnerConfig,
    grid: Grid,
    boundary,
    nodes: Nodes,
) -> tuple[np.ndarray, np.ndarray]:
    pucci = pucci_plus_field(u, grid, cfg.ell, boundary, nodes=nodes)
    factor = np.ones_like(pucci)
    if cfg.gamma != 0.0:
        factor = np.linalg.norm(gradient_field(u, grid, boundary, nodes), axis=1) ** cfg.gamma
    lap = laplacian_field(u, grid, boundary, nodes)
    return factor * pucci + cfg.eps * lap - h[nodes], factor


def _chunks(size: int, threads: int) -> list[slice]:
    bounds = np.linspace(0, size, threads + 1).astype(int)
    return [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]


def _evaluate(u, h, cfg: InnerConfig, grid: Grid, boundary, pool: ThreadPoolExecutor | None):
    """
    Residual and degeneracy factor over all nodes, split into contiguous
    node chunks when a pool is given. Every node is computed from reads of
    ``u`` only, so the result does not depend on the number of chunks.
    """
    if pool is None:
        return _operator_parts(u, h, cfg, grid, boundary, slice(None))
    parts = list(
        pool.map(
            lambda nodes: _operator_parts(u, h, cfg, grid, boundary, nodes),
            _chunks(grid.size, cfg.threads),
        )
    )
    return (
        np.concatenate([p[0] for p in parts]),
        np.concatenate([p[1] for p in parts]),
    )


def residual(
    u: np.ndarray, h: np.ndarray, cfg: InnerConfig, grid: Grid, boundary=None
) -> np.ndarray:
    """
    Residual R = |Du|^gamma M+_disc(u) + eps * Laplace_disc(u) - h.

    Parameters
    ----------
    u : np.ndarray
        Field on the grid's active nodes.
    h : np.ndarray
        Frozen right-hand side.
    cfg : InnerConfig
        Solver parameters.
    grid : Grid
        The grid.
    boundary : BoundaryTrace | None
        Dirichlet data at the cut points; homogeneous if None.

    Returns
    -------
    np.ndarray
        R at every active node.
    """
    return _operator_parts(u, np.asarray(h, dtype=float), cfg, grid, boundary, slice(None))[0]


def _center_weights(cfg: InnerConfig, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """
    Magnitudes of the centre coefficients of the Pucci sum (worst frame) and
    of the Laplacian. On interior nodes both equal 2N / h^2.
    """
    per_line = []
    for line in range(len(grid.lines)):
        (_, wc, _), _ = line_weights(grid, line)
        per_line.append(-wc)
    pucci = np.max(
        [sum(per_line[line] for line in frame) for frame in grid.frame_lines], axis=0
    )
    lap = sum(per_line[line] for line in grid.axis_lines)
    return pucci, lap


def pseudo_time_solve(
    u0: np.ndarray,
    h: np.ndarray,
    cfg: InnerConfig,
    grid: Grid,
    boundary=None,
) -> tuple[np.ndarray, SolveReport]:
    """
    Solve the regularised problem by explicit pseudo-time relaxation.

    Iterates u <- u + tau(x) R(x) with the local step
    tau = cfl / (Lam |Du|^gamma c_P(x) + eps c_L(x) + floor / h^2), where
    c_P and c_L are the centre coefficients of the discrete Pucci operator
    and Laplacian. On interior nodes this is
    tau = cfl h^2 / (2N (Lam |Du|^gamma + eps)); at cut cells the shorter arms
    shrink the step so every update remains a convex combination of
    neighbour values plus a source term. Boundary data stay fixed.

    Parameters
    ----------
    u0 : np.ndarray
        Starting field on the active nodes.
    h : np.ndarray
        Frozen right-hand side.
    cfg : InnerConfig
        Solver parameters.
    grid : Grid
        The grid.
    boundary : BoundaryTrace | None
        Dirichlet data at the cut points; homogeneous if None.

    Returns
    -------
    tuple[np.ndarray, SolveReport]
        The converged field and its report.

    Raises
    ------
    InnerNonConvergenceError
        If max_iters is exhausted; carries the residual history.
    """
    start = time.perf_counter()
    h = np.asarray(h, dtype=float)
    u = np.array(u0, dtype=float, copy=True)
    tol = cfg.residual_tolerance(h)
    report = SolveReport(method="pseudo_time", tolerance=tol)
    center_pucci, center_lap = _center_weights(cfg, grid)
    floor = SMALL_FLOOR / grid.spacing**2

    pool = ThreadPoolExecutor(max_workers=cfg.threads) if cfg.threads > 1 else None
    try:
        for it in range(cfg.max_iters + 1):
            R, factor = _evaluate(u, h, cfg, grid, boundary, pool)
            r_inf = float(np.abs(R).max())
            converged = r_inf <= tol
            if it % cfg.history_stride == 0 or converged or it == cfg.max_iters:
                report.history.append(
                    (it, r_inf, 1e3 * (time.perf_counter() - start))
                )
            if converged:
                break
            if it == cfg.max_iters:
                report.iterations = it
                report.residual_inf = r_inf
                raise InnerNonConvergenceError(
                    f"Pseudo-time solve did not reach {tol:.3e} in {cfg.max_iters} iterations "
                    f"(residual {r_inf:.3e}).",
                    history=[row[1] for row in report.history],
                    report=report,
                )
            tau = cfg.cfl_safety / (
                cfg.ell.Lam * factor * center_pucci + cfg.eps * center_lap + floor
            )
            u = u + tau * R
    finally:
        if pool is not None:
            pool.shutdown()

    report.iterations = it
    report.residual_inf = r_inf
    report.wall_time = time.perf_counter() - start
    _log.debug(
        f"Pseudo-time solve converged in {it} iterations, residual {r_inf:.3e}."
    )
    return u, report


def _add_stencil(rows, cols, vals, grid: Grid, line: int, scale: np.ndarray, weights, mask=None):
    """
    Append the (plus, centre, minus) stencil of one line, scaled per node,
    to COO buffers. Cut arms carry no unknown and are skipped.
    """
    wp, wc, wm = weights
    nodes = np.arange(grid.size)
    if mask is None:
        mask = np.ones(grid.size, dtype=bool)
    rows.append(nodes[mask])
    cols.append(nodes[mask])
    vals.append((scale * wc)[mask])
    for slot, w in ((2 * line, wp), (2 * line + 1, wm)):
        nb = grid.neighbors[slot]
        keep = mask & (nb >= 0)
        rows.append(nodes[keep])
        cols.append(nb[keep])
        vals.append((scale * w)[keep])


def _jacobian(u: np.ndarray, cfg: InnerConfig, grid: Grid, boundary) -> tuple[sparse.csc_matrix, np.ndarray]:
    """
    Jacobian of the residual with the active frame frozen (policy) and the
    degeneracy factor linearised.
    """
    pucci, policy = pucci_plus_field(u, grid, cfg.ell, boundary, return_policy=True)
    grad = gradient_field(u, grid, boundary)
    norm = np.linalg.norm(grad, axis=1)
    factor = np.ones_like(norm) if cfg.gamma == 0.0 else norm**cfg.gamma

    rows, cols, vals = [], [], []
    deltas = second_differences(u, grid, boundary)
    for f, frame in enumerate(grid.frame_lines):
        in_frame = policy == f
        for line in frame:
            coefficient = np.where(deltas[line] >= 0.0, cfg.ell.Lam, cfg.ell.lam)
            second, _ = line_weights(grid, line)
            _add_stencil(rows, cols, vals, grid, line, factor * coefficient, second, in_frame)

    for line in grid.axis_lines:
        second, first = line_weights(grid, line)
        _add_stencil(rows, cols, vals, grid, line, np.full(grid.size, cfg.eps), second)
        if cfg.gamma != 0.0:
            with np.errstate(divide="ignore", invalid="ignore"):
                d_factor = np.where(
                    norm > 0.0, cfg.gamma * norm ** (cfg.gamma - 2.0) * grad[:, line], 0.0
                )
            _add_stencil(rows, cols, vals, grid, line, pucci * d_factor, first)

    jac = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.size, grid.size),
    ).tocsc()
    return jac, policy


def policy_accelerated_solve(
    u0: np.ndarray,
    h: np.ndarray,
    cfg: InnerConfig,
    grid: Grid,
    boundary=None,
) -> tuple[np.ndarray, SolveReport]:
    """
    Solve the regularised problem by policy iteration with Newton updates.

    Each step freezes the maximising frame of M+ and the sign pattern of its
    second differences, linearises the degeneracy factor, solves the sparse
    linear system, and backtracks until the residual infinity norm drops.
    A failed linear solve or a stalled line search hands the current iterate
    to pseudo_time_solve, so both methods land on the same discrete solution.

    Parameters
    ----------
    u0 : np.ndarray
        Starting field on the active nodes.
    h : np.ndarray
        Frozen right-hand side.
    cfg : InnerConfig
        Solver parameters.
    grid : Grid
        The grid.
    boundary : BoundaryTrace | None
        Dirichlet data at the cut points; homogeneous if None.

    Returns
    -------
    tuple[np.ndarray, SolveReport]
        The converged field and its report.
    """
    start = time.perf_counter()
    h = np.asarray(h, dtype=float)
    u = np.array(u0, dtype=float, copy=True)
    tol = cfg.residual_tolerance(h)
    report = SolveReport(method="policy", tolerance=tol)

    R = residual(u, h, cfg, grid, boundary)
    r_inf = float(np.abs(R).max())
    for it in range(cfg.max_newton + 1):
        report.history.append((it, r_inf, 1e3 * (time.perf_counter() - start)))
        if r_inf <= tol:
            report.iterations = it
            report.residual_inf = r_inf
            report.wall_time = time.perf_counter() - start
            _log.debug(f"Policy solve converged in {it} steps, residual {r_inf:.3e}.")
            return u, report
        if it == cfg.max_newton:
            break

        jac, _ = _jacobian(u, cfg, grid, boundary)
        try:
            step = spsolve(jac, -R)
        except (RuntimeError, ValueError) as e:
            _log.warning(f"Linear solve failed ({e}); falling back to pseudo-time.")
            break
        if not np.all(np.isfinite(step)):
            _log.warning("Linear solve broke down; falling back to pseudo-time.")
            break

        alpha, accepted = 1.0, False
        while alpha >= 1e-4:
            trial = u + alpha * step
            R_trial = residual(trial, h, cfg, grid, boundary)
            r_trial = float(np.abs(R_trial).max())
            if r_trial < (1.0 - 1e-4 * alpha) * r_inf:
                u, R, r_inf, accepted = trial, R_trial, r_trial, True
                break
            alpha *= 0.5
        if not accepted:
            _log.warning(
                f"Line search stalled at residual {r_inf:.3e}; falling back to pseudo-time."
            )
            break

    u, fallback_report = pseudo_time_solve(u, h, cfg, grid, boundary)
    offset = len(report.history)
    report.history.extend(
        (offset + k, r, t + 1e3 * (time.perf_counter() - start) - fallback_report.wall_time * 1e3)
        for k, r, t in fallback_report.history
    )
    report.iterations = offset + fallback_report.iterations
    report.residual_inf = fallback_report.residual_inf
    report.wall_time = time.perf_counter() - start
    report.fallback = True
    return u, report


def solve_inner(
    u0: np.ndarray,
    h: np.ndarray,
    cfg: InnerConfig,
    grid: Grid,
    boundary=None,
) -> tuple[np.ndarray, SolveReport]:
    """
    Dispatch to the configured inner solver.
    """
    if cfg.method == "pseudo_time":
        return pseudo_time_solve(u0, h, cfg, grid, boundary)
    return policy_accelerated_solve(u0, h, cfg, grid, boundary)


def laplace_system(grid: Grid, boundary=None) -> tuple[sparse.csc_matrix, np.ndarray]:
    """
    Axis Laplacian as Laplace_disc(u) = A u + b, b collecting the boundary data.
    """
    rows, cols, vals = [], [], []
    b = np.zeros(grid.size)
    for line in grid.axis_lines:
        second, _ = line_weights(grid, line)
        _add_stencil(rows, cols, vals, grid, line, np.ones(grid.size), second)
        if boundary is not None:
            for slot, w in ((2 * line, second[0]), (2 * line + 1, second[2])):
                cut = grid.cut_mask[slot]
                b[cut] += w[cut] * boundary.values[slot][cut]
    matrix = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.size, grid.size),
    ).tocsc()
    return matrix, b


def harmonic_extension(grid: Grid, boundary=None) -> np.ndarray:
    """
    Discrete harmonic extension of the boundary data (solve Laplace(u) = 0),
    the starting guess of the first solve.
    """
    if boundary is None:
        return np.zeros(grid.size)
    matrix, b = laplace_system(grid, boundary)
    return np.asarray(spsolve(matrix, -b), dtype=float)
