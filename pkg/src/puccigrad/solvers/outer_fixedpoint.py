"""
Copyright 2026 TESCAN 3DIM, s.r.o.
All rights reserved
"""

import time
from typing import Literal

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator

from puccigrad.exceptions import (
    BoundViolationError,
    InnerNonConvergenceError,
    NonConvergenceError,
    PicardNonConvergenceError,
)
from puccigrad.grid.Grid import Grid
from puccigrad.grid.boundary import BoundarySpec, BoundaryTrace, ConstantBoundary
from puccigrad.grid.domains import DiskDomain, Domain
from puccigrad.levelset.measure import MonotoneRHS, h_exact, h_mollified, lp_norm
from puccigrad.operators.pucci import Ellipticity
from puccigrad.solvers.inner_solver import (
    InnerConfig,
    SolveReport,
    harmonic_extension,
    solve_inner,
)

_log = logger.bind(log_type="PICARD")

SUP_BOUND_SLACK = 1.5


class ProblemSpec(BaseModel):
    """
    The Dirichlet problem |Du|^gamma M+(D^2 u) = f(|{u >= u(x)}|), u = g.

    The model is configured to forbid extra fields that are not defined in the model.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)
    gamma: float = Field(default=1.0, ge=0.0)
    ell: Ellipticity = Ellipticity()
    f: MonotoneRHS = MonotoneRHS.constant(1.0)
    g: BoundarySpec = ConstantBoundary(value=0.0)
    domain: Domain = DiskDomain()
    # integrability exponent of the L^p bound, defaults to N + 1
    p: float | None = None

    @model_validator(mode="after")
    def check_exponent(self):
        if self.p is not None and not self.p > self.domain.dimension:
            raise ValueError(
                f"Integrability exponent p must exceed N={self.domain.dimension}, got {self.p}."
            )
        return self

    @property
    def lp_exponent(self) -> float:
        return self.p if self.p is not None else float(self.domain.dimension + 1)


class SchedulePlan(BaseModel):
    """
    Continuation schedule of the pipeline.

    The eps ladder is eps0 * 2^-j for as long as it stays above eps_min,
    followed by eps_min itself. Every rung runs the mollification indices
    i0, 2 i0, 4 i0, ... up to i_max and finishes with the exact right-hand side.

    The model is configured to forbid extra fields that are not defined in the model.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)
    eps0: float = Field(default=1e-1, gt=0.0)
    eps_min: float = Field(default=1e-4, gt=0.0)
    i0: int = Field(default=4, ge=1)
    i_max: int = Field(default=64, ge=1)
    # None means 1e-6 * (1 + max|g|)
    tol_fixedpoint: float | None = Field(default=None, gt=0.0)
    max_picard: int = Field(default=60, ge=1)
    damping: float = Field(default=1.0, gt=0.0, le=1.0)
    inner_method: Literal["pseudo_time", "policy"] = "policy"
    cfl_safety: float = Field(default=0.5, gt=0.0, le=1.0)
    tol_residual: float | None = Field(default=None, gt=0.0)
    max_iters: int = Field(default=2_000_000, gt=0)
    threads: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def check_ladders(self):
        if not self.eps_min <= self.eps0:
            raise ValueError(
                f"eps_min must not exceed eps0, got eps0={self.eps0}, eps_min={self.eps_min}."
            )
        if not self.i0 <= self.i_max:
            raise ValueError(f"i_max must be at least i0, got i0={self.i0}, i_max={self.i_max}.")
        return self

    def eps_ladder(self) -> list[float]:
        ladder = []
        eps = self.eps0
        while eps > self.eps_min:
            ladder.append(eps)
            eps *= 0.5
        ladder.append(self.eps_min)
        return ladder

    def i_schedule(self) -> list[int]:
        schedule = []
        i = self.i0
        while i <= self.i_max:
            schedule.append(i)
            i *= 2
        return schedule

    def fixedpoint_tolerance(self, max_abs_g: float) -> float:
        if self.tol_fixedpoint is not None:
            return self.tol_fixedpoint
        return 1e-6 * (1.0 + max_abs_g)

    def inner_config(self, problem: ProblemSpec, eps: float) -> InnerConfig:
        return InnerConfig(
            eps=eps,
            gamma=problem.gamma,
            ell=problem.ell,
            method=self.inner_method,
            cfl_safety=self.cfl_safety,
            tol_residual=self.tol_residual,
            max_iters=self.max_iters,
            threads=self.threads,
        )


class StageReport(BaseModel):
    """
    One Picard stage at fixed (eps, i); ``i`` is None for the exact right-hand side.
    """

    eps: float
    i: int | None
    picard_iterations: int = 0
    gaps: list[float] = Field(default_factory=list)
    damping: float = 1.0
    rhs_lp_norm: float = 0.0
    inner_reports: list[SolveReport] = Field(default_factory=list)


class PipelineReport(BaseModel):
    eps_ladder: list[float] = Field(default_factory=list)
    stages: list[StageReport] = Field(default_factory=list)
    eps_gaps: list[float] = Field(default_factory=list)
    sup_norms: list[float] = Field(default_factory=list)
    sup_bound: float = 0.0
    tol_fixedpoint: float = 0.0
    cauchy_gap: float | None = None
    cauchy_ok: bool | None = None
    wall_time: float = 0.0


def sup_bound(problem: ProblemSpec, grid: Grid, boundary: BoundaryTrace | None = None) -> float:
    """
    A-priori bound on max|u| for every stage of the pipeline.

    Since h <= f(|Omega|), the solution lies above the constant right-hand side
    solution on the smallest ball containing the domain, whose depth has the
    closed form a rho^(beta+1) / (beta+1) with beta = 1/(gamma+1) and
    a = (c / (Lam (beta + N - 1)))^(1/(gamma+1)).

    Parameters
    ----------
    problem : ProblemSpec
        The problem.
    grid : Grid
        The grid, supplying the discrete |Omega|.
    boundary : BoundaryTrace | None
        The boundary data on the grid; built from ``problem.g`` if None.

    Returns
    -------
    float
        max|g| + 1.5 * C_geom * f(|Omega|)^(1/(gamma+1)).
    """
    if boundary is None:
        boundary = BoundaryTrace(grid, problem.g)
    n = grid.dimension
    beta = 1.0 / (problem.gamma + 1.0)
    a = (1.0 / (problem.ell.Lam * (beta + n - 1.0))) ** beta
    rho = problem.domain.enclosing_radius()
    c_geom = a * rho ** (beta + 1.0) / (beta + 1.0)
    return boundary.max_abs + SUP_BOUND_SLACK * c_geom * problem.f(grid.measure) ** beta


def _rhs(v: np.ndarray, f: MonotoneRHS, i: int | None, grid: Grid) -> np.ndarray:
    if i is None:
        return h_exact(v, f, grid)
    return h_mollified(v, f, i, grid)


def picard_stage(
    v0: np.ndarray,
    f: MonotoneRHS,
    i: int | None,
    cfg: InnerConfig,
    plan: SchedulePlan,
    grid: Grid,
    boundary: BoundaryTrace | None = None,
    p: float | None = None,
) -> tuple[np.ndarray, StageReport]:
    """
    Damped Picard iteration v <- (1 - theta) v + theta S(h^i_v) at fixed eps.

    S is the inner solve with frozen right-hand side, warm-started from the
    current iterate. The stage stops once the infinity-norm gap between
    iterates drops to the fixed-point tolerance. If the gap grows twice in a
    row the damping is halved, once per stage.

    Parameters
    ----------
    v0 : np.ndarray
        Starting field.
    f : MonotoneRHS
        Right-hand side profile.
    i : int | None
        Mollification index, or None for the exact right-hand side.
    cfg : InnerConfig
        Inner solver parameters at this eps.
    plan : SchedulePlan
        Damping, tolerance and Picard budget.
    grid : Grid
        The grid.
    boundary : BoundaryTrace | None
        Dirichlet data at the cut points; homogeneous if None.
    p : float | None
        Exponent of the L^p bound checked on every right-hand side;
        N + 1 if None.

    Returns
    -------
    tuple[np.ndarray, StageReport]
        The fixed point and the stage report.

    Raises
    ------
    PicardNonConvergenceError
        If max_picard iterations do not settle; carries the gap history.
    InnerNonConvergenceError
        If an inner solve fails; ``report`` is replaced by the stage report
        up to and including the failed solve.
    BoundViolationError
        If a right-hand side violates ||h||_p <= f(|Omega|) |Omega|^(1/p).
    """
    max_abs_g = boundary.max_abs if boundary is not None else 0.0
    tol = plan.fixedpoint_tolerance(max_abs_g)
    p = p if p is not None else float(grid.dimension + 1)
    lp_limit = f(grid.measure) * grid.measure ** (1.0 / p)
    theta = plan.damping
    halved = False
    report = StageReport(eps=cfg.eps, i=i, damping=theta)

    v = np.array(v0, dtype=float, copy=True)
    for m in range(1, plan.max_picard + 1):
        h = _rhs(v, f, i, grid)
        norm = lp_norm(h, grid, p)
        report.rhs_lp_norm = max(report.rhs_lp_norm, norm)
        if norm > lp_limit * (1.0 + 1e-12):
            raise BoundViolationError(
                f"||h||_{p:g} = {norm:.6e} exceeds f(|Omega|) |Omega|^(1/p) = {lp_limit:.6e}."
            )

        try:
            u, inner = solve_inner(v, h, cfg, grid, boundary)
        except InnerNonConvergenceError as e:
            if isinstance(e.report, SolveReport):
                report.inner_reports.append(e.report)
            report.picard_iterations = m
            report.damping = theta
            e.report = report
            raise
        report.inner_reports.append(inner)
        v_next = (1.0 - theta) * v + theta * u
        gap = float(np.abs(v_next - v).max())
        report.gaps.append(gap)
        v = v_next
        _log.debug(f"Picard step {m}: gap {gap:.3e} (theta {theta:g}).")

        if gap <= tol:
            report.picard_iterations = m
            report.damping = theta
            return v, report

        gaps = report.gaps
        if not halved and len(gaps) >= 3 and gaps[-1] > gaps[-2] > gaps[-3]:
            theta *= 0.5
            halved = True
            _log.warning(f"Picard gap increased twice in a row, damping halved to {theta:g}.")

    report.picard_iterations = plan.max_picard
    report.damping = theta
    raise PicardNonConvergenceError(
        f"Picard iteration did not settle below {tol:.3e} in {plan.max_picard} steps "
        f"(last gap {report.gaps[-1]:.3e}).",
        history=report.gaps,
        report=report,
    )


def solve_grad(
    problem: ProblemSpec, plan: SchedulePlan, grid: Grid
) -> tuple[np.ndarray, PipelineReport]:
    """
    Run the full continuation: for every eps of the ladder, Picard stages over
    the mollification schedule and a final stage with the exact right-hand
    side, each warm-started from the previous one.

    Parameters
    ----------
    problem : ProblemSpec
        The problem.
    plan : SchedulePlan
        The continuation schedule.
    grid : Grid
        A grid built over ``problem.domain``.

    Returns
    -------
    tuple[np.ndarray, PipelineReport]
        The solution at eps_min and the pipeline report.

    Raises
    ------
    NonConvergenceError
        If any stage fails; ``report`` holds the partial pipeline report.
    BoundViolationError
        If a rung exceeds the uniform sup bound.
    """
    start = time.perf_counter()
    boundary = BoundaryTrace(grid, problem.g)
    report = PipelineReport(
        eps_ladder=plan.eps_ladder(),
        sup_bound=sup_bound(problem, grid, boundary),
        tol_fixedpoint=plan.fixedpoint_tolerance(boundary.max_abs),
    )

    u = harmonic_extension(grid, boundary)
    previous = None
    for eps in report.eps_ladder:
        cfg = plan.inner_config(problem, eps)
        for i in [*plan.i_schedule(), None]:
            stage = f"eps={eps:.2e} i={i if i is not None else 'exact'}"
            with logger.contextualize(stage=stage):
                try:
                    u, stage_report = picard_stage(
                        u, problem.f, i, cfg, plan, grid, boundary, problem.lp_exponent
                    )
                except NonConvergenceError as e:
                    if isinstance(e.report, StageReport):
                        report.stages.append(e.report)
                    e.report = report
                    raise
            report.stages.append(stage_report)

        sup = float(np.abs(u).max())
        report.sup_norms.append(sup)
        if sup > report.sup_bound:
            raise BoundViolationError(
                f"max|u| = {sup:.6e} at eps={eps:.2e} exceeds the uniform bound {report.sup_bound:.6e}."
            )
        if previous is not None:
            report.eps_gaps.append(float(np.abs(u - previous).max()))
        previous = u
        _log.info(
            f"eps={eps:.2e} done: max|u| {sup:.6e}, "
            f"{sum(s.picard_iterations for s in report.stages if s.eps == eps)} Picard steps."
        )

    if report.eps_gaps:
        report.cauchy_gap = report.eps_gaps[-1]
        report.cauchy_ok = report.cauchy_gap <= 10.0 * report.tol_fixedpoint
    report.wall_time = time.perf_counter() - start
    return u, report
