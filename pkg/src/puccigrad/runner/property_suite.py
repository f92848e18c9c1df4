"""
Copyright 2026 TESCAN 3DIM, s.r.o.
All rights reserved
"""

import math

import numpy as np
from loguru import logger

from puccigrad.config.run_settings import RunConfig
from puccigrad.grid.Grid import build_grid
from puccigrad.grid.boundary import AffineBoundary, BoundaryTrace
from puccigrad.grid.domains import DiskDomain
from puccigrad.levelset.measure import MonotoneRHS, h_exact, h_mollified
from puccigrad.operators.pucci import Ellipticity, pucci_plus_exact
from puccigrad.oracle.radial_oracle import closed_form_constant_rhs, verify_radial_substitution
from puccigrad.runner.artifacts import Verdict
from puccigrad.solvers.inner_solver import InnerConfig, harmonic_extension, solve_inner

_log = logger.bind(log_type="RUN")


def _random_symmetric(rng: np.random.Generator, n: int) -> np.ndarray:
    a = rng.normal(size=(n, n))
    return 0.5 * (a + a.T)


def check_pucci_identities(ell: Ellipticity) -> Verdict:
    worst = 0.0
    for n in (2, 3):
        eye = np.eye(n)
        worst = max(worst, abs(pucci_plus_exact(eye, ell) - n * ell.Lam))
        worst = max(worst, abs(pucci_plus_exact(-eye, ell) + n * ell.lam))
        split = np.diag([1.0, -1.0] + [0.0] * (n - 2))
        worst = max(worst, abs(pucci_plus_exact(split, ell) - (ell.Lam - ell.lam)))
    return Verdict(name="pucci_identities", passed=worst <= 1e-12, value=worst, threshold=1e-12)


def check_trace_reduction(rng: np.random.Generator, count: int, Lam: float) -> Verdict:
    ell = Ellipticity(lam=Lam, Lam=Lam)
    worst = 0.0
    for _ in range(count):
        n = int(rng.integers(2, 4))
        s = _random_symmetric(rng, n)
        worst = max(worst, abs(pucci_plus_exact(s, ell) - Lam * np.trace(s)))
    return Verdict(name="trace_reduction", passed=worst <= 1e-12, value=worst, threshold=1e-12)


def check_pucci_structure(rng: np.random.Generator, count: int, ell: Ellipticity) -> list[Verdict]:
    """
    Subadditivity M(A + B) <= M(A) + M(B) and monotonicity M(A + P) >= M(A)
    for positive semidefinite P.
    """
    subadditive, monotone = -np.inf, -np.inf
    for _ in range(count):
        n = int(rng.integers(2, 4))
        a, b = _random_symmetric(rng, n), _random_symmetric(rng, n)
        q = rng.normal(size=(n, n))
        p = q @ q.T
        subadditive = max(
            subadditive,
            pucci_plus_exact(a + b, ell) - pucci_plus_exact(a, ell) - pucci_plus_exact(b, ell),
        )
        monotone = max(monotone, pucci_plus_exact(a, ell) - pucci_plus_exact(a + p, ell))
    return [
        Verdict(name="pucci_subadditivity", passed=subadditive <= 1e-9, value=subadditive, threshold=1e-9),
        Verdict(name="pucci_psd_monotonicity", passed=monotone <= 1e-9, value=monotone, threshold=1e-9),
    ]


def check_levelset_laws(rng: np.random.Generator, count: int, resolution: int) -> list[Verdict]:
    """
    On random fields with ties: h_exact <= f(|Omega|), h^i >= h_exact,
    h^i non-increasing in i, and h^i == h_exact once 1/i is below the
    minimal value gap.
    """
    grid = build_grid(DiskDomain(), resolution)
    total = grid.measure
    upper, domination, decrease, exact = -np.inf, -np.inf, -np.inf, 0.0
    for _ in range(count):
        knots = np.sort(rng.uniform(0.0, total, size=3))
        f = MonotoneRHS(
            breakpoints=tuple(zip([0.0, *knots], np.cumsum(rng.uniform(0.0, 1.0, size=4))))
        )
        v = np.round(rng.normal(size=grid.size), 2)
        h = h_exact(v, f, grid)
        upper = max(upper, float((h - f(total)).max()))

        previous = None
        for i in (1, 2, 4, 8, 16, 32, 64):
            hi = h_mollified(v, f, i, grid)
            domination = max(domination, float((h - hi).max()))
            if previous is not None:
                decrease = max(decrease, float((hi - previous).max()))
            previous = hi

        gap = float(np.diff(np.unique(v)).min())
        i_fine = int(math.floor(1.0 / gap)) + 1
        exact = max(exact, float(np.abs(h_mollified(v, f, i_fine, grid) - h).max()))
    return [
        Verdict(name="rhs_upper_bound", passed=upper <= 1e-12, value=upper, threshold=1e-12),
        Verdict(name="mollified_domination", passed=domination <= 1e-12, value=domination, threshold=1e-12),
        Verdict(name="mollified_monotone_in_i", passed=decrease <= 1e-12, value=decrease, threshold=1e-12),
        Verdict(name="mollified_exact_below_gap", passed=exact == 0.0, value=exact, threshold=0.0),
    ]


def check_max_principle(
    rng: np.random.Generator, pairs: int, comparisons: int, cfg: InnerConfig, resolution: int
) -> list[Verdict]:
    """
    Inner solutions with h >= 0 stay below max g; h1 <= h2 gives u1 >= u2.
    """
    grid = build_grid(DiskDomain(), resolution)
    excess = -np.inf
    for _ in range(pairs):
        g = AffineBoundary(
            offset=float(rng.uniform(-1.0, 1.0)),
            gradient=tuple(rng.uniform(-1.0, 1.0, size=grid.dimension)),
        )
        boundary = BoundaryTrace(grid, g)
        h = rng.uniform(0.0, 2.0, size=grid.size)
        u, _ = solve_inner(harmonic_extension(grid, boundary), h, cfg, grid, boundary)
        scale = 1.0 + boundary.max_abs + float(h.max())
        excess = max(excess, (float(u.max()) - boundary.max) / scale)

    ordering = -np.inf
    boundary = BoundaryTrace(grid)
    start = harmonic_extension(grid, boundary)
    for _ in range(comparisons):
        h1 = rng.uniform(0.0, 1.0, size=grid.size)
        h2 = h1 + rng.uniform(0.0, 1.0, size=grid.size)
        u1, _ = solve_inner(start, h1, cfg, grid, boundary)
        u2, _ = solve_inner(start, h2, cfg, grid, boundary)
        ordering = max(ordering, float((u2 - u1).max()))
    return [
        Verdict(name="discrete_max_principle", passed=excess <= 1e-6, value=excess, threshold=1e-6),
        Verdict(name="rhs_comparison", passed=ordering <= 1e-6, value=ordering, threshold=1e-6),
    ]


def check_closed_form_sweep() -> Verdict:
    worst = 0.0
    for gamma in (0.0, 1.0, 2.0):
        for lam, Lam in ((1.0, 1.0), (1.0, 2.0)):
            for n in (2, 3):
                profile = closed_form_constant_rhs(gamma, lam, Lam, n, c=1.5)
                worst = max(worst, verify_radial_substitution(profile, 1.5))
    return Verdict(name="closed_form_substitution", passed=worst <= 1e-6, value=worst, threshold=1e-6)


def run_property_suite(config: RunConfig) -> list[Verdict]:
    """
    Run every property check with the configuration's seeded generator.

    Parameters
    ----------
    config : RunConfig
        Supplies the seed, the suite sizes and the problem constants.

    Returns
    -------
    list[Verdict]
        One verdict per property, each with its worst observed value.
    """
    settings = config.property_check
    rng = np.random.default_rng(config.seed)
    ell = Ellipticity(lam=config.problem.lam, Lam=config.problem.Lam)
    cfg = InnerConfig(
        eps=settings.eps,
        gamma=config.problem.gamma,
        ell=ell,
        method=config.schedule.inner_method,
        threads=config.threads,
    )

    verdicts = [check_pucci_identities(ell)]
    verdicts.append(check_trace_reduction(rng, settings.matrices, ell.Lam))
    verdicts.extend(check_pucci_structure(rng, settings.matrices, ell))
    verdicts.extend(check_levelset_laws(rng, settings.fields, settings.resolution))
    verdicts.extend(
        check_max_principle(
            rng, settings.max_principle_pairs, settings.comparison_pairs, cfg, settings.resolution
        )
    )
    verdicts.append(check_closed_form_sweep())
    for verdict in verdicts:
        _log.info(f"{verdict.name}: {'pass' if verdict.passed else 'FAIL'} ({verdict.value:.3e})")
    return verdicts
