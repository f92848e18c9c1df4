"""
Copyright 2026 TESCAN 3DIM, s.r.o.
All rights reserved
"""

import numpy as np
import pytest
from loguru import logger

from puccigrad.grid.Grid import build_grid
from puccigrad.grid.domains import DiskDomain, RectangleDomain
from puccigrad.levelset.measure import MonotoneRHS
from puccigrad.operators.pucci import Ellipticity
from puccigrad.solvers.outer_fixedpoint import ProblemSpec, SchedulePlan

SEED = 20240611


@pytest.fixture(scope="session", autouse=True)
def quiet_logger():
    """
    Drop the default stderr sink so test output is not flooded by solver logs.
    """
    logger.remove()
    logger.configure(extra={"log_type": "TEST", "stage": ""})
    yield


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.fixture(scope="session")
def disk16():
    return build_grid(DiskDomain(radius=1.0), 16)


@pytest.fixture(scope="session")
def disk32():
    return build_grid(DiskDomain(radius=1.0), 32)


@pytest.fixture(scope="session")
def square10():
    return build_grid(RectangleDomain(widths=(1.0, 1.0)), 10)


@pytest.fixture
def ell_unit():
    return Ellipticity(lam=1.0, Lam=1.0)


@pytest.fixture
def constant_problem():
    """
    gamma = 1, lam = Lam = 1, f = 3/2, g = 0 on the unit disk; the exact
    solution is (2/3)(r^{3/2} - 1).
    """
    return ProblemSpec(gamma=1.0, f=MonotoneRHS.constant(1.5))


@pytest.fixture
def short_plan():
    """
    A two-rung ladder with a short mollification schedule, cheap enough for
    the default test run.
    """
    return SchedulePlan(eps0=2e-2, eps_min=1e-2, i0=4, i_max=8)
