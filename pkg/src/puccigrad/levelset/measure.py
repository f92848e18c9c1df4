"""
Copyright 2026 TESCAN 3DIM, s.r.o.
All rights reserved
"""

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from puccigrad.exceptions import ContractViolation


def _cell_measures(grid, size: int) -> np.ndarray:
    """
    Per-node measures of a Grid, or an explicit weight array (used for small
    hand-built examples).
    """
    measures = getattr(grid, "cell_measures", grid)
    measures = np.broadcast_to(np.asarray(measures, dtype=float), (size,))
    return measures


class MonotoneRHS(BaseModel):
    """
    Piecewise-linear right-hand side profile f on [0, |Omega|].

    f is given by a breakpoint table ((s_0, f_0), (s_1, f_1), ...), evaluated
    by linear interpolation and clamped beyond the first and last breakpoint.
    The table must be non-decreasing and non-negative.

    The model is configured to forbid extra fields that are not defined in the model.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)
    breakpoints: tuple[tuple[float, float], ...]

    @model_validator(mode="after")
    def check_breakpoints(self):
        if not self.breakpoints:
            raise ValueError("f needs at least one breakpoint.")
        for k, (s, value) in enumerate(self.breakpoints):
            if value < 0.0:
                raise ValueError(f"f must be non-negative at breakpoint {k}.")
            if k == 0:
                continue
            s_prev, value_prev = self.breakpoints[k - 1]
            if not s > s_prev:
                raise ValueError(f"f breakpoints must have increasing s at breakpoint {k}.")
            if value < value_prev:
                raise ValueError(f"f must be non-decreasing at breakpoint {k}.")
        return self

    @classmethod
    def constant(cls, value: float) -> "MonotoneRHS":
        return cls(breakpoints=((0.0, value),))

    @classmethod
    def identity(cls, upper: float) -> "MonotoneRHS":
        """
        f(s) = s on [0, upper], clamped above.
        """
        return cls(breakpoints=((0.0, 0.0), (upper, upper)))

    @property
    def is_constant(self) -> bool:
        return len({value for _, value in self.breakpoints}) == 1

    def __call__(self, s):
        s_points, values = np.asarray(self.breakpoints, dtype=float).T
        out = np.interp(s, s_points, values)
        return float(out) if np.ndim(out) == 0 else out


class DistributionFunction:
    """
    Superlevel-set measure s -> |{v >= s}| of a discrete field.

    Parameters
    ----------
    values : np.ndarray
        Sorted distinct field values s_1 < ... < s_k.
    superlevel : np.ndarray
        |{v >= s_j}| for each distinct value.
    level_measure : np.ndarray
        Measure of the nodes sitting exactly at each distinct value.
    """

    def __init__(self, values: np.ndarray, superlevel: np.ndarray, level_measure: np.ndarray):
        self.values = values
        self.superlevel = superlevel
        self.level_measure = level_measure
        self.total = float(superlevel[0])

    def __call__(self, s):
        """
        mu(s) = |{v >= s}|; the total for s at or below the minimum, zero
        above the maximum.
        """
        padded = np.append(self.superlevel, 0.0)
        out = padded[np.searchsorted(self.values, s, side="left")]
        return float(out) if np.ndim(out) == 0 else out

    def sublevel_closed(self) -> np.ndarray:
        """
        |{v <= s_j}| for each distinct value.
        """
        return np.cumsum(self.level_measure)

    def level_index(self, v: np.ndarray) -> np.ndarray:
        """
        Position of each entry of v among the distinct values.
        """
        return np.searchsorted(self.values, v, side="left")


def distribution_function(v: np.ndarray, grid) -> DistributionFunction:
    """
    Distribution function of a field by a single sort.

    Parameters
    ----------
    v : np.ndarray
        Field on the grid's active nodes.
    grid : Grid | array_like
        The grid, or the per-node cell measures.

    Returns
    -------
    DistributionFunction
        Exact superlevel measures of the discrete field.

    Raises
    ------
    ContractViolation
        If the field is empty.
    """
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        raise ContractViolation("Cannot build the distribution function of an empty field.")
    measures = _cell_measures(grid, v.size)
    values, inverse = np.unique(v, return_inverse=True)
    level_measure = np.bincount(inverse.ravel(), weights=measures, minlength=values.size)
    superlevel = np.cumsum(level_measure[::-1])[::-1]
    return DistributionFunction(values, superlevel, level_measure)


def h_exact(v: np.ndarray, f: MonotoneRHS, grid) -> np.ndarray:
    """
    Nonlocal right-hand side h_v(x) = f(|{v >= v(x)}|).

    Ties count fully: every node sharing the value v(x) belongs to the
    superlevel set of x.

    Parameters
    ----------
    v : np.ndarray
        Field on the grid's active nodes.
    f : MonotoneRHS
        Right-hand side profile.
    grid : Grid | array_like
        The grid, or the per-node cell measures.

    Returns
    -------
    np.ndarray
        h at every node, within [f(0), f(|Omega|)].
    """
    v = np.asarray(v, dtype=float)
    df = distribution_function(v, grid)
    return np.asarray(f(df.superlevel[df.level_index(v)]), dtype=float)


def h_mollified(v: np.ndarray, f: MonotoneRHS, i: int, grid) -> np.ndarray:
    """
    Mollified right-hand side h_v^i(x) = f(i * int_0^{1/i} |{v >= v(x) - t}| dt).

    The integrand is a step function of t, so the window average is computed
    exactly from the antiderivative of the distribution function, which is
    piecewise linear with kinks at the field values. Where the window fits
    inside the gap below v(x) the average equals |{v >= v(x)}| and is
    returned as such, so h^i coincides with h_exact once 1/i is below the
    minimal value gap.

    Parameters
    ----------
    v : np.ndarray
        Field on the grid's active nodes.
    f : MonotoneRHS
        Right-hand side profile.
    i : int
        Mollification index, i >= 1.
    grid : Grid | array_like
        The grid, or the per-node cell measures.

    Returns
    -------
    np.ndarray
        h^i at every node.
    """
    if i < 1:
        raise ContractViolation(f"Mollification index must be at least 1, got {i}.")
    v = np.asarray(v, dtype=float)
    df = distribution_function(v, grid)
    window = 1.0 / i
    levels, mu = df.values, df.superlevel

    # antiderivative of mu at the distinct values, anchored at the minimum
    antiderivative = np.concatenate(([0.0], np.cumsum(np.diff(levels) * mu[1:])))
    lower = levels - window
    below_min = lower < levels[0]
    at_lower = np.where(
        below_min,
        df.total * (lower - levels[0]),
        np.interp(lower, levels, antiderivative),
    )
    average = (antiderivative - at_lower) / window
    average = np.clip(average, mu, df.total)

    gaps = np.concatenate(([np.inf], np.diff(levels)))
    average = np.where(window <= gaps, mu, average)
    return np.asarray(f(average[df.level_index(v)]), dtype=float)


def decreasing_rearrangement(v: np.ndarray, grid, t: float) -> float:
    """
    Grad's rearrangement u*(t) = inf{s : |{v < s}| >= t} of a discrete field.

    The infimum over the half-line is not attained on a discrete field; the
    value returned is the field value s_j at which it is approached, i.e. the
    smallest s_j with |{v <= s_j}| >= t. For t = 0 this is the minimum.

    Parameters
    ----------
    v : np.ndarray
        Field on the grid's active nodes.
    grid : Grid | array_like
        The grid, or the per-node cell measures.
    t : float
        Measure level, 0 <= t <= |Omega|.

    Returns
    -------
    float
        The rearranged value.

    Raises
    ------
    ContractViolation
        If t lies outside [0, |Omega|].
    """
    df = distribution_function(v, grid)
    slack = 1e-12 * df.total
    if t < 0.0 or t > df.total + slack:
        raise ContractViolation(f"t={t} lies outside [0, {df.total}].")
    cumulative = df.sublevel_closed()
    j = int(np.searchsorted(cumulative, t, side="left"))
    return float(df.values[min(j, df.values.size - 1)])


def lp_norm(field: np.ndarray, grid, p: float) -> float:
    """
    Discrete L^p norm (sum |field|^p * cell measure)^(1/p).
    """
    field = np.asarray(field, dtype=float)
    measures = _cell_measures(grid, field.size)
    return float((np.abs(field) ** p * measures).sum() ** (1.0 / p))
