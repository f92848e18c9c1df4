"""
Copyright 2026 TESCAN 3DIM, s.r.o.
All rights reserved
"""

import csv
import platform
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Iterable

import numpy as np
import yaml
from pydantic import BaseModel, Field

from puccigrad.grid.Grid import Grid
from puccigrad.levelset.measure import distribution_function
from puccigrad.operators.pucci import gradient_field
from puccigrad.solvers.outer_fixedpoint import PipelineReport

AXIS_NAMES = ("x", "y", "z")


class Verdict(BaseModel):
    name: str
    passed: bool
    value: float | None = None
    threshold: float | None = None
    detail: str = ""


class RunReport(BaseModel):
    """
    Everything a run leaves behind besides its CSV files. The report holds no
    wall-clock data, so it is reproducible byte for byte.
    """

    mode: str
    config: dict[str, Any]
    verdicts: list[Verdict] = Field(default_factory=list)
    metrics: dict[str, Any] = Field(default_factory=dict)
    environment: dict[str, str] = Field(default_factory=dict)
    exit_code: int = 0
    error: str | None = None

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)


def environment_fingerprint() -> dict[str, str]:
    packages = {}
    for name in ("puccigrad", "numpy", "scipy", "pydantic"):
        try:
            packages[name] = version(name)
        except PackageNotFoundError:
            packages[name] = "unknown"
    return {
        "python": platform.python_version(),
        "platform": platform.platform(),
        **packages,
    }


def format_value(value) -> str:
    """
    Locale-independent text for a CSV cell; reals keep 17 significant digits.
    """
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    return f"{float(value):.17g}"


def write_csv(path: str | Path, header: list[str], rows: Iterable[Iterable]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    return path


def write_solution_csv(
    path: str | Path, grid: Grid, u: np.ndarray, h: np.ndarray, boundary=None
) -> Path:
    """
    One row per active node: coordinates, u, |Du|, |{u >= u(x)}| and h.
    """
    grad_norm = np.linalg.norm(gradient_field(u, grid, boundary), axis=1)
    df = distribution_function(u, grid)
    superlevel = df.superlevel[df.level_index(u)]
    header = [*AXIS_NAMES[: grid.dimension], "u", "|Du|", "superlevel-measure", "h"]
    rows = (
        [*grid.coordinates[k], u[k], grad_norm[k], superlevel[k], h[k]]
        for k in range(grid.size)
    )
    return write_csv(path, header, rows)


def write_pipeline_logs(directory: str | Path, tag: str, report: PipelineReport) -> None:
    """
    Picard gap history and inner-solve residual history of a pipeline run.
    The inner log is the only artifact that carries wall-clock times.
    """
    directory = Path(directory)
    picard_rows, inner_rows = [], []
    for stage in report.stages:
        i = "exact" if stage.i is None else stage.i
        for m, gap in enumerate(stage.gaps, start=1):
            picard_rows.append([stage.eps, i, m, gap])
        for m, inner in enumerate(stage.inner_reports, start=1):
            for it, residual, wall_ms in inner.history:
                inner_rows.append([stage.eps, i, m, it, residual, wall_ms])
    write_csv(directory / f"picard_{tag}.csv", ["eps", "i", "step", "gap"], picard_rows)
    write_csv(
        directory / f"inner_{tag}.csv",
        ["eps", "i", "picard_step", "iter", "residual_inf", "wall_ms"],
        inner_rows,
    )


def pipeline_metrics(report: PipelineReport) -> dict[str, Any]:
    """
    Deterministic summary of a pipeline report.
    """
    return {
        "eps_ladder": report.eps_ladder,
        "stages": len(report.stages),
        "picard_iterations": sum(s.picard_iterations for s in report.stages),
        "inner_iterations": sum(r.iterations for s in report.stages for r in s.inner_reports),
        "fallbacks": sum(r.fallback for s in report.stages for r in s.inner_reports),
        "eps_gaps": report.eps_gaps,
        "sup_norms": report.sup_norms,
        "sup_bound": report.sup_bound,
        "tol_fixedpoint": report.tol_fixedpoint,
        "cauchy_gap": report.cauchy_gap,
    }


def write_report(path: str | Path, report: RunReport) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        yaml.safe_dump(
            report.model_dump(mode="json"),
            f,
            default_flow_style=False,
            sort_keys=False,
        )
    return path
