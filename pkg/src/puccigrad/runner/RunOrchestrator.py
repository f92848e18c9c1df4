"""
Copyright 2026 TESCAN 3DIM, s.r.o.
All rights reserved
"""

from pathlib import Path

import numpy as np
from loguru import logger

from puccigrad.config.run_settings import RunConfig
from puccigrad.exceptions import ConfigError, NonConvergenceError, PuccigradError
from puccigrad.grid.Grid import Grid, build_grid
from puccigrad.grid.boundary import BoundaryTrace
from puccigrad.levelset.measure import h_exact
from puccigrad.oracle.radial_oracle import (
    RadialProfile,
    closed_form_constant_rhs,
    radial_rhs,
    shoot_radial,
    verify_radial_substitution,
)
from puccigrad.runner.artifacts import (
    AXIS_NAMES,
    RunReport,
    Verdict,
    environment_fingerprint,
    pipeline_metrics,
    write_csv,
    write_pipeline_logs,
    write_report,
    write_solution_csv,
)
from puccigrad.runner.property_suite import run_property_suite
from puccigrad.solvers.outer_fixedpoint import PipelineReport, solve_grad

_log = logger.bind(log_type="RUN")

REPORT_NAME = "report.yaml"


class RunOrchestrator:
    """
    Runs one configured mode and writes its artifacts into the output
    directory:

    - ``solve``: ``solution_<n>.csv``, ``picard_<n>.csv``, ``inner_<n>.csv``
      per resolution.
    - ``oracle-compare``: as ``solve`` plus ``oracle_<n>.csv`` (node-wise
      comparison), ``oracle_profile.csv`` and ``oracle_errors.csv``.
    - ``convergence-study``: ``convergence.csv`` with the error and observed
      order per resolution.
    - ``property-check``: verdicts only.

    Every mode writes ``report.yaml``.

    Parameters
    ----------
    config : RunConfig
        The validated run configuration.
    """

    def __init__(self, config: RunConfig):
        self.config = config
        self.out = Path(config.output_dir)
        self.problem = config.problem_spec()
        self.report = RunReport(
            mode=config.mode,
            config=config.echo(),
            environment=environment_fingerprint(),
        )

    def run(self) -> int:
        """
        Run the configured mode.

        Returns
        -------
        int
            0 on success, 2 on a configuration error, 3 on solver
            non-convergence, 4 on a failed acceptance check or a violated bound.
        """
        self.out.mkdir(parents=True, exist_ok=True)
        handlers = {
            "solve": self.solve,
            "oracle-compare": self.oracle_compare,
            "convergence-study": self.convergence_study,
            "property-check": self.property_check,
        }
        try:
            with logger.contextualize(stage=self.config.mode):
                handlers[self.config.mode]()
            self.report.exit_code = 0 if self.report.passed else 4
        except NonConvergenceError as e:
            _log.error(str(e))
            self.report.error = str(e)
            self.report.exit_code = e.exit_code
            self.report.metrics["failure_history"] = [float(x) for x in e.history]
            if isinstance(e.report, PipelineReport):
                self.report.metrics["partial_pipeline"] = pipeline_metrics(e.report)
                write_pipeline_logs(self.out, "failed", e.report)
        except PuccigradError as e:
            _log.error(str(e))
            self.report.error = str(e)
            self.report.exit_code = e.exit_code

        for verdict in self.report.verdicts:
            if not verdict.passed:
                _log.error(
                    f"Acceptance check {verdict.name} failed: {verdict.value} vs {verdict.threshold}."
                )
        write_report(self.out / REPORT_NAME, self.report)
        _log.info(f"Run finished with exit code {self.report.exit_code}.")
        return self.report.exit_code

    # -- modes ----------------------------------------------------------------

    def _solve_at(self, resolution: int, eps0: float | None = None) -> tuple[Grid, np.ndarray, PipelineReport]:
        grid = build_grid(self.problem.domain, resolution)
        plan = self.config.plan()
        if eps0 is not None:
            plan = plan.model_copy(update={"eps0": eps0})
        with logger.contextualize(stage=f"n={resolution}"):
            u, pipeline = solve_grad(self.problem, plan, grid)

        tag = str(resolution) if eps0 is None else f"{resolution}_eps0_{eps0:g}"
        boundary = BoundaryTrace(grid, self.problem.g)
        write_solution_csv(
            self.out / f"solution_{tag}.csv", grid, u, h_exact(u, self.problem.f, grid), boundary
        )
        write_pipeline_logs(self.out, tag, pipeline)
        self.report.metrics[f"pipeline_{tag}"] = pipeline_metrics(pipeline)
        return grid, u, pipeline

    def solve(self) -> None:
        for resolution in self.config.resolutions:
            self._solve_at(resolution)

    def _oracle(self) -> RadialProfile:
        """
        Radial reference solution for the configured problem on a disk.
        For gamma = 0 and lam = Lam the regularised equation is again a
        Poisson problem, so the reference includes the eps_min correction.
        """
        domain, problem = self.problem.domain, self.problem
        g = problem.g
        g_const = None
        if g.kind == "constant":
            g_const = g.value
        elif g.kind == "radial" and len({v for _, v in g.table}) == 1:
            g_const = g.table[0][1]
        if domain.shape != "disk" or g_const is None:
            raise ConfigError(
                "The radial oracle needs a disk domain and constant boundary data."
            )

        samples = self.config.acceptance.oracle_samples
        n, R = domain.dimension, domain.radius
        ell = problem.ell
        if problem.f.is_constant:
            c = problem.f(0.0)
            if problem.gamma == 0.0 and ell.lam == ell.Lam:
                c *= ell.Lam / (ell.Lam + self.config.schedule.eps_min)
            profile = closed_form_constant_rhs(problem.gamma, ell.lam, ell.Lam, n, c, R, g_const, samples)
            residual = verify_radial_substitution(profile, c)
        else:
            profile = shoot_radial(problem.f, problem.gamma, ell.lam, ell.Lam, n, R, g_const, samples)
            residual = verify_radial_substitution(profile, radial_rhs(problem.f, n, R))

        tol = self.config.acceptance.oracle_residual_tol
        self.report.verdicts.append(
            Verdict(name="oracle_self_residual", passed=residual <= tol, value=residual, threshold=tol)
        )
        self.report.verdicts.append(
            Verdict(name="oracle_valid", passed=profile.valid, detail=repr(profile))
        )
        profile.to_csv(self.out / "oracle_profile.csv")
        return profile

    @staticmethod
    def _relative_error(grid: Grid, u: np.ndarray, profile: RadialProfile) -> tuple[float, np.ndarray]:
        reference = profile.on_points(grid.coordinates)
        scale = float(np.abs(reference).max())
        error = np.abs(u - reference)
        return float(error.max()) / (scale if scale > 0.0 else 1.0), reference

    def _error_ladder(self, write_nodes: bool) -> list[tuple[int, float, float]]:
        profile = self._oracle()
        acceptance = self.config.acceptance
        rows = []
        for resolution in self.config.resolutions:
            grid, u, pipeline = self._solve_at(resolution)
            error, reference = self._relative_error(grid, u, profile)
            rows.append((resolution, grid.spacing, error))
            _log.info(f"n={resolution}: relative Linf error {error:.4e}")
            if write_nodes:
                write_csv(
                    self.out / f"oracle_{resolution}.csv",
                    [*AXIS_NAMES[: grid.dimension], "u", "u_oracle", "abs_error"],
                    (
                        [*grid.coordinates[k], u[k], reference[k], abs(u[k] - reference[k])]
                        for k in range(grid.size)
                    ),
                )
            if acceptance.check_cauchy and pipeline.cauchy_gap is not None:
                limit = 10.0 * pipeline.tol_fixedpoint
                self.report.verdicts.append(
                    Verdict(
                        name=f"cauchy_in_eps_n{resolution}",
                        passed=bool(pipeline.cauchy_ok),
                        value=pipeline.cauchy_gap,
                        threshold=limit,
                    )
                )
            if acceptance.alternate_eps0 is not None:
                _, u_alt, _ = self._solve_at(resolution, eps0=acceptance.alternate_eps0)
                limit = 10.0 * pipeline.tol_fixedpoint
                gap = float(np.abs(u - u_alt).max())
                self.report.verdicts.append(
                    Verdict(
                        name=f"ladder_independence_n{resolution}",
                        passed=gap <= limit,
                        value=gap,
                        threshold=limit,
                    )
                )

        final = rows[-1][2]
        self.report.verdicts.append(
            Verdict(
                name="relative_linf_error",
                passed=final <= acceptance.tolerance,
                value=final,
                threshold=acceptance.tolerance,
                detail=f"resolution {rows[-1][0]}",
            )
        )
        if acceptance.require_monotone and len(rows) > 1:
            errors = [row[2] for row in rows]
            self.report.verdicts.append(
                Verdict(
                    name="error_decreases_with_resolution",
                    passed=all(b < a for a, b in zip(errors[:-1], errors[1:])),
                    detail=", ".join(f"{e:.4e}" for e in errors),
                )
            )
        self.report.metrics["errors"] = [
            {"resolution": n, "h": h, "relative_linf_error": e} for n, h, e in rows
        ]
        return rows

    def oracle_compare(self) -> None:
        rows = self._error_ladder(write_nodes=True)
        write_csv(self.out / "oracle_errors.csv", ["resolution", "h", "relative_linf_error"], rows)

    def convergence_study(self) -> None:
        rows = self._error_ladder(write_nodes=False)
        table = []
        for k, (n, h, error) in enumerate(rows):
            order = None
            if k > 0 and error > 0.0 and rows[k - 1][2] > 0.0:
                order = float(np.log(rows[k - 1][2] / error) / np.log(rows[k - 1][1] / h))
            table.append([n, h, error, order])
        write_csv(self.out / "convergence.csv", ["resolution", "h", "relative_linf_error", "order"], table)

        min_ratio = self.config.acceptance.min_error_ratio
        if min_ratio is not None:
            for (n0, _, e0), (n1, _, e1) in zip(rows[:-1], rows[1:]):
                ratio = e0 / e1 if e1 > 0.0 else np.inf
                self.report.verdicts.append(
                    Verdict(
                        name=f"error_ratio_{n0}_{n1}",
                        passed=ratio >= min_ratio,
                        value=float(ratio),
                        threshold=min_ratio,
                    )
                )

    def property_check(self) -> None:
        self.report.verdicts.extend(run_property_suite(self.config))


def run(config: RunConfig) -> int:
    """
    Run a configuration and return its exit code.
    """
    return RunOrchestrator(config).run()
