"""
Copyright 2026 TESCAN 3DIM, s.r.o.
All rights reserved
"""

import os
from typing import List, Optional

import pytest
import typer
import yaml

from puccigrad.config.run_settings import Mode, RunConfig, load_config
from puccigrad.exceptions import ConfigError
from puccigrad.internal.logging import configure_logging
from puccigrad.runner.RunOrchestrator import run

app = typer.Typer(
    help="This CLI tool runs the puccigrad solver, its radial oracles and property suites."
)


def _run_mode(
    mode: Mode,
    config: Optional[str],
    out: Optional[str],
    resolution: Optional[List[int]],
    debug: bool,
) -> None:
    """
    Load the configuration with the command line overrides, run it and exit
    with the run's exit code.
    """
    try:
        settings = load_config(
            config,
            mode=mode,
            output_dir=out,
            resolutions=list(resolution) if resolution else None,
        )
    except ConfigError as e:
        configure_logging(debug=debug)
        typer.echo(f"Configuration error: {e}", err=True)
        raise typer.Exit(code=e.exit_code)

    configure_logging(log_path=settings.log_path, debug=debug or settings.debug)

    raise typer.Exit(code=run(settings))


ConfigOption = typer.Option(None, "--config", help="Path to the run configuration YAML file.")
OutOption = typer.Option(None, "--out", help="Output directory, overrides output_dir.")
ResolutionOption = typer.Option(
    None, "--resolution", help="Resolution to run; repeat for a ladder. Overrides resolutions."
)
DebugOption = typer.Option(False, "--debug", help="Log at DEBUG level.")


@app.command(name="solve")
def solve(
    config: Optional[str] = ConfigOption,
    out: Optional[str] = OutOption,
    resolution: Optional[List[int]] = ResolutionOption,
    debug: bool = DebugOption,
):
    """
    Solve the configured problem and write the solution and convergence CSVs.
    """
    _run_mode("solve", config, out, resolution, debug)


@app.command(name="oracle-compare")
def oracle_compare(
    config: Optional[str] = ConfigOption,
    out: Optional[str] = OutOption,
    resolution: Optional[List[int]] = ResolutionOption,
    debug: bool = DebugOption,
):
    """
    Solve on a disk and compare with the radial oracle.
    """
    _run_mode("oracle-compare", config, out, resolution, debug)


@app.command(name="convergence-study")
def convergence_study(
    config: Optional[str] = ConfigOption,
    out: Optional[str] = OutOption,
    resolution: Optional[List[int]] = ResolutionOption,
    debug: bool = DebugOption,
):
    """
    Run a resolution ladder against the radial oracle and report observed orders.
    """
    _run_mode("convergence-study", config, out, resolution, debug)


@app.command(name="property-check")
def property_check(
    config: Optional[str] = ConfigOption,
    out: Optional[str] = OutOption,
    debug: bool = DebugOption,
):
    """
    Run the seeded property suites and report a verdict per property.
    """
    _run_mode("property-check", config, out, None, debug)


@app.command(name="test")
def test(
    test_path: str = "tests",
    slow: bool = typer.Option(False, "--slow", help="Include the slow acceptance tests."),
    junit_xml: Optional[str] = typer.Option(
        None,
        "--junit-xml",
    ),
):
    """
    Run the puccigrad test suite.

    Parameters
    ----------
    test_path : str
        Path to the directory containing the tests. Default is 'tests'.
    slow : bool
        Also run the tests marked slow (resolution 64 pipeline solves).
    junit_xml : Optional[str]
        If provided, the test results will be saved in JUnit XML format to the specified file.
    """
    args = [test_path]
    if not slow:
        args.extend(["-m", "not slow"])
    if junit_xml:
        args.extend(["--junit-xml", junit_xml])
    raise typer.Exit(code=int(pytest.main(args)))


def parse_flat_args(args: list[str]) -> dict:
    """
    Parses leftover CLI args like ['--schedule.eps_min', '1e-6', '--problem.gamma', '2']
    into a nested dict: {'schedule': {'eps_min': 1e-6}, 'problem': {'gamma': 2}}

    Parameters
    ----------
    args : list[str]
        Input CLI args.

    Returns
    -------
    dict
        Output nested dict.
    """
    updates = {}
    i = 0
    while i < len(args):
        arg = args[i]
        if arg.startswith("--"):
            key = arg[2:]
            # Support --key=value form
            if "=" in key:
                key, value = key.split("=", 1)
            else:
                i += 1
                value = args[i] if i < len(args) else None

            val = value
            if isinstance(val, str):
                val_lc = val.lower()
                if val_lc in {"null", "none"}:
                    val = None
                elif val_lc in {"true", "yes"}:
                    val = True
                elif val_lc in {"false", "no"}:
                    val = False
                elif "," in val:
                    # comma-separated values become a list
                    val = [yaml.safe_load(v.strip()) for v in val.split(",")]
                else:
                    val = yaml.safe_load(val)

            parts = key.split(".")
            target = updates
            for part in parts[:-1]:
                target = target.setdefault(part, {})
            target[parts[-1]] = val
        i += 1
    return updates


@app.command(
    name="generate-config",
    context_settings={"allow_extra_args": True, "ignore_unknown_options": True},
)
def generate_config(
    ctx: typer.Context,
    path: str = "puccigrad_config.yaml",
    overwrite: bool = typer.Option(
        None,
        help="Set to true/false to skip prompt; if not set, user will be prompted.",
    ),
) -> None:
    """
    Generate a fully defaulted yaml configuration file.

    Parameters
    ----------
    ctx : typer.Context
        Additional arguments such as ``--problem.gamma 2`` override the defaults.
    path : str
        The path where the configuration file will be saved. Default is 'puccigrad_config.yaml'.
    overwrite : bool | None
        If set to True, the existing file will be overwritten without prompting.
        If set to False, the existing file will not be overwritten. If not set,
        the user will be prompted to confirm overwriting.
    """
    if path and os.path.exists(path):
        if overwrite is None:
            overwrite = typer.confirm(
                f"The file '{path}' already exists. Do you want to overwrite it?",
                default=False,
            )
        if not overwrite:
            typer.echo(f"Keeping existing file '{os.path.abspath(path)}'.")
            return
        typer.echo(f"Overwriting existing file '{os.path.abspath(path)}'")
    else:
        typer.echo(f"Generating configuration file at '{os.path.abspath(path)}'")

    try:
        settings = RunConfig(**parse_flat_args(ctx.args))
    except ValueError as e:
        typer.echo(f"Configuration error: {e}", err=True)
        raise typer.Exit(code=ConfigError.exit_code)

    with open(path, "w") as f:
        yaml.safe_dump(
            settings.model_dump(mode="json"),
            f,
            default_flow_style=False,
            sort_keys=False,
        )


if __name__ == "__main__":
    app()
