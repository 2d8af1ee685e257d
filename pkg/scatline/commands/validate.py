"""``scatline validate``: large-lambda validation suite."""

from __future__ import annotations

from dataclasses import asdict
from pathlib import Path

import click
import numpy as np
import pandas as pd

from ..errors import DomainError, SuiteFailure
from ..schemas import SuiteReportSchema
from ..services.asymval import run_appendix_suite
from ..util.io import read_matrix_json, read_potential_csv, write_json, write_table
from . import config_option, emit_option, options_for, solver_options, with_run_config


@click.command("validate")
@config_option
@click.option("--suite", type=click.Choice(["appendix"]), default="appendix", show_default=True)
@click.option("--matrix", type=click.Path(dir_okay=False), required=True)
@click.option("--potential", type=click.Path(dir_okay=False), required=True)
@click.option("--potential-tilde", type=click.Path(dir_okay=False), default=None,
              help="Second potential for the solution-combination decay checks.")
@click.option("--support", type=float, default=None)
@click.option("--interpolation", type=click.Choice(["constant", "linear"]), default="constant", show_default=True)
@click.option("--n-lambda", type=int, default=400, show_default=True)
@click.option("--k-max", type=int, default=20, show_default=True)
@click.option("--report", type=click.Path(dir_okay=False), required=True)
@solver_options
@emit_option
@with_run_config("validate")
def validate_cmd(app, run_config, **params) -> None:
    """Run the suite and write a report; exit 4 if any entry fails."""
    if params["k_max"] < 6:
        raise DomainError("k-max must be at least 6 so the bound ratios have a calibration contour.", fields={"k_max": params["k_max"]})
    q = read_potential_csv(params["potential"], params["support"], params["interpolation"])
    q_tilde = None
    if params["potential_tilde"]:
        q_tilde = read_potential_csv(params["potential_tilde"], q.support, params["interpolation"])
    matrix = read_matrix_json(params["matrix"])
    entries = run_appendix_suite(
        q,
        matrix,
        q_tilde=q_tilde,
        lambda_sweep=np.geomspace(1e3, 1e6, params["n_lambda"]),
        ks=range(5, params["k_max"] + 1),
        opts=options_for(app, params),
    )
    passed = all(e.passed for e in entries)
    digest = run_config.digest()
    report = SuiteReportSchema().dump({"suite": params["suite"], "passed": passed, "entries": entries})
    write_json(params["report"], report, digest)

    if params["emit_plot_data"]:
        frame = pd.DataFrame([asdict(e) for e in entries])
        frame["value"] = frame["value"].astype(str)
        write_table(Path(params["emit_plot_data"]) / "suite.csv", frame, digest)

    if not passed:
        failed = [e.tag for e in entries if not e.passed]
        raise SuiteFailure("Validation suite reported failures.", fields={"failed": failed})
