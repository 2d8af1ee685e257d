"""``scatline recover``: piecewise-constant potential from scattering data."""

from __future__ import annotations

from pathlib import Path

import click
import numpy as np
import pandas as pd

from ..errors import DomainError
from ..services.compact import (
    l_curve,
    m_trace_from_data,
    m_trace_from_scattering,
    recover_potential,
    sample_lambdas,
)
from ..util.io import read_matrix_json, read_scattering_json, write_potential_csv, write_table
from . import config_option, emit_option, options_for, solver_options, with_run_config


def _parse_regs(text: str) -> list[float]:
    try:
        regs = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise DomainError("L-curve weights must be comma-separated numbers.", fields={"l_curve": text}) from exc
    if not regs or min(regs) <= 0:
        raise DomainError("L-curve weights must be positive.", fields={"l_curve": text})
    return regs


@click.command("recover")
@config_option
@click.option("--data", type=click.Path(dir_okay=False), required=True, help="Reflection data JSON with A/B traces.")
@click.option("--matrix", type=click.Path(dir_okay=False), required=True, help="JSON transfer matrix.")
@click.option("--support", type=float, required=True)
@click.option("--cells", type=int, default=8, show_default=True)
@click.option("--reg", type=float, default=1e-4, show_default=True)
@click.option("--target", type=click.Choice(["continued", "real-axis"]), default="continued", show_default=True,
              help="Data m-function continued off the axis, or built from real-axis A/B.")
@click.option("--lambdas", type=click.Choice(["mixed", "ray", "strip"]), default="mixed", show_default=True,
              help="Spectral samples for the continued target.")
@click.option("--n-lambda", type=int, default=60, show_default=True)
@click.option("--xi-window", type=(float, float), default=(0.5, 10.0), show_default=True,
              help="Frequency window of the real-axis target.")
@click.option("--max-iter", type=int, default=200, show_default=True)
@click.option("--restarts", type=int, default=0, show_default=True)
@click.option("--seed", type=int, default=None, help="Seed for restart perturbations (default from config).")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--history", type=click.Path(dir_okay=False), default=None, help="CSV of iter, misfit, gradnorm.")
@click.option("--l-curve", type=str, default=None, help="Comma-separated weights for an L-curve sweep.")
@solver_options
@emit_option
@with_run_config("recover")
def recover_cmd(app, run_config, **params) -> None:
    """Fit a potential to the m-function built from the data."""
    sd = read_scattering_json(params["data"])
    matrix = read_matrix_json(params["matrix"])
    opts = options_for(app, params)
    seed = app.config["SEED"] if params["seed"] is None else params["seed"]
    if params["target"] == "continued":
        lambdas = sample_lambdas(params["lambdas"], params["n_lambda"])
        target = m_trace_from_data(sd, matrix, params["support"], lambdas, eps=app.config["DISPERSION_EPS"])
    else:
        target = m_trace_from_scattering(sd, params["support"], xi_window=params["xi_window"])
    result = recover_potential(
        sd,
        matrix,
        params["support"],
        params["cells"],
        reg=params["reg"],
        target=target,
        max_iter=params["max_iter"],
        restarts=params["restarts"],
        seed=seed,
        opts=opts,
    )
    digest = run_config.digest()
    write_potential_csv(params["out"], result.grid, digest)
    history = pd.DataFrame(
        [(h.iteration, h.misfit, h.gradnorm) for h in result.history],
        columns=["iter", "misfit", "gradnorm"],
    )
    if params["history"]:
        write_table(params["history"], history, digest)
    if result.stagnated:
        app.logger.warning("Recovery stagnated; misfit %.3e", result.misfit)
    app.logger.info("Recovered %d cells, misfit %.3e", params["cells"], result.misfit)

    sweep = None
    if params["l_curve"]:
        sweep = l_curve(target, matrix, params["support"], params["cells"], _parse_regs(params["l_curve"]),
                        opts=opts, max_iter=params["max_iter"])

    if params["emit_plot_data"]:
        out_dir = Path(params["emit_plot_data"])
        cells = result.grid.values[:-1]
        centers = 0.5 * (result.grid.nodes[:-1] + result.grid.nodes[1:])
        write_table(out_dir / "potential.csv", pd.DataFrame({"x": centers, "q": cells}), digest)
        write_table(out_dir / "history.csv", history, digest)
        write_table(out_dir / "m_data.csv", pd.DataFrame({
            "lambda_re": target.lambdas.real,
            "lambda_im": target.lambdas.imag,
            "m_re": target.m_values.real,
            "m_im": target.m_values.imag,
        }), digest)
        if sweep is not None:
            write_table(out_dir / "l_curve.csv", sweep, digest)
