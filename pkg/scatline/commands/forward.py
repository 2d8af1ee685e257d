"""``scatline forward``: reflection data from a potential and a transfer matrix."""

from __future__ import annotations

from pathlib import Path

import click
import numpy as np
import pandas as pd

from ..services.forward import reflection
from ..util.io import read_matrix_json, read_potential_csv, write_scattering_json, write_table
from . import config_option, emit_option, options_for, solver_options, with_run_config


def frequency_grid(xi_min: float, xi_max: float, n: int) -> np.ndarray:
    """Half log-spaced (dense near 0), half uniform, on one side of 0."""
    if xi_max < 0:
        return np.sort(-frequency_grid(-xi_max, -xi_min, n))
    half = n // 2
    return np.unique(np.concatenate((
        np.geomspace(xi_min, xi_max, half),
        np.linspace(xi_min, xi_max, n - half),
    )))


@click.command("forward")
@config_option
@click.option("--potential", type=click.Path(dir_okay=False), required=True, help="CSV with columns x, q.")
@click.option("--matrix", type=click.Path(dir_okay=False), required=True, help="JSON transfer matrix.")
@click.option("--support", type=float, default=None, help="Support bound S (default: max |x|).")
@click.option("--interpolation", type=click.Choice(["constant", "linear"]), default="constant", show_default=True)
@click.option("--xi-min", type=float, default=0.05, show_default=True)
@click.option("--xi-max", type=float, default=200.0, show_default=True)
@click.option("--n-xi", type=int, default=2000, show_default=True)
@click.option("--eta-max", type=float, default=None, help="Scan (0, eta_max] for bound states.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@solver_options
@emit_option
@with_run_config("forward")
def forward_cmd(app, run_config, **params) -> None:
    """Compute R(xi), A(xi), B(xi) and bound states."""
    q = read_potential_csv(params["potential"], params["support"], params["interpolation"])
    matrix = read_matrix_json(params["matrix"])
    xi = frequency_grid(params["xi_min"], params["xi_max"], params["n_xi"])
    sd = reflection(q, matrix, xi, eta_max=params["eta_max"], opts=options_for(app, params))
    digest = run_config.digest()
    write_scattering_json(params["out"], sd, digest)
    app.logger.info("Wrote %d reflection samples to %s", sd.xi.size, params["out"])

    if params["emit_plot_data"]:
        frame = pd.DataFrame({
            "xi": sd.xi,
            "R_re": sd.R.real,
            "R_im": sd.R.imag,
            "abs_R": np.abs(sd.R),
            "abs_A": np.abs(sd.A),
            "abs_B": np.abs(sd.B),
        })
        write_table(Path(params["emit_plot_data"]) / "reflection.csv", frame, digest)
