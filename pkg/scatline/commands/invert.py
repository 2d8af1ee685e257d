"""``scatline invert``: transfer matrix and coefficient traces from reflection data."""

from __future__ import annotations

from pathlib import Path

import click
import numpy as np
import pandas as pd

from ..models import ScatteringData
from ..schemas import ComplexTraceSchema, MReconstructionSchema
from ..services.inverse import dispersion_A_boundary, invert, positive_half, reconstruct_B
from ..util.io import read_scattering_json, write_json, write_scattering_json, write_table
from . import config_option, emit_option, with_run_config


@click.command("invert")
@config_option
@click.option("--data", type=click.Path(dir_okay=False), required=True, help="Reflection data JSON.")
@click.option("--sign", type=click.Choice(["1", "-1"]), default="1", show_default=True, help="Trace sign of the selected branch.")
@click.option("--tail-tol", type=float, default=1e-2, show_default=True)
@click.option("--diag-band", type=float, default=None,
              help="Smallest tail distance from -1 read as diagonal (default from config).")
@click.option("--coefficients-out", type=click.Path(dir_okay=False), default=None,
              help="Also write reflection data with the reconstructed A and B.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@emit_option
@with_run_config("invert")
def invert_cmd(app, run_config, **params) -> None:
    """Classify the matrix case and reconstruct M."""
    sd = read_scattering_json(params["data"])
    band = app.config["CLASSIFY_BAND"] if params["diag_band"] is None else params["diag_band"]
    mrec = invert(sd, sign=int(params["sign"]), tail_tol=params["tail_tol"], diag_band=band)
    digest = run_config.digest()
    payload = MReconstructionSchema().dump(mrec)

    xi, r = positive_half(sd)
    a_trace = dispersion_A_boundary(sd, mrec, xi, eps=app.config["DISPERSION_EPS"])
    b_trace = reconstruct_B(sd, a_trace)
    payload["A"] = ComplexTraceSchema().dump_trace(a_trace)
    payload["B"] = ComplexTraceSchema().dump_trace(b_trace)
    if params["coefficients_out"]:
        rebuilt = ScatteringData(xi, r, sd.etas, A=a_trace.values, B=b_trace.values, support=sd.support)
        write_scattering_json(params["coefficients_out"], rebuilt, digest)

    write_json(params["out"], payload, digest)
    app.logger.info("Reconstruction case %s with %d branches", mrec.case.value, len(mrec.branches))

    if params["emit_plot_data"]:
        xi, r = positive_half(sd)
        frame = pd.DataFrame({
            "xi": xi,
            "abs_R": np.abs(r),
            "tail_g": (xi * (r + 1) / 2j).real,
            "four_over_T": 4.0 / (1.0 - np.abs(r) ** 2),
        })
        write_table(Path(params["emit_plot_data"]) / "reflection_tail.csv", frame, digest)
