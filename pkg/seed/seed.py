"""Seed script for demo inputs.

Running this script writes a small set of example inputs (two
potentials and three transfer matrices) into a directory so the
commands can be tried straight away, for instance::

    python -m seed.seed examples-data
    python run.py forward --potential examples-data/bump.csv \\
        --matrix examples-data/M_diag.json --out sd.json
"""
from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from scatline.models import Interpolation, PotentialGrid, TransferMatrix
from scatline.util.io import write_matrix_json, write_potential_csv

DEMO_MATRICES = {
    "M_identity.json": TransferMatrix.identity(),
    "M_diag.json": TransferMatrix(2.0, 0.0, 0.0, 0.5),
    "M_shear.json": TransferMatrix(1.0, 1.0, 0.0, 1.0),
}


def bump(x):
    """Smooth bump ``(1 - x^2)^2`` on ``[-1, 1]``."""
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) < 1, (1 - x ** 2) ** 2, 0.0)


def write_examples(directory) -> list[Path]:
    """Write demo potentials and matrices into ``directory``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    potentials = {
        "bump.csv": PotentialGrid.from_function(bump, 1.0, 200, Interpolation.CONSTANT),
        "cells4.csv": PotentialGrid.from_cells(1.0, [1.5, -0.5, 2.0, 0.75]),
    }
    for name, grid in potentials.items():
        write_potential_csv(out / name, grid, "seed")
        written.append(out / name)
    for name, matrix in DEMO_MATRICES.items():
        write_matrix_json(out / name, matrix)
        written.append(out / name)
    return written


def run_seeds(directory: str = "examples-data") -> None:
    for path in write_examples(directory):
        print(f"wrote {path}")


if __name__ == "__main__":
    run_seeds(*sys.argv[1:2])
