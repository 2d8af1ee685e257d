"""Reading and writing the file artefacts.

JSON artefacts go through the marshmallow schemas and are written with
sorted keys; CSV grids go through pandas with a fixed float format.
Every written file carries the configuration hash of the run that made
it, as a ``config_hash`` key in JSON and as a ``# config_hash=`` first
line in CSV.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import pandas as pd
from marshmallow import ValidationError as SchemaValidationError

from ..errors import ValidationError
from ..models import Interpolation, PotentialGrid, ScatteringData, TransferMatrix
from ..schemas import ScatteringDataSchema, TransferMatrixSchema

FLOAT_FORMAT = "%.17g"
# flags that change where results go or how fast they come, not what they are
UNHASHED_OPTIONS = frozenset({"out", "report", "history", "emit_plot_data", "l_curve", "config", "threads", "log_level"})


def _canonical(value):
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _canonical(v) for k, v in value.items()}
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, np.generic):
        return value.item()
    return value


def config_hash(command: str, options: dict) -> str:
    """SHA-256 over the canonical JSON of the result-relevant options."""
    relevant = {k: _canonical(v) for k, v in options.items() if k not in UNHASHED_OPTIONS}
    blob = json.dumps({"command": command, "options": relevant}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ValidationError("Input file does not exist.", fields={"path": str(path)}) from exc
    except json.JSONDecodeError as exc:
        raise ValidationError("Input file is not valid JSON.", fields={"path": str(path), "detail": str(exc)}) from exc


def _schema_load(schema, payload, path):
    try:
        return schema.load(payload, unknown="exclude")
    except SchemaValidationError as exc:
        raise ValidationError("Input failed validation.", fields={"path": str(path), "messages": exc.messages}) from exc


def read_matrix_json(path) -> TransferMatrix:
    return _schema_load(TransferMatrixSchema(), _load_json(path), path)


def read_scattering_json(path) -> ScatteringData:
    return _schema_load(ScatteringDataSchema(), _load_json(path), path)


def read_config_json(path) -> dict:
    payload = _load_json(path)
    if not isinstance(payload, dict):
        raise ValidationError("Config file must hold a JSON object.", fields={"path": str(path)})
    return {str(k).replace("-", "_"): v for k, v in payload.items()}


def write_json(path, payload: dict, digest: str) -> None:
    body = dict(payload)
    body["config_hash"] = digest
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_canonical(body), fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_scattering_json(path, sd: ScatteringData, digest: str) -> None:
    write_json(path, ScatteringDataSchema().dump_data(sd), digest)


def write_matrix_json(path, matrix: TransferMatrix, digest: str | None = None) -> None:
    """Flat ``m11 .. m22`` object, with ``config_hash`` when a digest is given."""
    payload = TransferMatrixSchema().dump_matrix(matrix)
    if digest is not None:
        write_json(path, payload, digest)
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_table(path, frame: pd.DataFrame, digest: str) -> None:
    """CSV with a ``# config_hash=`` header line."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# config_hash={digest}\n")
        frame.to_csv(fh, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def read_table(path) -> pd.DataFrame:
    try:
        return pd.read_csv(path, comment="#")
    except FileNotFoundError as exc:
        raise ValidationError("Input file does not exist.", fields={"path": str(path)}) from exc
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise ValidationError("Input file is not a readable CSV table.", fields={"path": str(path), "detail": str(exc)}) from exc


def read_potential_csv(path, support: float | None = None, interpolation: str = "constant") -> PotentialGrid:
    """Potential from a CSV with columns ``x`` and ``q``.

    Without ``support`` the bound is taken as ``max |x|``.
    """
    frame = read_table(path)
    missing = {"x", "q"} - set(frame.columns)
    if missing:
        raise ValidationError("Potential CSV needs columns x and q.", fields={"missing": sorted(missing)})
    if frame[["x", "q"]].isna().any().any():
        raise ValidationError("Potential CSV has empty cells.", fields={"path": str(path)})
    x = frame["x"].to_numpy(dtype=float)
    S = float(np.max(np.abs(x))) if support is None else float(support)
    return PotentialGrid(S, x, frame["q"].to_numpy(dtype=float), Interpolation(interpolation))


def potential_frame(grid: PotentialGrid) -> pd.DataFrame:
    return pd.DataFrame({"x": grid.nodes, "q": grid.values})


def write_potential_csv(path, grid: PotentialGrid, digest: str) -> None:
    write_table(path, potential_frame(grid), digest)
