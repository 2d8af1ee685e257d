"""
Serialization schemas using Marshmallow for scattering artefacts.

These schemas convert the domain types to and from JSON-friendly
mappings. Complex arrays are split into real and imaginary lists so the
files stay plain JSON. Loading validates the payload and builds the
domain object in a ``post_load`` hook; domain invariants (unit
determinant, ``|R| < 1``) are then enforced by the types themselves.
"""

from __future__ import annotations

import numpy as np
from marshmallow import Schema, ValidationError, fields, post_load, pre_load, validate, validates_schema

from .models import (
    ComplexFunctionTrace,
    MatrixBranch,
    MatrixCase,
    EntryStatus,
    MReconstruction,
    ScatteringData,
    TransferMatrix,
)


def _float_list(**kwargs) -> fields.List:
    return fields.List(fields.Float(allow_nan=False), **kwargs)


def split_complex(values) -> tuple[list[float], list[float]]:
    values = np.asarray(values, dtype=complex)
    return values.real.tolist(), values.imag.tolist()


class TransferMatrixSchema(Schema):
    """Schema for a transfer matrix ``{"m11": .., "m12": .., "m21": .., "m22": ..}``.

    The nested form ``{"M": [[m11, m12], [m21, m22]]}`` is accepted on load.
    """

    m11 = fields.Float(required=True, allow_nan=False)
    m12 = fields.Float(required=True, allow_nan=False)
    m21 = fields.Float(required=True, allow_nan=False)
    m22 = fields.Float(required=True, allow_nan=False)

    @pre_load
    def flatten_nested(self, data, **kwargs):
        if not isinstance(data, dict) or "M" not in data:
            return data
        rows = data["M"]
        if not (isinstance(rows, list) and len(rows) == 2 and all(isinstance(r, list) and len(r) == 2 for r in rows)):
            raise ValidationError("M must be a 2x2 list of numbers.", field_name="M")
        (m11, m12), (m21, m22) = rows
        flat = {k: v for k, v in data.items() if k != "M"}
        flat.update(m11=m11, m12=m12, m21=m21, m22=m22)
        return flat

    @post_load
    def make_matrix(self, data, **kwargs) -> TransferMatrix:
        return TransferMatrix(data["m11"], data["m12"], data["m21"], data["m22"])

    def dump_matrix(self, matrix: TransferMatrix) -> dict:
        return self.dump({"m11": matrix.m11, "m12": matrix.m12, "m21": matrix.m21, "m22": matrix.m22})


class ScatteringDataSchema(Schema):
    """Schema for reflection data, optionally with ``A``/``B`` traces."""

    xi = _float_list(required=True, validate=validate.Length(min=1))
    R_re = _float_list(required=True)
    R_im = _float_list(required=True)
    etas = _float_list(load_default=list)
    A_re = _float_list(allow_none=True, load_default=None)
    A_im = _float_list(allow_none=True, load_default=None)
    B_re = _float_list(allow_none=True, load_default=None)
    B_im = _float_list(allow_none=True, load_default=None)
    support = fields.Float(allow_none=True, load_default=None, validate=validate.Range(min=0, min_inclusive=False))
    config_hash = fields.String(load_default=None)

    @validates_schema
    def check_lengths(self, data, **kwargs) -> None:
        n = len(data["xi"])
        for key in ("R_re", "R_im", "A_re", "A_im", "B_re", "B_im"):
            if data.get(key) is not None and len(data[key]) != n:
                raise ValidationError(f"{key} must have the same length as xi.", field_name=key)
        if (data.get("A_re") is None) != (data.get("B_re") is None):
            raise ValidationError("A and B traces must be given together.", field_name="A_re")

    @post_load
    def make_data(self, data, **kwargs) -> ScatteringData:
        def pair(key):
            if data.get(f"{key}_re") is None:
                return None
            return np.asarray(data[f"{key}_re"]) + 1j * np.asarray(data[f"{key}_im"])

        return ScatteringData(
            data["xi"],
            pair("R"),
            np.asarray(data["etas"], dtype=float),
            A=pair("A"),
            B=pair("B"),
            support=data["support"],
        )

    def dump_data(self, sd: ScatteringData) -> dict:
        payload = {"xi": sd.xi.tolist(), "etas": sd.etas.tolist(), "support": sd.support}
        payload["R_re"], payload["R_im"] = split_complex(sd.R)
        if sd.has_coefficients:
            payload["A_re"], payload["A_im"] = split_complex(sd.A)
            payload["B_re"], payload["B_im"] = split_complex(sd.B)
        return self.dump(payload)


class MatrixBranchSchema(Schema):
    """Schema for one sign branch; ``m21`` is null when undetermined."""

    m11 = fields.Float(required=True, allow_nan=False)
    m12 = fields.Float(required=True, allow_nan=False)
    m21 = fields.Float(allow_none=True, allow_nan=False)
    m22 = fields.Float(required=True, allow_nan=False)

    @post_load
    def make_branch(self, data, **kwargs) -> MatrixBranch:
        return MatrixBranch(**data)


class MReconstructionSchema(Schema):
    """Schema for a transfer-matrix reconstruction."""

    case = fields.Enum(MatrixCase, by_value=True, required=True)
    branches = fields.Nested(MatrixBranchSchema, many=True, required=True)
    m21_status = fields.Enum(EntryStatus, by_value=True, required=True)
    C1 = fields.Float(allow_none=True)
    C2 = fields.Float(allow_none=True)
    K1 = fields.Float(allow_none=True)
    K2 = fields.Float(allow_none=True)
    constraint = fields.String(allow_none=True)
    selected = fields.Integer(validate=validate.Range(min=0))
    diagnostics = fields.Dict()

    @post_load
    def make_reconstruction(self, data, **kwargs) -> MReconstruction:
        return MReconstruction(**data)


class ComplexTraceSchema(Schema):
    """Schema for a sampled complex function on real abscissae."""

    label = fields.String(required=True)
    abscissae = _float_list(required=True)
    re = _float_list(required=True)
    im = _float_list(required=True)
    diagnostics = fields.Dict()

    @post_load
    def make_trace(self, data, **kwargs) -> ComplexFunctionTrace:
        values = np.asarray(data["re"]) + 1j * np.asarray(data["im"])
        return ComplexFunctionTrace(data["abscissae"], values, data["label"], diagnostics=data.get("diagnostics", {}))

    def dump_trace(self, trace: ComplexFunctionTrace) -> dict:
        re, im = split_complex(trace.values)
        return self.dump({
            "label": trace.label,
            "abscissae": np.real(trace.abscissae).tolist(),
            "re": re,
            "im": im,
            "diagnostics": trace.diagnostics,
        })


class RunConfigSchema(Schema):
    """Validation of the merged command options.

    Unknown keys are kept so each command can carry its own flags.
    """

    class Meta:
        unknown = "include"

    command = fields.String(required=True, validate=validate.OneOf(["forward", "invert", "recover", "validate"]))
    xi_min = fields.Float(allow_none=True)
    xi_max = fields.Float(allow_none=True)
    rtol = fields.Float(validate=validate.Range(min=0, min_inclusive=False))
    atol = fields.Float(validate=validate.Range(min=0, min_inclusive=False))
    reg = fields.Float(validate=validate.Range(min=0, min_inclusive=False))
    cells = fields.Integer(validate=validate.Range(min=1))
    tail_tol = fields.Float(validate=validate.Range(min=0, min_inclusive=False))
    diag_band = fields.Float(validate=validate.Range(min=0, min_inclusive=False))
    threads = fields.Integer(validate=validate.Range(min=1))
    seed = fields.Integer()

    @validates_schema
    def check_xi_range(self, data, **kwargs) -> None:
        lo, hi = data.get("xi_min"), data.get("xi_max")
        if lo is None or hi is None:
            return
        if lo >= hi:
            raise ValidationError("xi_min must be below xi_max.", field_name="xi_min")
        if lo <= 0 <= hi:
            raise ValidationError("The xi range must not contain 0.", field_name="xi_min")


class SuiteEntrySchema(Schema):
    tag = fields.String()
    statistic = fields.String()
    value = fields.Raw()
    band = fields.Float()
    passed = fields.Boolean()
    status = fields.String()


class SuiteReportSchema(Schema):
    """Schema for the validation report."""

    suite = fields.String()
    passed = fields.Boolean()
    entries = fields.Nested(SuiteEntrySchema, many=True)
