import csv
import io
from dataclasses import asdict
from typing import Any, Iterable, Sequence
from marshmallow import (
    Schema, fields, validate, validates_schema, ValidationError, EXCLUDE,
)
from qr_graphons.graphons import StepKernel, KernelRange, BoxSpec
from qr_graphons.cut_metric import CutResult
from qr_graphons.qr_tester import DeviationReport, ConvergenceRow
from qr_graphons.hf_checker import HFVerdict, TwoTypeWitness

SCHEMA_VERSION = 'qr-graphons/1'
MAX_PARTS = 10_000
CONVERGENCE_COLUMNS = ('n', 'pattern', 'deviation')


class _FiniteFloat(fields.Float):
    def __init__(self, **kwargs):
        super().__init__(allow_nan=False, **kwargs)


class KernelFileSchema(Schema):
    """Kernel file: `{"weights": [...], "values": [[...]], "range": ...}`.
    """
    class Meta:
        unknown = EXCLUDE

    weights = fields.List(
        _FiniteFloat(validate=validate.Range(min=0.0, min_inclusive=False)),
        required=True,
        validate=validate.Length(min=1, max=MAX_PARTS),
    )
    values = fields.List(
        fields.List(_FiniteFloat(validate=validate.Range(min=-1.0, max=1.0))),
        required=True,
    )
    range = fields.String(
        load_default=KernelRange.GRAPHON.value,
        validate=validate.OneOf([r.value for r in KernelRange]),
    )

    @validates_schema
    def validate_shape(self, data, **kwargs):
        k = len(data['weights'])
        values = data['values']
        if len(values) != k or any(len(row) != k for row in values):
            raise ValidationError(f'values must be a {k}x{k} matrix.')


class BoxFileSchema(Schema):
    """Box file: `{"boxes": [[a_1(1), ..., a_1(k)], ...]}`."""
    class Meta:
        unknown = EXCLUDE

    boxes = fields.List(
        fields.List(
            _FiniteFloat(validate=validate.Range(min=0.0, max=1.0)),
            validate=validate.Length(min=1),
        ),
        required=True,
        validate=validate.Length(min=1),
    )


class DeviationReportSchema(Schema):
    property = fields.String(required=True)
    pattern = fields.String(allow_none=True)
    p = fields.Float(required=True)
    gamma = fields.Float(allow_none=True)
    induced = fields.Boolean()
    samples = fields.Integer()
    exhaustive = fields.Boolean()
    max_dev = fields.Float(required=True)
    witness = fields.List(fields.List(fields.Integer()))
    seed = fields.Integer(allow_none=True)
    note = fields.String(allow_none=True)
    details = fields.Dict(keys=fields.String())


class CutResultSchema(Schema):
    value = fields.Float(required=True)
    witness_s = fields.List(fields.Float())
    witness_t = fields.List(fields.Float())
    exact = fields.Boolean()
    bound = fields.String(allow_none=True)
    permutation = fields.List(fields.Integer(), allow_none=True)
    note = fields.String(allow_none=True)


class TwoTypeWitnessSchema(Schema):
    u = fields.Float(required=True)
    v = fields.Float(required=True)
    s = fields.Float(required=True)
    residual = fields.Float(required=True)


class HFVerdictSchema(Schema):
    status = fields.String(required=True)
    pattern = fields.String()
    p = fields.Float()
    p_bar = fields.Float()
    tol = fields.Float()
    witnesses = fields.List(fields.Nested(TwoTypeWitnessSchema))


class ConvergenceRowSchema(Schema):
    n = fields.Integer(required=True)
    pattern = fields.String(required=True)
    deviation = fields.Float(required=True)


class RunDocumentSchema(Schema):
    """The JSON document written by every command."""
    schema = fields.String(required=True)
    command = fields.String(required=True)
    config = fields.Dict(keys=fields.String(), required=True)
    result = fields.Raw(required=True)


_RESULT_SCHEMAS: dict[type, Schema] = {
    DeviationReport: DeviationReportSchema(),
    CutResult: CutResultSchema(),
    HFVerdict: HFVerdictSchema(),
    TwoTypeWitness: TwoTypeWitnessSchema(),
    ConvergenceRow: ConvergenceRowSchema(),
}


def load_kernel(text: str) -> StepKernel:
    """Parse a kernel file.

    Raises `marshmallow.ValidationError` for malformed documents, and
    `KernelError` when the kernel invariants are violated.
    """
    data = KernelFileSchema().loads(text)
    return StepKernel(data['weights'], data['values'], KernelRange(data['range']))


def dump_kernel(kernel: StepKernel) -> str:
    return KernelFileSchema().dumps({
        'weights': kernel.weights.tolist(),
        'values': kernel.values.tolist(),
        'range': kernel.range.value,
    }, sort_keys=True)


def load_boxes(text: str) -> BoxSpec:
    data = BoxFileSchema().loads(text)
    return BoxSpec(data['boxes'])


def dump_result(result: Any) -> Any:
    """Return the JSON-compatible form of a result object."""
    if isinstance(result, (list, tuple)):
        return [dump_result(item) for item in result]
    schema = _RESULT_SCHEMAS.get(type(result))
    if schema is not None:
        return schema.dump(result)
    return result


def dump_document(command: str, config: dict, result: Any) -> str:
    """Render a versioned run document as JSON with sorted keys."""
    return RunDocumentSchema().dumps({
        'schema': SCHEMA_VERSION,
        'command': command,
        'config': config,
        'result': dump_result(result),
    }, sort_keys=True)


def _write_csv(columns: Sequence[str], rows: Iterable[dict]) -> str:
    output = io.StringIO()
    writer = csv.DictWriter(
        output, fieldnames=list(columns), extrasaction='ignore',
        lineterminator='\n')
    writer.writeheader()
    writer.writerows(rows)
    return output.getvalue()


def convergence_csv(rows: Iterable[ConvergenceRow]) -> str:
    return _write_csv(CONVERGENCE_COLUMNS, (asdict(row) for row in rows))


def report_csv(report: DeviationReport) -> str:
    """Render a report as a one-row CSV table (witness as "0 1 2|3 4")."""
    row = DeviationReportSchema().dump(report)
    row['witness'] = '|'.join(
        ' '.join(str(v) for v in subset) for subset in report.witness)
    columns = [name for name in DeviationReportSchema().fields
               if name != 'details']
    return _write_csv(columns, [row])
