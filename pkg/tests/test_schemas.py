import csv
import io
import json
import os.path
import pytest
from marshmallow import ValidationError
from qr_graphons.common import KernelError
from qr_graphons.graphons import StepKernel, KernelRange, two_type
from qr_graphons.cut_metric import CutResult
from qr_graphons.qr_tester import DeviationReport, ConvergenceRow
from qr_graphons.hf_checker import HFVerdict, TwoTypeWitness, COUNTEREXAMPLE
from qr_graphons.schemas import (
    SCHEMA_VERSION, load_kernel, dump_kernel, load_boxes, dump_result,
    dump_document, report_csv, convergence_csv,
)


def read(datadir, name):
    with open(os.path.join(datadir['kernels'], name)) as f:
        return f.read()


def test_load_kernel(datadir):
    w = load_kernel(read(datadir, 'half.json'))
    assert w == StepKernel([0.5, 0.5], [[0.0, 0.5], [0.5, 1.0]])
    assert w.range is KernelRange.GRAPHON

    signed = load_kernel(read(datadir, 'signed.json'))
    assert signed.range is KernelRange.SIGNED
    assert signed.values[0, 0] == -0.5

    # "range" defaults to graphon
    w = load_kernel('{"weights": [1.0], "values": [[0.25]], "comment": "x"}')
    assert w.range is KernelRange.GRAPHON

    with pytest.raises(KernelError):
        load_kernel(read(datadir, 'asymmetric.json'))
    with pytest.raises(KernelError):
        load_kernel('{"weights": [1.0], "values": [[-0.5]]}')


@pytest.mark.parametrize('text', [
    '{"weights": [0.5, 0.5]}',
    '{"values": [[0.5]]}',
    '{"weights": [0.5, 0.5], "values": [[0.5]]}',
    '{"weights": [0.5, 0.5], "values": [[0.5, 0.5], [0.5]]}',
    '{"weights": [0.0, 1.0], "values": [[0, 0], [0, 0]]}',
    '{"weights": [1.0], "values": [[2.0]]}',
    '{"weights": [1.0], "values": [[0.5]], "range": "complex"}',
    '{"weights": [], "values": []}',
    '{"weights": [1.0], "values": [["x"]]}',
])
def test_malformed_kernel(text):
    with pytest.raises(ValidationError):
        load_kernel(text)


def test_dump_kernel():
    w = two_type(0.7, 0.2, 0.4, 0.25)
    text = dump_kernel(w)
    assert json.loads(text) == {
        'weights': [0.25, 0.75],
        'values': [[0.7, 0.4], [0.4, 0.2]],
        'range': 'graphon',
    }
    assert text.index('"range"') < text.index('"values"') < text.index('"weights"')
    assert load_kernel(text) == w


def test_load_boxes(datadir):
    boxes = load_boxes(read(datadir, 'boxes.json'))
    assert boxes.f == 2
    assert [v.tolist() for v in boxes.vectors] == [[1.0, 0.0], [0.0, 1.0]]

    with pytest.raises(ValidationError):
        load_boxes('{"boxes": []}')
    with pytest.raises(ValidationError):
        load_boxes('{"boxes": [[1.5]]}')
    with pytest.raises(ValidationError):
        load_boxes('{}')


def test_dump_result():
    assert dump_result(6) == 6
    assert dump_result(0.25) == 0.25

    cut = CutResult(0.125, (1.0, 0.0), (0.0, 1.0), True)
    assert dump_result(cut) == {
        'value': 0.125,
        'witness_s': [1.0, 0.0],
        'witness_t': [0.0, 1.0],
        'exact': True,
        'bound': None,
        'permutation': None,
        'note': None,
    }

    verdict = HFVerdict(
        COUNTEREXAMPLE, 'P3', 0.7, 0.75, 1e-9,
        (TwoTypeWitness(0.7, 0.7, 0.5, 0.0),),
    )
    data = dump_result(verdict)
    assert data['status'] == 'counterexample'
    assert data['witnesses'] == [{'u': 0.7, 'v': 0.7, 's': 0.5, 'residual': 0.0}]

    rows = dump_result([ConvergenceRow(4, 'K2', 0.25)])
    assert rows == [{'n': 4, 'pattern': 'K2', 'deviation': 0.25}]


def test_dump_document():
    report = DeviationReport(
        property='regularity', p=0.5, max_dev=0.25, samples=4,
        details={'worst_vertex': 2})
    text = dump_document('qr', {'p': 0.5, 'seed': 0}, report)
    doc = json.loads(text)
    assert doc['schema'] == SCHEMA_VERSION
    assert doc['command'] == 'qr'
    assert doc['config'] == {'p': 0.5, 'seed': 0}
    assert doc['result']['max_dev'] == 0.25
    assert doc['result']['details'] == {'worst_vertex': 2}
    assert doc['result']['witness'] == []

    # keys are sorted
    positions = [text.index(f'"{key}"') for key in [
        'command', 'config', 'result', 'schema']]
    assert positions == sorted(positions)


def test_report_csv():
    report = DeviationReport(
        property='cut', p=0.5, max_dev=0.1, witness=((0, 1), (2, 3)),
        gamma=0.5, samples=10, exhaustive=False, seed=7,
        details={'refined': True})
    rows = list(csv.DictReader(io.StringIO(report_csv(report))))
    assert len(rows) == 1
    row = rows[0]
    assert row['property'] == 'cut'
    assert float(row['max_dev']) == 0.1
    assert row['witness'] == '0 1|2 3'
    assert row['seed'] == '7'
    assert row['pattern'] == ''
    assert 'details' not in row


def test_convergence_csv():
    rows = [ConvergenceRow(4, 'K2', 0.25), ConvergenceRow(8, 'C4', 0.5)]
    assert convergence_csv(rows) == 'n,pattern,deviation\n4,K2,0.25\n8,C4,0.5\n'
    assert convergence_csv([]) == 'n,pattern,deviation\n'
