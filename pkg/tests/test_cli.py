import csv
import io
import json
import os.path
import pytest
from click.testing import CliRunner
from qr_graphons.cli import cli
from qr_graphons.graphs import gen_gnp
from qr_graphons.graph_parser import format_graph, parse_graph
from qr_graphons.graphons import sample_graph
from qr_graphons.schemas import SCHEMA_VERSION, load_kernel


@pytest.fixture
def paths(datadir):
    def path(kind, name):
        return os.path.join(datadir[kind], name)

    return path


def invoke(*args):
    return CliRunner().invoke(cli, list(args))


def test_count(paths):
    result = invoke('count', f'--graph={paths("graphs", "k3.txt")}', '--pattern=P3')
    assert result.exit_code == 0
    assert result.output == '6\n'

    result = invoke('count', f'--graph={paths("graphs", "k3.txt")}',
                    f'--pattern={paths("patterns", "p3.txt")}')
    assert result.exit_code == 0
    assert result.output == '6\n'

    result = invoke('count', f'--graph={paths("graphs", "p3.txt")}',
                    '--pattern=P3', '--induced')
    assert result.stdout == '2\n'

    result = invoke('count', f'--graph={paths("graphs", "k3.txt")}',
                    '--pattern=K2', '--subset=0 1')
    assert result.stdout == '2\n'

    result = invoke('count', f'--graph={paths("graphs", "k2.txt")}',
                    '--pattern=K2', '--homomorphisms')
    assert result.stdout == '2\n'


def test_count_usage_errors(paths):
    graph = f'--graph={paths("graphs", "k3.txt")}'

    result = invoke('count', graph, '--pattern=X9')
    assert result.exit_code == 2

    result = invoke('count', f'--graph={paths("graphs", "bad_index.txt")}',
                    '--pattern=K2')
    assert result.exit_code == 2
    assert 'bad_index.txt' in result.output

    result = invoke('count', graph, '--pattern=K2', '--subset=0 1', '--sets=0|1')
    assert result.exit_code == 2

    result = invoke('count', graph, '--pattern=K2', '--subset=0 7')
    assert result.exit_code == 2

    result = invoke('count', graph, '--pattern=K2', '--homomorphisms', '--induced')
    assert result.exit_code == 2

    result = invoke('count', graph, '--pattern=K2', '--format=csv')
    assert result.exit_code == 2


def test_density(paths):
    result = invoke('density', f'--graph={paths("graphs", "k3.txt")}', '--pattern=K2')
    assert result.exit_code == 0
    assert float(result.stdout) == pytest.approx(2 / 3)

    result = invoke('density', f'--kernel={paths("kernels", "half.json")}',
                    '--pattern=K2', '--json')
    assert result.exit_code == 0
    assert json.loads(result.stdout)['result'] == pytest.approx(0.5)

    result = invoke('density', f'--kernel={paths("kernels", "half.json")}',
                    f'--graph={paths("graphs", "k3.txt")}', '--pattern=K2')
    assert result.exit_code == 2

    result = invoke('density', f'--kernel={paths("kernels", "asymmetric.json")}',
                    '--pattern=K2')
    assert result.exit_code == 2


def test_boxint(paths):
    kernel = f'--kernel={paths("kernels", "half.json")}'
    boxes = f'--boxes={paths("kernels", "boxes.json")}'

    result = invoke('boxint', '--pattern=K2', kernel, boxes)
    assert result.exit_code == 0
    assert float(result.stdout) == pytest.approx(0.125)

    result = invoke('boxint', '--pattern=K2', kernel, boxes, '--symmetrized')
    assert result.exit_code == 0
    assert float(result.stdout) == pytest.approx(0.125)

    result = invoke('boxint', '--pattern=K2', kernel, boxes, '--p=0.5', '--json')
    assert result.exit_code == 0
    report = json.loads(result.stdout)['result']
    assert report['property'] == 'kernel-box'
    assert report['max_dev'] == pytest.approx(0.0, abs=1e-15)

    result = invoke('boxint', '--pattern=K3', kernel, boxes)
    assert result.exit_code == 1


def test_cutnorm(paths):
    result = invoke('cutnorm', f'--kernel={paths("kernels", "signed.json")}', '--json')
    assert result.exit_code == 0
    cut = json.loads(result.stdout)['result']
    assert cut['value'] == pytest.approx(0.125)
    assert cut['exact']

    result = invoke('cutnorm', f'--graph={paths("graphs", "k2.txt")}', '--p=0.5')
    assert result.exit_code == 0
    assert 'value: 0.125\n' in result.stdout
    assert 'exact: True\n' in result.stdout

    result = invoke('cutnorm', '--method=exact')
    assert result.exit_code == 2


def test_cutdist(paths):
    result = invoke('cutdist', f'--graph={paths("graphs", "c4.txt")}',
                    f'--other={paths("graphs", "c4_other.txt")}', '--json')
    assert result.exit_code == 0
    cut = json.loads(result.stdout)['result']
    assert cut['value'] == 0.0
    assert cut['bound'] == 'permutation-upper-bound'

    result = invoke('cutdist', f'--graph={paths("graphs", "c4.txt")}',
                    f'--other={paths("graphs", "k3.txt")}')
    assert result.exit_code == 1


def test_qr_global(paths):
    result = invoke('qr', f'--graph={paths("graphs", "k3.txt")}', '--property=global',
                    '--p=1', '--pattern=K2', '--pattern=P3', '--json')
    assert result.exit_code == 0
    doc = json.loads(result.stdout)
    assert doc['schema'] == SCHEMA_VERSION
    assert doc['command'] == 'qr'
    assert doc['config']['patterns'] == ['K2', 'P3']
    assert doc['config']['prop'] == 'global'
    # N(F, G) / n**f is 6/9 for K2 and 6/27 for P3
    assert doc['result']['pattern'] == 'P3'
    assert doc['result']['max_dev'] == pytest.approx(21 / 27)
    deviations = doc['result']['details']['deviations']
    assert deviations['K2'] == pytest.approx(1 / 3)


def test_qr_formats(paths):
    graph = f'--graph={paths("graphs", "c4.txt")}'

    result = invoke('qr', graph, '--property=regularity', '--p=0.5')
    assert result.exit_code == 0
    assert 'max_dev: 0.0\n' in result.stdout
    assert 'property: regularity\n' in result.stdout

    result = invoke('qr', graph, '--property=regularity', '--p=0.5', '--format=csv')
    assert result.exit_code == 0
    rows = list(csv.DictReader(io.StringIO(result.stdout)))
    assert len(rows) == 1
    assert rows[0]['property'] == 'regularity'
    assert float(rows[0]['max_dev']) == 0.0

    result = invoke('qr', graph, '--property=degree-moment', '--kmax=3', '--json')
    assert result.exit_code == 0
    report = json.loads(result.stdout)['result']
    assert report['max_dev'] <= 1e-12
    assert [row['k'] for row in report['details']['moments']] == [1, 2, 3]


def test_qr_hereditary(paths):
    result = invoke('qr', f'--graph={paths("graphs", "c4.txt")}',
                    '--property=hereditary-single', '--p=0.5', '--pattern=K2',
                    '--json')
    assert result.exit_code == 0
    report = json.loads(result.stdout)['result']
    assert report['property'] == 'hereditary-single'
    assert report['exhaustive']
    assert report['samples'] == 16
    assert report['seed'] is None


def test_qr_usage_errors(paths):
    graph = f'--graph={paths("graphs", "c4.txt")}'

    result = invoke('qr', graph, '--property=hereditary-single', '--p=0.5')
    assert result.exit_code == 2

    result = invoke('qr', graph, '--property=hereditary-multi', '--p=0.5',
                    '--pattern=K2', '--pattern=P3')
    assert result.exit_code == 2

    result = invoke('qr', graph, '--property=cut-regular', '--p=0.5')
    assert result.exit_code == 2

    result = invoke('qr', graph, '--property=global', '--p=1.5', '--pattern=K2')
    assert result.exit_code == 2

    result = invoke('qr', graph, '--property=magic', '--p=0.5')
    assert result.exit_code == 2

    # the host is too small, an error of the computation
    result = invoke('qr', f'--graph={paths("graphs", "k2.txt")}', '--property=global',
                    '--p=0.5', '--pattern=K3')
    assert result.exit_code == 1
    assert 'Error:' in result.output

    result = invoke('qr', graph, '--property=hereditary-single', '--p=0.5',
                    '--pattern=K2', '--symmetric')
    assert result.exit_code == 1


def test_config_file(paths):
    config = paths('config', 'config.toml')
    args = ['qr', f'--graph={paths("graphs", "c4.txt")}',
            '--property=hereditary-single', '--p=0.5', '--pattern=K2', '--json']

    result = invoke(f'--config={config}', *args)
    assert result.exit_code == 0
    doc = json.loads(result.stdout)
    assert doc['config']['samples'] == 50
    assert doc['config']['seed'] == 3

    # command line options win
    result = invoke(f'--config={config}', *args, '--seed=9')
    assert json.loads(result.stdout)['config']['seed'] == 9

    result = CliRunner().invoke(cli, args, env={'APP_CONFIG_FILE': config})
    assert json.loads(result.stdout)['config']['samples'] == 50

    result = invoke(f'--config={paths("graphs", "k3.txt")}', *args)
    assert result.exit_code == 2


def test_settings_from_the_environment(paths):
    args = ['qr', f'--graph={paths("graphs", "c4.txt")}',
            '--property=hereditary-single', '--p=0.5', '--pattern=K2', '--json']
    env = {'APP_EXHAUSTIVE_LIMIT': '4', 'APP_DEFAULT_SAMPLES': '7'}
    result = CliRunner().invoke(cli, args, env=env)
    assert result.exit_code == 0
    doc = json.loads(result.stdout)
    assert doc['config']['exhaustive_limit'] == 4
    assert not doc['result']['exhaustive']
    assert doc['result']['samples'] == 7

    # command line options win
    result = CliRunner().invoke(cli, args + ['--samples=9'], env=env)
    assert json.loads(result.stdout)['result']['samples'] == 9

    kernel = f'--kernel={paths("kernels", "signed.json")}'
    result = CliRunner().invoke(
        cli, ['cutnorm', kernel, '--json'], env={'APP_EXACT_CUT_THRESHOLD': '1'})
    assert result.exit_code == 0
    cut = json.loads(result.stdout)['result']
    assert not cut['exact']
    assert cut['value'] == pytest.approx(0.125)


def test_hf():
    result = invoke('hf', '--pattern=P3', '--p=0.7', '--json')
    assert result.exit_code == 0
    verdict = json.loads(result.stdout)['result']
    assert verdict['status'] == 'counterexample'
    assert verdict['pattern'] == 'P3'
    assert any(
        w['u'] == 0.7 and w['v'] == 0.7 and abs(w['s'] - 63 / 110) <= 1e-9
        for w in verdict['witnesses']
    )

    result = invoke('hf', '--pattern=C4', '--p=0.5', '--grid=101')
    assert result.exit_code == 0
    assert 'status: certified-at-tolerance\n' in result.stdout

    result = invoke('hf', '--pattern=P3', '--p=1')
    assert result.exit_code == 2

    result = invoke('hf', '--pattern=K1', '--p=0.5')
    assert result.exit_code == 1


def test_twotype():
    result = invoke('twotype', '--pattern=K2', '--p=0.4')
    assert result.exit_code == 0
    assert result.stdout == 'none\n'

    result = invoke('twotype', '--pattern=P3', '--p=0.7', '--induced',
                    '--symmetrized', '--json')
    assert result.exit_code == 0
    solutions = json.loads(result.stdout)['result']
    assert solutions[0]['u'] == pytest.approx(0.7, abs=1e-6)
    assert solutions[0]['s'] == pytest.approx(63 / 110, abs=1e-6)

    result = invoke('twotype', '--pattern=K2')
    assert result.exit_code == 2


def test_generate(paths, tmp_path):
    result = invoke('generate', '--cycle=4')
    assert result.exit_code == 0
    assert result.stdout == '4\n0 1\n0 3\n1 2\n2 3\n'

    out = str(tmp_path / 'g.txt')
    result = invoke('generate', '--gnp', '20', '0.5', '--seed=1', f'--out={out}')
    assert result.exit_code == 0
    with open(out) as f:
        assert f.read() == format_graph(gen_gnp(20, 0.5, 1))

    result = invoke('count', f'--graph={out}', '--pattern=K2')
    assert int(result.stdout) == 2 * gen_gnp(20, 0.5, 1).edge_count

    kernel = paths('kernels', 'half.json')
    result = invoke('generate', f'--kernel={kernel}', '--n=10', '--seed=1')
    assert result.exit_code == 0
    with open(kernel) as f:
        w = load_kernel(f.read())
    assert result.stdout == format_graph(sample_graph(w, 10, 1))

    assert invoke('generate').exit_code == 2
    assert invoke('generate', '--cycle=4', '--complete=3').exit_code == 2
    assert invoke('generate', f'--kernel={kernel}').exit_code == 2


def test_converge(paths):
    result = invoke('converge', f'--graph={paths("graphs", "c4.txt")}',
                    f'--graph={paths("graphs", "k3.txt")}', '--pattern=K2', '--p=0.5')
    assert result.exit_code == 0
    lines = result.stdout.splitlines()
    assert lines[0] == 'n,pattern,deviation'
    assert lines[1] == '3,K2,0.5'
    n, pattern, deviation = lines[2].split(',')
    assert (n, pattern) == ('4', 'K2')
    assert float(deviation) == pytest.approx(1 / 6)

    result = invoke('converge', f'--graph={paths("graphs", "c4.txt")}',
                    '--pattern=K2', '--p=0.5', '--json')
    rows = json.loads(result.stdout)['result']
    assert rows == [{'n': 4, 'pattern': 'K2', 'deviation': pytest.approx(1 / 6)}]

    result = invoke('converge', f'--graph={paths("graphs", "c4.txt")}', '--pattern=K2')
    assert result.exit_code == 2


def test_log_options(paths):
    result = invoke('--log-format=json', '--log-level=debug', 'count',
                    f'--graph={paths("graphs", "k3.txt")}', '--pattern=K2')
    assert result.exit_code == 0

    result = invoke('--log-format=xml', 'count',
                    f'--graph={paths("graphs", "k3.txt")}', '--pattern=K2')
    assert result.exit_code == 2


def test_reports_are_reproducible(paths, tmp_path):
    out = str(tmp_path / 'g.txt')
    assert invoke('generate', '--gnp', '50', '0.5', '--seed=7', f'--out={out}').exit_code == 0
    with open(out) as f:
        assert parse_graph(f.read()) == gen_gnp(50, 0.5, 7)

    args = ['qr', f'--graph={out}', '--property=cut', '--p=0.5', '--gamma=0.5',
            '--samples=200', '--seed=5', '--json']
    first = invoke(*args)
    assert first.exit_code == 0
    report = json.loads(first.stdout)['result']
    assert report['gamma'] == 0.5
    assert report['note'] is not None
    assert invoke(*args).stdout == first.stdout
