import logging
import os
import tempfile
from dataclasses import is_dataclass
from functools import update_wrapper
from typing import Any, Callable, Optional
import click
import tomli
from marshmallow import ValidationError
from qr_graphons.common import (
    QRError, APP_DEFAULT_SAMPLES, APP_EXHAUSTIVE_LIMIT, APP_EXACT_CUT_THRESHOLD,
)
from qr_graphons.loggers import configure_logging, log_elapsed, LOG_FORMATS
from qr_graphons.graphs import (
    Graph, PatternGraph, VertexConstraint, gen_gnp, gen_complete_bipartite,
    gen_complete, gen_cycle,
)
from qr_graphons.graph_parser import parse_graph, parse_pattern, format_graph
from qr_graphons.patterns import get_pattern
from qr_graphons import counting, graphons, cut_metric, qr_tester, hf_checker
from qr_graphons.graphons import StepKernel, step_from_graph
from qr_graphons.schemas import (
    load_kernel, load_boxes, dump_document, dump_result, report_csv,
    convergence_csv,
)

_logger = logging.getLogger(__name__)

PROPERTIES = [
    qr_tester.GLOBAL,
    qr_tester.HEREDITARY_SINGLE,
    qr_tester.HEREDITARY_MULTI,
    qr_tester.HEREDITARY_DISJOINT,
    qr_tester.CUT,
    qr_tester.CUT_REGULAR,
    qr_tester.REGULARITY,
    qr_tester.DEGREE_MOMENT,
]


def _load_config(ctx: click.Context, param, value: Optional[str]) -> None:
    if value is None:
        return
    try:
        with open(value, 'rb') as f:
            ctx.default_map = tomli.load(f)
    except (OSError, tomli.TOMLDecodeError) as e:
        raise click.BadParameter(str(e), ctx=ctx, param=param)


def _read_text(path: str) -> str:
    with open(path, encoding='utf-8') as f:
        return f.read()


def _read_graph(path: str, option: str = '--graph') -> Graph:
    try:
        return parse_graph(_read_text(path))
    except (OSError, QRError) as e:
        raise click.BadParameter(f'{path}: {e}', param_hint=option)


def _read_pattern(value: str, option: str = '--pattern') -> PatternGraph:
    """Accept either a pattern file, or a built-in name like "P3"."""
    try:
        if os.path.isfile(value):
            name = os.path.splitext(os.path.basename(value))[0]
            return parse_pattern(_read_text(value), name=name)
        return get_pattern(value)
    except (OSError, QRError) as e:
        raise click.BadParameter(f'{value}: {e}', param_hint=option)


def _read_kernel(path: str, option: str = '--kernel') -> StepKernel:
    try:
        return load_kernel(_read_text(path))
    except (OSError, QRError) as e:
        raise click.BadParameter(f'{path}: {e}', param_hint=option)
    except ValidationError as e:
        raise click.BadParameter(
            f'{path}: {e.normalized_messages()}', param_hint=option)


def _parse_sets(value: str, option: str) -> list[list[int]]:
    # "0 1 2|3 4" -> [[0, 1, 2], [3, 4]]
    try:
        return [[int(x) for x in part.split()] for part in value.split('|')]
    except ValueError:
        raise click.BadParameter(f'invalid vertex sets: {value}', param_hint=option)


def _render_text(result: Any) -> str:
    data = dump_result(result)
    if isinstance(data, dict):
        return ''.join(f'{key}: {data[key]}\n' for key in sorted(data))
    if isinstance(data, list):
        if not data:
            return 'none\n'
        return '\n'.join(_render_text(item) for item in result)
    return f'{data}\n'


def _emit(
        ctx: click.Context,
        result: Any,
        output_format: str,
        csv_renderer: Optional[Callable[[Any], str]] = None,
) -> None:
    if output_format == 'json':
        config = {
            key: (list(value) if isinstance(value, tuple) else value)
            for key, value in ctx.params.items()
        }
        text = dump_document(ctx.info_name or '', config, result) + '\n'
    elif output_format == 'csv':
        if csv_renderer is None:
            raise click.UsageError(
                f'csv output is not supported by {ctx.info_name}', ctx=ctx)
        text = csv_renderer(result)
    else:
        text = _render_text(result) if is_dataclass(result) or isinstance(
            result, (list, dict)) else f'{result}\n'

    # The whole report is written at once.
    click.echo(text, nl=False)


def command(f: Callable) -> Callable:
    """Turn `QRError`s raised by the computation into exit code 1."""
    @click.pass_context
    def wrapper(ctx: click.Context, *args, **kwargs):
        try:
            with log_elapsed(_logger, ctx.info_name or f.__name__):
                return f(ctx, *args, **kwargs)
        except QRError as e:
            _logger.debug('command failed', exc_info=True)
            click.echo(f'Error: {e.message}', err=True)
            ctx.exit(1)

    return update_wrapper(wrapper, f)


def output_options(f: Callable) -> Callable:
    f = click.option(
        '--format', 'output_format',
        type=click.Choice(['text', 'json', 'csv']),
        default='text',
        show_default=True,
        help="Output format.")(f)
    f = click.option(
        '--json', 'as_json',
        is_flag=True,
        help="Same as --format=json.")(f)
    return f


def _output_format(as_json: bool, output_format: str) -> str:
    return 'json' if as_json else output_format


@click.group()
@click.option(
    '-c', '--config',
    type=click.Path(exists=True, dir_okay=False),
    envvar='APP_CONFIG_FILE',
    callback=_load_config,
    is_eager=True,
    expose_value=False,
    show_envvar=True,
    help="A TOML file with per-command option defaults.")
@click.option(
    '-l', '--log-level',
    type=click.Choice(['error', 'warning', 'info', 'debug']),
    envvar='APP_LOG_LEVEL',
    default='warning',
    show_envvar=True,
    show_default=True,
    help="Application log level.")
@click.option(
    '-f', '--log-format',
    type=click.Choice(LOG_FORMATS),
    envvar='APP_LOG_FORMAT',
    default='text',
    show_envvar=True,
    show_default=True,
    help="Application log format.")
def cli(log_level: str, log_format: str):
    """Subgraph counts, step graphons, cut norms, and quasi-randomness
    testers. Reports are written to standard output, logs to standard
    error.
    """
    configure_logging(level=log_level, format=log_format)


@cli.command()
@click.option('--graph', required=True, type=click.Path(exists=True, dir_okay=False),
              help="Host graph (edge-list file).")
@click.option('--pattern', required=True,
              help="Pattern file, or a built-in name like P3 or K4.")
@click.option('--induced', is_flag=True, help="Count induced copies.")
@click.option('--subset', default=None,
              help='Single vertex set, for example "0 1 2".')
@click.option('--sets', default=None,
              help='One vertex set per pattern vertex, for example "0 1|2 3".')
@click.option('--homomorphisms', is_flag=True,
              help="Count all (not necessarily injective) maps.")
@click.option('--method', type=click.Choice(counting.METHODS), default='auto',
              show_default=True, help="Counting back end.")
@output_options
@command
def count(ctx, graph, pattern, induced, subset, sets, homomorphisms, method,
          as_json, output_format):
    """Count labelled copies of a pattern in a graph."""
    g = _read_graph(graph)
    f = _read_pattern(pattern)
    if subset is not None and sets is not None:
        raise click.UsageError('--subset and --sets are exclusive', ctx=ctx)
    constraint = None
    if subset is not None:
        constraint = VertexConstraint.single(_parse_sets(subset, '--subset')[0])
    elif sets is not None:
        constraint = VertexConstraint.per_vertex(_parse_sets(sets, '--sets'))
    if constraint is not None:
        try:
            constraint.validate(g.n, f.f)
        except QRError as e:
            raise click.BadParameter(
                e.message, param_hint='--subset' if subset else '--sets')

    if homomorphisms:
        if induced:
            raise click.UsageError(
                '--homomorphisms and --induced are exclusive', ctx=ctx)
        result = counting.count_homomorphisms(f, g, constraint, method=method)
    else:
        result = counting.count_subgraphs(
            f, g, constraint, induced, method=method)
    _emit(ctx, result, _output_format(as_json, output_format))


@cli.command()
@click.option('--pattern', required=True,
              help="Pattern file, or a built-in name like P3 or K4.")
@click.option('--kernel', type=click.Path(exists=True, dir_okay=False),
              help="Step graphon (kernel file).")
@click.option('--graph', type=click.Path(exists=True, dir_okay=False),
              help="Use the step graphon W_G of this graph.")
@click.option('--induced', is_flag=True, help="Induced density.")
@output_options
@command
def density(ctx, pattern, kernel, graph, induced, as_json, output_format):
    """Compute the homomorphism density t(F, W)."""
    f = _read_pattern(pattern)
    w = _kernel_or_graph(ctx, kernel, graph)
    result = graphons.t_density(f, w, induced)
    _emit(ctx, result, _output_format(as_json, output_format))


def _kernel_or_graph(ctx, kernel: Optional[str], graph: Optional[str]) -> StepKernel:
    if (kernel is None) == (graph is None):
        raise click.UsageError('exactly one of --kernel and --graph is required',
                               ctx=ctx)
    if kernel is not None:
        return _read_kernel(kernel)
    return step_from_graph(_read_graph(graph))


@cli.command()
@click.option('--pattern', required=True,
              help="Pattern file, or a built-in name like P3 or K4.")
@click.option('--kernel', required=True, type=click.Path(exists=True, dir_okay=False),
              help="Step graphon (kernel file).")
@click.option('--boxes', required=True, type=click.Path(exists=True, dir_okay=False),
              help="Box file with one fractional part vector per pattern vertex.")
@click.option('--induced', is_flag=True, help="Integrate Ψ* instead of Ψ.")
@click.option('--symmetrized', is_flag=True, help="Average Ψ over relabellings.")
@click.option('--p', type=click.FloatRange(0.0, 1.0), default=None,
              help="Also report the deviation from the box condition at p.")
@output_options
@command
def boxint(ctx, pattern, kernel, boxes, induced, symmetrized, p, as_json,
           output_format):
    """Integrate Ψ over a product of boxes."""
    f = _read_pattern(pattern)
    w = _read_kernel(kernel)
    try:
        spec = load_boxes(_read_text(boxes))
    except (OSError, QRError) as e:
        raise click.BadParameter(f'{boxes}: {e}', param_hint='--boxes')
    except ValidationError as e:
        raise click.BadParameter(
            f'{boxes}: {e.normalized_messages()}', param_hint='--boxes')

    if p is None:
        result: Any = graphons.box_integral(f, w, spec, induced, symmetrized)
    else:
        result = qr_tester.kernel_box_deviation(
            f, w, p, spec, induced, symmetrized)
    _emit(ctx, result, _output_format(as_json, output_format))


@cli.command()
@click.option('--kernel', type=click.Path(exists=True, dir_okay=False),
              help="Kernel file (may be signed).")
@click.option('--graph', type=click.Path(exists=True, dir_okay=False),
              help="Use W_G - p for this graph.")
@click.option('--p', type=click.FloatRange(0.0, 1.0), default=None,
              help="Subtract the constant p from the kernel.")
@click.option('--method', type=click.Choice(['auto', 'exact', 'heuristic']),
              default='auto', show_default=True, help="Cut norm method.")
@click.option('--exact-threshold', type=click.IntRange(min=0),
              envvar='APP_EXACT_CUT_THRESHOLD', default=APP_EXACT_CUT_THRESHOLD,
              show_envvar=True, show_default=True,
              help="Largest part count solved exactly by the auto method.")
@click.option('--restarts', type=click.IntRange(min=1), default=20,
              show_default=True, help="Heuristic restarts.")
@click.option('--seed', type=int, default=0, show_default=True,
              help="Random seed.")
@output_options
@command
def cutnorm(ctx, kernel, graph, p, method, exact_threshold, restarts, seed,
            as_json, output_format):
    """Compute the cut norm of a step kernel."""
    w = _kernel_or_graph(ctx, kernel, graph)
    if p is not None:
        w = cut_metric.kernel_difference(w, _constant_like(w, p))
    result = cut_metric.cut_norm(
        w, method=method, exact_threshold=exact_threshold, restarts=restarts,
        seed=seed)
    _emit(ctx, result, _output_format(as_json, output_format))


def _constant_like(w: StepKernel, p: float) -> StepKernel:
    return StepKernel(w.weights, [[p] * w.k] * w.k)


@cli.command()
@click.option('--graph', required=True, type=click.Path(exists=True, dir_okay=False),
              help="First graph.")
@click.option('--other', required=True, type=click.Path(exists=True, dir_okay=False),
              help="Second graph, with the same number of vertices.")
@click.option('--budget', type=click.IntRange(min=1), default=20,
              show_default=True, help="Local search restarts.")
@click.option('--seed', type=int, default=0, show_default=True,
              help="Random seed.")
@output_options
@command
def cutdist(ctx, graph, other, budget, seed, as_json, output_format):
    """Compute a permutation upper bound on the cut distance of two graphs.
    """
    g = _read_graph(graph)
    h = _read_graph(other, '--other')
    result = cut_metric.cut_distance_graphs(g, h, budget, seed)
    _emit(ctx, result, _output_format(as_json, output_format))


@cli.command()
@click.option('--graph', required=True, type=click.Path(exists=True, dir_okay=False),
              help="Host graph (edge-list file).")
@click.option('--property', 'prop', required=True, type=click.Choice(PROPERTIES),
              help="The quasi-random property to test.")
@click.option('--p', required=True, type=click.FloatRange(0.0, 1.0),
              help="Target edge density.")
@click.option('--gamma', type=click.FloatRange(0.0, 1.0, min_open=True, max_open=True),
              default=None, help="Fixed set size fraction.")
@click.option('--pattern', 'patterns', multiple=True,
              help="Pattern file, or a built-in name (repeatable).")
@click.option('--induced', is_flag=True, help="Use induced counts.")
@click.option('--samples', type=click.IntRange(min=1),
              envvar='APP_DEFAULT_SAMPLES', default=APP_DEFAULT_SAMPLES,
              show_envvar=True, show_default=True,
              help="Samples when not enumerating.")
@click.option('--exhaustive-limit', type=click.IntRange(min=0),
              envvar='APP_EXHAUSTIVE_LIMIT', default=APP_EXHAUSTIVE_LIMIT,
              show_envvar=True, show_default=True,
              help="Enumerate witness spaces up to this size.")
@click.option('--seed', type=int, default=0, show_default=True,
              help="Random seed.")
@click.option('--kmax', type=click.IntRange(min=1), default=4,
              show_default=True, help="Largest degree moment.")
@click.option('--refine', is_flag=True, help="Refine cut witnesses by local search.")
@click.option('--symmetric', is_flag=True,
              help="Average over all assignments of the sets to pattern vertices.")
@click.option('--allow-limit-gamma', is_flag=True,
              help="Accept gamma = 1/f in disjoint mode.")
@output_options
@command
def qr(ctx, graph, prop, p, gamma, patterns, induced, samples,
       exhaustive_limit, seed, kmax, refine, symmetric, allow_limit_gamma,
       as_json, output_format):
    """Test a quasi-random property of a graph."""
    g = _read_graph(graph)
    fs = [_read_pattern(x) for x in patterns]

    if prop == qr_tester.GLOBAL:
        _require_patterns(fs)
        report = qr_tester.dev_global(g, p, fs)
    elif prop.startswith('hereditary-'):
        _require_patterns(fs)
        if len(fs) != 1:
            raise click.BadParameter('exactly one pattern is required',
                                     param_hint='--pattern')
        mode = prop[len('hereditary-'):]
        report = qr_tester.dev_hereditary(
            g, fs[0], p, mode, gamma, induced, samples, seed,
            symmetric=symmetric, allow_limit_gamma=allow_limit_gamma,
            exhaustive_limit=exhaustive_limit)
    elif prop == qr_tester.CUT:
        report = qr_tester.dev_cut(g, p, gamma, samples, seed, refine=refine,
                                   exhaustive_limit=exhaustive_limit)
    elif prop == qr_tester.CUT_REGULAR:
        if gamma is None:
            raise click.BadParameter('required for this property',
                                     param_hint='--gamma')
        report = qr_tester.dev_cut_regular(g, p, gamma, samples, seed,
                                           refine=refine,
                                           exhaustive_limit=exhaustive_limit)
    elif prop == qr_tester.REGULARITY:
        report = qr_tester.dev_regularity(g, p)
    else:
        report = qr_tester.degree_moment_check(g, kmax)

    _emit(ctx, report, _output_format(as_json, output_format), report_csv)


def _require_patterns(fs: list[PatternGraph]) -> None:
    if not fs:
        raise click.BadParameter('at least one pattern is required',
                                 param_hint='--pattern')


@cli.command()
@click.option('--pattern', required=True,
              help="Pattern file, or a built-in name like P3 or K4.")
@click.option('--p', required=True,
              type=click.FloatRange(0.0, 1.0, min_open=True, max_open=True),
              help="Edge density.")
@click.option('--tol', type=click.FloatRange(min=0.0, min_open=True),
              default=1e-9, show_default=True, help="Residual tolerance.")
@click.option('--grid', type=click.IntRange(min=2), default=hf_checker.ROOT_GRID,
              show_default=True, help="Root isolation grid points.")
@output_options
@command
def hf(ctx, pattern, p, tol, grid, as_json, output_format):
    """Check the hereditary induced-forcing criterion for a pattern."""
    f = _read_pattern(pattern)
    result = hf_checker.hf_check(f, p, tol, grid=grid)
    _emit(ctx, result, _output_format(as_json, output_format))


@cli.command()
@click.option('--pattern', required=True,
              help="Pattern file, or a built-in name like P3 or K4.")
@click.option('--p', type=click.FloatRange(0.0, 1.0), default=None,
              help="Edge density (the target is p^e(F), or β_F(p) when induced).")
@click.option('--alpha', type=float, default=None,
              help="Explicit target value.")
@click.option('--induced', is_flag=True, help="Use Ψ* instead of Ψ.")
@click.option('--symmetrized', is_flag=True, help="Average over relabellings.")
@click.option('--tol', type=click.FloatRange(min=0.0, min_open=True),
              default=1e-9, show_default=True, help="Residual tolerance.")
@click.option('--grid', type=click.IntRange(min=2), default=101,
              show_default=True, help="Grid points per axis.")
@click.option('--seed', type=int, default=0, show_default=True,
              help="Random seed.")
@output_options
@command
def twotype(ctx, pattern, p, alpha, induced, symmetrized, tol, grid, seed,
            as_json, output_format):
    """Search for a nontrivial 2-type graphon with constant Ψ."""
    f = _read_pattern(pattern)
    if (p is None) == (alpha is None):
        raise click.UsageError('exactly one of --p and --alpha is required',
                               ctx=ctx)
    if alpha is None:
        alpha = qr_tester.target_coefficient(f, p, induced)
    phi = hf_checker.build_psi_polynomial(f, induced, symmetrized)
    result = hf_checker.find_two_type_solutions(phi, alpha, tol, grid, seed)
    _emit(ctx, result, _output_format(as_json, output_format))


@cli.command()
@click.option('--graph', required=True, type=click.Path(exists=True, dir_okay=False),
              help="Host graph (edge-list file).")
@click.option('--kmax', type=click.IntRange(min=1), default=4,
              show_default=True, help="Largest moment.")
@output_options
@command
def degree(ctx, graph, kmax, as_json, output_format):
    """Compare degree moments with star densities."""
    g = _read_graph(graph)
    result = qr_tester.degree_moment_check(g, kmax)
    _emit(ctx, result, _output_format(as_json, output_format), report_csv)


@cli.command()
@click.option('--gnp', nargs=2, type=(click.IntRange(min=0), click.FloatRange(0.0, 1.0)),
              default=None, help="A G(n, p) random graph.")
@click.option('--bipartite', nargs=2, type=(click.IntRange(min=0), click.IntRange(min=0)),
              default=None, help="The complete bipartite graph K_{a,b}.")
@click.option('--complete', type=click.IntRange(min=0), default=None,
              help="The complete graph K_n.")
@click.option('--cycle', type=click.IntRange(min=3), default=None,
              help="The cycle C_n.")
@click.option('--kernel', type=click.Path(exists=True, dir_okay=False),
              help="Sample a W-random graph from this kernel file.")
@click.option('--n', type=click.IntRange(min=0), default=None,
              help="Vertex count for --kernel.")
@click.option('--seed', type=int, default=0, show_default=True,
              help="Random seed.")
@click.option('--out', type=click.Path(dir_okay=False, writable=True),
              default=None, help="Output file (default: standard output).")
@command
def generate(ctx, gnp, bipartite, complete, cycle, kernel, n, seed, out):
    """Generate a graph in the canonical edge-list format."""
    chosen = [x is not None for x in (gnp, bipartite, complete, cycle, kernel)]
    if sum(chosen) != 1:
        raise click.UsageError('exactly one generator is required', ctx=ctx)

    if gnp is not None:
        g = gen_gnp(gnp[0], gnp[1], seed)
    elif bipartite is not None:
        g = gen_complete_bipartite(*bipartite)
    elif complete is not None:
        g = gen_complete(complete)
    elif cycle is not None:
        g = gen_cycle(cycle)
    else:
        if n is None:
            raise click.BadParameter('required with --kernel', param_hint='--n')
        g = graphons.sample_graph(_read_kernel(kernel), n, seed)

    text = format_graph(g)
    if out is None:
        click.echo(text, nl=False)
    else:
        _write_atomically(out, text)
        _logger.info('wrote a %d-vertex graph to %s', g.n, out)


def _write_atomically(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix='.tmp-')
    try:
        with os.fdopen(fd, 'w', encoding='utf-8') as f:
            f.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        os.unlink(tmp_path)
        raise


@cli.command()
@click.option('--graph', 'graphs', required=True, multiple=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Graph file (repeatable).")
@click.option('--pattern', 'patterns', required=True, multiple=True,
              help="Pattern file, or a built-in name (repeatable).")
@click.option('--p', type=click.FloatRange(0.0, 1.0), default=None,
              help="Constant target graphon.")
@click.option('--kernel', type=click.Path(exists=True, dir_okay=False),
              help="Target step graphon.")
@click.option('--format', 'output_format',
              type=click.Choice(['text', 'json', 'csv']),
              default='csv', show_default=True, help="Output format.")
@click.option('--json', 'as_json', is_flag=True, help="Same as --format=json.")
@command
def converge(ctx, graphs, patterns, p, kernel, output_format, as_json):
    """Tabulate |t_inj(F, G) - t(F, W)| for a sequence of graphs."""
    if (p is None) == (kernel is None):
        raise click.UsageError('exactly one of --p and --kernel is required',
                               ctx=ctx)
    target: Any = p if kernel is None else _read_kernel(kernel)
    gs = [_read_graph(path) for path in graphs]
    fs = [_read_pattern(x) for x in patterns]
    rows = qr_tester.convergence_report(gs, target, fs)
    _emit(ctx, rows, _output_format(as_json, output_format), convergence_csv)


if __name__ == '__main__':  # pragma: nocover
    cli()
