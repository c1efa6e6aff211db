import re
from typing import Iterable
from qr_graphons.common import GraphFormatError
from qr_graphons.graphs import Graph, PatternGraph

_COMMENT_RE = re.compile(r'#.*')
_COUNT_RE = re.compile(r'(\d+)\Z')
_EDGE_RE = re.compile(r'(\d+)\s+(\d+)\Z')

GRAPH_MAX_VERTICES = 1_000_000


def _content_lines(text: str) -> Iterable[tuple[int, str]]:
    # Yields (line number, stripped content) for the non-empty lines, with
    # the comments removed.
    for lineno, line in enumerate(text.splitlines(), start=1):
        content = _COMMENT_RE.sub('', line).strip()
        if content:
            yield lineno, content


def parse_edge_list(text: str) -> tuple[int, list[tuple[int, int]]]:
    """Parse an edge-list document, returning the vertex count and the
    edges in document order.

    The first non-comment line contains the vertex count n. Every other
    non-comment line contains two distinct vertex indices "u v", with
    0 <= u, v < n. A '#' starts a comment, which extends to the end of the
    line. Raises `GraphFormatError` naming the offending line.
    """
    lines = _content_lines(text)
    try:
        lineno, content = next(lines)
    except StopIteration:
        raise GraphFormatError('missing vertex count')

    m = _COUNT_RE.match(content)
    if m is None:
        raise GraphFormatError('invalid vertex count', lineno)
    n = int(m[1])
    if n > GRAPH_MAX_VERTICES:
        raise GraphFormatError('too many vertices', lineno)

    edges: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    for lineno, content in lines:
        m = _EDGE_RE.match(content)
        if m is None:
            raise GraphFormatError('malformed edge line', lineno)
        u, v = int(m[1]), int(m[2])
        if u >= n or v >= n:
            raise GraphFormatError('vertex index out of range', lineno)
        if u == v:
            raise GraphFormatError('loop', lineno)
        key = (min(u, v), max(u, v))
        if key in seen:
            raise GraphFormatError('duplicate edge', lineno)
        seen.add(key)
        edges.append((u, v))

    return n, edges


def parse_graph(text: str) -> Graph:
    n, edges = parse_edge_list(text)
    return Graph(n, edges)


def parse_pattern(text: str, *, name=None) -> PatternGraph:
    """Parse a pattern graph. The document uses the vertices 0..f-1, which
    become the pattern labels 1..f.
    """
    f, edges = parse_edge_list(text)
    if f < 1:
        raise GraphFormatError('a pattern needs at least one vertex')
    return PatternGraph(f, ((u + 1, v + 1) for u, v in edges), name=name)


def format_graph(g: Graph) -> str:
    """Serialize a graph in the canonical edge-list form (sorted edges)."""
    lines = [f'{g.n}\n']
    lines.extend(f'{u} {v}\n' for u, v in g.edges())
    return ''.join(lines)


def format_pattern(pattern: PatternGraph) -> str:
    lines = [f'{pattern.f}\n']
    lines.extend(f'{i - 1} {j - 1}\n' for i, j in pattern.sorted_edges())
    return ''.join(lines)
