"""Built-in pattern graphs.

Names: "K<m>" (complete), "E<m>" (empty), "P<m>" (path with m vertices),
"C<m>" (cycle, m >= 3), and "S<k>" (the star K_{1,k}, center 1, k + 1
vertices).
"""

import re
from itertools import combinations
from qr_graphons.common import InvalidGraphError
from qr_graphons.graphs import PatternGraph

_NAME_RE = re.compile(r'([KEPCS])(\d{1,2})\Z')
MAX_BUILTIN_ORDER = 16


def complete(m: int) -> PatternGraph:
    return PatternGraph(m, combinations(range(1, m + 1), 2), name=f'K{m}')


def empty(m: int) -> PatternGraph:
    return PatternGraph(m, name=f'E{m}')


def path(m: int) -> PatternGraph:
    return PatternGraph(m, ((i, i + 1) for i in range(1, m)), name=f'P{m}')


def cycle(m: int) -> PatternGraph:
    if m < 3:
        raise InvalidGraphError(f'a cycle needs at least 3 vertices, got {m}')
    edges = [(i, i + 1) for i in range(1, m)]
    edges.append((1, m))
    return PatternGraph(m, edges, name=f'C{m}')


def star(k: int) -> PatternGraph:
    """Return S_k = K_{1,k} with center 1 and leaves 2..k+1."""
    if k < 1:
        raise InvalidGraphError(f'a star needs at least 1 leaf, got {k}')
    return PatternGraph(
        k + 1, ((1, i) for i in range(2, k + 2)), name=f'S{k}')


_BUILDERS = {
    'K': complete,
    'E': empty,
    'P': path,
    'C': cycle,
    'S': star,
}

K2 = complete(2)
P3 = path(3)
K3 = complete(3)
C4 = cycle(4)
C5 = cycle(5)
K4 = complete(4)


def get_pattern(name: str) -> PatternGraph:
    """Return the built-in pattern with the given name (for example "P3").

    Raises `InvalidGraphError` for unknown names.
    """
    m = _NAME_RE.match(name.strip().upper())
    if m is None:
        raise InvalidGraphError(f'unknown pattern: {name}')

    size = int(m[2])
    if not 1 <= size <= MAX_BUILTIN_ORDER:
        raise InvalidGraphError(f'unsupported pattern size: {name}')
    return _BUILDERS[m[1]](size)


def all_patterns(f: int) -> list[PatternGraph]:
    """Return all 2**C(f,2) labelled graphs on the vertex set {1..f}."""
    pairs = list(combinations(range(1, f + 1), 2))
    return [
        PatternGraph(f, (pairs[b] for b in range(len(pairs)) if mask >> b & 1))
        for mask in range(1 << len(pairs))
    ]


def supergraphs(pattern: PatternGraph) -> list[PatternGraph]:
    """Return all patterns F' on the same vertex set with F' ⊇ F."""
    missing = pattern.non_edges()
    return [
        PatternGraph(pattern.f, pattern.edges.union(
            missing[b] for b in range(len(missing)) if mask >> b & 1))
        for mask in range(1 << len(missing))
    ]
