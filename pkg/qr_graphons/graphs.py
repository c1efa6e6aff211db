import logging
from enum import Enum
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Optional, Sequence, Union
import numpy as np
from qr_graphons.common import (
    InvalidGraphError, ParameterError, check_probability, make_rng,
)

_logger = logging.getLogger(__name__)

Edge = tuple[int, int]


class Graph:
    """A finite simple graph on the vertices 0..n-1.

    Instances are immutable. The adjacency is kept as a tuple of
    neighbour sets; `adjacency_matrix()` returns a read-only numpy view of
    the same relation.
    """
    __slots__ = ('n', 'edge_count', '_neighbors', '_matrix')

    def __init__(self, n: int, edges: Iterable[Edge] = ()):
        if n < 0:
            raise InvalidGraphError(f'invalid vertex count: {n}')

        neighbors: list[set[int]] = [set() for _ in range(n)]
        edge_count = 0
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise InvalidGraphError(f'vertex out of range: {u} {v}')
            if u == v:
                raise InvalidGraphError(f'loop at vertex {u}')
            if v in neighbors[u]:
                raise InvalidGraphError(f'duplicate edge: {u} {v}')
            neighbors[u].add(v)
            neighbors[v].add(u)
            edge_count += 1

        self.n: int = n
        self.edge_count: int = edge_count
        self._neighbors: tuple[frozenset[int], ...] = tuple(
            frozenset(s) for s in neighbors)
        self._matrix: Optional[np.ndarray] = None

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> 'Graph':
        """Build a graph from a symmetric 0/1 matrix with zero diagonal."""
        m = np.asarray(matrix)
        n = m.shape[0]
        if m.shape != (n, n) or not np.array_equal(m, m.T):
            raise InvalidGraphError('the adjacency matrix is not symmetric')
        if np.any(np.diagonal(m)):
            raise InvalidGraphError('the adjacency matrix has loops')
        rows, cols = np.nonzero(np.triu(m, 1))
        return cls(n, zip(rows.tolist(), cols.tolist()))

    def neighbors(self, v: int) -> frozenset[int]:
        return self._neighbors[v]

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._neighbors[u]

    def degree(self, v: int) -> int:
        return len(self._neighbors[v])

    def degrees(self) -> np.ndarray:
        return np.fromiter(
            (len(s) for s in self._neighbors), dtype=np.int64, count=self.n)

    def edges(self) -> list[Edge]:
        """Return the edges as sorted (u, v) pairs with u < v."""
        return [
            (u, v)
            for u in range(self.n)
            for v in sorted(self._neighbors[u]) if u < v
        ]

    def adjacency_matrix(self) -> np.ndarray:
        """Return the adjacency matrix as a read-only float64 array."""
        if self._matrix is None:
            m = np.zeros((self.n, self.n), dtype=np.float64)
            for u, v in self.edges():
                m[u, v] = m[v, u] = 1.0
            m.flags.writeable = False
            self._matrix = m
        return self._matrix

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and self._neighbors == other._neighbors

    def __hash__(self) -> int:
        return hash((self.n, self._neighbors))

    def __repr__(self) -> str:
        return f'Graph(n={self.n}, edge_count={self.edge_count})'


class PatternGraph:
    """A small labelled graph F on the vertex set {1, ..., f}.
    """
    __slots__ = ('f', 'edges', 'name')

    def __init__(
            self,
            f: int,
            edges: Iterable[Edge] = (),
            *,
            name: Optional[str] = None,
    ):
        if f < 1:
            raise InvalidGraphError(f'invalid pattern size: {f}')

        normalized: set[Edge] = set()
        for i, j in edges:
            if not (1 <= i <= f and 1 <= j <= f):
                raise InvalidGraphError(f'pattern vertex out of range: {i} {j}')
            if i == j:
                raise InvalidGraphError(f'loop at pattern vertex {i}')
            normalized.add((min(i, j), max(i, j)))

        self.f: int = f
        self.edges: frozenset[Edge] = frozenset(normalized)
        self.name: Optional[str] = name

    @property
    def e(self) -> int:
        return len(self.edges)

    @property
    def pair_count(self) -> int:
        return self.f * (self.f - 1) // 2

    @property
    def edge_density(self) -> float:
        """Return p_F = e(F) / C(f, 2)."""
        if self.f < 2:
            raise ParameterError('edge density needs at least 2 vertices')
        return self.e / self.pair_count

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges

    def degree(self, i: int) -> int:
        return sum(1 for a, b in self.edges if i == a or i == b)

    def pairs(self) -> list[Edge]:
        """Return all pairs i < j of pattern vertices, sorted."""
        return list(combinations(range(1, self.f + 1), 2))

    def non_edges(self) -> list[Edge]:
        return [ij for ij in self.pairs() if ij not in self.edges]

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)

    def as_graph(self) -> Graph:
        """Return the pattern as a `Graph` on the vertices 0..f-1."""
        return Graph(self.f, ((i - 1, j - 1) for i, j in self.edges))

    def relabel(self, perm: Sequence[int]) -> 'PatternGraph':
        """Return the pattern with vertex i renamed to perm[i - 1]."""
        return PatternGraph(
            self.f, ((perm[i - 1], perm[j - 1]) for i, j in self.edges))

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        edges = ','.join(f'{i}-{j}' for i, j in self.sorted_edges())
        return f'F{self.f}[{edges}]'

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PatternGraph):
            return NotImplemented
        return self.f == other.f and self.edges == other.edges

    def __hash__(self) -> int:
        return hash((self.f, self.edges))

    def __repr__(self) -> str:
        return f'PatternGraph({self.label})'


class ConstraintMode(Enum):
    NONE = 'none'
    SINGLE = 'single-set'
    PER_VERTEX = 'per-vertex-sets'


@dataclass(frozen=True)
class VertexConstraint:
    """Restricts where the pattern vertices may be mapped.

    In single-set mode every pattern vertex must be mapped into `sets[0]`,
    in per-vertex mode pattern vertex i must be mapped into `sets[i - 1]`.
    """
    mode: ConstraintMode
    sets: tuple[frozenset[int], ...] = ()

    @classmethod
    def none(cls) -> 'VertexConstraint':
        return cls(ConstraintMode.NONE)

    @classmethod
    def single(cls, subset: Iterable[int]) -> 'VertexConstraint':
        return cls(ConstraintMode.SINGLE, (frozenset(subset),))

    @classmethod
    def per_vertex(
            cls,
            subsets: Iterable[Iterable[int]],
    ) -> 'VertexConstraint':
        return cls(
            ConstraintMode.PER_VERTEX, tuple(frozenset(s) for s in subsets))

    def validate(self, n: int, f: int) -> None:
        if self.mode == ConstraintMode.NONE:
            return
        if self.mode == ConstraintMode.SINGLE and len(self.sets) != 1:
            raise InvalidGraphError('single-set mode needs exactly one set')
        if self.mode == ConstraintMode.PER_VERTEX and len(self.sets) != f:
            raise InvalidGraphError(
                f'per-vertex mode needs {f} sets, got {len(self.sets)}')
        for s in self.sets:
            for v in s:
                if not 0 <= v < n:
                    raise InvalidGraphError(f'vertex out of range: {v}')

    def allowed(self, i: int, n: int) -> frozenset[int]:
        """Return the host vertices allowed for pattern vertex i (1-based).
        """
        if self.mode == ConstraintMode.NONE:
            return frozenset(range(n))
        if self.mode == ConstraintMode.SINGLE:
            return self.sets[0]
        return self.sets[i - 1]

    def indicator(self, i: int, n: int) -> np.ndarray:
        """Return the 0/1 indicator vector of `allowed(i, n)`."""
        if self.mode == ConstraintMode.NONE:
            return np.ones(n, dtype=np.float64)
        vec = np.zeros(n, dtype=np.float64)
        vec[list(self.allowed(i, n))] = 1.0
        return vec


def complement(
        g: Union[Graph, PatternGraph],
) -> Union[Graph, PatternGraph]:
    """Return the complement of a graph, or of a pattern graph."""
    if isinstance(g, PatternGraph):
        return PatternGraph(g.f, g.non_edges())

    n = g.n
    return Graph(n, (
        (u, v)
        for u in range(n)
        for v in range(u + 1, n) if not g.has_edge(u, v)
    ))


def edge_density(g: Graph) -> float:
    """Return e(G) / C(n, 2)."""
    if g.n < 2:
        raise ParameterError('edge density needs at least 2 vertices')
    return g.edge_count / (g.n * (g.n - 1) // 2)


def induced_subgraph(g: Graph, vertices: Iterable[int]) -> Graph:
    """Return G[U], relabelled to 0..|U|-1 in increasing vertex order."""
    vs = sorted(set(vertices))
    index = {v: i for i, v in enumerate(vs)}
    return Graph(len(vs), (
        (index[u], index[v])
        for u in vs
        for v in g.neighbors(u) if v in index and u < v
    ))


def relabel(g: Graph, perm: Sequence[int]) -> Graph:
    """Return the graph with vertex v renamed to perm[v]."""
    if sorted(perm) != list(range(g.n)):
        raise InvalidGraphError('not a permutation of the vertex set')
    return Graph(g.n, ((perm[u], perm[v]) for u, v in g.edges()))


def gen_gnp(n: int, p: float, seed: int) -> Graph:
    """Return a G(n, p) random graph.

    One uniform double is drawn per unordered pair, in row-major (u < v)
    order, from a PCG64 generator seeded with `seed`; the pair is an edge
    when the double is below `p`.
    """
    if n < 0:
        raise ParameterError(f'invalid vertex count: {n}')
    check_probability('p', p)

    rows, cols = np.triu_indices(n, 1)
    draws = make_rng(seed).random(rows.size)
    keep = draws < p
    _logger.debug('generated G(%d, %s) with seed %d', n, p, seed)
    return Graph(n, zip(rows[keep].tolist(), cols[keep].tolist()))


def gen_complete_bipartite(a: int, b: int) -> Graph:
    """Return K_{a,b} with parts {0..a-1} and {a..a+b-1}."""
    if a < 0 or b < 0:
        raise ParameterError(f'invalid part sizes: {a} {b}')
    return Graph(a + b, ((u, v) for u in range(a) for v in range(a, a + b)))


def gen_complete(n: int) -> Graph:
    return Graph(n, combinations(range(n), 2))


def gen_empty(n: int) -> Graph:
    return Graph(n)


def gen_cycle(n: int) -> Graph:
    if n < 3:
        raise ParameterError(f'a cycle needs at least 3 vertices, got {n}')
    return Graph(n, ((v, (v + 1) % n) for v in range(n)))


def gen_path(n: int) -> Graph:
    return Graph(n, ((v, v + 1) for v in range(n - 1)))
