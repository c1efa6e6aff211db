"""Exact labelled subgraph counts.

Two interchangeable back ends compute N(F,G;U_1..U_f) and the induced
N*(F,G;U_1..U_f):

* "backtrack" extends partial injective maps one pattern vertex at a
  time, visiting the pattern vertices by decreasing degree, and prunes on
  adjacency and on the vertex constraints. It works with Python integers
  and never overflows.

* "tensor" contracts numpy arrays. For induced counts every pair of
  pattern vertices contributes the adjacency matrix (edges) or the
  complement adjacency matrix (non-edges); both vanish on the diagonal,
  so only injective maps survive. Non-induced counts are obtained from
  homomorphism counts of the quotients F/π by Möbius inversion over the
  set partitions π of V(F). The sums are done in float64 while n**f
  stays below 2**53, and in int64 while it stays below 2**63.
"""

import logging
import math
from functools import lru_cache
from itertools import combinations
from typing import Iterator, Optional, Sequence
import numpy as np
from qr_graphons.common import (
    HostTooSmallError, ParameterError, falling_factorial, exact_dtype,
)
from qr_graphons.graphs import (
    Graph, PatternGraph, VertexConstraint, ConstraintMode,
)

_logger = logging.getLogger(__name__)
_LETTERS = 'abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ'
_EDGE = 'A'
_NON_EDGE = 'B'

METHODS = ('auto', 'backtrack', 'tensor')
TENSOR_MAX_ORDER = 8

# (coefficient, blocks of 0-based pattern vertices, (block, block, kind))
_Term = tuple[int, tuple[tuple[int, ...], ...], tuple[tuple[int, int, str], ...]]


def _set_partitions(items: Sequence[int]) -> Iterator[list[list[int]]]:
    if not items:
        yield []
        return

    first, rest = items[0], items[1:]
    for partition in _set_partitions(rest):
        yield [[first]] + partition
        for i in range(len(partition)):
            yield partition[:i] + [[first] + partition[i]] + partition[i + 1:]


@lru_cache(maxsize=256)
def _contraction_terms(
        f: int,
        edges: frozenset[tuple[int, int]],
        induced: bool,
        injective: bool,
) -> tuple[_Term, ...]:
    zero_based = {(i - 1, j - 1) for i, j in edges}
    singletons = tuple((v,) for v in range(f))

    if induced:
        pairs = tuple(
            (i, j, _EDGE if (i, j) in zero_based else _NON_EDGE)
            for i, j in combinations(range(f), 2)
        )
        return ((1, singletons, pairs),)

    if not injective:
        return ((1, singletons, tuple(
            (i, j, _EDGE) for i, j in sorted(zero_based))),)

    terms = []
    for partition in _set_partitions(list(range(f))):
        block_of = {}
        for b, block in enumerate(partition):
            for v in block:
                block_of[v] = b

        quotient_edges = set()
        for i, j in zero_based:
            a, b = block_of[i], block_of[j]
            if a == b:
                break  # an edge inside a block yields a loop
            quotient_edges.add((min(a, b), max(a, b)))
        else:
            coefficient = 1
            for block in partition:
                k = len(block)
                coefficient *= (-1) ** (k - 1) * math.factorial(k - 1)
            terms.append((
                coefficient,
                tuple(tuple(block) for block in partition),
                tuple((a, b, _EDGE) for a, b in sorted(quotient_edges)),
            ))

    return tuple(terms)


def _contract(
        term: _Term,
        matrices: dict[str, np.ndarray],
        vectors: Sequence[np.ndarray],
) -> float:
    _, blocks, pairs = term
    operands: list[np.ndarray] = []
    subscripts: list[str] = []
    for a, b, kind in pairs:
        operands.append(matrices[kind])
        subscripts.append(_LETTERS[a] + _LETTERS[b])
    for b, block in enumerate(blocks):
        vec = vectors[block[0]]
        for v in block[1:]:
            vec = vec * vectors[v]
        operands.append(vec)
        subscripts.append(_LETTERS[b])

    expr = ','.join(subscripts) + '->'
    return np.einsum(expr, *operands, optimize='greedy').item()


def _tensor_count(
        pattern: PatternGraph,
        adjacency: np.ndarray,
        vectors: Sequence[np.ndarray],
        *,
        induced: bool,
        injective: bool = True,
) -> int:
    n, f = adjacency.shape[0], pattern.f
    dtype = exact_dtype(n, f)
    assert dtype is not None
    adjacency = adjacency.astype(dtype)
    vectors = [vec.astype(dtype) for vec in vectors]
    matrices = {_EDGE: adjacency}
    if induced:
        matrices[_NON_EDGE] = 1 - np.eye(n, dtype=dtype) - adjacency

    total = 0
    for term in _contraction_terms(f, pattern.edges, induced, injective):
        total += term[0] * int(round(_contract(term, matrices, vectors)))
    return total


def _backtrack_count(
        pattern: PatternGraph,
        g: Graph,
        allowed: Sequence[frozenset[int]],
        *,
        induced: bool,
        injective: bool = True,
) -> int:
    f = pattern.f
    order = sorted(range(1, f + 1), key=lambda i: (-pattern.degree(i), i))
    position = {v: t for t, v in enumerate(order)}
    adjacent_before: list[list[int]] = []
    non_adjacent_before: list[list[int]] = []
    for t, i in enumerate(order):
        earlier = order[:t]
        adjacent_before.append(
            [position[j] for j in earlier if pattern.has_edge(i, j)])
        non_adjacent_before.append(
            [position[j] for j in earlier if not pattern.has_edge(i, j)]
            if induced else [])
    candidates_at = [allowed[i - 1] for i in order]
    images: list[int] = []

    def extend(t: int) -> int:
        candidates = set(candidates_at[t])
        for s in adjacent_before[t]:
            candidates &= g.neighbors(images[s])
        for s in non_adjacent_before[t]:
            candidates -= g.neighbors(images[s])
            candidates.discard(images[s])
        if injective:
            candidates.difference_update(images)

        if t == f - 1:
            return len(candidates)

        total = 0
        for x in candidates:
            images.append(x)
            total += extend(t + 1)
            images.pop()
        return total

    return extend(0)


def _resolve_method(method: str, n: int, f: int) -> str:
    if method not in METHODS:
        raise ParameterError(f'invalid counting method: {method}')
    if method == 'auto':
        if f <= TENSOR_MAX_ORDER and exact_dtype(n, f) is not None:
            return 'tensor'
        return 'backtrack'
    if method == 'tensor' and exact_dtype(n, f) is None:
        raise ParameterError(
            f'tensor counting is not exact for n={n}, f={f}')
    return method


def _count(
        pattern: PatternGraph,
        g: Graph,
        constraint: Optional[VertexConstraint],
        *,
        induced: bool,
        injective: bool,
        method: str,
) -> int:
    if constraint is None:
        constraint = VertexConstraint.none()
    f = pattern.f
    constraint.validate(g.n, f)

    if constraint.mode == ConstraintMode.SINGLE:
        # Counting inside U equals counting in the induced subgraph G[U].
        subset = sorted(constraint.sets[0])
        if injective and len(subset) < f:
            return 0
        if method != 'backtrack' and _resolve_method(
                method, len(subset), f) == 'tensor':
            adjacency = g.adjacency_matrix()[np.ix_(subset, subset)]
            ones = [np.ones(len(subset))] * f
            return _tensor_count(
                pattern, adjacency, ones,
                induced=induced, injective=injective)

    method = _resolve_method(method, g.n, f)
    if method == 'tensor':
        vectors = [constraint.indicator(i, g.n) for i in range(1, f + 1)]
        return _tensor_count(
            pattern, g.adjacency_matrix(), vectors,
            induced=induced, injective=injective)

    allowed = [constraint.allowed(i, g.n) for i in range(1, f + 1)]
    return _backtrack_count(
        pattern, g, allowed, induced=induced, injective=injective)


def count_subgraphs(
        pattern: PatternGraph,
        g: Graph,
        constraint: Optional[VertexConstraint] = None,
        induced: bool = False,
        *,
        method: str = 'auto',
) -> int:
    """Return the number of injective maps φ: V(F) → V(G) that preserve
    adjacency (and non-adjacency when `induced` is true), and satisfy the
    vertex constraint.

    This is N(F,G), N(F,G;U), N(F,G;U_1,...,U_f), or the induced N*(...).
    """
    return _count(
        pattern, g, constraint,
        induced=induced, injective=True, method=method)


def count_homomorphisms(
        pattern: PatternGraph,
        g: Graph,
        constraint: Optional[VertexConstraint] = None,
        *,
        method: str = 'auto',
) -> int:
    """Return hom(F, G): the number of all (not necessarily injective)
    adjacency preserving maps V(F) → V(G) satisfying the constraint.
    """
    return _count(
        pattern, g, constraint,
        induced=False, injective=False, method=method)


def t_inj(pattern: PatternGraph, g: Graph, induced: bool = False) -> float:
    """Return N(F,G) / (n)_f (or N*(F,G) / (n)_f when induced)."""
    if g.n < pattern.f:
        raise HostTooSmallError(
            f'the host has {g.n} vertices, the pattern needs {pattern.f}')
    count = count_subgraphs(pattern, g, induced=induced)
    return count / falling_factorial(g.n, pattern.f)


def t_hom(pattern: PatternGraph, g: Graph) -> float:
    """Return the homomorphism density hom(F,G) / n**f."""
    if g.n == 0:
        raise HostTooSmallError('empty host')
    return count_homomorphisms(pattern, g) / g.n ** pattern.f


def cut_edges(g: Graph, subset) -> int:
    """Return e_G(U, V∖U), the number of edges with exactly one endpoint
    in U.
    """
    u = frozenset(subset)
    for v in u:
        if not 0 <= v < g.n:
            raise ParameterError(f'vertex out of range: {v}')
    return sum(len(g.neighbors(v) - u) for v in u)


def degree_moment(g: Graph, k: int) -> float:
    """Return E (D_G / n)**k = (1/n) Σ_v (d_v / n)**k."""
    if k < 1:
        raise ParameterError(f'k must be at least 1, got {k}')
    if g.n == 0:
        raise HostTooSmallError('empty host')
    total = sum(g.degree(v) ** k for v in range(g.n))
    return total / g.n ** (k + 1)


def regularity_deviation(g: Graph, p: float) -> float:
    """Return n**-2 Σ_v |d_v - p n|."""
    if g.n == 0:
        raise HostTooSmallError('empty host')
    n = g.n
    return float(np.abs(g.degrees() - p * n).sum()) / (n * n)
