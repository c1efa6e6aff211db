import logging
import math
from enum import Enum
from itertools import combinations, permutations
from typing import Iterable, Optional, Sequence
import numpy as np
from qr_graphons.common import (
    APP_MAX_SYMMETRIZED_ORDER, APP_MAX_PSI_TENSOR, KernelError,
    ParameterError, HostTooSmallError, check_probability, make_rng,
)
from qr_graphons.graphs import Graph, PatternGraph

_logger = logging.getLogger(__name__)
_LETTERS = 'abcdefghijklmnopqrstuvwxyz'
WEIGHT_SUM_TOLERANCE = 1e-12
SYMMETRY_TOLERANCE = 1e-12


class KernelRange(Enum):
    GRAPHON = 'graphon'  # values in [0, 1]
    SIGNED = 'signed'  # values in [-1, 1]

    @property
    def bounds(self) -> tuple[float, float]:
        return (0.0, 1.0) if self is KernelRange.GRAPHON else (-1.0, 1.0)


class StepKernel:
    """A symmetric step function on [0,1]², constant on the rectangles of
    a partition of [0,1] into k parts of the given weights.

    Instances are immutable; `weights` and `values` are read-only arrays.
    """
    __slots__ = ('weights', 'values', 'range')

    def __init__(
            self,
            weights: Sequence[float],
            values: Sequence[Sequence[float]],
            range: KernelRange = KernelRange.GRAPHON,
    ):
        w = np.array(weights, dtype=np.float64)
        v = np.array(values, dtype=np.float64)
        range = KernelRange(range)

        if w.ndim != 1 or w.size < 1:
            raise KernelError('weights must be a non-empty sequence')
        k = w.size
        if not np.all(w > 0.0):
            raise KernelError('every weight must be positive')
        if abs(math.fsum(w.tolist()) - 1.0) > WEIGHT_SUM_TOLERANCE:
            raise KernelError('the weights must sum to 1')
        if v.shape != (k, k):
            raise KernelError(f'values must be a {k}x{k} matrix')
        if not np.all(np.isfinite(v)):
            raise KernelError('values must be finite')
        if np.max(np.abs(v - v.T)) > SYMMETRY_TOLERANCE:
            raise KernelError('values must be symmetric')
        lo, hi = range.bounds
        if np.any(v < lo) or np.any(v > hi):
            raise KernelError(f'values must be in [{lo}, {hi}]')

        v = (v + v.T) / 2.0
        w.flags.writeable = False
        v.flags.writeable = False
        self.weights: np.ndarray = w
        self.values: np.ndarray = v
        self.range: KernelRange = range

    @property
    def k(self) -> int:
        return self.weights.size

    @property
    def is_graphon(self) -> bool:
        return self.range is KernelRange.GRAPHON

    def marginals(self) -> np.ndarray:
        """Return the part marginals Σ_j weight(j) values(i, j)."""
        return self.values @ self.weights

    def require_graphon(self) -> None:
        if not self.is_graphon:
            raise KernelError('a graphon (values in [0, 1]) is required')

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StepKernel):
            return NotImplemented
        return (self.range is other.range
                and np.array_equal(self.weights, other.weights)
                and np.array_equal(self.values, other.values))

    def __hash__(self) -> int:
        return hash((self.range, self.weights.tobytes(), self.values.tobytes()))

    def __repr__(self) -> str:
        return f'StepKernel(k={self.k}, range={self.range.value})'


class BoxSpec:
    """Fractional boxes A_1 x ... x A_f for a step kernel with k parts.

    `vectors[i][j]` is the fraction of part j that belongs to A_{i+1}.
    """
    __slots__ = ('vectors',)

    def __init__(self, vectors: Iterable[Sequence[float]]):
        arrays = []
        for vec in vectors:
            a = np.array(vec, dtype=np.float64)
            if a.ndim != 1:
                raise KernelError('every box vector must be one-dimensional')
            if np.any(a < 0.0) or np.any(a > 1.0):
                raise KernelError('box fractions must be in [0, 1]')
            a.flags.writeable = False
            arrays.append(a)
        if not arrays:
            raise KernelError('at least one box is required')
        self.vectors: tuple[np.ndarray, ...] = tuple(arrays)

    @classmethod
    def identical(cls, vector: Sequence[float], f: int) -> 'BoxSpec':
        """Return the single-set box A x ... x A (f factors)."""
        return cls([vector] * f)

    @classmethod
    def full(cls, k: int, f: int) -> 'BoxSpec':
        return cls.identical(np.ones(k), f)

    @classmethod
    def from_parts(cls, parts: Iterable[Iterable[int]], k: int) -> 'BoxSpec':
        """Return boxes that are unions of whole parts."""
        vectors = []
        for chosen in parts:
            a = np.zeros(k)
            a[list(chosen)] = 1.0
            vectors.append(a)
        return cls(vectors)

    @property
    def f(self) -> int:
        return len(self.vectors)

    def validate(self, kernel: StepKernel, f: int) -> None:
        if self.f != f:
            raise KernelError(f'{f} boxes are required, got {self.f}')
        for a in self.vectors:
            if a.size != kernel.k:
                raise KernelError(f'box vectors must have {kernel.k} entries')

    def measures(self, kernel: StepKernel) -> list[float]:
        """Return λ(A_i) = Σ_j a_i(j) weight(j) for every box."""
        return [float(a @ kernel.weights) for a in self.vectors]


def constant(c: float, range: KernelRange = KernelRange.GRAPHON) -> StepKernel:
    return StepKernel([1.0], [[c]], range)


def step_from_graph(g: Graph) -> StepKernel:
    """Return W_G: |G| parts of weight 1/|G|, value 1 on edges, 0 else."""
    if g.n == 0:
        raise HostTooSmallError('empty graph')
    return StepKernel(np.full(g.n, 1.0 / g.n), g.adjacency_matrix())


def two_type(u: float, v: float, s: float, w1: float) -> StepKernel:
    """Return the 2-type graphon [[u, s], [s, v]] with weights (w1, 1-w1).
    """
    for name, value in (('u', u), ('v', v), ('s', s)):
        check_probability(name, value)
    if not 0.0 < w1 < 1.0:
        raise ParameterError(f'w1 must be in (0, 1), got {w1}')
    return StepKernel([w1, 1.0 - w1], [[u, s], [s, v]])


def _pair_factors(
        pattern: PatternGraph,
        values: np.ndarray,
        induced: bool,
) -> list[tuple[int, int, np.ndarray]]:
    # Returns (i, j, matrix) for the pairs contributing to Ψ (0-based).
    factors = []
    complement = 1.0 - values if induced else None
    for i, j in combinations(range(pattern.f), 2):
        if pattern.has_edge(i + 1, j + 1):
            factors.append((i, j, values))
        elif complement is not None:
            factors.append((i, j, complement))
    return factors


def _integrate(
        pattern: PatternGraph,
        kernel: StepKernel,
        vectors: Sequence[np.ndarray],
        induced: bool,
) -> float:
    operands: list[np.ndarray] = []
    subscripts: list[str] = []
    for i, j, matrix in _pair_factors(pattern, kernel.values, induced):
        operands.append(matrix)
        subscripts.append(_LETTERS[i] + _LETTERS[j])
    for i, vec in enumerate(vectors):
        operands.append(vec)
        subscripts.append(_LETTERS[i])
    expr = ','.join(subscripts) + '->'
    return float(np.einsum(expr, *operands, optimize='greedy'))


def _check_symmetrized_order(f: int, max_order: Optional[int]) -> None:
    if max_order is None:
        max_order = APP_MAX_SYMMETRIZED_ORDER
    if f > max_order:
        raise ParameterError(
            f'symmetrization is supported for at most {max_order} '
            f'pattern vertices, got {f}')


def psi_eval(
        pattern: PatternGraph,
        kernel: StepKernel,
        parts: Sequence[int],
        induced: bool = False,
        symmetrized: bool = False,
        *,
        max_order: Optional[int] = None,
) -> float:
    """Evaluate Ψ_{F,W} (or Ψ*_{F,W} when `induced`) at representative
    points of the given (0-based) parts. With `symmetrized`, return the
    average over all f! relabellings of the pattern.
    """
    kernel.require_graphon()
    f = pattern.f
    if len(parts) != f:
        raise ParameterError(f'{f} part indices are required')
    for x in parts:
        if not 0 <= x < kernel.k:
            raise ParameterError(f'part index out of range: {x}')

    factors = _pair_factors(pattern, kernel.values, induced)

    def psi(xs: Sequence[int]) -> float:
        result = 1.0
        for i, j, matrix in factors:
            result *= matrix[xs[i], xs[j]]
        return float(result)

    if not symmetrized:
        return psi(parts)

    _check_symmetrized_order(f, max_order)
    perms = list(permutations(parts))
    return math.fsum(psi(xs) for xs in perms) / len(perms)


def psi_tensor(
        pattern: PatternGraph,
        kernel: StepKernel,
        induced: bool = False,
        symmetrized: bool = False,
        *,
        max_order: Optional[int] = None,
        max_size: Optional[int] = None,
) -> np.ndarray:
    """Return the array of Ψ values over all k**f part tuples."""
    kernel.require_graphon()
    f, k = pattern.f, kernel.k
    if max_size is None:
        max_size = APP_MAX_PSI_TENSOR
    if k ** f > max_size:
        raise ParameterError(f'k**f = {k ** f} part tuples is too many')

    tensor = np.ones((k,) * f)
    for i, j, matrix in _pair_factors(pattern, kernel.values, induced):
        shape = [1] * f
        shape[i] = shape[j] = k
        tensor = tensor * matrix.reshape(shape)

    if symmetrized:
        _check_symmetrized_order(f, max_order)
        perms = list(permutations(range(f)))
        tensor = sum(np.transpose(tensor, p) for p in perms) / len(perms)

    return tensor


def psi_constant_dev(
        pattern: PatternGraph,
        kernel: StepKernel,
        alpha: float,
        induced: bool = False,
        symmetrized: bool = False,
) -> float:
    """Return max over all part tuples of |Ψ - α|.

    For step kernels, Ψ = α almost everywhere if and only if this is zero.
    """
    tensor = psi_tensor(pattern, kernel, induced, symmetrized)
    return float(np.max(np.abs(tensor - alpha)))


def t_density(
        pattern: PatternGraph,
        kernel: StepKernel,
        induced: bool = False,
) -> float:
    """Return t(F, W), or t_ind(F, W) when `induced`, as an exact finite
    sum over part assignments.
    """
    kernel.require_graphon()
    return _integrate(
        pattern, kernel, [kernel.weights] * pattern.f, induced)


def box_integral(
        pattern: PatternGraph,
        kernel: StepKernel,
        boxes: BoxSpec,
        induced: bool = False,
        symmetrized: bool = False,
        *,
        max_order: Optional[int] = None,
) -> float:
    """Return the integral of Ψ (or Ψ*) over A_1 x ... x A_f.

    With `symmetrized`, Ψ is averaged over all f! relabellings of the
    pattern. Relabelling the pattern is the same as permuting the boxes.
    """
    kernel.require_graphon()
    boxes.validate(kernel, pattern.f)
    vectors = [a * kernel.weights for a in boxes.vectors]
    if not symmetrized:
        return _integrate(pattern, kernel, vectors, induced)

    _check_symmetrized_order(pattern.f, max_order)
    orders = list(permutations(range(pattern.f)))
    return math.fsum(
        _integrate(pattern, kernel, [vectors[i] for i in order], induced)
        for order in orders) / len(orders)


def bilinear_box(kernel: StepKernel, a: np.ndarray, b: np.ndarray) -> float:
    """Return the integral of W over A x B for fractional part vectors.

    Works for signed kernels too.
    """
    wa = np.asarray(a, dtype=np.float64) * kernel.weights
    wb = np.asarray(b, dtype=np.float64) * kernel.weights
    return float(wa @ kernel.values @ wb)


def sample_graph(kernel: StepKernel, n: int, seed: int) -> Graph:
    """Return a W-random graph on n vertices.

    The part labels of the vertices are drawn first (n draws), then one
    uniform double per pair in row-major (u < v) order; the pair is an
    edge when the double is below values(part_u, part_v).
    """
    kernel.require_graphon()
    if n < 0:
        raise ParameterError(f'invalid vertex count: {n}')

    rng = make_rng(seed)
    labels = rng.choice(kernel.k, size=n, p=kernel.weights)
    rows, cols = np.triu_indices(n, 1)
    probabilities = kernel.values[labels[rows], labels[cols]]
    keep = rng.random(rows.size) < probabilities
    _logger.debug('sampled a %d-vertex graph from %r', n, kernel)
    return Graph(n, zip(rows[keep].tolist(), cols[keep].tolist()))


def w_degree_moment(kernel: StepKernel, k: int) -> float:
    """Return E D_W**k = Σ_i weight(i) (Σ_j weight(j) values(i, j))**k."""
    kernel.require_graphon()
    if k < 1:
        raise ParameterError(f'k must be at least 1, got {k}')
    return float(kernel.weights @ kernel.marginals() ** k)


def is_p_regular(kernel: StepKernel, p: float, tol: float = 1e-9) -> bool:
    """Return whether every part marginal is within `tol` of p."""
    kernel.require_graphon()
    return bool(np.all(np.abs(kernel.marginals() - p) <= tol))
