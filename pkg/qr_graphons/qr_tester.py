"""Finite-scale deviation statistics for quasi-random properties.

Every test returns a `DeviationReport` with the maximal normalized
deviation seen, and the witness subsets achieving it. The relevant subset
space is enumerated exhaustively when it is small enough, and otherwise
sampled with a seeded generator (the whole sample list is drawn before
any evaluation).
"""

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations, permutations, product
from typing import Iterable, Iterator, Optional, Sequence, Union
import numpy as np
from qr_graphons.common import (
    APP_DEFAULT_SAMPLES, APP_EXHAUSTIVE_LIMIT, APP_MAX_SYMMETRIZED_ORDER,
    HostTooSmallError, ParameterError, check_probability, check_fraction,
    make_rng,
)
from qr_graphons.graphs import Graph, PatternGraph, VertexConstraint
from qr_graphons.counting import (
    count_subgraphs, count_homomorphisms, degree_moment, regularity_deviation,
    t_inj,
)
from qr_graphons.graphons import (
    StepKernel, BoxSpec, box_integral, bilinear_box, constant, t_density,
)
from qr_graphons.hf_checker import beta
from qr_graphons.patterns import star

_logger = logging.getLogger(__name__)

GLOBAL = 'global'
HEREDITARY_SINGLE = 'hereditary-single'
HEREDITARY_MULTI = 'hereditary-multi'
HEREDITARY_DISJOINT = 'hereditary-disjoint'
CUT = 'cut'
CUT_FIXED_SIZE = 'cut-fixed-size'
CUT_REGULAR = 'cut-regular'
REGULARITY = 'regularity'
DEGREE_MOMENT = 'degree-moment'
KERNEL_BOX = 'kernel-box'

MODES = {
    'single': HEREDITARY_SINGLE,
    'multi': HEREDITARY_MULTI,
    'disjoint': HEREDITARY_DISJOINT,
}
GAMMA_HALF_NOTE = 'γ=1/2: not forcing without regularity'
LIMIT_GAMMA_NOTE = 'γ=1/f: limiting case, no verdict'
DEGREE_MOMENT_TOLERANCE = 1e-12

# Multi-set witnesses (f >= 2) are enumerated only on hosts this small.
MULTI_EXHAUSTIVE_ORDER = 10

Witness = tuple[tuple[int, ...], ...]


@dataclass
class DeviationReport:
    property: str
    p: float
    max_dev: float
    witness: Witness = ()
    pattern: Optional[str] = None
    gamma: Optional[float] = None
    induced: bool = False
    samples: int = 0
    exhaustive: bool = True
    seed: Optional[int] = None
    note: Optional[str] = None
    details: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    pattern: str
    deviation: float


def _sorted_witness(sets: Iterable[Iterable[int]]) -> Witness:
    return tuple(tuple(sorted(int(v) for v in s)) for s in sets)


def _check_host(g: Graph, patterns: Sequence[PatternGraph]) -> None:
    needed = max(pattern.f for pattern in patterns)
    if g.n < needed:
        raise HostTooSmallError(
            f'the host has {g.n} vertices, the patterns need {needed}')


def target_coefficient(pattern: PatternGraph, p: float, induced: bool) -> float:
    """Return p**e(F), or β_F(p) for induced tests."""
    return beta(pattern, p) if induced else p ** pattern.e


def dev_global(
        g: Graph,
        p: float,
        patterns: Sequence[PatternGraph],
) -> DeviationReport:
    """Return max over F of |N(F, G) / n**f - p**e(F)|."""
    check_probability('p', p)
    if not patterns:
        raise ParameterError('at least one pattern is required')
    _check_host(g, patterns)

    deviations = {}
    worst: Optional[PatternGraph] = None
    max_dev = -1.0
    for pattern in patterns:
        density = count_subgraphs(pattern, g) / g.n ** pattern.f
        deviation = abs(density - p ** pattern.e)
        deviations[pattern.label] = deviation
        if deviation > max_dev:
            worst, max_dev = pattern, deviation

    assert worst is not None
    return DeviationReport(
        property=GLOBAL,
        p=p,
        max_dev=max_dev,
        pattern=worst.label,
        samples=len(patterns),
        details={'deviations': deviations},
    )


def hereditary_deviation(
        g: Graph,
        pattern: PatternGraph,
        p: float,
        sets: Sequence[Iterable[int]],
        induced: bool = False,
        symmetric: bool = False,
) -> float:
    """Return |N(F,G;U_1..U_f) - coefficient · Π|U_i|| / n**f for one
    witness. A single set means the single-set count N(F,G;U).
    """
    sets = [frozenset(s) for s in sets]
    f = pattern.f
    coefficient = target_coefficient(pattern, p, induced)
    if len(sets) == 1:
        count: float = count_subgraphs(
            pattern, g, VertexConstraint.single(sets[0]), induced)
        target = coefficient * len(sets[0]) ** f
    else:
        if len(sets) != f:
            raise ParameterError(f'{f} vertex sets are required')
        if symmetric:
            orders = list(permutations(range(f)))
            count = math.fsum(
                count_subgraphs(
                    pattern, g,
                    VertexConstraint.per_vertex(sets[i] for i in order),
                    induced)
                for order in orders) / len(orders)
        else:
            count = count_subgraphs(
                pattern, g, VertexConstraint.per_vertex(sets), induced)
        target = coefficient * math.prod(len(s) for s in sets)

    return abs(count - target) / g.n ** f


def _subsets(n: int) -> Iterator[tuple[int, ...]]:
    for size in range(n + 1):
        yield from combinations(range(n), size)


def _disjoint_fixed(
        vertices: tuple[int, ...],
        m: int,
        count: int,
) -> Iterator[tuple[tuple[int, ...], ...]]:
    if count == 0:
        yield ()
        return
    for first in combinations(vertices, m):
        rest = tuple(v for v in vertices if v not in first)
        for tail in _disjoint_fixed(rest, m, count - 1):
            yield (first,) + tail


def _disjoint_all(n: int, f: int) -> Iterator[tuple[tuple[int, ...], ...]]:
    for labels in product(range(f + 1), repeat=n):
        yield tuple(
            tuple(v for v in range(n) if labels[v] == i)
            for i in range(1, f + 1))


def _space_size(mode: str, n: int, f: int, m: Optional[int]) -> int:
    if mode == 'single':
        return 2 ** n if m is None else math.comb(n, m)
    if mode == 'multi':
        return 2 ** (n * f) if m is None else math.comb(n, m) ** f
    if m is None:
        return (f + 1) ** n
    rest = n - f * m
    return math.factorial(n) // (math.factorial(m) ** f * math.factorial(rest))


def _enumerate(
        mode: str,
        n: int,
        f: int,
        m: Optional[int],
) -> Iterator[tuple[tuple[int, ...], ...]]:
    if mode == 'single':
        subsets = _subsets(n) if m is None else combinations(range(n), m)
        return ((u,) for u in subsets)
    if mode == 'multi':
        if m is None:
            return product(list(_subsets(n)), repeat=f)
        return product(list(combinations(range(n), m)), repeat=f)
    if m is None:
        return _disjoint_all(n, f)
    return _disjoint_fixed(tuple(range(n)), m, f)


def _random_subset(rng: np.random.Generator, n: int, m: Optional[int]):
    if m is None:
        # The size is drawn first, so that every size is explored.
        m = int(rng.integers(0, n + 1))
    return tuple(sorted(rng.choice(n, size=m, replace=False).tolist()))


def _sample(
        mode: str,
        n: int,
        f: int,
        m: Optional[int],
        samples: int,
        seed: int,
) -> list[tuple[tuple[int, ...], ...]]:
    rng = make_rng(seed)
    result = []
    for _ in range(samples):
        if mode == 'single':
            result.append((_random_subset(rng, n, m),))
        elif mode == 'multi':
            result.append(tuple(_random_subset(rng, n, m) for _ in range(f)))
        elif m is None:
            labels = rng.integers(0, f + 1, size=n)
            result.append(tuple(
                tuple(np.flatnonzero(labels == i).tolist())
                for i in range(1, f + 1)))
        else:
            perm = rng.permutation(n).tolist()
            result.append(tuple(
                tuple(sorted(perm[i * m:(i + 1) * m])) for i in range(f)))
    return result


def _fixed_size(gamma: Optional[float], n: int) -> Optional[int]:
    if gamma is None:
        return None
    check_fraction('gamma', gamma)
    return math.floor(gamma * n)


def dev_hereditary(
        g: Graph,
        pattern: PatternGraph,
        p: float,
        mode: str = 'single',
        gamma: Optional[float] = None,
        induced: bool = False,
        samples: Optional[int] = None,
        seed: int = 0,
        *,
        symmetric: bool = False,
        allow_limit_gamma: bool = False,
        exhaustive_limit: Optional[int] = None,
) -> DeviationReport:
    """Test the hereditary subgraph-count conditions.

    `mode` is "single" (one set U, target coefficient · |U|**f), "multi"
    (sets U_1..U_f, target coefficient · Π|U_i|) or "disjoint" (pairwise
    disjoint U_1..U_f). The coefficient is p**e(F), or β_F(p) for induced
    counts. With `gamma` every set has exactly floor(γn) vertices. In
    disjoint mode γ must be below 1/f; γ = 1/f is accepted only with
    `allow_limit_gamma`.
    """
    check_probability('p', p)
    if mode not in MODES:
        raise ParameterError(f'invalid mode: {mode}')
    if samples is None:
        samples = APP_DEFAULT_SAMPLES
    if samples < 1:
        raise ParameterError(f'samples must be at least 1, got {samples}')
    if exhaustive_limit is None:
        exhaustive_limit = APP_EXHAUSTIVE_LIMIT

    f, n = pattern.f, g.n
    if n < f:
        raise HostTooSmallError(
            f'the host has {n} vertices, the pattern needs {f}')
    if symmetric and mode == 'single':
        raise ParameterError('the symmetric option needs multi or disjoint mode')
    if symmetric and f > APP_MAX_SYMMETRIZED_ORDER:
        raise ParameterError(f'symmetrization is not supported for f={f}')

    m = _fixed_size(gamma, n)
    note = None
    if mode == 'disjoint' and gamma is not None:
        if gamma * f > 1.0:
            raise ParameterError(f'disjoint mode requires gamma < 1/{f}')
        if gamma * f == 1.0:
            if not allow_limit_gamma:
                raise ParameterError(
                    f'gamma = 1/{f} requires the limit gamma override')
            note = LIMIT_GAMMA_NOTE

    space = _space_size(mode, n, f, m)
    exhaustive = space <= exhaustive_limit
    if mode == 'multi' and f >= 2 and n > MULTI_EXHAUSTIVE_ORDER:
        exhaustive = False
    if exhaustive:
        _logger.info('enumerating all %d witnesses', space)
        candidates: Iterable = _enumerate(mode, n, f, m)
    else:
        _logger.info('sampling %d of %d witnesses', samples, space)
        candidates = _sample(mode, n, f, m, samples, seed)

    max_dev, witness, examined = -1.0, None, 0
    for sets in candidates:
        examined += 1
        deviation = hereditary_deviation(
            g, pattern, p, sets, induced, symmetric)
        if deviation > max_dev:
            max_dev, witness = deviation, sets

    return DeviationReport(
        property=MODES[mode],
        p=p,
        max_dev=max_dev,
        witness=_sorted_witness(witness or ()),
        pattern=pattern.label,
        gamma=gamma,
        induced=induced,
        samples=examined,
        exhaustive=exhaustive,
        seed=None if exhaustive else seed,
        note=note,
        details={'symmetric': symmetric} if symmetric else {},
    )


def cut_deviation(g: Graph, p: float, subset: Iterable[int]) -> float:
    """Return |e(U, V∖U) - p|U||V∖U|| / n**2."""
    x = np.zeros(g.n)
    x[list(subset)] = 1.0
    return float(_cut_deviations(g.adjacency_matrix(), p, x[None, :])[0])


def _cut_deviations(a: np.ndarray, p: float, xs: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    cross = ((xs @ a) * (1.0 - xs)).sum(axis=1)
    sizes = xs.sum(axis=1)
    return np.abs(cross - p * (sizes * (n - sizes))) / (n * n)


def _indicator_rows(rows: Sequence[Sequence[int]], n: int) -> np.ndarray:
    xs = np.zeros((len(rows), n))
    for r, subset in enumerate(rows):
        xs[r, list(subset)] = 1.0
    return xs


def _refine_cut(
        g: Graph,
        p: float,
        x: np.ndarray,
        fixed_size: bool,
) -> np.ndarray:
    """Greedy local search increasing |x'B(1 - x)| with B = A - p(J - I).

    Single-vertex flips are used for arbitrary sizes, and in/out swaps
    when the size is fixed.
    """
    n = g.n
    b = g.adjacency_matrix() - p * (1.0 - np.eye(n))
    best = x.copy()
    best_value = abs(float(x @ b @ (1.0 - x)))

    for sign in (1.0, -1.0):
        x = best.copy()
        for _ in range(n * n):
            inside, outside = b @ x, b @ (1.0 - x)
            into = outside - inside  # gain of moving a vertex into U
            if fixed_size:
                members = np.flatnonzero(x)
                others = np.flatnonzero(1.0 - x)
                if members.size == 0 or others.size == 0:
                    break
                gains = sign * (
                    -into[members][:, None] + into[others][None, :]
                    + 2.0 * b[np.ix_(members, others)])
                i, j = np.unravel_index(int(np.argmax(gains)), gains.shape)
                if gains[i, j] <= 1e-12:
                    break
                x[members[i]], x[others[j]] = 0.0, 1.0
            else:
                gains = sign * np.where(x > 0.0, -into, into)
                v = int(np.argmax(gains))
                if gains[v] <= 1e-12:
                    break
                x[v] = 1.0 - x[v]

        value = abs(float(x @ b @ (1.0 - x)))
        if value > best_value:
            best, best_value = x.copy(), value

    return best


def dev_cut(
        g: Graph,
        p: float,
        gamma: Optional[float] = None,
        samples: Optional[int] = None,
        seed: int = 0,
        *,
        refine: bool = False,
        exhaustive_limit: Optional[int] = None,
) -> DeviationReport:
    """Return max over U of |e(U, V∖U) - p|U||V∖U|| / n**2, over all U
    or over the U with exactly floor(γn) vertices.
    """
    check_probability('p', p)
    if samples is None:
        samples = APP_DEFAULT_SAMPLES
    if exhaustive_limit is None:
        exhaustive_limit = APP_EXHAUSTIVE_LIMIT
    n = g.n
    if n == 0:
        raise HostTooSmallError('empty host')

    m = _fixed_size(gamma, n)
    space = 2 ** n if m is None else math.comb(n, m)
    exhaustive = space <= exhaustive_limit
    a = g.adjacency_matrix()

    if exhaustive:
        rows: list = list(_enumerate('single', n, 1, m))
        rows = [r[0] for r in rows]
    else:
        rows = [r[0] for r in _sample('single', n, 1, m, samples, seed)]

    max_dev, witness = -1.0, ()
    for start in range(0, len(rows), 4096):
        chunk = rows[start:start + 4096]
        deviations = _cut_deviations(a, p, _indicator_rows(chunk, n))
        i = int(np.argmax(deviations))
        if deviations[i] > max_dev:
            max_dev, witness = float(deviations[i]), chunk[i]

    if refine and not exhaustive:
        x = _indicator_rows([witness], n)[0]
        refined = tuple(np.flatnonzero(_refine_cut(g, p, x, m is not None)))
        deviation = cut_deviation(g, p, refined)
        if deviation > max_dev:
            max_dev, witness = deviation, refined

    return DeviationReport(
        property=CUT if gamma is None else CUT_FIXED_SIZE,
        p=p,
        max_dev=max_dev,
        witness=_sorted_witness([witness]),
        gamma=gamma,
        samples=len(rows),
        exhaustive=exhaustive,
        seed=None if exhaustive else seed,
        note=GAMMA_HALF_NOTE if gamma == 0.5 else None,
        details={'refined': True} if refine and not exhaustive else {},
    )


def dev_regularity(g: Graph, p: float) -> DeviationReport:
    check_probability('p', p)
    max_dev = regularity_deviation(g, p)
    worst = int(np.argmax(np.abs(g.degrees() - p * g.n)))
    return DeviationReport(
        property=REGULARITY,
        p=p,
        max_dev=max_dev,
        samples=g.n,
        details={'worst_vertex': worst},
    )


def dev_cut_regular(
        g: Graph,
        p: float,
        gamma: float,
        samples: Optional[int] = None,
        seed: int = 0,
        *,
        refine: bool = False,
        exhaustive_limit: Optional[int] = None,
) -> DeviationReport:
    """Combine the regularity deviation with the fixed-size cut test.

    Together the two conditions are forcing for every γ, including 1/2.
    """
    regularity = dev_regularity(g, p)
    cut = dev_cut(g, p, gamma, samples, seed, refine=refine,
                  exhaustive_limit=exhaustive_limit)
    return DeviationReport(
        property=CUT_REGULAR,
        p=p,
        max_dev=max(regularity.max_dev, cut.max_dev),
        witness=cut.witness,
        gamma=gamma,
        samples=cut.samples,
        exhaustive=cut.exhaustive,
        seed=cut.seed,
        details={'regularity': regularity.max_dev, 'cut': cut.max_dev},
    )


def degree_moment_check(g: Graph, kmax: int) -> DeviationReport:
    """Compare E (D_G / n)**k with hom(S_k, G) / n**(k+1) for k = 1..kmax.
    """
    if kmax < 1:
        raise ParameterError(f'kmax must be at least 1, got {kmax}')
    if g.n == 0:
        raise HostTooSmallError('empty host')

    rows = []
    for k in range(1, kmax + 1):
        moment = degree_moment(g, k)
        density = count_homomorphisms(star(k), g) / g.n ** (k + 1)
        rows.append({
            'k': k,
            'moment': moment,
            'star_density': density,
            'difference': abs(moment - density),
        })

    max_dev = max(row['difference'] for row in rows)
    if max_dev > DEGREE_MOMENT_TOLERANCE:
        _logger.warning('degree moment mismatch: %s', max_dev)
    return DeviationReport(
        property=DEGREE_MOMENT,
        p=_edge_density(g),
        max_dev=max_dev,
        samples=kmax,
        details={'moments': rows},
    )


def _edge_density(g: Graph) -> float:
    return g.edge_count / math.comb(g.n, 2) if g.n >= 2 else 0.0


def convergence_report(
        graphs: Sequence[Graph],
        target: Union[StepKernel, float],
        patterns: Sequence[PatternGraph],
) -> list[ConvergenceRow]:
    """Return |t_inj(F, G_i) - t(F, target)| for every graph and pattern,
    ordered by graph size.
    """
    if not isinstance(target, StepKernel):
        target = constant(check_probability('p', target))
    if not patterns:
        raise ParameterError('at least one pattern is required')
    densities = [(pattern, t_density(pattern, target)) for pattern in patterns]

    rows = []
    for g in sorted(graphs, key=lambda g: g.n):
        _check_host(g, patterns)
        for pattern, density in densities:
            rows.append(ConvergenceRow(
                n=g.n,
                pattern=pattern.label,
                deviation=abs(t_inj(pattern, g) - density),
            ))
    return rows


def kernel_box_deviation(
        pattern: PatternGraph,
        kernel: StepKernel,
        p: float,
        boxes: BoxSpec,
        induced: bool = False,
        symmetrized: bool = False,
) -> DeviationReport:
    """Return |∫_{A_1×…×A_f} Ψ - coefficient · Π λ(A_i)| for a step graphon.
    """
    check_probability('p', p)
    integral = box_integral(pattern, kernel, boxes, induced, symmetrized)
    measures = boxes.measures(kernel)
    target = target_coefficient(pattern, p, induced) * math.prod(measures)
    return DeviationReport(
        property=KERNEL_BOX,
        p=p,
        max_dev=abs(integral - target),
        pattern=pattern.label,
        induced=induced,
        samples=1,
        details={
            'integral': integral,
            'target': target,
            'measures': measures,
            'symmetrized': symmetrized,
        },
    )


def kernel_cut_deviation(
        kernel: StepKernel,
        p: float,
        box: Sequence[float],
) -> float:
    """Return |∫_{A×Ā} W - p λ(A) λ(Ā)| for a fractional part vector."""
    check_probability('p', p)
    a = np.asarray(box, dtype=np.float64)
    if a.shape != (kernel.k,) or np.any(a < 0.0) or np.any(a > 1.0):
        raise ParameterError('invalid box vector')
    measure = float(a @ kernel.weights)
    integral = bilinear_box(kernel, a, 1.0 - a)
    return abs(integral - p * measure * (1.0 - measure))
