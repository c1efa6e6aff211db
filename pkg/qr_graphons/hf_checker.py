"""Numerical checks of hereditary induced forcing.

For a pattern F and a 2-type graphon (u on S_1 x S_1, v on S_2 x S_2, s
across), the induced densities of F restricted to the boxes reduce to
the polynomials

    Q_k(u, v, s) = Σ_{|A|=k} u^e(A) (1-u)^(C(k,2)-e(A))
                             v^e(Ā) (1-v)^(C(f-k,2)-e(Ā))
                             s^e(A,Ā) (1-s)^(k(f-k)-e(A,Ā)),

and F is hereditary induced forcing at p exactly when Q_k(u, v, s) =
C(f,k) β_F(p) for k = 1..f-1 with u, v ∈ {p, p̄} forces u = v = s.
`hf_check` looks for real roots of these polynomials in s, and reports
every nontrivial root as a counterexample. A "certified-at-tolerance"
verdict only means that no counterexample was found numerically.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations, permutations
from typing import Mapping, Optional, Sequence, Union
import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import least_squares
from qr_graphons.common import (
    APP_MAX_SYMMETRIZED_ORDER, ParameterError, check_probability,
    check_fraction, make_rng,
)
from qr_graphons.graphs import PatternGraph
from qr_graphons.graphons import StepKernel, constant

_logger = logging.getLogger(__name__)

CERTIFIED = 'certified-at-tolerance'
COUNTEREXAMPLE = 'counterexample'
ROOT_GRID = 2001
ROOT_PRECISION = 1e-15
P_BAR_PRECISION = 1e-15
MAX_MONOMIALS = 1 << 16
SEARCH_STARTS = 64
SEARCH_MIN_SPREAD = 0.05
_ZERO_COEFFICIENT = 1e-14
_ROOT_MERGE_DISTANCE = 1e-9

Number = Union[float, Fraction]
Pair = tuple[int, int]


def beta(pattern: PatternGraph, p: Number) -> Number:
    """Return β_F(p) = p**e(F) (1-p)**(C(f,2)-e(F))."""
    return p ** pattern.e * (1 - p) ** (pattern.pair_count - pattern.e)


def p_bar(
        pattern: PatternGraph,
        p: float,
        tol: float = 1e-12,
) -> float:
    """Return the conjugate density p̄ of p for the pattern F.

    β_F increases on [0, p_F] and decreases on [p_F, 1], so p̄ is found by
    bisection on the other side of p_F. For empty and complete patterns,
    and for p = p_F, return p.
    """
    check_probability('p', p)
    if pattern.f < 2:
        raise ParameterError('the pattern needs at least 2 vertices')
    if tol <= 0.0:
        raise ParameterError(f'tol must be positive, got {tol}')
    if pattern.e == 0 or pattern.e == pattern.pair_count:
        return p

    p_f = pattern.edge_density
    if p == p_f:
        return p

    target = beta(pattern, p)
    if p < p_f:
        # β decreases on [p_F, 1]
        lo, hi, decreasing = p_f, 1.0, True
    else:
        lo, hi, decreasing = 0.0, p_f, False

    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = (lo + hi) / 2.0
        above = beta(pattern, mid) >= target
        if above == decreasing:
            lo = mid
        else:
            hi = mid

    return (lo + hi) / 2.0


@lru_cache(maxsize=256)
def _qk_exponents(
        f: int,
        edges: frozenset[Pair],
        k: int,
) -> tuple[tuple[tuple[int, int, int], int], ...]:
    # Returns ((e(A), e(Ā), e(A, Ā)), multiplicity) for all |A| = k.
    counter: Counter = Counter()
    for subset in combinations(range(1, f + 1), k):
        inside = set(subset)
        e_a = e_b = e_x = 0
        for i, j in edges:
            if i in inside and j in inside:
                e_a += 1
            elif i in inside or j in inside:
                e_x += 1
            else:
                e_b += 1
        counter[(e_a, e_b, e_x)] += 1
    return tuple(sorted(counter.items()))


def _check_k(pattern: PatternGraph, k: int, lo: int, hi: int) -> None:
    if not lo <= k <= hi:
        raise ParameterError(f'k must be in {lo}..{hi}, got {k}')


def qk_eval(
        pattern: PatternGraph,
        k: int,
        u: Number,
        v: Number,
        s: Number,
) -> Number:
    """Return Q_k(u, v, s). Works with floats and with `Fraction`s."""
    f = pattern.f
    _check_k(pattern, k, 0, f)
    pairs_a, pairs_b, pairs_x = math.comb(k, 2), math.comb(f - k, 2), k * (f - k)
    total: Number = 0
    for (e_a, e_b, e_x), count in _qk_exponents(f, pattern.edges, k):
        total += count * (
            u ** e_a * (1 - u) ** (pairs_a - e_a)
            * v ** e_b * (1 - v) ** (pairs_b - e_b)
            * s ** e_x * (1 - s) ** (pairs_x - e_x))
    return total


def _binomial_factor(a: int, b: int) -> np.ndarray:
    # Coefficients of s**a (1 - s)**b.
    return P.polymul(np.eye(a + 1)[a], P.polypow([1.0, -1.0], b))


def qk_s_polynomial(
        pattern: PatternGraph,
        k: int,
        u: float,
        v: float,
) -> np.ndarray:
    """Return the coefficients (lowest degree first) of s ↦ Q_k(u, v, s),
    a polynomial of degree at most k(f-k).
    """
    f = pattern.f
    _check_k(pattern, k, 1, f - 1)
    pairs_a, pairs_b, pairs_x = math.comb(k, 2), math.comb(f - k, 2), k * (f - k)
    coefficients = np.zeros(pairs_x + 1)
    for (e_a, e_b, e_x), count in _qk_exponents(f, pattern.edges, k):
        factor = count * (
            u ** e_a * (1.0 - u) ** (pairs_a - e_a)
            * v ** e_b * (1.0 - v) ** (pairs_b - e_b))
        term = _binomial_factor(e_x, pairs_x - e_x)
        coefficients[:term.size] += factor * term
    return coefficients


def _bisect(coefficients: np.ndarray, lo: float, hi: float) -> float:
    f_lo = P.polyval(lo, coefficients)
    for _ in range(200):
        if hi - lo <= ROOT_PRECISION:
            break
        mid = (lo + hi) / 2.0
        f_mid = P.polyval(mid, coefficients)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0.0) == (f_lo > 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return (lo + hi) / 2.0


def _sign_change_roots(coefficients: np.ndarray, grid: int) -> list[float]:
    xs = np.linspace(0.0, 1.0, grid)
    values = P.polyval(xs, coefficients)
    roots = xs[values == 0.0].tolist()
    changes = np.flatnonzero(values[:-1] * values[1:] < 0.0)
    roots.extend(_bisect(coefficients, xs[i], xs[i + 1]) for i in changes)
    return roots


def isolate_roots(
        coefficients: Sequence[float],
        grid: int = ROOT_GRID,
        tol: float = 1e-9,
) -> Optional[list[float]]:
    """Return the real roots in [0, 1] of a polynomial, in increasing order.

    Roots are isolated by sign changes on a uniform grid and refined by
    bisection. Roots of even multiplicity are found as the extrema (sign
    changes of the derivative) where the polynomial is within `tol` of
    zero. Return `None` if the polynomial vanishes identically.
    """
    c = np.asarray(coefficients, dtype=np.float64)
    if grid < 2:
        raise ParameterError(f'grid must be at least 2, got {grid}')
    if np.all(np.abs(c) <= _ZERO_COEFFICIENT):
        return None

    candidates = _sign_change_roots(c, grid)
    if c.size > 2:
        for x in _sign_change_roots(P.polyder(c), grid):
            if abs(P.polyval(x, c)) <= tol:
                candidates.append(x)

    roots: list[float] = []
    for x in sorted(candidates):
        if not roots or x - roots[-1] > _ROOT_MERGE_DISTANCE:
            roots.append(x)
    return roots


@dataclass(frozen=True)
class TwoTypeWitness:
    u: float
    v: float
    s: float
    residual: float

    @property
    def spread(self) -> float:
        return max(abs(self.u - self.s), abs(self.v - self.s),
                   abs(self.u - self.v))


@dataclass(frozen=True)
class HFVerdict:
    status: str
    pattern: str
    p: float
    p_bar: float
    tol: float
    witnesses: tuple[TwoTypeWitness, ...] = ()

    @property
    def is_counterexample(self) -> bool:
        return self.status == COUNTEREXAMPLE


def _trivial_radius(tol: float) -> float:
    return max(math.sqrt(tol), tol)


def qk_residual(
        pattern: PatternGraph,
        p: float,
        u: float,
        v: float,
        s: float,
) -> float:
    """Return max_k |Q_k(u, v, s) - C(f,k) β_F(p)| over k = 1..f-1."""
    f = pattern.f
    b = beta(pattern, p)
    return max(
        (abs(qk_eval(pattern, k, u, v, s) - math.comb(f, k) * b)
         for k in range(1, f)),
        default=0.0)


def hf_check(
        pattern: PatternGraph,
        p: float,
        tol: float = 1e-9,
        *,
        grid: int = ROOT_GRID,
) -> HFVerdict:
    """Search for nontrivial 2-type solutions of the Q_k system.

    For every (u, v) ∈ {p, p̄}², the real roots s ∈ [0, 1] of the first
    nonvanishing Q_k(u, v, ·) - C(f,k) β_F(p) are filtered by the residuals
    of all k = 1..f-1. Surviving roots other than u = v = s (within
    sqrt(tol)) are counterexample witnesses.
    """
    check_fraction('p', p)
    f = pattern.f
    if f < 2:
        raise ParameterError('the pattern needs at least 2 vertices')
    if tol <= 0.0:
        raise ParameterError(f'tol must be positive, got {tol}')

    conjugate = p_bar(pattern, p, P_BAR_PRECISION)
    target = beta(pattern, p)
    radius = _trivial_radius(tol)
    branches = sorted({(u, v) for u in (p, conjugate) for v in (p, conjugate)})

    found: list[TwoTypeWitness] = []
    for u, v in branches:
        roots: Optional[list[float]] = None
        for k in range(1, f):
            c = qk_s_polynomial(pattern, k, u, v)
            c[0] -= math.comb(f, k) * target
            roots = isolate_roots(c, grid, tol)
            if roots is not None:
                break
        if roots is None:
            # Every s solves the system.
            roots = [0.0 if u >= 0.5 else 1.0]

        _logger.debug('branch u=%s v=%s: %d candidate roots', u, v, len(roots))
        for s in roots:
            residual = qk_residual(pattern, p, u, v, s)
            if residual > tol:
                continue
            if abs(u - v) <= radius and abs(s - u) <= radius:
                continue
            found.append(TwoTypeWitness(u, v, s, residual))

    witnesses = tuple(sorted(found, key=lambda w: (w.u, w.v, w.s)))
    return HFVerdict(
        status=COUNTEREXAMPLE if witnesses else CERTIFIED,
        pattern=pattern.label,
        p=p,
        p_bar=conjugate,
        tol=tol,
        witnesses=witnesses,
    )


class MultiaffinePolynomial:
    """A polynomial in the pair variables w_ij (1 <= i < j <= m), of
    degree at most 1 in every variable. Coefficients are `Fraction`s.
    """
    __slots__ = ('m', 'terms')

    def __init__(
            self,
            m: int,
            terms: Optional[Mapping[frozenset[Pair], Number]] = None,
    ):
        if m < 1:
            raise ParameterError(f'invalid variable bound: {m}')
        normalized: dict[frozenset[Pair], Fraction] = {}
        for pairs, coefficient in (terms or {}).items():
            for i, j in pairs:
                if not 1 <= i < j <= m:
                    raise ParameterError(f'invalid pair variable: {i} {j}')
            c = Fraction(coefficient)
            if c:
                normalized[frozenset(pairs)] = c
        self.m = m
        self.terms: dict[frozenset[Pair], Fraction] = normalized

    @classmethod
    def constant(cls, m: int, c: Number = 1) -> 'MultiaffinePolynomial':
        return cls(m, {frozenset(): c})

    @classmethod
    def variable(cls, m: int, i: int, j: int) -> 'MultiaffinePolynomial':
        return cls(m, {frozenset([(min(i, j), max(i, j))]): 1})

    def __add__(self, other: 'MultiaffinePolynomial') -> 'MultiaffinePolynomial':
        terms = dict(self.terms)
        for pairs, c in other.terms.items():
            terms[pairs] = terms.get(pairs, 0) + c
        return MultiaffinePolynomial(max(self.m, other.m), terms)

    def __sub__(self, other: 'MultiaffinePolynomial') -> 'MultiaffinePolynomial':
        return self + other.scale(-1)

    def __mul__(self, other: 'MultiaffinePolynomial') -> 'MultiaffinePolynomial':
        terms: dict[frozenset[Pair], Fraction] = {}
        for a, ca in self.terms.items():
            for b, cb in other.terms.items():
                if a & b:
                    raise ParameterError('the product is not multiaffine')
                key = a | b
                terms[key] = terms.get(key, 0) + ca * cb
        return MultiaffinePolynomial(max(self.m, other.m), terms)

    def scale(self, c: Number) -> 'MultiaffinePolynomial':
        c = Fraction(c)
        return MultiaffinePolynomial(
            self.m, {pairs: c * a for pairs, a in self.terms.items()})

    def relabel(self, perm: Sequence[int]) -> 'MultiaffinePolynomial':
        """Rename the index i to perm[i - 1] in every variable."""
        def rename(pair: Pair) -> Pair:
            i, j = perm[pair[0] - 1], perm[pair[1] - 1]
            return (min(i, j), max(i, j))

        return MultiaffinePolynomial(self.m, {
            frozenset(rename(pair) for pair in pairs): c
            for pairs, c in self.terms.items()
        })

    def evaluate(self, w: Mapping[Pair, Number]) -> Number:
        total: Number = 0
        for pairs, c in self.terms.items():
            term: Number = c
            for pair in pairs:
                term *= w[pair]
            total += term
        return total

    def sorted_terms(self) -> list[tuple[tuple[Pair, ...], Fraction]]:
        return sorted(
            (tuple(sorted(pairs)), c) for pairs, c in self.terms.items())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MultiaffinePolynomial):
            return NotImplemented
        return self.m == other.m and self.terms == other.terms

    def __len__(self) -> int:
        return len(self.terms)

    def __repr__(self) -> str:
        return f'MultiaffinePolynomial(m={self.m}, terms={len(self.terms)})'


def build_psi_polynomial(
        pattern: PatternGraph,
        induced: bool = False,
        symmetrized: bool = False,
        *,
        max_order: Optional[int] = None,
) -> MultiaffinePolynomial:
    """Return Ψ_F (or Ψ*_F when `induced`) as a multiaffine polynomial in
    the f(f-1)/2 pair variables. With `symmetrized`, return the average
    over the f! relabellings of the pattern.
    """
    f = pattern.f
    non_edges = pattern.non_edges() if induced else []
    if 2 ** len(non_edges) > MAX_MONOMIALS:
        raise ParameterError(f'too many monomials for {pattern.label}')

    one = MultiaffinePolynomial.constant(f)
    psi = one
    for i, j in pattern.sorted_edges():
        psi = psi * MultiaffinePolynomial.variable(f, i, j)
    for i, j in non_edges:
        psi = psi * (one - MultiaffinePolynomial.variable(f, i, j))

    if not symmetrized:
        return psi

    if max_order is None:
        max_order = APP_MAX_SYMMETRIZED_ORDER
    if f > max_order:
        raise ParameterError(
            f'symmetrization is supported for at most {max_order} '
            f'pattern vertices, got {f}')
    perms = list(permutations(range(1, f + 1)))
    total = MultiaffinePolynomial(f)
    for perm in perms:
        total = total + psi.relabel(perm)
    return total.scale(Fraction(1, len(perms)))


def _exponent_groups(
        phi: MultiaffinePolynomial,
        subset: frozenset[int],
) -> dict[tuple[int, int, int], Fraction]:
    # Collects the coefficients of u^a v^b s^c for the given subset A.
    groups: dict[tuple[int, int, int], Fraction] = {}
    for pairs, c in phi.terms.items():
        a = b = x = 0
        for i, j in pairs:
            if i in subset and j in subset:
                a += 1
            elif i in subset or j in subset:
                x += 1
            else:
                b += 1
        groups[(a, b, x)] = groups.get((a, b, x), 0) + c
    return {key: c for key, c in groups.items() if c}


def two_type_eval(
        phi: MultiaffinePolynomial,
        u: Number,
        v: Number,
        s: Number,
        subset,
) -> Number:
    """Evaluate Φ at w_ij = u (i, j ∈ A), v (i, j ∉ A), s (otherwise)."""
    chosen = frozenset(subset)
    for i in chosen:
        if not 1 <= i <= phi.m:
            raise ParameterError(f'subset element out of range: {i}')
    total: Number = 0
    for (a, b, x), c in _exponent_groups(phi, chosen).items():
        total += c * u ** a * v ** b * s ** x
    return total


def _residual_systems(
        phi: MultiaffinePolynomial,
) -> list[list[tuple[tuple[int, int, int], float]]]:
    # One polynomial in (u, v, s) per distinct subset condition.
    systems = {}
    for size in range(phi.m + 1):
        for subset in combinations(range(1, phi.m + 1), size):
            groups = _exponent_groups(phi, frozenset(subset))
            key = tuple(sorted(groups.items()))
            systems[key] = [(e, float(c)) for e, c in key]
    return list(systems.values())


def _residuals(systems, alpha: float, u, v, s) -> np.ndarray:
    return np.array([
        sum(c * u ** a * v ** b * s ** x for (a, b, x), c in system) - alpha
        for system in systems
    ])


def find_two_type_solutions(
        phi: MultiaffinePolynomial,
        alpha: float,
        tol: float = 1e-9,
        grid: int = 101,
        seed: int = 0,
        *,
        starts: int = SEARCH_STARTS,
) -> list[TwoTypeWitness]:
    """Return the nontrivial points (u, v, s) ∈ [0,1]³ found with
    max_A |two_type_eval(Φ, u, v, s, A) - α| <= tol.

    The best points of a uniform grid (away from the diagonal u = v = s),
    together with seeded random points, are refined by bounded least
    squares. Solutions are ordered by decreasing u and v.
    """
    if grid < 2:
        raise ParameterError(f'grid must be at least 2, got {grid}')
    if tol <= 0.0:
        raise ParameterError(f'tol must be positive, got {tol}')
    systems = _residual_systems(phi)
    radius = _trivial_radius(tol)

    axis = np.linspace(0.0, 1.0, grid)
    u, v, s = np.meshgrid(axis, axis, axis, indexing='ij')
    worst = np.zeros(u.shape)
    for system in systems:
        value = sum(c * u ** a * v ** b * s ** x for (a, b, x), c in system)
        np.maximum(worst, np.abs(value - alpha), out=worst)
    spread = np.maximum(np.maximum(np.abs(u - s), np.abs(v - s)), np.abs(u - v))
    worst[spread < SEARCH_MIN_SPREAD] = np.inf

    flat = worst.ravel()
    best = np.argsort(flat, kind='stable')[:starts]
    initial = [
        (float(u.flat[i]), float(v.flat[i]), float(s.flat[i]))
        for i in best if np.isfinite(flat[i])
    ]
    rng = make_rng(seed)
    initial.extend(tuple(x) for x in rng.random((starts, 3)).tolist())

    solutions: list[TwoTypeWitness] = []
    for x0 in initial:
        fit = least_squares(
            lambda x: _residuals(systems, alpha, *x),
            x0, bounds=(0.0, 1.0), xtol=1e-14, ftol=1e-14, gtol=1e-14)
        x = np.clip(fit.x, 0.0, 1.0)
        residual = float(np.max(np.abs(_residuals(systems, alpha, *x))))
        witness = TwoTypeWitness(float(x[0]), float(x[1]), float(x[2]), residual)
        if residual > tol or witness.spread <= radius:
            continue
        if any(max(abs(w.u - witness.u), abs(w.v - witness.v),
                   abs(w.s - witness.s)) <= 1e-6 for w in solutions):
            continue
        solutions.append(witness)

    _logger.debug('two-type search found %d solutions', len(solutions))
    return sorted(solutions, key=lambda w: (-w.u, -w.v, w.s))


def find_two_type_solution(
        phi: MultiaffinePolynomial,
        alpha: float,
        tol: float = 1e-9,
        grid: int = 101,
        seed: int = 0,
) -> Optional[TwoTypeWitness]:
    solutions = find_two_type_solutions(phi, alpha, tol, grid, seed)
    return solutions[0] if solutions else None


@dataclass(frozen=True)
class MixedTargets:
    p: float
    p_bar: float
    beta: float
    kernels: tuple[StepKernel, ...]


def mixed_targets(pattern: PatternGraph, p: float) -> MixedTargets:
    """Return the conjugate pair (p, p̄) and the constant graphons that
    every hereditary induced test at β_F(p) accepts.
    """
    conjugate = p_bar(pattern, p)
    values = sorted({p, conjugate})
    return MixedTargets(
        p=p,
        p_bar=conjugate,
        beta=beta(pattern, p),
        kernels=tuple(constant(x) for x in values),
    )
