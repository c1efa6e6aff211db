import math
import pytest
import numpy as np
from qr_graphons.common import KernelError, ParameterError, HostTooSmallError
from qr_graphons.graphs import Graph, gen_complete, gen_cycle, gen_empty
from qr_graphons import patterns as pt
from qr_graphons.counting import count_homomorphisms, t_inj
from qr_graphons.graphons import (
    StepKernel, KernelRange, BoxSpec, constant, step_from_graph, two_type,
    psi_eval, psi_tensor, psi_constant_dev, t_density, box_integral,
    bilinear_box, sample_graph, w_degree_moment, is_p_regular,
)
from qr_graphons.cut_metric import blowup
from qr_graphons.hf_checker import beta
from tests.oracles import count_maps, random_graph, random_pattern


def random_kernel(rng, k):
    weights = rng.random(k) + 0.1
    weights /= weights.sum()
    weights[-1] = 1.0 - weights[:-1].sum()
    values = rng.random((k, k))
    return StepKernel(weights, (values + values.T) / 2.0)


def test_step_kernel():
    w = StepKernel([0.25, 0.75], [[0.0, 0.5], [0.5, 1.0]])
    assert w.k == 2
    assert w.is_graphon
    assert w.marginals().tolist() == [0.375, 0.875]
    assert w == StepKernel([0.25, 0.75], [[0.0, 0.5], [0.5, 1.0]])
    assert hash(w) == hash(StepKernel([0.25, 0.75], [[0.0, 0.5], [0.5, 1.0]]))
    with pytest.raises(ValueError):
        w.values[0, 0] = 1.0

    signed = StepKernel([1.0], [[-0.5]], KernelRange.SIGNED)
    assert not signed.is_graphon
    with pytest.raises(KernelError):
        signed.require_graphon()
    with pytest.raises(KernelError):
        t_density(pt.K2, signed)


@pytest.mark.parametrize('weights, values, range', [
    ([], [], KernelRange.GRAPHON),
    ([0.5, 0.6], [[0, 0], [0, 0]], KernelRange.GRAPHON),
    ([1.0, 0.0], [[0, 0], [0, 0]], KernelRange.GRAPHON),
    ([0.5, 0.5], [[0, 0.5], [0.4, 0]], KernelRange.GRAPHON),
    ([0.5, 0.5], [[0, 0]], KernelRange.GRAPHON),
    ([1.0], [[-0.5]], KernelRange.GRAPHON),
    ([1.0], [[1.5]], KernelRange.SIGNED),
    ([1.0], [[math.nan]], KernelRange.SIGNED),
])
def test_invalid_kernel(weights, values, range):
    with pytest.raises(KernelError):
        StepKernel(weights, values, range)


def test_constructors():
    assert constant(0.3).values.tolist() == [[0.3]]
    assert constant(-0.3, KernelRange.SIGNED).range is KernelRange.SIGNED

    w = step_from_graph(gen_cycle(4))
    assert w.weights.tolist() == [0.25] * 4
    assert w.values.sum() == 8.0
    with pytest.raises(HostTooSmallError):
        step_from_graph(gen_empty(0))

    w = two_type(0.7, 0.2, 0.4, 0.25)
    assert w.values.tolist() == [[0.7, 0.4], [0.4, 0.2]]
    assert w.weights.tolist() == [0.25, 0.75]
    with pytest.raises(ParameterError):
        two_type(0.7, 0.2, 0.4, 1.0)
    with pytest.raises(ParameterError):
        two_type(1.7, 0.2, 0.4, 0.5)


def test_box_spec():
    w = two_type(0.5, 0.5, 0.5, 0.25)
    boxes = BoxSpec([[1.0, 0.5], [0.0, 1.0]])
    assert boxes.f == 2
    assert boxes.measures(w) == [0.625, 0.75]
    boxes.validate(w, 2)
    with pytest.raises(KernelError):
        boxes.validate(w, 3)
    with pytest.raises(KernelError):
        BoxSpec([[1.0, 0.5, 0.0]] * 2).validate(w, 2)
    with pytest.raises(KernelError):
        BoxSpec([[1.5, 0.0]])
    with pytest.raises(KernelError):
        BoxSpec([])

    assert BoxSpec.full(2, 3).measures(w) == [1.0, 1.0, 1.0]
    assert BoxSpec.from_parts([[0], [1]], 2).measures(w) == [0.25, 0.75]
    assert BoxSpec.identical([1.0, 0.0], 2).f == 2


def test_constant_densities():
    w = constant(0.3)
    for pattern in [pt.K2, pt.P3, pt.K3, pt.C4]:
        assert t_density(pattern, w) == pytest.approx(0.3 ** pattern.e, abs=1e-15)
        assert t_density(pattern, w, induced=True) == pytest.approx(
            beta(pattern, 0.3), abs=1e-15)


def test_embedding_consistency(rng):
    # t(F, W_G) = hom(F, G) / n**f, with hom(F, G) counted over all n**f maps
    small = [p for f in range(1, 4) for p in pt.all_patterns(f)]
    for _ in range(10):
        n = int(rng.integers(1, 9))
        g = random_graph(rng, n)
        w = step_from_graph(g)
        for pattern in small + [random_pattern(rng, 4) for _ in range(8)]:
            hom = count_maps(pattern, g, injective=False)
            assert abs(t_density(pattern, w) - hom / n ** pattern.f) <= 1e-12
            assert count_homomorphisms(pattern, g) == hom


def test_finite_size_correction(rng):
    # |t_inj(F, G) - t(F, W_G)| <= C(f, 2) f**2 / n
    patterns = [pt.K2, pt.P3, pt.K3, pt.C4, pt.K4, pt.star(3)]
    for n in [20, 40, 80]:
        for seed in range(3):
            g = sample_graph(random_kernel(rng, 3), n, seed)
            w = step_from_graph(g)
            for pattern in patterns + [random_pattern(rng, 4)]:
                f = pattern.f
                bound = math.comb(f, 2) * f ** 2 / n
                assert abs(t_inj(pattern, g) - t_density(pattern, w)) <= bound


def test_induced_normalization(rng):
    # The induced densities of all labelled graphs on [f] sum to 1.
    for _ in range(10):
        w = random_kernel(rng, int(rng.integers(1, 5)))
        for f in range(1, 5):
            total = math.fsum(
                t_density(pattern, w, induced=True)
                for pattern in pt.all_patterns(f))
            assert abs(total - 1.0) <= 1e-9


def test_blowup_invariance(rng):
    w = random_kernel(rng, 3)
    w3 = blowup(w, 3)
    assert w3.k == 9
    for pattern in [pt.K2, pt.P3, pt.C4]:
        assert t_density(pattern, w3) == pytest.approx(t_density(pattern, w), abs=1e-12)


def test_psi():
    w = two_type(0.7, 0.2, 0.4, 0.5)
    assert psi_eval(pt.P3, w, [0, 0, 1]) == pytest.approx(0.7 * 0.4)
    assert psi_eval(pt.P3, w, [0, 0, 1], induced=True) == pytest.approx(
        0.7 * 0.4 * 0.6)
    symmetrized = psi_eval(pt.P3, w, [0, 0, 1], symmetrized=True)
    assert symmetrized == pytest.approx((4 * 0.7 * 0.4 + 2 * 0.4 * 0.4) / 6)

    with pytest.raises(ParameterError):
        psi_eval(pt.P3, w, [0, 1])
    with pytest.raises(ParameterError):
        psi_eval(pt.P3, w, [0, 1, 2])
    with pytest.raises(ParameterError):
        psi_eval(pt.P3, w, [0, 0, 1], symmetrized=True, max_order=2)

    tensor = psi_tensor(pt.P3, w, induced=True, symmetrized=True)
    assert tensor.shape == (2, 2, 2)
    assert tensor[0, 0, 1] == pytest.approx(
        psi_eval(pt.P3, w, [0, 0, 1], induced=True, symmetrized=True))
    assert tensor[1, 0, 0] == pytest.approx(tensor[0, 1, 0])
    with pytest.raises(ParameterError):
        psi_tensor(pt.K4, w, max_size=8)


def test_psi_constant_dev():
    assert psi_constant_dev(pt.C4, constant(0.5), 0.5 ** 4) == 0.0
    w = two_type(1.0, 0.0, 0.5, 0.5)
    assert psi_constant_dev(pt.K2, w, 0.5) == 0.5


def test_box_integral():
    w = two_type(0.7, 0.2, 0.4, 0.5)
    assert box_integral(pt.K2, w, BoxSpec.full(2, 2)) == pytest.approx(
        t_density(pt.K2, w))
    assert box_integral(pt.K2, w, BoxSpec([[1, 0], [0, 1]])) == pytest.approx(
        0.25 * 0.4)
    assert box_integral(pt.K2, w, BoxSpec([[1, 0], [0, 1]])) == pytest.approx(
        bilinear_box(w, np.array([1, 0]), np.array([0, 1])))

    signed = StepKernel([0.5, 0.5], [[-0.5, 0.0], [0.0, 0.5]], KernelRange.SIGNED)
    assert bilinear_box(signed, [1, 0], [1, 0]) == -0.125


def test_symmetrized_box_integral(rng):
    for _ in range(20):
        k = int(rng.integers(1, 4))
        w = random_kernel(rng, k)
        f = int(rng.integers(1, 5))
        pattern = random_pattern(rng, f)
        for induced in [False, True]:
            # on a product of one set with itself symmetrization changes nothing
            box = BoxSpec.identical(rng.random(k), f)
            assert box_integral(
                pattern, w, box, induced, symmetrized=True) == pytest.approx(
                    box_integral(pattern, w, box, induced), abs=1e-12)

            boxes = BoxSpec([rng.random(k) for _ in range(f)])
            expected = psi_tensor(pattern, w, induced, symmetrized=True)
            for a in reversed(boxes.vectors):
                expected = expected @ (a * w.weights)
            assert box_integral(
                pattern, w, boxes, induced, symmetrized=True) == pytest.approx(
                    float(expected), abs=1e-12)

    with pytest.raises(ParameterError):
        box_integral(pt.K3, constant(0.5), BoxSpec.full(1, 3), symmetrized=True,
                     max_order=2)


def test_sample_graph():
    w = two_type(1.0, 0.0, 0.0, 0.5)
    g = sample_graph(w, 40, 1)
    assert g == sample_graph(w, 40, 1)
    # a disjoint union of a clique and isolated vertices
    clique = [v for v in range(40) if g.degree(v) > 0]
    assert g.edge_count == len(clique) * (len(clique) - 1) // 2

    assert sample_graph(constant(1.0), 6, 0) == gen_complete(6)
    assert sample_graph(constant(0.0), 6, 0) == Graph(6)
    with pytest.raises(ParameterError):
        sample_graph(constant(0.5), -1, 0)


def test_degree_moments_and_regularity():
    w = two_type(0.7, 0.2, 0.4, 0.5)
    assert w_degree_moment(w, 1) == pytest.approx(t_density(pt.K2, w))
    assert w_degree_moment(w, 2) == pytest.approx(t_density(pt.P3.relabel([2, 1, 3]), w))
    with pytest.raises(ParameterError):
        w_degree_moment(w, 0)

    assert is_p_regular(constant(0.3), 0.3)
    assert is_p_regular(two_type(0.0, 0.0, 1.0, 0.5), 0.5)
    assert not is_p_regular(w, t_density(pt.K2, w))


def test_random_pattern_densities_are_bounded(rng):
    for _ in range(10):
        pattern = random_pattern(rng, int(rng.integers(2, 5)))
        w = random_kernel(rng, 3)
        assert 0.0 <= t_density(pattern, w) <= 1.0
        assert t_density(pattern, w, induced=True) <= t_density(pattern, w) + 1e-15
