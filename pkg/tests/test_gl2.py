from fractions import Fraction

import numpy as np
import pytest

from bsurf.errors import CapExceededError, PreconditionError
from bsurf.gl2 import (
    IrrationalTraceError,
    MatrixGroup,
    NonAbelianError,
    NormalFormKind,
    QuadNumber,
    RealQuadMatrix,
    ScalarMatrixError,
    borel_abelian,
    classify_abelian,
    classify_finite_real,
    commutant,
    commutant_generators,
    enumerate_abelian,
    family_index,
    family_order,
    full_gl2,
    gl2_order,
    in_borel_abelian,
    in_nonsplit_cartan,
    lifted_generator,
    mu,
    nonsplit_cartan,
    simultaneous_commutant,
    split_cartan,
    subgroup_index,
)
from bsurf.modring import NotInvertibleError, ResidueMatrix, mat2_mul, span_order
from bsurf.oracles import all_m2, brute_commutant_order, brute_gl2_order, is_abelian_exhaustive
from bsurf.simulation import random_gl2, random_subgroup, random_unit


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6, 8, 9])
def test_gl2_order(n: int):
    assert gl2_order(n) == brute_gl2_order(n)


def test_gl2_order_mod9():
    assert gl2_order(9) == 3888


@pytest.mark.parametrize("n", [3, 4, 6])
def test_full_gl2_generates(n: int):
    assert full_gl2(n).order() == gl2_order(n)


def test_rotation_order():
    assert MatrixGroup([[[0, -1], [1, 0]]], 5).order() == 4


def test_closure_cap():
    with pytest.raises(CapExceededError) as info:
        full_gl2(9, closure_cap=100).order()
    assert info.value.partial_count > 100


@pytest.mark.parametrize("n", [4, 8, 9, 25, 27])
def test_random_subgroup_closure(n: int):
    rng = np.random.default_rng(n)
    n_generators = 2 if n < 25 else 1
    for _ in range(200):
        group = random_subgroup(n, n_generators, rng)
        keys = set(group.element_keys())
        assert _identity(n) in keys
        for g in group.generator_keys:
            assert all(mat2_mul(x, g, n) in keys for x in keys)
        assert gl2_order(n) % group.order() == 0


def test_closure_ignores_generator_order(rng: np.random.Generator):
    for n in (8, 9, 12):
        generators = [random_gl2(n, rng) for _ in range(3)]
        forward = MatrixGroup(generators, n).element_keys()
        assert MatrixGroup(generators[::-1], n).element_keys() == forward
        assert MatrixGroup(generators[1:] + generators[:1], n).element_keys() == forward


def _identity(n: int) -> tuple:
    return (1 % n, 0, 0, 1 % n)


def test_singular_generator():
    with pytest.raises(NotInvertibleError):
        MatrixGroup([[[2, 0], [0, 1]]], 4)


def test_contains_and_reduce():
    group = split_cartan(9)
    assert group.contains([[2, 0], [0, 4]])
    assert not group.contains([[1, 1], [0, 1]])
    assert group.reduce(3).order() == 4


def test_subgroup_index():
    assert subgroup_index(split_cartan(5)) == gl2_order(5) // 16
    assert subgroup_index(full_gl2(4)) == 1


def test_trivial_group():
    group = MatrixGroup([], 6)
    assert group.order() == 1
    assert group.is_abelian()
    assert group.is_scalar()


def test_mu_values(unipotent9: ResidueMatrix):
    assert mu(unipotent9, 3, 2) == 1
    assert lifted_generator(unipotent9, 3, 2) == ResidueMatrix([[0, 1], [0, 0]], 9)
    assert mu(ResidueMatrix([[4, 0], [0, 1]], 27), 3, 3) == 1
    assert mu(ResidueMatrix([[1, 1], [0, 1]], 27), 3, 3) == 0


def test_mu_is_scalar_depth(prime_powers, rng: np.random.Generator):
    for ell, s in prime_powers:
        n = ell**s
        for _ in range(20):
            a = ResidueMatrix(rng.integers(0, n, size=(2, 2)), n)
            if a.is_scalar():
                continue
            depth = mu(a, ell, s)
            assert a.reduce(ell**depth).is_scalar()
            assert not a.reduce(ell ** (depth + 1)).is_scalar()


def test_mu_scalar():
    with pytest.raises(ScalarMatrixError):
        mu(ResidueMatrix.scalar(2, 9), 3, 2)


def test_commutant_of_unipotent(unipotent9: ResidueMatrix):
    result = commutant(unipotent9, 3, 2)
    assert result.shape.order == 729
    assert result.shape.order == brute_commutant_order(unipotent9)
    assert result.mu == 1


def test_commutant_of_scalar():
    result = commutant(ResidueMatrix.scalar(3, 8), 2, 3)
    assert result.shape.factors == (8, 8, 8, 8)
    assert result.mu is None


@pytest.mark.parametrize("ell, s", [(2, 1), (3, 1), (2, 2), (5, 1)])
def test_commutant_exhaustive(ell: int, s: int):
    n = ell**s
    for key in all_m2(n).reshape(-1, 4).tolist():
        a = ResidueMatrix.from_key(key, n)
        generators = commutant_generators(a, ell, s)
        for g in generators:
            assert a @ g == g @ a
        assert span_order([g.vector() for g in generators], n, 4) == brute_commutant_order(a)


@pytest.mark.parametrize("ell, s", [(2, 3), (3, 2)])
def test_commutant_sampled(ell: int, s: int, rng: np.random.Generator):
    n = ell**s
    for _ in range(40):
        a = ResidueMatrix(rng.integers(0, n, size=(2, 2)), n)
        assert commutant(a, ell, s).shape.order == brute_commutant_order(a)


def test_commutant_contains_lift(prime_powers, rng: np.random.Generator):
    for ell, s in prime_powers:
        n = ell**s
        for _ in range(10):
            a = ResidueMatrix(rng.integers(0, n, size=(2, 2)), n)
            if a.is_scalar():
                continue
            result = commutant(a, ell, s)
            assert 0 <= result.mu < s
            assert a @ result.lifted == result.lifted @ a
            difference = ell**result.mu * result.lifted - a
            assert difference.is_scalar()


def test_simultaneous_commutant_of_full_group():
    generators = simultaneous_commutant(full_gl2(5).generators, 5)
    assert span_order([g.vector() for g in generators], 5, 4) == 5


@pytest.mark.parametrize(
    "kind, t, expected",
    [
        (NormalFormKind.SPLIT_CARTAN, None, 4),
        (NormalFormKind.NONSPLIT_CARTAN, 0, 8),
        (NormalFormKind.BOREL_ABELIAN, 1, 6),
    ],
)
def test_family_order_mod3(kind: NormalFormKind, t, expected: int):
    assert family_order(kind, 3, 1, t) == expected
    assert family_index(kind, 3, 1, t) == 48 // expected


def test_family_groups_match_orders():
    assert split_cartan(9).order() == family_order(NormalFormKind.SPLIT_CARTAN, 3, 2)
    assert nonsplit_cartan(3, 2, 1, 1).order() == family_order(NormalFormKind.NONSPLIT_CARTAN, 3, 2, 1)
    assert nonsplit_cartan(5, 1, 0, 2).order() == 24
    assert borel_abelian(3, 2, 1).order() == family_order(NormalFormKind.BOREL_ABELIAN, 3, 2, 1)


def test_family_groups_abelian():
    for group in (nonsplit_cartan(3, 2, 1, 1), borel_abelian(3, 2, 2)):
        assert group.is_abelian()
        assert is_abelian_exhaustive(group.element_keys(), group.n)


def test_family_membership():
    assert in_nonsplit_cartan(ResidueMatrix([[1, 6], [2, 1]], 9), 3, 1, 1)
    assert not in_nonsplit_cartan(ResidueMatrix([[1, 6], [2, 2]], 9), 3, 1, 1)
    assert in_borel_abelian(ResidueMatrix([[2, 1], [0, 5]], 9), 3, 1)
    assert not in_borel_abelian(ResidueMatrix([[3, 1], [0, 6]], 9), 3, 1)


@pytest.mark.parametrize(
    "generators, ell, s, kind",
    [
        ([[[0, -1], [1, 0]]], 3, 1, NormalFormKind.NONSPLIT_CARTAN),
        ([[[1, 1], [0, 1]]], 3, 1, NormalFormKind.BOREL_ABELIAN),
        ([[[2, 0], [0, 1]], [[1, 0], [0, 2]]], 5, 1, NormalFormKind.SPLIT_CARTAN),
        ([[[2, 0], [0, 2]]], 7, 1, NormalFormKind.SPLIT_CARTAN),
    ],
)
def test_classify_abelian(generators, ell: int, s: int, kind: NormalFormKind):
    group = MatrixGroup(generators, ell**s)
    tag = classify_abelian(group, ell, s)
    assert tag.kind is kind
    for g in group.generators:
        assert tag.conjugates_into(g)


@pytest.mark.parametrize("n, ell, s", [(9, 3, 2), (25, 5, 2), (27, 3, 3), (7, 7, 1)])
def test_classify_random_abelian_groups(n: int, ell: int, s: int):
    rng = np.random.default_rng(n)
    for trial in range(200):
        generators = [random_gl2(n, rng)]
        if trial % 2:
            generators.append(ResidueMatrix.scalar(random_unit(n, rng), n))
        group = MatrixGroup(generators, n)
        tag = classify_abelian(group, ell, s)
        members = group.closure() if group.order() <= 1000 else group.generators
        assert all(tag.conjugates_into(x) for x in members)


def test_classify_rejects():
    with pytest.raises(NonAbelianError):
        classify_abelian(full_gl2(3), 3, 1)
    with pytest.raises(PreconditionError):
        classify_abelian(MatrixGroup([], 4), 2, 2)


@pytest.mark.parametrize("ell, expected", [(3, 8), (5, 24)])
def test_enumerate_abelian_max_order(ell: int, expected: int):
    result = enumerate_abelian(ell, 1)
    assert result.max_order == expected
    assert result.max_order <= result.bound
    assert sum(result.histogram.values()) == result.count


def test_enumerate_abelian_classes():
    result = enumerate_abelian(3, 1, threads=2)
    orders = [c.order for c in result.classes]
    assert orders == sorted(orders)
    assert orders[0] == 1
    for c in result.classes:
        assert is_abelian_exhaustive(c.elements, 3)
        assert MatrixGroup(c.generators, 3).order() == c.order
        assert all(c.tag.conjugates_into(g) for g in c.generators)


@pytest.mark.parametrize("ell, s", [(3, 1), (5, 1), (3, 2)])
def test_enumerated_classes_conjugate_into_normal_forms(ell: int, s: int):
    n = ell**s
    result = enumerate_abelian(ell, s)
    assert result.bound == ell ** (3 * s)
    assert result.max_order <= result.bound
    assert result.count == len({c.elements for c in result.classes})
    assert sum(result.histogram.values()) == result.count
    for c in result.classes:
        assert is_abelian_exhaustive([g.entries for g in c.generators], n)
        assert MatrixGroup(c.generators, n).order() == c.order
        assert all(c.tag.conjugates_into(ResidueMatrix.from_key(key, n)) for key in c.elements)


def test_enumerate_abelian_rejects():
    with pytest.raises(PreconditionError):
        enumerate_abelian(2, 2)
    with pytest.raises(CapExceededError):
        enumerate_abelian(7, 2)


def _real(rows, d: int = 2) -> RealQuadMatrix:
    return RealQuadMatrix(rows, d)


def test_finite_real_cyclic():
    assert classify_finite_real([_real([[0, -1], [1, 0]])]).label == "Cyclic 4"
    assert classify_finite_real([_real([[0, -1], [1, -1]])]).order == 3
    assert classify_finite_real([_real([[1, -1], [1, 0]])]).order == 6
    assert classify_finite_real([]).order == 1


def test_finite_real_dihedral():
    result = classify_finite_real([_real([[0, -1], [1, 0]]), _real([[1, 0], [0, -1]])])
    assert result.family == "dihedral"
    assert result.order == 8
    assert result.contains_minus_identity


def test_finite_real_with_surd_entries():
    # conjugate of a rotation of order 4 by diag(√2, 1)
    rotation = _real([[0, (0, -1)], [(0, Fraction(1, 2)), 0]])
    assert classify_finite_real([rotation]).label == "Cyclic 4"


def test_finite_real_irrational_trace():
    half = QuadNumber(0, Fraction(1, 2), 2)
    eighth_turn = RealQuadMatrix([[half, -half], [half, half]], 2)
    with pytest.raises(IrrationalTraceError):
        classify_finite_real([eighth_turn])


def test_finite_real_infinite():
    with pytest.raises(CapExceededError):
        classify_finite_real([_real([[1, 1], [0, 1]])])


def test_real_quad_matrix_needs_non_square():
    with pytest.raises(ValueError):
        RealQuadMatrix([[1, 0], [0, 1]], 4)


@pytest.mark.parametrize("d", [3, 5, 7])
@pytest.mark.parametrize(
    "rows, order",
    [([[0, -1], [1, 0]], 4), ([[0, -1], [1, -1]], 3), ([[1, -1], [1, 0]], 6)],
)
def test_finite_real_over_other_fields(d: int, rows, order: int):
    # conjugate by diag(√d, 1)
    (a, b), (c, e) = rows
    rotation = _real([[a, (0, b)], [(0, Fraction(c, d)), e]], d)
    assert classify_finite_real([rotation]).label == f"Cyclic {order}"
    swap = _real([[0, (0, 1)], [(0, Fraction(1, d)), 0]], d)
    dihedral = classify_finite_real([rotation, swap])
    assert dihedral.family == "dihedral"
    assert dihedral.order == 2 * order


def test_finite_real_hexagonal_rotation():
    half = Fraction(1, 2)
    rotation = _real([[(half, 0), (0, -half)], [(0, half), (half, 0)]], 3)
    result = classify_finite_real([rotation])
    assert result.order == 6
    assert result.contains_minus_identity


def test_finite_real_irrational_generator_of_infinite_order():
    with pytest.raises(IrrationalTraceError):
        classify_finite_real([_real([[(0, 1), 0], [0, 1]], 5)])
