import numpy as np
import pytest

from bsurf.brauer import Exactness, IntegerActionGroup, SurfaceKind, exactness_status
from bsurf.oracles import all_m2, brute_span, h1_brute_force
from bsurf.simulation import (
    INSTANCE_KINDS,
    random_equivariant_instance,
    random_gl2,
    random_integer_action_group,
    random_scenario,
    random_subgroup,
    random_unit,
    signed_permutation,
)


def test_random_gl2_invertible():
    for seed in range(20):
        assert random_gl2(12, seed).is_invertible()


def test_random_gl2_reproducible():
    assert random_gl2(9, 5) == random_gl2(9, 5)


def test_random_unit():
    for seed in range(10):
        assert np.gcd(random_unit(20, seed), 20) == 1


def test_random_subgroup():
    group = random_subgroup(8, 3, seed=2)
    assert group.n == 8
    assert len(group.generators) == 3
    assert all(g.is_invertible() for g in group.generators)


@pytest.mark.parametrize("kind", INSTANCE_KINDS)
def test_instance_shapes(kind: str):
    action, iso = random_equivariant_instance(9, 3, False, kind, n_generators=3, seed=4)
    assert len(action) == 3
    assert iso.d == 3
    for p in action.pairs:
        a, b, c, d = p.target.entries
        if kind in ("split", "scalar"):
            assert b == c == 0
        if kind == "borel":
            assert c == 0
        if kind == "scalar":
            assert a == d
        assert p.source.det() == p.target.det()


def test_twisted_instance_has_twist():
    for seed in range(5):
        action, _ = random_equivariant_instance(6, 2, True, seed=seed)
        assert action.pairs[0].chi == -1


def test_unknown_kind():
    with pytest.raises(ValueError):
        random_equivariant_instance(5, 1, kind="nonsplit")


def test_random_scenario_reproducible():
    first, _, _ = random_scenario(seed=9)
    second, _, _ = random_scenario(seed=9)
    assert first == second
    assert 2 <= first.n <= 9


def test_random_scenario_covers_regimes():
    scenarios = [random_scenario(seed=seed)[0] for seed in range(100)]
    assert {s.surface_kind for s in scenarios} == set(SurfaceKind)
    assert any(s.period > 1 for s in scenarios)
    assert any(s.base_change_degree > 1 for s in scenarios)
    assert any(exactness_status(s) is Exactness.EXACT for s in scenarios)
    assert all(s.period <= 2 for s in scenarios if s.surface_kind is SurfaceKind.KUMMER_K3)


def test_random_scenario_exact_only():
    for seed in range(30):
        scenario, action, iso = random_scenario(seed=seed, exact_only=True)
        assert exactness_status(scenario) is Exactness.EXACT
        assert action.twist_nontrivial == scenario.twist_nontrivial
        assert iso.d == scenario.d


def test_signed_permutation():
    matrix = signed_permutation(5, seed=1)
    assert (np.abs(matrix).sum(axis=0) == 1).all()
    assert (np.abs(matrix).sum(axis=1) == 1).all()


def test_random_integer_action_group_finite():
    group = random_integer_action_group(3, 2, seed=0)
    assert 48 % group.order() == 0


def test_all_m2_limit():
    assert all_m2(3).shape == (81, 2, 2)
    with pytest.raises(ValueError):
        all_m2(32)


def test_brute_span():
    assert brute_span([(2, 0), (0, 3)], 6) == {(x, y) for x in (0, 2, 4) for y in (0, 3)}
    assert brute_span([], 6) == set()


def test_h1_brute_force_trivial_and_sign():
    assert h1_brute_force(IntegerActionGroup([], rank=2)) == 1
    assert h1_brute_force(IntegerActionGroup([[[-1]]])) == 2
