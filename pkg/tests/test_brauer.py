import itertools
import math

import pytest
from sympy import divisors

from bsurf.brauer import (
    BoundCertificate,
    Exactness,
    Factor,
    IntegerActionGroup,
    ScenarioError,
    SurfaceKind,
    SurfaceScenario,
    abelian_card_from_exponent,
    abelian_level_required,
    algebraic_brauer_constant,
    brauer_n_torsion_bound,
    brauer_n_torsion_order,
    c_constant,
    ell_primary_budget,
    exactness_status,
    field_degree_budget,
    fixed_sublattice,
    gl_order_f3,
    h1_integer_action,
    k3_card_from_exponent,
    over_q_bound,
    realized_order_lower_bound,
)
from bsurf.errors import CapExceededError, PreconditionError
from bsurf.modring import NotPrimeError
from bsurf.oracles import h1_brute_force
from bsurf.simulation import random_integer_action_group, random_scenario
from bsurf.torsionhom import (
    EndStructure,
    PairAction,
    end_structure_for_action,
    synthesize_isogeny,
    transcendental_quotient,
)

KUMMER = SurfaceKind.KUMMER_K3


def test_scenario_validation():
    with pytest.raises(ScenarioError):
        SurfaceScenario(n=0, d=1)
    with pytest.raises(ScenarioError):
        SurfaceScenario(n=4, d=2, base_change_degree=13)
    with pytest.raises(ScenarioError):
        SurfaceScenario(n=4, d=2, period=3, surface_kind=KUMMER)
    assert SurfaceScenario(n=12, d=8).m == 4


@pytest.mark.parametrize(
    "d, twisted, n, expected",
    [(2, True, 8, 8), (3, True, 9, 9), (1, False, 12, 1), (4, False, 6, 2), (1, True, 12, 2)],
)
def test_c_constant(d: int, twisted: bool, n: int, expected: int):
    scenario = SurfaceScenario(n=n, d=d, twist_nontrivial=twisted)
    assert c_constant(scenario) == expected
    assert abelian_level_required(scenario) == n // expected


@pytest.mark.parametrize(
    "period, n, kind, expected",
    [
        (2, 4, SurfaceKind.ABELIAN_TORSOR, 16),
        (2, 3, SurfaceKind.ABELIAN_TORSOR, 1),
        (4, 8, SurfaceKind.ABELIAN_TORSOR, 256),
        (2, 8, KUMMER, 16),
        (1, 8, KUMMER, 1),
    ],
)
def test_field_degree_budget(period: int, n: int, kind: SurfaceKind, expected: int):
    assert field_degree_budget(SurfaceScenario(n=n, d=1, period=period, surface_kind=kind)) == expected


def test_exactness_status():
    assert exactness_status(SurfaceScenario(n=5, d=2)) is Exactness.EXACT
    assert exactness_status(SurfaceScenario(n=4, d=2, period=2)) is Exactness.UPPER_BOUND
    assert exactness_status(SurfaceScenario(n=5, d=2, base_change_degree=2)) is Exactness.UPPER_BOUND
    assert exactness_status(SurfaceScenario(n=5, d=2, surface_kind=KUMMER)) is Exactness.EXACT
    assert exactness_status(SurfaceScenario(n=4, d=1, surface_kind=KUMMER)) is Exactness.UPPER_BOUND


def test_bound_trivial_twist():
    certificate = brauer_n_torsion_bound(SurfaceScenario(n=4, d=2), EndStructure(4, 4, 2))
    assert certificate.value == 32
    assert int(certificate) == 32
    assert [f.value for f in certificate.factors] == [2, 4, 4]
    assert certificate.exactness is Exactness.UPPER_BOUND


def test_bound_twisted():
    scenario = SurfaceScenario(n=8, d=2, twist_nontrivial=True)
    certificate = brauer_n_torsion_bound(scenario, EndStructure(8, 1, 1, twisted_ratio_order=4))
    assert certificate.value == 2**4 * 2**2 * 4
    assert exactness_status(scenario) is Exactness.EXACT
    assert certificate.as_dict()["exactness"] == "upper bound only"


@pytest.mark.parametrize("n", [4, 8, 9, 12])
def test_bound_monotone_in_end_structure(n: int):
    pairs = [(n1, n2) for n1 in divisors(n) for n2 in divisors(n1)]
    scenario = SurfaceScenario(n=n, d=2)
    bounds = {p: brauer_n_torsion_bound(scenario, EndStructure(n, *p)).value for p in pairs}
    for small, big in itertools.product(pairs, repeat=2):
        if big[0] % small[0] == 0 and big[1] % small[1] == 0:
            assert bounds[big] % bounds[small] == 0


def test_twisted_bound_monotone_in_ratio():
    scenario = SurfaceScenario(n=8, d=2, twist_nontrivial=True)
    values = [brauer_n_torsion_bound(scenario, EndStructure(8, 1, 1, ratio)).value for ratio in (1, 2, 4, 8)]
    assert values == sorted(values)
    assert all(b % a == 0 for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("twisted", [False, True])
def test_c_constant_divides_twice_degree_squared(twisted: bool):
    for n in range(1, 25):
        for d in range(1, 13):
            c = c_constant(SurfaceScenario(n=n, d=d, twist_nontrivial=twisted))
            assert (2 * d * d) % c == 0
            assert n % c == 0
            if not twisted:
                assert c == math.gcd(d, n)


def test_bound_needs_ratio_and_level():
    scenario = SurfaceScenario(n=8, d=2, twist_nontrivial=True)
    with pytest.raises(ScenarioError):
        brauer_n_torsion_bound(scenario, EndStructure(8, 1, 1))
    with pytest.raises(ScenarioError):
        brauer_n_torsion_bound(SurfaceScenario(n=8, d=2), EndStructure(4, 1, 1))


def test_certificate_factors_multiply_out():
    with pytest.raises(ArithmeticError):
        BoundCertificate(10, (Factor("two", 2), Factor("three", 3)))


def test_hom_quotient_order_below_bound():
    action = PairAction([([[1, 0], [0, 1]], [[1, 0], [0, 1]])], 4)
    iso = synthesize_isogeny(2, 4)
    scenario = SurfaceScenario(n=4, d=2)
    exact = brauer_n_torsion_order(scenario, action, iso)
    bound = brauer_n_torsion_bound(scenario, end_structure_for_action(action))
    assert exact.value == 64
    assert exact.exactness is Exactness.EXACT
    assert [f.value for f in exact.factors] == [4, 4, 4]
    assert bound.value == 128
    assert bound.exactness is Exactness.UPPER_BOUND


def test_hom_quotient_order_outside_exact_regime():
    action = PairAction([([[1, 0], [0, 1]], [[1, 0], [0, 1]])], 4)
    exact = brauer_n_torsion_order(SurfaceScenario(n=4, d=2, period=2), action, synthesize_isogeny(2, 4))
    assert exact.value == 64
    assert exact.exactness is Exactness.UPPER_BOUND


def test_hom_quotient_order_rejects_mismatch():
    action = PairAction([([[1, 0], [0, 1]], [[1, 0], [0, 1]])], 4)
    with pytest.raises(ScenarioError):
        brauer_n_torsion_order(SurfaceScenario(n=4, d=2), action, synthesize_isogeny(3, 4))
    with pytest.raises(ScenarioError):
        brauer_n_torsion_order(SurfaceScenario(n=4, d=2, twist_nontrivial=True), action, synthesize_isogeny(2, 4))
    with pytest.raises(ScenarioError):
        brauer_n_torsion_order(SurfaceScenario(n=8, d=2), action, synthesize_isogeny(2, 4))


@pytest.mark.parametrize("seed", range(100))
def test_bound_contains_transcendental_quotient(seed: int):
    scenario, action, iso = random_scenario(max_n=9, seed=seed)
    certificate = brauer_n_torsion_bound(scenario, end_structure_for_action(action))
    exact = brauer_n_torsion_order(scenario, action, iso)
    assert exact.value == transcendental_quotient(action, iso).order
    assert exact.value <= certificate.value
    assert certificate.value % exact.value == 0
    assert exact.exactness is exactness_status(scenario)
    assert certificate.exactness is Exactness.UPPER_BOUND


@pytest.mark.parametrize("seed", range(100))
def test_exact_scenarios_stay_exact(seed: int):
    scenario, action, iso = random_scenario(max_n=9, seed=seed, exact_only=True)
    assert brauer_n_torsion_order(scenario, action, iso).exactness is Exactness.EXACT


def test_realized_order_lower_bound():
    assert realized_order_lower_bound(12, 2, SurfaceKind.ABELIAN_TORSOR) == 6
    assert realized_order_lower_bound(12, 2, KUMMER) == 3
    with pytest.raises(PreconditionError):
        realized_order_lower_bound(0, 2, KUMMER)


def test_card_from_exponent():
    assert abelian_card_from_exponent(4) == 64
    assert k3_card_from_exponent(2, 19) == 8
    assert k3_card_from_exponent(3, 1) == 3**21
    with pytest.raises(PreconditionError):
        k3_card_from_exponent(2, 21)
    with pytest.raises(PreconditionError):
        abelian_card_from_exponent(0)


@pytest.mark.parametrize("d, expected", [(1, 512), (2, 4096), (163, (8 * 163) ** 3)])
def test_over_q_bound(d: int, expected: int):
    assert over_q_bound(d).value == expected


def test_ell_primary_budget():
    calls = []

    def bound(ell: int, degree: int) -> int:
        calls.append((ell, degree))
        return {3: 0, 2: 3, 5: 2}[ell]

    assert ell_primary_budget(3, 1, 0, 1, bound) == 1
    assert ell_primary_budget(2, 2, 1, 1, bound) == 16
    assert ell_primary_budget(5, 1, 0, 5, bound) == 625
    assert calls == [(3, 24), (2, 24 * 2 * 16), (5, 24)]


def test_ell_primary_budget_rejects():
    with pytest.raises(NotPrimeError):
        ell_primary_budget(4, 1, 0, 1, lambda ell, degree: 0)
    with pytest.raises(PreconditionError):
        ell_primary_budget(3, 1, 0, 1, lambda ell, degree: -1)


@pytest.mark.parametrize("r, expected", [(1, 2), (2, 2304), (3, 11232**3)])
def test_algebraic_brauer_constant(r: int, expected: int):
    assert algebraic_brauer_constant(r) == expected


def test_gl_order_f3():
    assert gl_order_f3(2) == 48
    with pytest.raises(PreconditionError):
        algebraic_brauer_constant(21)


def test_integer_action_group():
    swap = [[0, 1], [1, 0]]
    assert IntegerActionGroup([swap]).order() == 2
    with pytest.raises(PreconditionError):
        IntegerActionGroup([[[2, 0], [0, 1]]])
    with pytest.raises(PreconditionError):
        IntegerActionGroup([swap], abstract_order=3)
    with pytest.raises(CapExceededError):
        IntegerActionGroup([[[1, 1], [0, 1]]], closure_cap=50).order()


def test_fixed_sublattice():
    swap = IntegerActionGroup([[[0, 1], [1, 0]]])
    assert fixed_sublattice(swap) == [[1, 1]]
    assert fixed_sublattice(IntegerActionGroup([[[-1, 0], [0, -1]]])) == []
    assert fixed_sublattice(IntegerActionGroup([], rank=2)) == [[1, 0], [0, 1]]


H1_CASES = [
    ([], 3, None, 1),
    ([[[-1]]], 1, None, 2),
    ([], 1, 2, 1),
    ([[[1]]], 1, 2, 1),
    ([[[-1, 0], [0, -1]]], 2, None, 4),
    ([[[0, 1], [1, 0]]], 2, None, 1),
    ([[[0, -1], [-1, 0]]], 2, None, 1),
    ([[[0, -1], [1, 0]]], 2, None, 2),
    ([[[0, 1, 0], [0, 0, 1], [1, 0, 0]], [[0, 1, 0], [1, 0, 0], [0, 0, 1]]], 3, None, 1),
]


@pytest.mark.parametrize("generators, rank, abstract_order, expected", H1_CASES)
def test_h1(generators, rank: int, abstract_order, expected: int):
    group = IntegerActionGroup(generators, rank=rank, abstract_order=abstract_order)
    assert h1_integer_action(group) == expected


@pytest.mark.parametrize("generators, rank, abstract_order, expected", H1_CASES)
def test_h1_cocycle_enumeration(generators, rank: int, abstract_order, expected: int):
    group = IntegerActionGroup(generators, rank=rank, abstract_order=abstract_order)
    assert h1_brute_force(group) == expected


@pytest.mark.parametrize("seed", range(10))
def test_h1_matches_brute_force(seed: int):
    group = random_integer_action_group(2, 2, seed)
    order = h1_integer_action(group)
    assert order == h1_brute_force(group)
    assert group.order() ** group.rank % order == 0


def test_h1_brute_force_rank3():
    group = IntegerActionGroup([[[-1, 0, 0], [0, -1, 0], [0, 0, -1]]])
    assert h1_brute_force(group) == h1_integer_action(group) == 8
