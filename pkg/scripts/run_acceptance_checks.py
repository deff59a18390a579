import logging
import math

import numpy as np
import pandas as pd

from bsurf.brauer import (
    Exactness,
    algebraic_brauer_constant,
    brauer_n_torsion_bound,
    brauer_n_torsion_order,
    h1_integer_action,
    over_q_bound,
)
from bsurf.gl2 import MatrixGroup, classify_abelian, commutant_generators, enumerate_abelian, gl2_order
from bsurf.lattice import build_family_gram, build_kummer_lattice, build_lambda_prod, lattice_report
from bsurf.modring import ResidueMatrix, span_order
from bsurf.oracles import (
    all_m2,
    brute_commutant_order,
    brute_gl2_order,
    brute_invariant_hom_count,
    h1_brute_force,
)
from bsurf.simulation import (
    random_equivariant_instance,
    random_gl2,
    random_integer_action_group,
    random_scenario,
    random_subgroup,
)
from bsurf.torsionhom import (
    IsogenyData,
    divisibility_check_rational,
    divisibility_check_twisted,
    end_invariants,
    end_structure_for_action,
    end_structure_from_divisors,
    factorization_criterion,
    hom_to_end_sequence,
    invariant_homs,
    rank_jump,
    synthesize_isogeny,
)

SEED = 0
PRIME_POWERS = [(2, 1), (3, 1), (2, 2), (5, 1), (7, 1), (2, 3), (3, 2)]
ENUMERATION_CASES = [(3, 1), (5, 1), (7, 1), (3, 2)]
TRIAL_MODULI = [2, 3, 4, 5, 6, 8, 9, 10, 12]
ISOGENY_DEGREES = [1, 2, 3, 4, 6]
TRIALS_PER_CASE = 3
SCENARIO_TRIALS = 100
NORMAL_FORM_CASES = [(3, 1), (3, 2), (5, 2), (3, 3), (7, 1)]
END_SHAPE_MODULI = [4, 8, 9, 25, 27]
IMAGE_TRIALS = 200
RANK_JUMP_TRIALS = 20
FACTORIZATION_MODULI = range(2, 13)
H1_TRIALS = 20
FAMILY_DEGREES = range(1, 51)

logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
rng = np.random.default_rng(SEED)
rows = []


def record(check: str, case: str, passed: bool, detail: str = ""):
    rows.append({"check": check, "case": case, "passed": bool(passed), "detail": detail})


# orders of GL2 against enumeration
for n in range(2, 13):
    record("gl2 order", f"n={n}", gl2_order(n) == brute_gl2_order(n), str(gl2_order(n)))

# structured commutants against exhaustive search, every matrix
for ell, s in PRIME_POWERS:
    n = ell**s
    mismatches = 0
    for key in all_m2(n).reshape(-1, 4).tolist():
        a = ResidueMatrix.from_key(key, n)
        generators = commutant_generators(a, ell, s)
        if span_order([g.vector() for g in generators], n, 4) != brute_commutant_order(a):
            mismatches += 1
    record("commutant", f"{ell}^{s}", mismatches == 0, f"{n**4} matrices, {mismatches} mismatches")

# abelian subgroups up to conjugacy, each element checked against its normal form
for ell, s in ENUMERATION_CASES:
    n = ell**s
    result = enumerate_abelian(ell, s)
    expected = ell * ell - 1 if s == 1 else result.bound
    record(
        "abelian enumeration",
        f"{ell}^{s}",
        result.max_order <= expected and (s > 1 or result.max_order == expected),
        f"{result.count} classes, max order {result.max_order}, {result.histogram}",
    )
    failures = sum(
        not c.tag.conjugates_into(ResidueMatrix.from_key(key, n)) for c in result.classes for key in c.elements
    )
    record("enumerated normal forms", f"{ell}^{s}", failures == 0, f"{failures} elements outside their family")

# normal forms of random abelian images
for ell, s in NORMAL_FORM_CASES:
    n = ell**s
    for _ in range(IMAGE_TRIALS):
        image = MatrixGroup([random_gl2(n, rng)], n)
        tag = classify_abelian(image, ell, s)
        record("normal form", f"{ell}^{s}", all(tag.conjugates_into(x) for x in image.closure()), tag.label)

# End shapes on random images, no closure needed
for n in END_SHAPE_MODULI:
    for _ in range(IMAGE_TRIALS):
        image = random_subgroup(n, 2, rng)
        structure = end_invariants(image)
        shaped = n % structure.n1 == 0 and structure.n1 % structure.n2 == 0
        agrees = end_structure_from_divisors(image) == structure
        record("End shape", f"n={n}", shaped and agrees, f"(n1, n2) = ({structure.n1}, {structure.n2})")

# rank jump trichotomy
for n, ell, s in [(8, 2, 3), (9, 3, 2), (25, 5, 2)]:
    for _ in range(RANK_JUMP_TRIALS):
        image = random_subgroup(n, 2, rng)
        jump = rank_jump(image, ell, s)
        record("rank jump", f"{ell}^{s}", jump in (1, 2, 4), f"dim {jump}")

# invariant Hom, the exact sequence and the divisibility certificates on random equivariant actions
for n in TRIAL_MODULI:
    for d in ISOGENY_DEGREES:
        for twisted in (False, True):
            for _ in range(TRIALS_PER_CASE):
                action, iso = random_equivariant_instance(n, d, twisted, "random", 2, rng)
                counted = n > 9 or invariant_homs(action).order == brute_invariant_hom_count(action)
                check = divisibility_check_twisted if twisted else divisibility_check_rational
                certificate = check(action, iso)
                record(
                    "hom divisibility",
                    f"n={n} d={d} twisted={twisted}",
                    counted and certificate.passed and hom_to_end_sequence(action, iso).passed,
                    f"Hom quotient {certificate.hom_quotient}, bound {certificate.order_bound}",
                )

# factorization through [n']∘g, every valid triple and every f
for n in FACTORIZATION_MODULI:
    everything = [ResidueMatrix.from_key(key, n) for key in all_m2(n).reshape(-1, 4).tolist()]
    for d in ISOGENY_DEGREES:
        isogenies = [synthesize_isogeny(d, n), IsogenyData(d, [[d, 1 - d], [0, 1]], [[1, d - 1], [0, d]], n)]
        for n_prime in range(1, n + 1):
            if n_prime * math.gcd(d, n) != math.gcd(d * n_prime, n):
                continue
            mismatches = 0
            for iso in isogenies:
                for f in everything:
                    result = factorization_criterion(f, iso, n_prime)
                    mismatches += result.criterion != result.oracle
            record("factorization", f"n={n} d={d} n'={n_prime}", mismatches == 0, f"{mismatches} mismatches")

# the exact Hom quotient order sits below the bound on exact scenarios
for _ in range(SCENARIO_TRIALS):
    scenario, action, iso = random_scenario(9, rng, exact_only=True)
    bound = brauer_n_torsion_bound(scenario, end_structure_for_action(action)).value
    exact = brauer_n_torsion_order(scenario, action, iso)
    record(
        "bound soundness",
        f"n={scenario.n} d={scenario.d} {scenario.surface_kind.value}",
        exact.exactness is Exactness.EXACT and exact.value <= bound and bound % exact.value == 0,
        f"{exact.value} | {bound}",
    )

# H^1 of signed permutation actions, formula against cocycle enumeration
for _ in range(H1_TRIALS):
    group = random_integer_action_group(2, 2, rng)
    order = h1_integer_action(group)
    record("h1", f"|G|={group.order()}", order == h1_brute_force(group), str(order))

# lattices
for d in FAMILY_DEGREES:
    report = lattice_report(build_family_gram(d))
    record("family gram", f"d={d}", report.determinant == 2 * d and report.signature == (1, 2), str(report.signature))
kummer = lattice_report(build_kummer_lattice())
record("kummer lattice", "Lambda_K", kummer.determinant == 64 and kummer.signature == (0, 16) and kummer.even)
prod = lattice_report(build_lambda_prod())
record("lambda prod", "Lambda_prod", prod.rank == 18 and prod.determinant == -64)

# closed-form constants
record("over Q", "d=1", over_q_bound(1).value == 512)
record("over Q", "d=163", over_q_bound(163).value == (8 * 163) ** 3)
record("algebraic constant", "r=2", algebraic_brauer_constant(2) == 2304)

results = pd.DataFrame(rows)
summary = results.groupby("check")["passed"].agg(["sum", "count"])
print(summary.to_string())
failures = results[~results["passed"]]
if len(failures):
    print(failures.to_string(index=False))
    raise SystemExit(1)
