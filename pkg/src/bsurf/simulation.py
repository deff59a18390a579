"""Seeded random instances for property checks and the acceptance scripts"""

from typing import List, Tuple

import numpy as np

from bsurf.brauer import FIELD_DEGREES, IntegerActionGroup, SurfaceKind, SurfaceScenario
from bsurf.gl2 import MatrixGroup
from bsurf.modring import Modulus, ResidueMatrix, as_modulus
from bsurf.torsionhom import ActionPair, IsogenyData, PairAction, synthesize_isogeny

INSTANCE_KINDS = ("random", "split", "borel", "scalar")
ISOGENY_DEGREES = (1, 2, 3, 4, 6)
MAX_ATTEMPTS = 10_000
MAX_PERIOD = 4

Seed = int | np.random.Generator | None


def random_unit(n: int, seed: Seed = None) -> int:
    rng = np.random.default_rng(seed)
    units = as_modulus(n).units()
    return int(rng.choice(units))


def random_gl2(modulus: "int | Modulus", seed: Seed = None) -> ResidueMatrix:
    """Uniform element of GL₂(ℤ/nℤ) by rejection sampling"""
    rng = np.random.default_rng(seed)
    modulus = as_modulus(modulus)
    n = modulus.n
    for _ in range(MAX_ATTEMPTS):
        a, b, c, d = (int(x) for x in rng.integers(0, n, size=4))
        if modulus.is_unit(a * d - b * c):
            return ResidueMatrix([[a, b], [c, d]], modulus)
    raise RuntimeError(f"no invertible matrix mod {n} after {MAX_ATTEMPTS} draws")


def random_subgroup(modulus: "int | Modulus", n_generators: int = 2, seed: Seed = None) -> MatrixGroup:
    """Subgroup generated by a few uniform elements, each replaced by a random power

    Taking powers skews the draw towards small and abelian subgroups, which a
    uniform draw almost never produces.
    """
    rng = np.random.default_rng(seed)
    modulus = as_modulus(modulus)
    generators = []
    for _ in range(n_generators):
        g = random_gl2(modulus, rng)
        power = ResidueMatrix.scalar(1, modulus)
        for _ in range(int(rng.integers(1, 2 * modulus.n + 1))):
            power = power @ g
        generators.append(power)
    return MatrixGroup(generators, modulus)


def _target_matrix(
    kind: str, d: int, modulus: Modulus, rng: np.random.Generator
) -> Tuple[ResidueMatrix, int]:
    """M' with upper right entry divisible by d, so that diag(d, 1) intertwines it"""
    n = modulus.n
    for _ in range(MAX_ATTEMPTS):
        a, beta, c, e = (int(x) for x in rng.integers(0, n, size=4))
        if kind == "split":
            beta, c = 0, 0
        elif kind == "borel":
            c = 0
        elif kind == "scalar":
            beta, c, e = 0, 0, a
        elif kind != "random":
            raise ValueError(f"unknown instance kind {kind!r}, expected one of {INSTANCE_KINDS}")
        if modulus.is_unit(a * e - d * beta * c):
            return ResidueMatrix([[a, d * beta], [c, e]], modulus), beta
    raise RuntimeError(f"no invertible {kind} matrix mod {n} after {MAX_ATTEMPTS} draws")


def random_equivariant_instance(
    n: int,
    d: int,
    twisted: bool = False,
    kind: str = "random",
    n_generators: int = 2,
    seed: Seed = None,
) -> Tuple[PairAction, IsogenyData]:
    """A Galois action making φ = diag(d, 1) equivariant

    For M' = [[a, dβ], [c, e]] the matrix M = χ·[[a, β], [dc, e]] satisfies M'φ = χφM and
    Mφ∨ = χφ∨M', and has the same determinant as M'.

    Args:
        n (int): Torsion level
        d (int): Degree of the isogeny
        twisted (bool, optional): Put χ = −1 on the first generator. Defaults to False.
        kind (str, optional): Shape of the M' drawn, one of INSTANCE_KINDS. Defaults to "random".
        n_generators (int, optional): Number of generators σ. Defaults to 2.
        seed (Seed, optional): Seed or generator. Defaults to None.

    Returns:
        Tuple[PairAction, IsogenyData]: The action and the isogeny
    """
    rng = np.random.default_rng(seed)
    modulus = as_modulus(n)
    pairs: List[ActionPair] = []
    for index in range(n_generators):
        target, beta = _target_matrix(kind, d, modulus, rng)
        a, _, c, e = target.entries
        chi = 1
        if twisted:
            chi = -1 if index == 0 else int(rng.choice((1, -1)))
        source = ResidueMatrix([[a, beta], [d * c, e]], modulus) * chi
        pairs.append(ActionPair(source, target, chi))
    return PairAction(pairs, modulus), synthesize_isogeny(d, n)


def random_scenario(
    max_n: int = 9, seed: Seed = None, exact_only: bool = False
) -> Tuple[SurfaceScenario, PairAction, IsogenyData]:
    """A consistent scenario with the Galois data behind it, for bound soundness checks

    Surface kind, period and [L:k] are drawn too, Kummer surfaces with period at most 2.
    With exact_only the draw stays in the regime where the Hom quotient order is exact:
    period 1, L = k, and Kummer surfaces only for odd n.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, max_n + 1))
    d = int(rng.choice(ISOGENY_DEGREES))
    twisted = bool(rng.integers(0, 2))
    kind = str(rng.choice(INSTANCE_KINDS))
    action, iso = random_equivariant_instance(n, d, twisted, kind, int(rng.integers(1, 3)), rng)

    surface_kind = list(SurfaceKind)[int(rng.integers(0, len(SurfaceKind)))]
    if exact_only:
        period, base_change_degree = 1, 1
        if n % 2 == 0:
            surface_kind = SurfaceKind.ABELIAN_TORSOR
    else:
        period = int(rng.integers(1, 3 if surface_kind is SurfaceKind.KUMMER_K3 else MAX_PERIOD + 1))
        base_change_degree = 1 if rng.integers(0, 2) else int(rng.integers(FIELD_DEGREES.start, FIELD_DEGREES.stop))
    scenario = SurfaceScenario(
        n=n,
        d=d,
        period=period,
        twist_nontrivial=twisted,
        base_change_degree=base_change_degree,
        surface_kind=surface_kind,
    )
    return scenario, action, iso


def signed_permutation(r: int, seed: Seed = None) -> np.ndarray:
    rng = np.random.default_rng(seed)
    matrix = np.zeros((r, r), dtype=np.int64)
    signs = rng.choice((1, -1), size=r)
    for i, j in enumerate(rng.permutation(r)):
        matrix[i, j] = signs[i]
    return matrix


def random_integer_action_group(r: int, n_generators: int = 2, seed: Seed = None) -> IntegerActionGroup:
    """A finite subgroup of GL_r(ℤ) generated by signed permutation matrices"""
    rng = np.random.default_rng(seed)
    return IntegerActionGroup([signed_permutation(r, rng) for _ in range(n_generators)], rank=r)

