"""Integer bookkeeping for bounds on transcendental Brauer groups

Each bound comes back as a BoundCertificate: the value, the labelled factors it is the
product of, and whether that value is certified exact or only an upper bound.
"""

import enum
import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np
from sympy import Matrix

from bsurf import config
from bsurf.errors import CapExceededError, PreconditionError, TheoremViolation
from bsurf.modring import ModMatrix, gcd_power, kernel, odd_part, span_order, valuation
from bsurf.torsionhom import (
    EndStructure,
    IsogenyData,
    PairAction,
    end_structure_for_action,
    transcendental_quotient,
)

logger = logging.getLogger(__name__)

FIELD_DEGREES = range(1, 13)
KUMMER_FIELD_DEGREE_CAP = 2**4
MAX_PICARD_RANK = 20
K3_SECOND_BETTI_RANK = 22


class ScenarioError(PreconditionError):
    pass


class SurfaceKind(enum.Enum):
    ABELIAN_TORSOR = "abelian-torsor"
    KUMMER_K3 = "kummer-k3"


class Exactness(enum.Enum):
    EXACT = "exact"
    UPPER_BOUND = "upper bound only"


@dataclass(frozen=True)
class SurfaceScenario:
    """A surface with geometric product structure E × E' and a cyclic isogeny of degree d

    Attributes:
        n (int): Torsion level
        d (int): Degree of the cyclic isogeny
        period (int): Period of the torsor, at most 2 for Kummer surfaces
        twist_nontrivial (bool): Whether δ is a non-square over the base field
        base_change_degree (int): [L:k], between 1 and 12
        surface_kind (SurfaceKind): Torsor under an abelian surface, or its Kummer K3
    """

    n: int
    d: int
    period: int = 1
    twist_nontrivial: bool = False
    base_change_degree: int = 1
    surface_kind: SurfaceKind = SurfaceKind.ABELIAN_TORSOR

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ScenarioError(f"n and d must be positive, got n={self.n}, d={self.d}")
        if self.period < 1:
            raise ScenarioError(f"period must be positive, got {self.period}")
        if self.surface_kind is SurfaceKind.KUMMER_K3 and self.period > 2:
            raise ScenarioError(f"a Kummer surface comes from a torsor of period at most 2, got {self.period}")
        if self.base_change_degree not in FIELD_DEGREES:
            raise ScenarioError(f"[L:k] is between 1 and 12, got {self.base_change_degree}")

    @property
    def m(self) -> int:
        return math.gcd(self.d, self.n)


@dataclass(frozen=True)
class Factor:
    label: str
    base: int
    exponent: int = 1

    @property
    def value(self) -> int:
        return self.base**self.exponent


@dataclass(frozen=True)
class BoundCertificate:
    value: int
    factors: Tuple[Factor, ...]
    exactness: Exactness = Exactness.UPPER_BOUND

    def __post_init__(self):
        if math.prod(f.value for f in self.factors) != self.value:
            raise ArithmeticError(f"factors of {self.value} do not multiply out")

    def __int__(self):
        return self.value

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "exactness": self.exactness.value,
            "factors": [{"label": f.label, "base": f.base, "exponent": f.exponent} for f in self.factors],
        }


def _certificate(factors: Sequence[Factor], exactness: Exactness = Exactness.UPPER_BOUND) -> BoundCertificate:
    return BoundCertificate(math.prod(f.value for f in factors), tuple(factors), exactness)


def field_degree_budget(scenario: SurfaceScenario) -> int:
    """Bound on [k':k] for the extension trivializing the period contribution"""
    budget = gcd_power(scenario.period, scenario.n) ** 4
    if scenario.surface_kind is SurfaceKind.KUMMER_K3:
        budget = min(budget, KUMMER_FIELD_DEGREE_CAP)
    return budget


def c_constant(scenario: SurfaceScenario) -> int:
    """gcd(d, n) when δ is a square, gcd(2d², n) otherwise"""
    if scenario.twist_nontrivial:
        return math.gcd(2 * scenario.d**2, scenario.n)
    return math.gcd(scenario.d, scenario.n)


def abelian_level_required(scenario: SurfaceScenario) -> int:
    """Level n/c at which an order-n transcendental class forces an abelian division field"""
    return scenario.n // c_constant(scenario)


def exactness_status(scenario: SurfaceScenario) -> Exactness:
    """Exact iff gcd(n, period) = 1 and L = k, and additionally n odd for Kummer surfaces"""
    exact = math.gcd(scenario.n, scenario.period) == 1 and scenario.base_change_degree == 1
    if scenario.surface_kind is SurfaceKind.KUMMER_K3:
        exact = exact and scenario.n % 2 == 1
    return Exactness.EXACT if exact else Exactness.UPPER_BOUND


def brauer_n_torsion_bound(scenario: SurfaceScenario, end_struct: EndStructure) -> BoundCertificate:
    """Upper bound on #((Br Y)_n / (Br₁ Y)_n), or on the Kummer analogue

    The n-torsion embeds into the Galois-invariant Hom quotient, whose size divides
    gcd(d,n)·n₁·n₂² for a trivial twist and gcd(2,n)⁴·gcd(d,n)²·#(End ratio) otherwise.
    Kummer surfaces inherit the bound through the pullback injection.

    Args:
        scenario (SurfaceScenario): The surface data
        end_struct (EndStructure): End_k(E'_n), with the twisted ratio order when δ is a non-square

    Raises:
        ScenarioError: The End structure is for another n, or the twisted ratio order is missing

    Returns:
        BoundCertificate: The bound and its factors
    """
    if end_struct.n != scenario.n:
        raise ScenarioError(f"End structure is for n={end_struct.n}, scenario has n={scenario.n}")

    m = scenario.m
    if scenario.twist_nontrivial:
        if end_struct.twisted_ratio_order is None:
            raise ScenarioError("a twisted scenario needs the End ratio over the quadratic extension")
        factors = [
            Factor("gcd(2,n)^4 from the twisted Hom kernel", math.gcd(2, scenario.n), 4),
            Factor("gcd(d,n)^2 from composing with the dual isogeny", m, 2),
            Factor("End ratio over k(sqrt(delta))", end_struct.twisted_ratio_order),
        ]
    else:
        factors = [
            Factor("gcd(d,n) from composing with the dual isogeny", m),
            Factor("n1 from End_k(E'_n)", end_struct.n1),
            Factor("n2^2 from End_k(E'_n)", end_struct.n2, 2),
        ]

    certificate = _certificate(factors)
    logger.debug("n-torsion bound for %s: %d", scenario, certificate.value)
    return certificate


def brauer_n_torsion_order(scenario: SurfaceScenario, action: PairAction, iso: IsogenyData) -> BoundCertificate:
    """Order of the Galois-invariant Hom quotient that #((Br Y)_n / (Br₁ Y)_n) embeds into

    The order equals the n-torsion count exactly when exactness_status reports EXACT;
    otherwise it is an upper bound. It always divides brauer_n_torsion_bound.

    Args:
        scenario (SurfaceScenario): The surface data
        action (PairAction): Galois action on the n-torsion of E and E'
        iso (IsogenyData): The isogeny, of the scenario's degree

    Raises:
        ScenarioError: The action or isogeny disagrees with the scenario on n, d or the twist
        EquivarianceError: φ is not equivariant for the action
        TheoremViolation: The quotient order does not divide the divisibility bound

    Returns:
        BoundCertificate: The quotient order, factored into its invariant factors
    """
    if action.n != scenario.n or iso.n != scenario.n:
        raise ScenarioError(f"action and isogeny must be mod {scenario.n}, got {action.n} and {iso.n}")
    if iso.d != scenario.d:
        raise ScenarioError(f"isogeny has degree {iso.d}, scenario has d={scenario.d}")
    if action.twist_nontrivial != scenario.twist_nontrivial:
        raise ScenarioError("the character of the action does not match the scenario's twist")

    shape = transcendental_quotient(action, iso)
    bound = brauer_n_torsion_bound(scenario, end_structure_for_action(action))
    if bound.value % shape.order:
        raise TheoremViolation(
            f"Hom quotient of order {shape.order} does not divide the bound {bound.value}",
            {"scenario": repr(scenario), "factors": list(shape.factors), "bound": bound.value},
        )

    factors = [Factor("invariant factor of the Hom quotient", f) for f in shape.factors]
    certificate = _certificate(factors, exactness_status(scenario))
    logger.debug("Hom quotient order for %s: %d (%s)", scenario, certificate.value, certificate.exactness.value)
    return certificate


def realized_order_lower_bound(n: int, d: int, surface_kind: SurfaceKind) -> int:
    """Order of a transcendental class guaranteed when the mod-n image of E' is abelian

    Periods are assumed prime to n; Kummer surfaces only see the odd part of n.
    """
    if n < 1 or d < 1:
        raise PreconditionError(f"n and d must be positive, got n={n}, d={d}")
    if surface_kind is SurfaceKind.KUMMER_K3:
        n = odd_part(n)
    return n // math.gcd(d, n)


def abelian_card_from_exponent(e: int) -> int:
    """#(Br Y/Br₁ Y) ≤ e³ since Br Ȳ ≅ (ℚ/ℤ)³"""
    if e < 1:
        raise PreconditionError(f"exponent must be positive, got {e}")
    return e**3


def k3_card_from_exponent(e: int, r: int) -> int:
    """#(Br X/Br₁ X) ≤ e^(22−r) since Br X̄ ≅ (ℚ/ℤ)^(22−r)"""
    if e < 1:
        raise PreconditionError(f"exponent must be positive, got {e}")
    if not 1 <= r <= MAX_PICARD_RANK:
        raise PreconditionError(f"Picard rank of a K3 surface is between 1 and 20, got {r}")
    return e ** (K3_SECOND_BETTI_RANK - r)


def over_q_bound(d: int) -> BoundCertificate:
    """(8d)³: over ℚ an abelian division field forces n/gcd(d,n) ≤ 8, so n ≤ 8d"""
    if d < 1:
        raise PreconditionError(f"degree must be positive, got {d}")
    return _certificate([Factor("level n <= 8d, cubed for (Q/Z)^3", 8 * d, 3)])


def ell_primary_budget(
    ell: int, r: int, v: int, d: int, bound: Callable[[int, int], int]
) -> int:
    """ℓ^(B(ℓ, 24·r·ℓ^(4v)) + v_ℓ(2d²)) for a caller supplied uniform bound B

    Args:
        ell (int): A prime
        r (int): Degree of the base field
        v (int): ℓ-adic valuation of the period
        d (int): Degree of the isogeny
        bound (Callable[[int, int], int]): B(ℓ, degree), bounding the level of abelian ℓ-power division fields

    Raises:
        NotPrimeError: ell is not prime
        PreconditionError: Invalid r, v or d, or B returns a negative value

    Returns:
        int: Bound on the ℓ-primary exponent
    """
    if r < 1 or v < 0 or d < 1:
        raise PreconditionError(f"invalid (r, v, d) = ({r}, {v}, {d})")
    level = bound(ell, 24 * r * ell ** (4 * v))
    if level < 0:
        raise PreconditionError(f"B returned a negative level {level}")
    return ell ** (level + valuation(2 * d * d, ell))


# algebraic Brauer group


def gl_order_f3(r: int) -> int:
    return math.prod(3**r - 3**i for i in range(r))


def algebraic_brauer_constant(r: int) -> int:
    """M(r) = |GL_r(𝔽₃)|^r, a multiple of #(Br₁ X/Br₀ X) for Picard rank r"""
    if not 1 <= r <= MAX_PICARD_RANK:
        raise PreconditionError(f"rank must be between 1 and {MAX_PICARD_RANK}, got {r}")
    return gl_order_f3(r) ** r


class IntegerActionGroup:
    """A finite group acting on ℤʳ through invertible integer matrices"""

    def __init__(
        self,
        generators: Sequence[Sequence[Sequence[int]]],
        rank: int | None = None,
        closure_cap: int | None = None,
        abstract_order: int | None = None,
    ):
        """
        Args:
            generators (Sequence): r×r integer matrices
            rank (int | None, optional): r, needed when there are no generators. Defaults to None.
            closure_cap (int | None, optional): Largest closure allowed. Defaults to config.closure_cap().
            abstract_order (int | None, optional): Order of the acting group when the action has a kernel. Defaults to None.

        Raises:
            PreconditionError: Bad shapes, a determinant other than ±1, or an abstract order
                the image order does not divide
        """
        self.generators: List[np.ndarray] = [np.array(g, dtype=np.int64) for g in generators]
        if rank is None:
            if not self.generators:
                raise PreconditionError("rank is needed for a group without generators")
            rank = self.generators[0].shape[0]
        self.rank = rank
        if self.rank < 1:
            raise PreconditionError(f"rank must be positive, got {self.rank}")
        for g in self.generators:
            if g.shape != (rank, rank):
                raise PreconditionError(f"generator of shape {g.shape}, expected ({rank}, {rank})")
            if abs(int(Matrix(g.tolist()).det())) != 1:
                raise PreconditionError(f"generator {g.tolist()} is not in GL_{rank}(Z)")
        self.closure_cap = config.closure_cap(closure_cap)
        self.abstract_order = abstract_order
        self._elements: List[np.ndarray] | None = None

        if abstract_order is not None and abstract_order % self.image_order():
            raise PreconditionError(
                f"image of order {self.image_order()} does not divide the group order {abstract_order}"
            )

    def elements(self) -> List[np.ndarray]:
        """Every matrix in the image

        Raises:
            CapExceededError: The closure grows past the cap, as it does for infinite groups
        """
        if self._elements is None:
            identity = np.eye(self.rank, dtype=np.int64)
            seen = {identity.tobytes(): identity}
            frontier = [identity]
            while frontier:
                following = []
                for x in frontier:
                    for g in self.generators:
                        y = x @ g
                        key = y.tobytes()
                        if key not in seen:
                            seen[key] = y
                            following.append(y)
                            if len(seen) > self.closure_cap:
                                raise CapExceededError(
                                    f"integer action group exceeds the cap of {self.closure_cap}",
                                    partial_count=len(seen),
                                )
                frontier = following
            self._elements = list(seen.values())
        return self._elements

    def image_order(self) -> int:
        return len(self.elements())

    def order(self) -> int:
        return self.abstract_order or self.image_order()


def _fixed_rows(group: IntegerActionGroup) -> List[List[int]]:
    rows: List[List[int]] = []
    identity = np.eye(group.rank, dtype=np.int64)
    for g in group.generators:
        rows += (g - identity).tolist()
    return rows


def fixed_sublattice(group: IntegerActionGroup) -> List[List[int]]:
    """Generators of (ℤʳ)^G

    The rational kernel of the stacked (g − I) is put in reduced echelon form
    x_pivot = −C·y_free; the integral points are the y with C·y integral, that is the
    kernel of D·C mod D together with D·ℤ^free, D the common denominator of C.
    """
    r = group.rank
    rows = _fixed_rows(group)
    if not rows:
        return [[int(i == j) for j in range(r)] for i in range(r)]

    reduced, pivots = Matrix(rows).rref()
    free = [j for j in range(r) if j not in pivots]
    if not free:
        return []

    coefficients = [[reduced[i, j] for j in free] for i in range(len(pivots))]
    denominator = math.lcm(*(int(x.q) for row in coefficients for x in row))
    if denominator == 1:
        free_values = [[int(i == j) for j in range(len(free))] for i in range(len(free))]
    else:
        scaled = [[int(x * denominator) for x in row] for row in coefficients]
        free_values = kernel(ModMatrix(scaled, denominator)).rows()
        free_values = [list(v) for v in free_values]
        free_values += [[denominator * int(i == j) for j in range(len(free))] for i in range(len(free))]

    generators = []
    for y in free_values:
        x = [0] * r
        for k, j in enumerate(free):
            x[j] = int(y[k])
        for i, p in enumerate(pivots):
            value = -sum(coefficients[i][k] * y[k] for k in range(len(free)))
            if value.q != 1:
                raise ArithmeticError("saturation produced a non-integral fixed vector")
            x[p] = int(value)
        generators.append(x)
    return generators


def h1_integer_action(group: IntegerActionGroup) -> int:
    """#H¹(G, ℤʳ) = #((ℤʳ/N)^G) / #((ℤʳ)^G mod N) with N = |G|

    Raises:
        CapExceededError: The group is not finite within the cap
        TheoremViolation: The order does not divide |G|^r
    """
    big_n = group.order()
    r = group.rank
    if big_n == 1:
        return 1

    rows = _fixed_rows(group)
    if rows:
        invariants = kernel(ModMatrix(rows, big_n)).rows()
    else:
        invariants = [tuple(int(i == j) for j in range(r)) for i in range(r)]
    invariant_order = span_order(invariants, big_n, r)
    lattice_image = span_order([[x % big_n for x in v] for v in fixed_sublattice(group)], big_n, r)

    if invariant_order % lattice_image:
        raise ArithmeticError("fixed lattice does not reduce into the invariants mod |G|")
    order = invariant_order // lattice_image
    if big_n**r % order:
        raise TheoremViolation(
            f"#H^1 = {order} does not divide |G|^r = {big_n}^{r}",
            {"generators": [g.tolist() for g in group.generators], "order": big_n},
        )
    return order
