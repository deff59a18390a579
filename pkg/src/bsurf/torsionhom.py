"""Galois-equivariant Hom and End groups of elliptic-curve torsion, in matrix form

A Galois action is presented by finitely many generators σ, each carrying its matrix
M_σ on E_n, its matrix M'_σ on E'_n and the value χ_σ = ±1 of the twist character.
σ acts on F ∈ Hom(E_n, E'_n) by F ↦ M'_σ F M_σ⁻¹, so F is fixed iff M'_σ F = F M_σ.
An isogeny matrix P is equivariant when M'_σ P = χ_σ P M_σ.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Dict, FrozenSet, Iterable, List, Sequence, Tuple

import numpy as np
from sympy import divisors

from bsurf.errors import PreconditionError, TheoremViolation
from bsurf.gl2 import MatrixGroup, simultaneous_commutant
from bsurf.modring import (
    AbelianShape,
    ModMatrix,
    Modulus,
    ModulusError,
    NotInvertibleError,
    ResidueMatrix,
    as_modulus,
    in_span,
    kernel,
    m2_basis,
    m2_operator,
    mat2_is_scalar,
    mat2_mul,
    quotient_shape,
    span_order,
    subgroup_shape,
)

logger = logging.getLogger(__name__)

Vector = Tuple[int, ...]


class EquivarianceError(PreconditionError):
    pass


class IsogenyError(PreconditionError):
    pass


class TwistError(PreconditionError):
    pass


@dataclass(frozen=True)
class ActionPair:
    source: ResidueMatrix
    target: ResidueMatrix
    chi: int = 1


class PairAction:
    """Generators of a Galois action on Hom(E_n, E'_n)"""

    def __init__(
        self,
        pairs: Iterable[ActionPair | Tuple[Any, Any, int] | Tuple[Any, Any]],
        modulus: "int | Modulus",
    ):
        """
        Args:
            pairs (Iterable[ActionPair | Tuple]): (M_σ, M'_σ, χ_σ) per generator; χ defaults to +1
            modulus (int | Modulus): The modulus n

        Raises:
            NotInvertibleError: A matrix is not invertible mod n
            ValueError: A character value is not ±1
        """
        self.modulus = as_modulus(modulus)
        checked = []
        for pair in pairs:
            if not isinstance(pair, ActionPair):
                pair = ActionPair(*pair) if len(pair) == 3 else ActionPair(pair[0], pair[1])
            source = _residue(pair.source, self.modulus)
            target = _residue(pair.target, self.modulus)
            if pair.chi not in (1, -1):
                raise ValueError(f"character values are +1 or -1, got {pair.chi}")
            for matrix in (source, target):
                if not matrix.is_invertible():
                    raise NotInvertibleError(f"{matrix!r} is not invertible")
            checked.append(ActionPair(source, target, int(pair.chi)))
        self.pairs: Tuple[ActionPair, ...] = tuple(checked)

    @property
    def n(self) -> int:
        return self.modulus.n

    @property
    def twist_nontrivial(self) -> bool:
        return any(p.chi == -1 for p in self.pairs)

    def source_image(self) -> MatrixGroup:
        return MatrixGroup([p.source for p in self.pairs], self.modulus)

    def target_image(self) -> MatrixGroup:
        return MatrixGroup([p.target for p in self.pairs], self.modulus)

    def __len__(self):
        return len(self.pairs)

    def __repr__(self):
        return f"PairAction({len(self.pairs)} pairs, mod {self.n}, twisted={self.twist_nontrivial})"


def _residue(matrix, modulus: Modulus) -> ResidueMatrix:
    if isinstance(matrix, ResidueMatrix):
        if matrix.n != modulus.n:
            raise ModulusError(f"matrix has modulus {matrix.n}, expected {modulus.n}")
        return matrix
    return ResidueMatrix(matrix, modulus)


class IsogenyData:
    """Matrices of a cyclic isogeny φ of degree d and of its dual on n-torsion"""

    def __init__(self, d: int, phi_n, phi_dual_n, modulus: "int | Modulus"):
        """
        Args:
            d (int): Degree
            phi_n: Matrix of φ on E_n
            phi_dual_n: Matrix of φ∨ on E'_n
            modulus (int | Modulus): The modulus n

        Raises:
            IsogenyError: φ∨φ or φφ∨ differs from d·I, or the kernel of φ on E_n is not cyclic
        """
        if d < 1:
            raise IsogenyError(f"degree must be positive, got {d}")
        self.modulus = as_modulus(modulus)
        self.d = d
        self.phi_n = _residue(phi_n, self.modulus)
        self.phi_dual_n = _residue(phi_dual_n, self.modulus)

        scalar = ResidueMatrix.scalar(d, self.modulus)
        if self.phi_dual_n @ self.phi_n != scalar or self.phi_n @ self.phi_dual_n != scalar:
            raise IsogenyError(f"dual relation φ∨φ = φφ∨ = {d}I fails mod {self.n}")
        if not subgroup_shape(kernel(self.phi_n).rows(), self.modulus, 2).is_cyclic():
            raise IsogenyError("kernel of φ on n-torsion is not cyclic")

    @property
    def n(self) -> int:
        return self.modulus.n

    @property
    def m(self) -> int:
        return math.gcd(self.d, self.n)

    def __repr__(self):
        return f"IsogenyData(d={self.d}, phi={list(self.phi_n.entries)}, mod {self.n})"


def synthesize_isogeny(d: int, n: int) -> IsogenyData:
    """φ = diag(d, 1) and φ∨ = diag(1, d): kernel generated by the first basis vector"""
    return IsogenyData(d, [[d, 0], [0, 1]], [[1, 0], [0, d]], n)


@dataclass(frozen=True)
class HomModule:
    shape: AbelianShape
    basis: Tuple[ResidueMatrix, ...]

    @property
    def order(self) -> int:
        return self.shape.order

    def vectors(self) -> List[Vector]:
        return [b.vector() for b in self.basis]


def _operator_rows(fn: Callable[[ResidueMatrix], ResidueMatrix], modulus: Modulus) -> List[Vector]:
    return m2_operator(fn, modulus).rows()


def _solve(rows: List[Vector], modulus: Modulus) -> List[Vector]:
    """Generators of the solutions F ∈ M₂ of the stacked linear conditions"""
    if not rows:
        return [b.vector() for b in m2_basis(modulus)]
    return kernel(ModMatrix(rows, modulus)).rows()


def _hom_rows(pairs: Iterable[ActionPair], modulus: Modulus, twisted: bool = False) -> List[Vector]:
    rows: List[Vector] = []
    for p in pairs:
        left = p.target * p.chi if twisted else p.target
        rows += _operator_rows(lambda f, left=left, right=p.source: left @ f - f @ right, modulus)
    return rows


def _as_module(vectors: List[Vector], modulus: Modulus) -> HomModule:
    return HomModule(
        subgroup_shape(vectors, modulus, 4),
        tuple(ResidueMatrix.from_key(v, modulus) for v in vectors),
    )


def invariant_homs(action: PairAction) -> HomModule:
    """{F : M'_σ F = F M_σ for all σ}"""
    return _as_module(_solve(_hom_rows(action.pairs, action.modulus), action.modulus), action.modulus)


def geometric_hom_fixed(iso: IsogenyData, twist_nontrivial: bool) -> HomModule:
    """The Galois-fixed part of (ℤφ)/n: ⟨φ⟩, or its 2-torsion (n/gcd(2,n))·⟨φ⟩ under a nontrivial twist"""
    generator = iso.phi_n
    if twist_nontrivial:
        generator = generator * (iso.n // math.gcd(2, iso.n))
    return HomModule(subgroup_shape([generator.vector()], iso.modulus, 4), (generator,))


def check_equivariance(action: PairAction, iso: IsogenyData):
    """
    Raises:
        ModulusError: The action and the isogeny use different moduli
        EquivarianceError: Some σ has M'_σ·φ ≠ χ_σ·φ·M_σ or M_σ·φ∨ ≠ χ_σ·φ∨·M'_σ
    """
    if action.n != iso.n:
        raise ModulusError(f"action is mod {action.n}, isogeny mod {iso.n}")
    phi, dual = iso.phi_n, iso.phi_dual_n
    for index, p in enumerate(action.pairs):
        if p.target @ phi != (phi @ p.source) * p.chi:
            raise EquivarianceError(f"φ is not equivariant for generator σ_{index}")
        if p.source @ dual != (dual @ p.target) * p.chi:
            raise EquivarianceError(f"φ∨ is not equivariant for generator σ_{index}")


def transcendental_quotient(action: PairAction, iso: IsogenyData) -> AbelianShape:
    """Shape of Hom_k(E_n, E'_n) modulo the Galois-fixed geometric homomorphisms

    Raises:
        EquivarianceError: φ is not equivariant for the twisted action
    """
    check_equivariance(action, iso)
    homs = invariant_homs(action)
    geometric = geometric_hom_fixed(iso, action.twist_nontrivial)
    return quotient_shape(homs.vectors(), geometric.vectors(), action.modulus, 4)


@dataclass(frozen=True)
class FactorizationResult:
    criterion: bool
    oracle: bool | None


FACTORIZATION_ORACLE_LIMIT = 12


def _all_matrices(n: int) -> np.ndarray:
    return np.indices((n,) * 4).reshape(4, -1).T.reshape(-1, 2, 2)


@lru_cache(maxsize=256)
def _factored_keys(through: Tuple[int, ...], n: int) -> FrozenSet[Tuple[int, ...]]:
    """Entry tuples of every h·T mod n"""
    products = np.matmul(_all_matrices(n), np.array(through).reshape(2, 2)) % n
    return frozenset(map(tuple, products.reshape(-1, 4).tolist()))


def factorization_criterion(f: ResidueMatrix, g: IsogenyData, n_prime: int) -> FactorizationResult:
    """Whether f factors through [n']∘g, by the composite criterion f∘g∨∘[n/gcd(dn', n)] = 0

    The oracle searches every h with f = h·(n'·g) when n is at most 12.

    Args:
        f (ResidueMatrix): A homomorphism on n-torsion
        g (IsogenyData): Cyclic isogeny of degree d
        n_prime (int): The positive integer n'

    Raises:
        PreconditionError: n'·gcd(d, n) ≠ gcd(dn', n)

    Returns:
        FactorizationResult: Criterion value and the oracle's answer, None above the oracle limit
    """
    n, d = g.n, g.d
    f = _residue(f, g.modulus)
    if n_prime < 1 or n_prime * math.gcd(d, n) != math.gcd(d * n_prime, n):
        raise PreconditionError(f"n'·gcd(d,n) = gcd(dn',n) fails for d={d}, n={n}, n'={n_prime}")

    criterion = ((f @ g.phi_dual_n) * (n // math.gcd(d * n_prime, n))).is_zero()

    oracle = None
    if n <= FACTORIZATION_ORACLE_LIMIT:
        oracle = f.entries in _factored_keys((g.phi_n * n_prime).entries, n)

    return FactorizationResult(criterion, oracle)


@dataclass(frozen=True)
class ExactnessCertificate:
    """0 → Hom(φ(E_m), E'_m) → Hom(E_n, E'_n) → H → 0, checked at the group level"""

    m: int
    left_order: int
    middle_order: int
    h_order: int
    passed: bool
    failure: str | None = None
    counterexample: Vector | None = None


def hom_to_end_sequence(action: PairAction, iso: IsogenyData) -> ExactnessCertificate:
    """Certify the exact sequence given by −∘φ∘[n/m] and −∘φ∨, m = gcd(d, n)

    Exactness is certified on all of M₂(ℤ/n) as abelian groups, not on the Galois-invariant
    submodule; compatibility with the action is only the equivariance check on φ and φ∨.

    Args:
        action (PairAction): Galois action, checked for equivariance of φ and φ∨
        iso (IsogenyData): The isogeny

    Returns:
        ExactnessCertificate: Orders of the three modules; a failing step with a counterexample
    """
    check_equivariance(action, iso)
    modulus, n, m = iso.modulus, iso.n, iso.m
    phi, dual = iso.phi_n, iso.phi_dual_n
    restrict = phi * (n // m)
    basis = m2_basis(modulus)

    left = [(e @ restrict).vector() for e in basis]
    image_of_em = subgroup_shape([tuple(col) for col in restrict.transpose().rows()], modulus, 2)
    left_order = math.prod(math.gcd(f, m) ** 2 for f in image_of_em.factors)

    h_module = _solve(_operator_rows(lambda f: f @ restrict, modulus), modulus)
    h_order = span_order(h_module, modulus, 4)
    compose_dual = _operator_rows(lambda f: f @ dual, modulus)
    beta_kernel = _solve(compose_dual, modulus)
    beta_image = [(e @ dual).vector() for e in basis]

    def failed(reason: str, element: Vector | None = None) -> ExactnessCertificate:
        logger.warning("exact sequence fails for %r: %s", iso, reason)
        return ExactnessCertificate(m, left_order, n**4, h_order, False, reason, element)

    if span_order(left, modulus, 4) != left_order:
        return failed("first map is not injective")
    for v in left:
        if not (ResidueMatrix.from_key(v, modulus) @ dual).is_zero():
            return failed("image of the first map is not killed by −∘φ∨", v)
    for v in beta_kernel:
        if not in_span(v, left, modulus):
            return failed("kernel of −∘φ∨ is larger than the image of the first map", v)
    for v in beta_image:
        if not (ResidueMatrix.from_key(v, modulus) @ restrict).is_zero():
            return failed("−∘φ∨ leaves H", v)
    if span_order(beta_image, modulus, 4) != h_order:
        return failed("−∘φ∨ is not onto H")
    if left_order * h_order != n**4:
        return failed("orders do not multiply to |Hom(E_n, E'_n)|")

    return ExactnessCertificate(m, left_order, n**4, h_order, True)


# End structure


@dataclass(frozen=True)
class EndStructure:
    """End_k(E_n) ≅ ℤ/n × ℤ/n₁ × (ℤ/n₂)²"""

    n: int
    n1: int
    n2: int
    twisted_ratio_order: int | None = None

    def __post_init__(self):
        if self.n < 1 or self.n1 < 1 or self.n2 < 1:
            raise ValueError(f"End structure entries must be positive: {self}")
        if self.n % self.n1 or self.n1 % self.n2:
            raise ValueError(f"need n2 | n1 | n, got ({self.n}, {self.n1}, {self.n2})")

    @property
    def quotient_shape(self) -> AbelianShape:
        """Shape of End_k(E_n) / ⟨I⟩"""
        return AbelianShape.from_cyclic_orders([self.n1, self.n2, self.n2])


def _generators_commute(keys: Sequence[Tuple[int, ...]], m: int) -> bool:
    return all(mat2_mul(x, y, m) == mat2_mul(y, x, m) for x in keys for y in keys)


def end_structure_from_commutant(image: MatrixGroup) -> EndStructure:
    """(n₁, n₂) read off the invariant factors (n₂, n₂, n₁, n) of the simultaneous commutant

    Raises:
        TheoremViolation: The invariant factors do not have that shape
    """
    n = image.n
    commutant = simultaneous_commutant(image.generators, image.modulus)
    shape = subgroup_shape([c.vector() for c in commutant], image.modulus, 4)
    padded = [1] * (4 - shape.rank) + list(shape.factors)
    if shape.rank > 4 or padded[3] != n or padded[0] != padded[1]:
        raise TheoremViolation(
            f"End_k(E_n) has invariant factors {shape.factors}, not (n2, n2, n1, n)",
            {"modulus": n, "generators": [list(g.entries) for g in image.generators]},
        )
    return EndStructure(n, padded[2], padded[1])


def end_structure_from_divisors(image: MatrixGroup) -> EndStructure:
    """n₁ and n₂ as the largest divisors of n with abelian, resp. scalar, reduced image"""
    n = image.n
    keys = image.generator_keys
    n1 = max(m for m in divisors(n) if _generators_commute([tuple(x % m for x in k) for k in keys], m))
    n2 = max(m for m in divisors(n) if all(mat2_is_scalar(k, m) for k in keys))
    return EndStructure(n, int(n1), int(n2))


def end_invariants(image: MatrixGroup) -> EndStructure:
    """End_k(E_n) from the commutant of the Galois image, cross-checked by the divisor scan

    Raises:
        TheoremViolation: The shape is wrong or the two descriptions of (n₁, n₂) disagree
    """
    structural = end_structure_from_commutant(image)
    scanned = end_structure_from_divisors(image)
    if (structural.n1, structural.n2) != (scanned.n1, scanned.n2):
        raise TheoremViolation(
            f"commutant gives (n1, n2) = ({structural.n1}, {structural.n2}), "
            f"divisor scan gives ({scanned.n1}, {scanned.n2})",
            {"modulus": image.n, "generators": [list(g.entries) for g in image.generators]},
        )
    return structural


def rank_jump(image: MatrixGroup, ell: int, s: int) -> int:
    """𝔽_ℓ-dimension of End_k(E_{ℓˢ}) / (End_k(E_{ℓ^{s−1}})∘[ℓ])

    Raises:
        ModulusError: The image is not over ℓˢ
        TheoremViolation: The dimension does not match the scalar / abelian / non-abelian case
    """
    n = ell**s
    if image.n != n:
        raise ModulusError(f"image is mod {image.n}, expected {ell}^{s}")

    top = [c.vector() for c in simultaneous_commutant(image.generators, n)]
    lower: List[Vector] = []
    if s > 1:
        below = simultaneous_commutant([g.reduce(n // ell) for g in image.generators], n // ell)
        lower = [tuple((ell * x) % n for x in c.vector()) for c in below]

    quotient = quotient_shape(top, lower, n, 4)
    keys = image.generator_keys
    if all(mat2_is_scalar(k, n) for k in keys):
        expected = 4
    elif _generators_commute(keys, n):
        expected = 2
    else:
        expected = 1

    if any(f != ell for f in quotient.factors) or quotient.rank != expected:
        raise TheoremViolation(
            f"rank jump {quotient} where dimension {expected} was expected",
            {"ell": ell, "s": s, "generators": [list(k) for k in keys]},
        )
    return quotient.rank


def chi_kernel(action: PairAction) -> PairAction:
    """Schreier generators of the sub-action on which χ = +1, with transversal {1, t}"""
    twisted = [p for p in action.pairs if p.chi == -1]
    if not twisted:
        return action

    t = twisted[0]
    t_inv = ActionPair(t.source.inverse(), t.target.inverse(), -1)
    found: List[ActionPair] = []
    for p in action.pairs:
        if p.chi == 1:
            candidates = [
                (p.source, p.target),
                (t.source @ p.source @ t_inv.source, t.target @ p.target @ t_inv.target),
            ]
        else:
            candidates = [
                (p.source @ t_inv.source, p.target @ t_inv.target),
                (t.source @ p.source, t.target @ p.target),
            ]
        for source, target in candidates:
            pair = ActionPair(source, target, 1)
            if source.entries == target.entries == (1 % action.n, 0, 0, 1 % action.n):
                continue
            if pair not in found:
                found.append(pair)
    return PairAction(found, action.modulus)


def relative_end_shape(image: MatrixGroup, sub_image: MatrixGroup) -> AbelianShape:
    """End over the smaller image modulo End over the full image

    Raises:
        TheoremViolation: The quotient is not ℤ/(n₁'/n₁) × (ℤ/(n₂'/n₂))²
    """
    full = [c.vector() for c in simultaneous_commutant(image.generators, image.modulus)]
    sub = [c.vector() for c in simultaneous_commutant(sub_image.generators, image.modulus)]
    shape = quotient_shape(sub, full, image.modulus, 4)

    big, small = end_invariants(sub_image), end_invariants(image)
    expected = AbelianShape.from_cyclic_orders(
        [big.n1 // small.n1, big.n2 // small.n2, big.n2 // small.n2]
    )
    if shape != expected:
        raise TheoremViolation(
            f"relative End quotient {shape} differs from {expected}",
            {"modulus": image.n, "n1": (small.n1, big.n1), "n2": (small.n2, big.n2)},
        )
    return shape


def twisted_end_ratio(action: PairAction) -> AbelianShape:
    """End of E'^δ_n over the χ-kernel sub-action modulo End over the full action"""
    sub = chi_kernel(action)
    over_sub = [c.vector() for c in simultaneous_commutant([p.target for p in sub.pairs], action.modulus)]
    over_all = [c.vector() for c in simultaneous_commutant([p.target for p in action.pairs], action.modulus)]
    return quotient_shape(over_sub, over_all, action.modulus, 4)


def end_structure_for_action(action: PairAction) -> EndStructure:
    """End structure of E'_n, carrying the twisted End ratio when χ is nontrivial"""
    base = end_invariants(action.target_image())
    ratio = twisted_end_ratio(action).order if action.twist_nontrivial else None
    return EndStructure(base.n, base.n1, base.n2, ratio)


# divisibility certificates


@dataclass(frozen=True)
class DivisibilityCertificate:
    twisted: bool
    n: int
    m: int
    hom_quotient: AbelianShape
    end_quotient: AbelianShape
    order_bound: int
    exponent_bound: int
    kernel_shape: AbelianShape
    cokernel_shape: AbelianShape | None = None
    first_step_kernel: AbelianShape | None = None
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return (
            self.order_bound % self.hom_quotient.order == 0
            and self.exponent_bound % self.hom_quotient.exponent == 0
        )


def _dump(action: PairAction, iso: IsogenyData) -> Dict[str, Any]:
    return {
        "modulus": iso.n,
        "d": iso.d,
        "phi": list(iso.phi_n.entries),
        "phi_dual": list(iso.phi_dual_n.entries),
        "pairs": [[list(p.source.entries), list(p.target.entries), p.chi] for p in action.pairs],
    }


def divisibility_check_rational(action: PairAction, iso: IsogenyData) -> DivisibilityCertificate:
    """Certify #Hom-quotient | m·#End-quotient and the exponent analogue when χ is trivial

    Also certifies that −∘φ∨ has cyclic kernel of order dividing m on the quotients and
    m-torsion cokernel.

    Raises:
        TwistError: Some χ_σ = −1
        TheoremViolation: A divisibility fails
    """
    if action.twist_nontrivial:
        raise TwistError("rational divisibility needs a trivial twist")
    check_equivariance(action, iso)
    modulus, n, m = iso.modulus, iso.n, iso.m
    identity = (1 % n, 0, 0, 1 % n)
    phi, dual = iso.phi_n, iso.phi_dual_n

    homs = invariant_homs(action)
    hom_q = quotient_shape(homs.vectors(), [phi.vector()], modulus, 4)
    ends = [c.vector() for c in simultaneous_commutant([p.target for p in action.pairs], modulus)]
    end_q = quotient_shape(ends, [identity], modulus, 4)

    # F ∈ Hom_k with F·φ∨ = a·I, solved in the coordinates (F, a)
    rows = [row + (0,) for row in _hom_rows(action.pairs, modulus)]
    compose = _operator_rows(lambda f: f @ dual, modulus)
    rows += [row + ((-identity[i]) % n,) for i, row in enumerate(compose)]
    lifted = [v[:4] for v in kernel(ModMatrix(rows, modulus)).rows()]
    kernel_shape = quotient_shape(lifted, [phi.vector()], modulus, 4)
    images = [identity] + [(b @ dual).vector() for b in homs.basis]
    cokernel_shape = quotient_shape(ends, images, modulus, 4)

    certificate = DivisibilityCertificate(
        False, n, m, hom_q, end_q, m * end_q.order, m * end_q.exponent, kernel_shape, cokernel_shape
    )
    if (
        not certificate.passed
        or not kernel_shape.is_cyclic()
        or m % kernel_shape.order
        or m % cokernel_shape.exponent
    ):
        raise TheoremViolation(
            f"rational divisibility fails: Hom quotient {hom_q}, End quotient {end_q}, "
            f"kernel {kernel_shape}, cokernel {cokernel_shape}",
            _dump(action, iso),
        )
    return certificate


def divisibility_check_twisted(action: PairAction, iso: IsogenyData) -> DivisibilityCertificate:
    """Certify #Hom-quotient | gcd(2,n)⁴·m²·#ratio and e(Hom-quotient) | gcd(2,n)·m²·e(ratio)

    The ratio is End over the χ-kernel sub-action modulo End over the full action. The
    two steps are certified separately: the kernel of Hom_k(E_n, E'_n) → Hom over the
    sub-action embeds in (ℤ/gcd(2,n))³, and the kernel of −∘φ∨ on the twisted Hom ratio
    has order dividing m²·gcd(m,2) and exponent dividing m².

    Raises:
        TwistError: χ is trivial
        TheoremViolation: A divisibility fails
    """
    if not action.twist_nontrivial:
        raise TwistError("twisted divisibility needs some χ_σ = -1")
    check_equivariance(action, iso)
    modulus, n, m = iso.modulus, iso.n, iso.m
    two = math.gcd(2, n)
    dual = iso.phi_dual_n

    hom_q = transcendental_quotient(action, iso)
    ratio = twisted_end_ratio(action)
    sub = chi_kernel(action)

    hom_rows = _hom_rows(action.pairs, modulus)
    doubling = _operator_rows(lambda f: f * 2, modulus)
    two_torsion = _solve(hom_rows + doubling, modulus)
    geometric = geometric_hom_fixed(iso, True)
    first = quotient_shape(two_torsion, geometric.vectors(), modulus, 4)

    over_sub = _hom_rows(sub.pairs, modulus)
    lands_in_end = []
    for p in action.pairs:
        lands_in_end += _operator_rows(
            lambda f, a=p.target: a @ (f @ dual) - (f @ dual) @ a, modulus
        )
    widened = _solve(over_sub + lands_in_end, modulus)
    rational = _solve(_hom_rows(action.pairs, modulus, twisted=True), modulus)
    second = quotient_shape(widened, rational, modulus, 4)

    certificate = DivisibilityCertificate(
        True,
        n,
        m,
        hom_q,
        ratio,
        two**4 * m * m * ratio.order,
        two * m * m * ratio.exponent,
        second,
        first_step_kernel=first,
    )
    if (
        not certificate.passed
        or two**3 % first.order
        or two % first.exponent
        or (m * m * math.gcd(m, 2)) % second.order
        or (m * m) % second.exponent
    ):
        raise TheoremViolation(
            f"twisted divisibility fails: Hom quotient {hom_q}, ratio {ratio}, "
            f"first kernel {first}, second kernel {second}",
            _dump(action, iso),
        )
    return certificate
