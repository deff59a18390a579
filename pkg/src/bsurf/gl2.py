"""Subgroups of GL₂(ℤ/nℤ) and finite rational-trace subgroups of GL₂(ℝ)"""

import enum
import itertools
import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Dict, Iterable, List, Sequence, Tuple

import networkx as nx
import numpy as np
from sympy.ntheory import is_quad_residue, legendre_symbol, sqrt_mod

from bsurf import config
from bsurf.errors import CapExceededError, PreconditionError, TheoremViolation
from bsurf.modring import (
    INFINITY,
    AbelianShape,
    Key2,
    ModMatrix,
    Modulus,
    ModulusError,
    NotInvertibleError,
    NotPrimeError,
    ResidueMatrix,
    as_modulus,
    is_prime,
    kernel,
    m2_basis,
    m2_operator,
    mat2_det,
    mat2_is_scalar,
    mat2_mul,
    prime_factors,
    span_order,
    subgroup_shape,
    valuation,
)

logger = logging.getLogger(__name__)


class ScalarMatrixError(PreconditionError):
    pass


class NonAbelianError(PreconditionError):
    pass


class IrrationalTraceError(PreconditionError):
    pass


def _as_residue(matrix, modulus: Modulus) -> ResidueMatrix:
    if isinstance(matrix, ResidueMatrix):
        if matrix.n != modulus.n:
            raise ModulusError(f"generator has modulus {matrix.n}, expected {modulus.n}")
        return matrix
    return ResidueMatrix(matrix, modulus)


def _identity_key(n: int) -> Key2:
    return (1 % n, 0, 0, 1 % n)


class MatrixGroup:
    """A finitely generated subgroup of GL₂(ℤ/nℤ) with a lazily computed closure"""

    def __init__(
        self,
        generators: Iterable[ResidueMatrix | Sequence[Sequence[int]]],
        modulus: "int | Modulus",
        closure_cap: int | None = None,
    ):
        """
        Args:
            generators (Iterable[ResidueMatrix | Sequence[Sequence[int]]]): Invertible 2x2 generators
            modulus (int | Modulus): The modulus n
            closure_cap (int | None, optional): Largest closure allowed. Defaults to config.closure_cap().

        Raises:
            NotInvertibleError: A generator has non-unit determinant
        """
        self.modulus = as_modulus(modulus)
        self.generators = tuple(_as_residue(g, self.modulus) for g in generators)
        for g in self.generators:
            if not g.is_invertible():
                raise NotInvertibleError(f"generator {g!r} is not invertible")
        self.closure_cap = config.closure_cap(closure_cap)

    @property
    def n(self) -> int:
        return self.modulus.n

    @property
    def generator_keys(self) -> Tuple[Key2, ...]:
        return tuple(g.entries for g in self.generators)

    @cached_property
    def _element_keys(self) -> Tuple[Key2, ...]:
        n = self.n
        gens = self.generator_keys
        identity = _identity_key(n)
        seen = {identity}
        frontier = [identity]
        while frontier:
            following = []
            for x in frontier:
                for g in gens:
                    y = mat2_mul(x, g, n)
                    if y not in seen:
                        seen.add(y)
                        following.append(y)
                        if len(seen) > self.closure_cap:
                            raise CapExceededError(
                                f"closure mod {n} exceeds the cap of {self.closure_cap}",
                                partial_count=len(seen),
                            )
            frontier = following

        logger.debug("closure mod %d has %d elements", n, len(seen))
        return tuple(sorted(seen))

    def element_keys(self) -> Tuple[Key2, ...]:
        """Sorted entry tuples of every element"""
        return self._element_keys

    def closure(self) -> List[ResidueMatrix]:
        return [ResidueMatrix.from_key(k, self.modulus) for k in self._element_keys]

    def order(self) -> int:
        return len(self._element_keys)

    def contains(self, matrix: ResidueMatrix | Sequence[Sequence[int]]) -> bool:
        return _as_residue(matrix, self.modulus).entries in set(self._element_keys)

    def is_abelian(self) -> bool:
        self.element_keys()
        gens = self.generator_keys
        return all(
            mat2_mul(x, y, self.n) == mat2_mul(y, x, self.n)
            for x, y in itertools.combinations(gens, 2)
        )

    def is_scalar(self) -> bool:
        self.element_keys()
        return all(mat2_is_scalar(g, self.n) for g in self.generator_keys)

    def reduce(self, m: int) -> "MatrixGroup":
        """Image of the group in GL₂(ℤ/mℤ) for m | n"""
        return MatrixGroup([g.reduce(m) for g in self.generators], m, self.closure_cap)

    def __repr__(self):
        return f"MatrixGroup({[list(g.entries) for g in self.generators]}, mod {self.n})"


def closure(group: MatrixGroup) -> List[ResidueMatrix]:
    """Every element of the group, sorted by entry tuple

    Raises:
        CapExceededError: The closure grows past group.closure_cap
    """
    return group.closure()


def is_abelian(group: MatrixGroup) -> bool:
    return group.is_abelian()


def scalar_image_trivial(group: MatrixGroup) -> bool:
    """True iff the image modulo scalars is trivial"""
    return group.is_scalar()


def reduce_group(group: MatrixGroup, m: int) -> MatrixGroup:
    return group.reduce(m)


# standard groups


def gl2_order(n: int) -> int:
    """|GL₂(ℤ/nℤ)| = n⁴ ∏_{p|n} (1 − 1/p)(1 − 1/p²)"""
    result = 1
    for p, e in prime_factors(n).items():
        result *= p ** (4 * e - 3) * (p - 1) * (p * p - 1)
    return result


def _count_gl2_exhaustive(n: int) -> int:
    a, b, c, d = np.indices((n,) * 4).reshape(4, -1)
    det = (a * d - b * c) % n
    return int((np.gcd(det, n) == 1).sum())


def _unit_generators(n: int) -> List[int]:
    gens: List[int] = []
    reached = {1 % n}
    for u in range(1, n):
        if math.gcd(u, n) != 1 or u in reached:
            continue
        gens.append(u)
        frontier = list(reached)
        while frontier:
            following = []
            for x in frontier:
                for g in gens:
                    y = (x * g) % n
                    if y not in reached:
                        reached.add(y)
                        following.append(y)
            frontier = following
    return gens


def full_gl2(n: int, closure_cap: int | None = None) -> MatrixGroup:
    """GL₂(ℤ/nℤ) from the two elementary transvections and the diagonal units diag(u, 1)"""
    if n == 1:
        return MatrixGroup([], 1, closure_cap)
    generators = [[[1, 1], [0, 1]], [[1, 0], [1, 1]]]
    generators += [[[u, 0], [0, 1]] for u in _unit_generators(n)]
    return MatrixGroup(generators, n, closure_cap)


def split_cartan(n: int, closure_cap: int | None = None) -> MatrixGroup:
    """The diagonal subgroup of GL₂(ℤ/nℤ)"""
    units = _unit_generators(n)
    generators = [[[u, 0], [0, 1]] for u in units] + [[[1, 0], [0, u]] for u in units]
    return MatrixGroup(generators, n, closure_cap)


def _minimal_generators(members: Iterable[Key2], n: int) -> List[Key2]:
    generators: List[Key2] = []
    reached = {_identity_key(n)}
    for key in sorted(members):
        if key in reached:
            continue
        generators.append(key)
        reached = set(MatrixGroup([ResidueMatrix.from_key(g, n) for g in generators], n).element_keys())
    return generators


def in_split_cartan(matrix: ResidueMatrix, ell: int) -> bool:
    """[[x, 0], [0, y]] with x, y units"""
    a, b, c, d = matrix.entries
    return b == 0 and c == 0 and a % ell != 0 and d % ell != 0


def in_nonsplit_cartan(matrix: ResidueMatrix, ell: int, t: int, epsilon: int) -> bool:
    """[[x, εℓᵗy], [y, x]] with x² − εℓᵗy² ∉ ℓℤ"""
    n = matrix.n
    a, b, c, d = matrix.entries
    twist = epsilon * ell**t
    return d == a and b == (twist * c) % n and (a * a - twist * c * c) % ell != 0


def in_borel_abelian(matrix: ResidueMatrix, ell: int, t: int) -> bool:
    """[[x, y], [0, x + ℓᵗy]] with x a unit"""
    n = matrix.n
    a, b, c, d = matrix.entries
    return c == 0 and d == (a + ell**t * b) % n and a % ell != 0


def _check_ell_s(ell: int, s: int) -> int:
    if not is_prime(ell):
        raise NotPrimeError(f"{ell} is not prime")
    if s < 1:
        raise PreconditionError(f"s must be positive, got {s}")
    return ell**s


def nonsplit_cartan(ell: int, s: int, t: int, epsilon: int, closure_cap: int | None = None) -> MatrixGroup:
    """C_ns^{t,ε}(ℓˢ) generated from its members"""
    n = _check_ell_s(ell, s)
    members = [
        (x, (epsilon * ell**t * y) % n, y, x)
        for x in range(n)
        for y in range(n)
        if (x * x - epsilon * ell**t * y * y) % ell != 0
    ]
    return MatrixGroup(
        [ResidueMatrix.from_key(k, n) for k in _minimal_generators(members, n)], n, closure_cap
    )


def borel_abelian(ell: int, s: int, t: int, closure_cap: int | None = None) -> MatrixGroup:
    """B_ab^t(ℓˢ) generated from its members"""
    n = _check_ell_s(ell, s)
    members = [(x, y, 0, (x + ell**t * y) % n) for x in range(n) if x % ell for y in range(n)]
    return MatrixGroup(
        [ResidueMatrix.from_key(k, n) for k in _minimal_generators(members, n)], n, closure_cap
    )


class NormalFormKind(enum.Enum):
    SPLIT_CARTAN = "SplitCartan"
    NONSPLIT_CARTAN = "NonsplitCartan"
    BOREL_ABELIAN = "BorelAbelian"


def family_order(kind: NormalFormKind, ell: int, s: int, t: int | None = None) -> int:
    """Order of the named family in GL₂(ℤ/ℓˢℤ)

    Args:
        kind (NormalFormKind): Family
        ell (int): Odd prime
        s (int): Level exponent
        t (int | None, optional): Depth parameter of the non-split and Borel families. Defaults to None.

    Returns:
        int: Number of members
    """
    level = _check_ell_s(ell, s)
    units = level - level // ell
    if kind is NormalFormKind.SPLIT_CARTAN:
        return units * units
    if kind is NormalFormKind.BOREL_ABELIAN:
        return units * level
    if t == 0:
        return level * level - (level // ell) ** 2
    return units * level


def family_index(kind: NormalFormKind, ell: int, s: int, t: int | None = None) -> int:
    return gl2_order(ell**s) // family_order(kind, ell, s, t)


def subgroup_index(group: MatrixGroup) -> int:
    """[GL₂(ℤ/nℤ) : H]

    Raises:
        CapExceededError: The closure of H is too large
        TheoremViolation: The ambient order formula disagrees with enumeration
    """
    n = group.n
    ambient = gl2_order(n)
    if n <= 9 and _count_gl2_exhaustive(n) != ambient:
        raise TheoremViolation(f"|GL2(Z/{n})| formula disagrees with enumeration", {"n": n})
    order = group.order()
    if ambient % order:
        raise TheoremViolation(f"subgroup order {order} does not divide {ambient}", {"n": n})
    return ambient // order


# commutants and the μ-filtration


def _check_prime_power_matrix(matrix: ResidueMatrix, ell: int, s: int) -> int:
    n = _check_ell_s(ell, s)
    if matrix.n != n:
        raise ModulusError(f"matrix has modulus {matrix.n}, expected {ell}^{s} = {n}")
    return n


def mu(matrix: ResidueMatrix, ell: int, s: int) -> int:
    """Largest μ with the matrix scalar mod ℓ^μ, as min(v(α−δ), v(β), v(γ))

    Raises:
        ScalarMatrixError: The matrix is scalar mod ℓˢ
    """
    n = _check_prime_power_matrix(matrix, ell, s)
    a, b, c, d = matrix.entries
    values = [valuation((a - d) % n, ell), valuation(b, ell), valuation(c, ell)]
    finite = [v for v in values if v is not INFINITY]
    if not finite:
        raise ScalarMatrixError(f"{matrix!r} is scalar mod {n}")
    return min(finite)


def lifted_generator(matrix: ResidueMatrix, ell: int, s: int) -> ResidueMatrix:
    """A′ with ℓ^μ·A′ − A ∈ ℤI, namely [[(α−δ)/ℓ^μ, β/ℓ^μ], [γ/ℓ^μ, 0]]"""
    n = _check_prime_power_matrix(matrix, ell, s)
    depth = ell ** mu(matrix, ell, s)
    a, b, c, d = matrix.entries
    return ResidueMatrix([[((a - d) % n) // depth, b // depth], [c // depth, 0]], n)


def commuting_condition_matrix(matrix: ResidueMatrix) -> ModMatrix:
    """M commutes with A iff (a − d, b, c) lies in the kernel of this 3x3 matrix"""
    a, b, c, d = matrix.entries
    return ModMatrix([[b, d - a, 0], [c, 0, d - a], [0, c, -b]], matrix.modulus)


def commutant_generators(matrix: ResidueMatrix, ell: int, s: int) -> List[ResidueMatrix]:
    """I, the lift A′ and the depth part ℓ^{s−μ}·M₂; all of M₂ for scalar input"""
    n = _check_prime_power_matrix(matrix, ell, s)
    if matrix.is_scalar():
        return m2_basis(n)

    depth = ell ** (s - mu(matrix, ell, s))
    generators = [ResidueMatrix.scalar(1, n), lifted_generator(matrix, ell, s)]
    if depth % n:
        generators += [e * depth for e in m2_basis(n)]
    return generators


@dataclass(frozen=True)
class CommutantResult:
    """Generators and shape of {M : AM = MA}"""

    generators: Tuple[ResidueMatrix, ...]
    shape: AbelianShape
    mu: int | None = None
    lifted: ResidueMatrix | None = None


def commutant(matrix: ResidueMatrix, ell: int, s: int) -> CommutantResult:
    """Commutant of a matrix over ℤ/ℓˢℤ

    Args:
        matrix (ResidueMatrix): A over modulus ℓˢ
        ell (int): Prime
        s (int): Exponent

    Raises:
        TheoremViolation: The structured generators and the kernel description disagree

    Returns:
        CommutantResult: Generators, shape on the 4-dimensional coordinates, μ and A′
    """
    n = _check_prime_power_matrix(matrix, ell, s)
    generators = commutant_generators(matrix, ell, s)
    shape = subgroup_shape([g.vector() for g in generators], n, 4)

    if matrix.is_scalar():
        return CommutantResult(tuple(generators), shape)

    solutions = kernel(commuting_condition_matrix(matrix)).rows()
    from_kernel = [(1, 0, 0, 1)] + [(x, b, c, 0) for x, b, c in solutions]
    if span_order(from_kernel, n, 4) != shape.order:
        raise TheoremViolation(
            "structured commutant and kernel description differ",
            {"matrix": list(matrix.entries), "modulus": n},
        )

    return CommutantResult(
        tuple(generators), shape, mu(matrix, ell, s), lifted_generator(matrix, ell, s)
    )


def simultaneous_commutant(
    matrices: Sequence[ResidueMatrix], modulus: "int | Modulus"
) -> List[ResidueMatrix]:
    """Generators of {F : AF = FA for every A}, from the kernel of the stacked conditions"""
    modulus = as_modulus(modulus)
    if not matrices:
        return m2_basis(modulus)

    rows: List[Tuple[int, ...]] = []
    for a in matrices:
        rows += m2_operator(lambda f, a=a: a @ f - f @ a, modulus).rows()
    return [ResidueMatrix.from_key(v, modulus) for v in kernel(ModMatrix(rows, modulus)).rows()]


def abelian_ring_generator(
    group: MatrixGroup, ell: int, s: int
) -> Tuple[int, ResidueMatrix, ResidueMatrix] | None:
    """The generator of least μ together with μ and its lift A′; None for scalar groups

    μ of a product of commuting matrices is at least the smaller μ, so generators suffice.
    """
    best = None
    for g in group.generators:
        if g.is_scalar():
            continue
        value = mu(g, ell, s)
        if best is None or value < best[0]:
            best = (value, g)
    if best is None:
        return None
    return best[0], best[1], lifted_generator(best[1], ell, s)


# normal forms of abelian subgroups, ℓ odd


@dataclass(frozen=True)
class NormalFormTag:
    """Family containing g·(H mod ℓ^{s'})·g⁻¹ and the conjugator g"""

    kind: NormalFormKind
    ell: int
    level: int
    conjugator: ResidueMatrix
    t: int | None = None
    epsilon: int | None = None

    def __post_init__(self):
        s_half = valuation(self.level, self.ell)
        if self.kind is NormalFormKind.NONSPLIT_CARTAN:
            if not 0 <= self.t <= s_half - 1:
                raise ValueError(f"non-split depth {self.t} outside [0, {s_half - 1}]")
            if is_quad_residue(self.epsilon * self.ell**self.t % self.level, self.level):
                raise ValueError(f"{self.epsilon}*{self.ell}^{self.t} is a square mod {self.level}")
        if self.kind is NormalFormKind.BOREL_ABELIAN and not 1 <= self.t <= s_half:
            raise ValueError(f"Borel depth {self.t} outside [1, {s_half}]")
        if not self.conjugator.is_invertible():
            raise ValueError("conjugator is not invertible")

    def contains(self, matrix: ResidueMatrix) -> bool:
        """Membership of a matrix over ℤ/ℓ^{s'}ℤ in the tagged family"""
        if self.kind is NormalFormKind.SPLIT_CARTAN:
            return in_split_cartan(matrix, self.ell)
        if self.kind is NormalFormKind.NONSPLIT_CARTAN:
            return in_nonsplit_cartan(matrix, self.ell, self.t, self.epsilon)
        return in_borel_abelian(matrix, self.ell, self.t)

    def conjugates_into(self, matrix: ResidueMatrix) -> bool:
        g = self.conjugator
        return self.contains(g @ matrix.reduce(self.level) @ g.inverse())

    @property
    def label(self) -> str:
        if self.kind is NormalFormKind.SPLIT_CARTAN:
            return "SplitCartan"
        if self.kind is NormalFormKind.NONSPLIT_CARTAN:
            return f"NonsplitCartan(t={self.t}, eps={self.epsilon})"
        return f"BorelAbelian(t={self.t})"

    def __str__(self):
        return f"{self.label} mod {self.level}"


def _least_nonresidue(ell: int) -> int:
    return next(e for e in range(2, ell) if legendre_symbol(e, ell) == -1)


def _cyclic_basis(matrix: ResidueMatrix, ell: int) -> ResidueMatrix:
    """[v | Av] for a vector v that is cyclic for A mod ℓ"""
    n = matrix.n
    a, b, c, d = matrix.entries
    if c % ell:
        v = (1, 0)
    elif b % ell:
        v = (0, 1)
    else:
        v = (1, 1)
    av = ((a * v[0] + b * v[1]) % n, (c * v[0] + d * v[1]) % n)
    return ResidueMatrix([[v[0], av[0]], [v[1], av[1]]], n)


def _eigenvector(matrix: ResidueMatrix, eigenvalue: int, ell: int) -> Tuple[int, int]:
    a, b, c, d = matrix.entries
    candidate = (b, eigenvalue - a)
    if candidate[0] % ell or candidate[1] % ell:
        return candidate
    return (eigenvalue - d, c)


def _normal_form_of_cyclic(matrix: ResidueMatrix, ell: int, s_half: int) -> NormalFormTag:
    """Tag and conjugator for a matrix over ℤ/ℓ^{s'}ℤ that is non-scalar mod ℓ"""
    level = ell**s_half
    a, b, c, d = matrix.entries
    half = pow(2, -1, level)
    x = ((a + d) * half) % level
    disc = (x * x - mat2_det(matrix.entries, level)) % level

    if disc == 0:
        kind, t, epsilon = NormalFormKind.BOREL_ABELIAN, s_half, None
        x1, y = x, 1
    else:
        w = valuation(disc, ell)
        u = disc // ell**w
        residue = legendre_symbol(u % ell, ell) == 1
        tail = ell ** (s_half - w)
        if w == 0 and residue:
            kind, t, epsilon = NormalFormKind.SPLIT_CARTAN, None, None
        elif w % 2 == 0 and residue:
            kind, t, epsilon = NormalFormKind.BOREL_ABELIAN, w // 2, None
            root = int(sqrt_mod(u % tail, tail))
            x1 = (x - ell**t * root) % level
            y = (2 * root) % level
        else:
            kind, t = NormalFormKind.NONSPLIT_CARTAN, w
            epsilon = 1 if residue else _least_nonresidue(ell)
            y = int(sqrt_mod((u * pow(epsilon, -1, tail)) % tail, tail))

    if kind is NormalFormKind.SPLIT_CARTAN:
        r = int(sqrt_mod(disc, level))
        eigenvalues = ((x + r) % level, (x - r) % level)
        v1, v2 = (_eigenvector(matrix, lam, ell) for lam in eigenvalues)
        conjugator = ResidueMatrix([[v1[0], v2[0]], [v1[1], v2[1]]], level).inverse()
        target = ResidueMatrix([[eigenvalues[0], 0], [0, eigenvalues[1]]], level)
    elif kind is NormalFormKind.BOREL_ABELIAN:
        similarity = ResidueMatrix([[0, y], [1, x1 + ell**t * y]], level)
        conjugator = similarity @ _cyclic_basis(matrix, ell).inverse()
        target = ResidueMatrix([[x1, y], [0, x1 + ell**t * y]], level)
    else:
        # [[dy − cx, εℓᵗcy − dx], [c, d]] with c = 0, d = 1
        similarity = ResidueMatrix([[y, -x], [0, 1]], level)
        conjugator = (_cyclic_basis(matrix, ell) @ similarity).inverse()
        target = ResidueMatrix([[x, epsilon * ell**t * y], [y, x]], level)

    if conjugator @ matrix @ conjugator.inverse() != target:
        raise TheoremViolation(
            "conjugator does not reach the normal form",
            {"matrix": list(matrix.entries), "level": level, "kind": kind.value},
        )

    return NormalFormTag(kind, ell, level, conjugator, t, epsilon)


def classify_abelian(group: MatrixGroup, ell: int, s: int) -> NormalFormTag:
    """Normal form of an abelian subgroup of GL₂(ℤ/ℓˢℤ) modulo ℓ^{s'}, s' = ⌈s/2⌉

    Args:
        group (MatrixGroup): Abelian H over modulus ℓˢ
        ell (int): Odd prime
        s (int): Exponent

    Raises:
        PreconditionError: ℓ = 2
        NonAbelianError: H is not abelian
        TheoremViolation: The conjugated image leaves the tagged family

    Returns:
        NormalFormTag: Family, parameters and conjugator over ℤ/ℓ^{s'}ℤ
    """
    if ell == 2:
        raise PreconditionError("abelian normal forms are only available for odd primes")
    n = _check_ell_s(ell, s)
    if group.n != n:
        raise ModulusError(f"group has modulus {group.n}, expected {n}")
    if not group.is_abelian():
        raise NonAbelianError(f"{group!r} is not abelian")

    s_half = (s + 1) // 2
    level = ell**s_half
    best = abelian_ring_generator(group, ell, s)

    if best is None or best[0] >= s_half:
        tag = NormalFormTag(NormalFormKind.SPLIT_CARTAN, ell, level, ResidueMatrix.scalar(1, level))
    else:
        tag = _normal_form_of_cyclic(best[2].reduce(level), ell, s_half)

    for g in group.generators:
        if not tag.conjugates_into(g):
            raise TheoremViolation(
                f"conjugated generator leaves {tag.label}",
                {"generator": list(g.entries), "level": level, "conjugator": list(tag.conjugator.entries)},
            )

    logger.debug("classified %r as %s", group, tag)
    return tag


# exhaustive abelian subgroup enumeration


class _AmbientTable:
    """GL₂(ℤ/nℤ) indexed by sorted entry tuple, with its multiplication table"""

    def __init__(self, n: int):
        self.n = n
        keys = [k for k in itertools.product(range(n), repeat=4) if math.gcd(mat2_det(k, n), n) == 1]
        self.keys = keys
        size = len(keys)
        elements = np.array(keys, dtype=np.int64)
        codes = ((elements[:, 0] * n + elements[:, 1]) * n + elements[:, 2]) * n + elements[:, 3]
        index = np.full(n**4, -1, dtype=np.int64)
        index[codes] = np.arange(size)

        table = np.empty((size, size), dtype=np.int32)
        for start in range(0, size, 256):
            x = elements[start : start + 256]
            a = (x[:, 0, None] * elements[None, :, 0] + x[:, 1, None] * elements[None, :, 2]) % n
            b = (x[:, 0, None] * elements[None, :, 1] + x[:, 1, None] * elements[None, :, 3]) % n
            c = (x[:, 2, None] * elements[None, :, 0] + x[:, 3, None] * elements[None, :, 2]) % n
            d = (x[:, 2, None] * elements[None, :, 1] + x[:, 3, None] * elements[None, :, 3]) % n
            table[start : start + 256] = index[((a * n + b) * n + c) * n + d]
        self.table = table

        self.identity = int(index[(1 * n * n * n) + 1])
        self.inverse = np.argmax(self.table == self.identity, axis=1)
        self.trace = (elements[:, 0] + elements[:, 3]) % n
        self.det = (elements[:, 0] * elements[:, 3] - elements[:, 1] * elements[:, 2]) % n

        orders = np.zeros(size, dtype=np.int64)
        power = np.arange(size)
        step = 1
        while not orders.all():
            orders[(power == self.identity) & (orders == 0)] = step
            power = self.table[power, np.arange(size)]
            step += 1
        self.orders = orders

    def __len__(self):
        return len(self.keys)

    def mask(self, subset: np.ndarray) -> np.ndarray:
        result = np.zeros(len(self), dtype=bool)
        result[subset] = True
        return result

    def centralizer_mask(self, generators: Sequence[int]) -> np.ndarray:
        result = np.ones(len(self), dtype=bool)
        for h in generators:
            result &= self.table[:, h] == self.table[h, :]
        return result

    def join(self, subgroup: np.ndarray, g: int) -> Tuple[np.ndarray, List[np.ndarray]]:
        """⟨H, g⟩ for g centralizing H, and the cosets Hgᵏ that generate it over H"""
        inside = self.mask(subgroup)
        cosets = [subgroup]
        current = subgroup
        while True:
            current = self.table[current, g]
            if inside[current[0]]:
                break
            cosets.append(current)
        m = len(cosets)
        generating = [cosets[k] for k in range(1, m) if math.gcd(k, m) == 1]
        return np.sort(np.concatenate(cosets)).astype(np.int64), generating

    def conjugate(self, elements: np.ndarray, by: np.ndarray) -> np.ndarray:
        """g·x·g⁻¹ for every g in by (rows) and x in elements (columns)"""
        conjugated = self.table[self.table[by[:, None], elements[None, :]], self.inverse[by][:, None]]
        return conjugated.astype(np.int64)

    def canonical_conjugate(self, subgroup: np.ndarray) -> Tuple[bytes, int]:
        everything = np.arange(len(self))
        rows = np.sort(self.conjugate(subgroup, everything), axis=1)
        best = int(np.lexsort(rows.T[::-1])[0])
        return rows[best].tobytes(), best

    def fingerprint(self, subgroup: np.ndarray) -> bytes:
        profile = np.stack([self.orders[subgroup], self.trace[subgroup], self.det[subgroup]], axis=1)
        rows, counts = np.unique(profile, axis=0, return_counts=True)
        return np.concatenate([[len(subgroup)], rows.reshape(-1), counts]).astype(np.int64).tobytes()

    def conjugator_between(self, generators: Sequence[int], target: np.ndarray) -> int | None:
        """Some g with g·H·g⁻¹ ⊆ K, given generators of H; None if there is none"""
        everything = np.arange(len(self))
        inside = self.mask(target)
        feasible = np.ones(len(self), dtype=bool)
        for h in generators:
            images = self.table[self.table[everything, h], self.inverse]
            feasible &= inside[images]
        hits = np.flatnonzero(feasible)
        return int(hits[0]) if len(hits) else None


@dataclass(frozen=True)
class AbelianClass:
    """One conjugacy class of abelian subgroups"""

    order: int
    generators: Tuple[ResidueMatrix, ...]
    elements: Tuple[Key2, ...]
    tag: NormalFormTag
    members_found: int = 1


@dataclass(frozen=True)
class EnumerationResult:
    ell: int
    s: int
    classes: Tuple[AbelianClass, ...]
    bound: int
    histogram: Dict[str, int] = field(default_factory=dict)

    @property
    def max_order(self) -> int:
        return max(c.order for c in self.classes)

    @property
    def count(self) -> int:
        return len(self.classes)


@dataclass
class _Candidate:
    elements: np.ndarray
    generators: List[int]


def _extensions(table: _AmbientTable, rep: _Candidate) -> List[_Candidate]:
    inside = table.mask(rep.elements)
    centralizing = table.centralizer_mask(rep.generators) & ~inside
    done = np.zeros(len(table), dtype=bool)
    found = []
    for g in np.flatnonzero(centralizing):
        if done[g]:
            continue
        joined, generating = table.join(rep.elements, int(g))
        for coset in generating:
            done[coset] = True
        found.append(_Candidate(joined, rep.generators + [int(g)]))
    return found


def enumerate_abelian(ell: int, s: int, threads: int = 1) -> EnumerationResult:
    """Every abelian subgroup of GL₂(ℤ/ℓˢℤ) up to conjugacy

    Subgroups are grown from the trivial group by joining centralizing elements;
    each new subgroup is matched against the known classes, by exhaustive conjugation
    on small ambient groups and by fingerprint plus explicit conjugator search otherwise.

    Args:
        ell (int): Odd prime
        s (int): Exponent
        threads (int, optional): Worker threads for the extension step. Defaults to 1.

    Raises:
        PreconditionError: ℓ = 2
        CapExceededError: ℓˢ is outside the supported moduli
        TheoremViolation: Some abelian subgroup has order above ℓ^{3s}

    Returns:
        EnumerationResult: Classes in canonical order, with normal-form tags
    """
    if ell == 2:
        raise PreconditionError("abelian enumeration is only available for odd primes")
    n = _check_ell_s(ell, s)
    if n not in config.ENUMERATION_MODULI:
        raise CapExceededError(
            f"exhaustive enumeration supports moduli {config.ENUMERATION_MODULI}, got {n}",
            partial_count=0,
        )

    table = _AmbientTable(n)
    exhaustive = len(table) <= config.EXHAUSTIVE_CONJUGATION_LIMIT
    logger.info("enumerating abelian subgroups of GL2(Z/%d), %d elements", n, len(table))

    graph = nx.Graph()
    seen: Dict[bytes, int] = {}
    representatives: List[_Candidate] = []
    by_canonical: Dict[bytes, int] = {}
    by_fingerprint: Dict[bytes, List[int]] = {}

    def classify(candidate: _Candidate) -> bool:
        node = len(seen)
        seen[candidate.elements.tobytes()] = node
        graph.add_node(node)
        if exhaustive:
            canonical, g = table.canonical_conjugate(candidate.elements)
            if canonical in by_canonical:
                graph.add_edge(node, by_canonical[canonical])
                return False
            by_canonical[canonical] = node
            moved = table.conjugate(np.array(candidate.generators, dtype=np.int64), np.array([g]))[0]
            candidate = _Candidate(np.frombuffer(canonical, dtype=np.int64), [int(x) for x in moved])
        else:
            bucket = by_fingerprint.setdefault(table.fingerprint(candidate.elements), [])
            for other in bucket:
                target = representatives[graph.nodes[other]["rep"]].elements
                if table.conjugator_between(candidate.generators, target) is not None:
                    graph.add_edge(node, other)
                    return False
            bucket.append(node)
        graph.nodes[node]["rep"] = len(representatives)
        representatives.append(candidate)
        return True

    trivial = _Candidate(np.array([table.identity], dtype=np.int64), [])
    classify(trivial)
    frontier = [representatives[0]]
    while frontier:
        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            batches = list(pool.map(lambda rep: _extensions(table, rep), frontier))
        frontier = []
        for batch in batches:
            for candidate in batch:
                if candidate.elements.tobytes() in seen:
                    continue
                if classify(candidate):
                    frontier.append(representatives[-1])
        logger.debug("%d classes so far, %d new", len(representatives), len(frontier))

    classes = []
    for component in nx.connected_components(graph):
        rep_node = next(v for v in component if "rep" in graph.nodes[v])
        rep = representatives[graph.nodes[rep_node]["rep"]]
        generators = tuple(ResidueMatrix.from_key(table.keys[g], n) for g in rep.generators)
        tag = classify_abelian(MatrixGroup(generators, n), ell, s)
        elements = tuple(table.keys[i] for i in rep.elements)
        classes.append(AbelianClass(len(elements), generators, elements, tag, len(component)))
    classes.sort(key=lambda c: (c.order, c.elements))

    bound = ell ** (3 * s)
    result = EnumerationResult(
        ell, s, tuple(classes), bound, dict(sorted(Counter(c.tag.kind.value for c in classes).items()))
    )
    if result.max_order > bound:
        raise TheoremViolation(
            f"abelian subgroup of order {result.max_order} exceeds {ell}^{3 * s}",
            {"ell": ell, "s": s, "max_order": result.max_order},
        )

    logger.info("%d classes, maximal order %d", result.count, result.max_order)
    return result


# finite subgroups of GL₂(ℝ) with rational trace and determinant


@dataclass(frozen=True)
class QuadNumber:
    """a + b√d with rational a, b"""

    a: Fraction
    b: Fraction
    d: int

    def __post_init__(self):
        object.__setattr__(self, "a", Fraction(self.a))
        object.__setattr__(self, "b", Fraction(self.b))

    def _check(self, other: "QuadNumber"):
        if self.d != other.d:
            raise ValueError(f"cannot combine √{self.d} and √{other.d}")

    def __add__(self, other: "QuadNumber") -> "QuadNumber":
        self._check(other)
        return QuadNumber(self.a + other.a, self.b + other.b, self.d)

    def __sub__(self, other: "QuadNumber") -> "QuadNumber":
        self._check(other)
        return QuadNumber(self.a - other.a, self.b - other.b, self.d)

    def __mul__(self, other: "QuadNumber") -> "QuadNumber":
        self._check(other)
        return QuadNumber(
            self.a * other.a + self.d * self.b * other.b, self.a * other.b + self.b * other.a, self.d
        )

    def __neg__(self) -> "QuadNumber":
        return QuadNumber(-self.a, -self.b, self.d)

    def is_rational(self) -> bool:
        return self.b == 0

    def is_zero(self) -> bool:
        return self.a == 0 and self.b == 0

    def __str__(self):
        if self.b == 0:
            return str(self.a)
        return f"{self.a}+{self.b}*sqrt({self.d})"


class RealQuadMatrix:
    """A 2x2 matrix over ℚ(√d), d a positive non-square"""

    def __init__(self, entries: Sequence[Sequence[int | Tuple[int, int]]], d: int):
        """
        Args:
            entries (Sequence[Sequence[int | Tuple[int, int]]]): Rows of pairs (a, b) meaning a + b√d; plain integers mean (a, 0)
            d (int): Positive non-square integer

        Raises:
            ValueError: d is not a positive non-square or entries are malformed
        """
        if d < 2 or math.isqrt(d) ** 2 == d:
            raise ValueError(f"d must be a positive non-square, got {d}")
        self.d = d
        flat = []
        for row in entries:
            for value in row:
                if isinstance(value, QuadNumber):
                    flat.append(value)
                elif isinstance(value, (tuple, list)):
                    a, b = value
                    flat.append(QuadNumber(a, b, d))
                else:
                    flat.append(QuadNumber(value, 0, d))
        if len(flat) != 4 or len(entries) != 2:
            raise ValueError("a real quadratic matrix is 2x2")
        self.entries: Tuple[QuadNumber, ...] = tuple(flat)

    def __matmul__(self, other: "RealQuadMatrix") -> "RealQuadMatrix":
        a, b, c, d = self.entries
        e, f, g, h = other.entries
        return RealQuadMatrix([[a * e + b * g, a * f + b * h], [c * e + d * g, c * f + d * h]], self.d)

    def trace(self) -> QuadNumber:
        return self.entries[0] + self.entries[3]

    def det(self) -> QuadNumber:
        a, b, c, d = self.entries
        return a * d - b * c

    def key(self) -> Tuple[Tuple[Fraction, Fraction], ...]:
        return tuple((x.a, x.b) for x in self.entries)

    def is_identity(self) -> bool:
        return self.key() == ((1, 0), (0, 0), (0, 0), (1, 0))

    def is_minus_identity(self) -> bool:
        return self.key() == ((-1, 0), (0, 0), (0, 0), (-1, 0))

    def __eq__(self, other):
        return isinstance(other, RealQuadMatrix) and self.d == other.d and self.key() == other.key()

    def __hash__(self):
        return hash((self.d, self.key()))

    def __repr__(self):
        return f"RealQuadMatrix([{', '.join(str(x) for x in self.entries)}], d={self.d})"


# (trace, det) of the characteristic polynomials allowed for finite-order elements
CHARACTERISTIC_POLYNOMIALS = {
    (2, 1): "(T - 1)^2",
    (-2, 1): "(T + 1)^2",
    (0, -1): "T^2 - 1",
    (0, 1): "T^2 + 1",
    (-1, 1): "T^2 + T + 1",
    (1, 1): "T^2 - T + 1",
}

FINITE_REAL_CAP = 12


@dataclass(frozen=True)
class FiniteGroupType:
    family: str
    order: int
    contains_minus_identity: bool

    @property
    def label(self) -> str:
        return f"{self.family.capitalize()} {self.order}"

    def __str__(self):
        return self.label


def _element_order(x: RealQuadMatrix) -> int:
    power = x
    for k in range(1, 7):
        if power.is_identity():
            return k
        power = power @ x
    raise CapExceededError(f"{x!r} has order above 6 or infinite order", partial_count=6)


def classify_finite_real(generators: Sequence[RealQuadMatrix]) -> FiniteGroupType:
    """Type of a finite subgroup of GL₂(ℝ) whose elements have rational trace and determinant

    Args:
        generators (Sequence[RealQuadMatrix]): Invertible generators over one ℚ(√d)

    Raises:
        IrrationalTraceError: Some element has a trace or determinant outside ℚ
        CapExceededError: The group is infinite or has an element of order above 6
        TheoremViolation: The group falls outside the cyclic and dihedral types

    Returns:
        FiniteGroupType: Cyclic k (k ∈ {1, 2, 3, 4, 6}) or Dihedral 2k (k ∈ {2, 3, 4, 6})
    """
    generators = list(generators)
    if generators:
        d = generators[0].d
        if any(g.d != d for g in generators):
            raise ValueError("generators live over different quadratic fields")
    for g in generators:
        if g.det().is_zero():
            raise NotInvertibleError(f"{g!r} is singular")
        trace, det = g.trace(), g.det()
        if not (trace.is_rational() and det.is_rational()):
            raise IrrationalTraceError(f"generator {g!r} has trace {trace} and determinant {det}")

    identity = None
    if generators:
        identity = RealQuadMatrix([[1, 0], [0, 1]], generators[0].d)
    elements = {identity} if identity is not None else set()
    frontier = list(elements)
    while frontier:
        following = []
        for x in frontier:
            for g in generators:
                y = x @ g
                if y not in elements:
                    elements.add(y)
                    following.append(y)
                    if len(elements) > FINITE_REAL_CAP:
                        raise CapExceededError(
                            "group is infinite or larger than 12", partial_count=len(elements)
                        )
        frontier = following

    if not elements:
        return FiniteGroupType("cyclic", 1, False)

    orders = {}
    for x in elements:
        trace, det = x.trace(), x.det()
        if not (trace.is_rational() and det.is_rational()):
            raise IrrationalTraceError(f"{x!r} has trace {trace} and determinant {det}")
        if (trace.a, det.a) not in CHARACTERISTIC_POLYNOMIALS:
            raise CapExceededError(f"{x!r} has infinite order", partial_count=len(elements))
        orders[x] = _element_order(x)

    size = len(elements)
    minus_identity = any(x.is_minus_identity() for x in elements)
    if max(orders.values()) == size:
        if size not in (1, 2, 3, 4, 6):
            raise TheoremViolation(f"cyclic group of order {size}", {"order": size})
        return FiniteGroupType("cyclic", size, minus_identity)

    half = size // 2
    rotations = [x for x, k in orders.items() if k == half]
    if size not in (4, 6, 8, 12) or not rotations:
        raise TheoremViolation(f"group of order {size} is neither cyclic nor dihedral", {"order": size})
    r = rotations[0]
    powers = {r}
    power = r
    while not power.is_identity():
        power = power @ r
        powers.add(power)
    if any(orders[x] != 2 for x in elements if x not in powers):
        raise TheoremViolation(f"group of order {size} is not dihedral", {"order": size})
    if size in (4, 8, 12) and not minus_identity:
        raise TheoremViolation(f"dihedral group of order {size} without -I", {"order": size})

    return FiniteGroupType("dihedral", size, minus_identity)
