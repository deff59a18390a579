"""Integral lattices given by Gram matrices: Néron-Severi of products, the Kummer lattice and Λ_prod"""

import itertools
import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

from sympy import Matrix, Poly, symbols

from bsurf.errors import PreconditionError
from bsurf.modring import ModMatrix, howell_basis

logger = logging.getLogger(__name__)

KUMMER_RANK = 16
KUMMER_DISCRIMINANT = 2**6
PRODUCT_NS_RANK = 3


class LatticeError(PreconditionError):
    pass


@dataclass(frozen=True)
class GramLattice:
    gram: Tuple[Tuple[int, ...], ...]
    label: str = ""

    def __post_init__(self):
        gram = tuple(tuple(int(x) for x in row) for row in self.gram)
        object.__setattr__(self, "gram", gram)
        size = len(gram)
        if size < 1:
            raise LatticeError("a lattice needs positive rank")
        if any(len(row) != size for row in gram):
            raise LatticeError(f"Gram matrix of {self.label or 'lattice'} is not square")
        if any(gram[i][j] != gram[j][i] for i in range(size) for j in range(i)):
            raise LatticeError(f"Gram matrix of {self.label or 'lattice'} is not symmetric")

    @property
    def rank(self) -> int:
        return len(self.gram)

    def matrix(self) -> Matrix:
        return Matrix(self.gram)

    def is_even(self) -> bool:
        return all(self.gram[i][i] % 2 == 0 for i in range(self.rank))

    def pairing(self, i: int, j: int) -> int:
        return self.gram[i][j]


def gram_determinant(lattice: GramLattice) -> int:
    """Exact determinant by fraction-free elimination"""
    return int(lattice.matrix().det(method="bareiss"))


def signature(lattice: GramLattice) -> Tuple[int, int, int]:
    """(positive, negative, zero) eigenvalue counts

    The characteristic polynomial of a symmetric matrix has only real roots, so
    Descartes' rule of signs counts its positive and negative roots exactly.

    Returns:
        Tuple[int, int, int]: Counts of positive, negative and zero eigenvalues
    """
    x = symbols("x")
    poly = Poly(lattice.matrix().charpoly(x).as_expr(), x)
    coefficients = [int(c) for c in poly.all_coeffs()]

    zero = 0
    while coefficients and coefficients[-1] == 0:
        coefficients.pop()
        zero += 1

    def sign_changes(cs: List[int]) -> int:
        signs = [c > 0 for c in cs if c]
        return sum(1 for a, b in zip(signs, signs[1:]) if a != b)

    degree = len(coefficients) - 1
    flipped = [c * (-1) ** (degree - k) for k, c in enumerate(coefficients)]
    positive, negative = sign_changes(coefficients), sign_changes(flipped)
    if positive + negative + zero != lattice.rank:
        raise ArithmeticError(f"signature count {positive}+{negative}+{zero} != rank {lattice.rank}")
    return positive, negative, zero


def hyperbolic_plane() -> GramLattice:
    return GramLattice(((0, 1), (1, 0)), "U")


def orthogonal_sum(first: GramLattice, second: GramLattice, label: str | None = None) -> GramLattice:
    size = first.rank + second.rank
    gram = [[0] * size for _ in range(size)]
    for i, j in itertools.product(range(first.rank), repeat=2):
        gram[i][j] = first.gram[i][j]
    for i, j in itertools.product(range(second.rank), repeat=2):
        gram[first.rank + i][first.rank + j] = second.gram[i][j]
    return GramLattice(tuple(map(tuple, gram)), label or f"{first.label} + {second.label}")


def build_family_gram(d: int) -> GramLattice:
    """NS of a torsor under E × E' with a cyclic isogeny of degree d: ((0,1,1),(1,0,d),(1,d,0))

    Raises:
        LatticeError: d < 1, or the signature is not (1, 2)
    """
    if d < 1:
        raise LatticeError(f"isogeny degree must be positive, got {d}")
    lattice = GramLattice(((0, 1, 1), (1, 0, d), (1, d, 0)), f"NS(E x E'), d={d}")
    if signature(lattice) != (1, 2, 0):
        raise LatticeError(f"family Gram for d={d} has signature {signature(lattice)}")
    return lattice


def _reed_muller_code() -> List[List[int]]:
    """Generators of the first order Reed-Muller code of length 16: constants and coordinate functionals"""
    points = list(itertools.product((0, 1), repeat=4))
    rows = [[1] * len(points)]
    rows += [[p[i] for p in points] for i in range(4)]
    return rows


def kummer_basis() -> List[List[int]]:
    """Basis of Λ_K in coordinates doubled with respect to the 16 exceptional classes

    A vector a ∈ ℤ¹⁶ stands for Σ (a_v / 2)·e_v; the lattice is {a : a mod 2 ∈ code}.
    The systematic codewords together with 2·e_j for the non-pivot positions j form a basis.
    """
    code = howell_basis(ModMatrix(_reed_muller_code(), 2)).rows()
    pivots = [next(j for j, x in enumerate(row) if x) for row in code]
    basis = [list(row) for row in code]
    basis += [[2 * int(i == j) for i in range(KUMMER_RANK)] for j in range(KUMMER_RANK) if j not in pivots]
    return basis


def build_kummer_lattice() -> GramLattice:
    """Even negative definite rank 16 lattice of discriminant 2⁶ containing 16 orthogonal (−2)-classes

    Raises:
        LatticeError: The glued lattice fails a self-check
    """
    basis = kummer_basis()
    b = Matrix(basis)
    # e_v·e_w = −2δ and coordinates are doubled, so the pairing is −(a·b)/2
    products = b * b.T
    if any(x % 2 for x in products):
        raise LatticeError("glue code is not self-orthogonal")
    lattice = GramLattice(tuple(tuple(-int(x) // 2 for x in row) for row in products.tolist()), "Lambda_K")

    if not lattice.is_even():
        raise LatticeError("Kummer lattice is not even")
    if signature(lattice) != (0, KUMMER_RANK, 0):
        raise LatticeError("Kummer lattice is not negative definite")
    if gram_determinant(lattice) != KUMMER_DISCRIMINANT:
        raise LatticeError(f"Kummer lattice has determinant {gram_determinant(lattice)}")

    inverse = b.T.inv()
    for v in range(KUMMER_RANK):
        doubled = Matrix([2 * int(i == v) for i in range(KUMMER_RANK)])
        if any(not x.is_integer for x in inverse * doubled):
            raise LatticeError(f"exceptional class e_{v} is not in the lattice")

    return lattice


def build_lambda_prod() -> GramLattice:
    """Λ_K ⊕ U"""
    return orthogonal_sum(build_kummer_lattice(), hyperbolic_plane(), "Lambda_prod")


@dataclass(frozen=True)
class LatticeReport:
    label: str
    rank: int
    determinant: int
    even: bool
    signature: Tuple[int, int]
    degenerate: bool

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "rank": self.rank,
            "determinant": self.determinant,
            "even": self.even,
            "signature": list(self.signature),
            "degenerate": self.degenerate,
        }


def lattice_report(lattice: GramLattice) -> LatticeReport:
    positive, negative, zero = signature(lattice)
    determinant = gram_determinant(lattice)
    if determinant == 0:
        logger.warning("Gram matrix of %s is degenerate", lattice.label or "lattice")
    return LatticeReport(
        lattice.label, lattice.rank, determinant, lattice.is_even(), (positive, negative), determinant == 0
    )


def kummer_rank_bookkeeping() -> Tuple[int, int, int]:
    """Ranks of Λ_K, of NS(E × E') and of their extension Λ_d"""
    return KUMMER_RANK, PRODUCT_NS_RANK, KUMMER_RANK + PRODUCT_NS_RANK


def isogeny_degree_from_disc(lattice: GramLattice) -> int:
    """Degree of the cyclic isogeny between the factors of a product surface, half its discriminant

    Raises:
        LatticeError: Not a rank 3 lattice with positive even determinant
    """
    if lattice.rank != PRODUCT_NS_RANK:
        raise LatticeError(f"expected rank {PRODUCT_NS_RANK}, got {lattice.rank}")
    determinant = gram_determinant(lattice)
    if determinant <= 0 or determinant % 2:
        raise LatticeError(f"discriminant {determinant} is not twice a positive degree")
    return determinant // 2


def gram_from_rows(rows: Sequence[Sequence[int]], label: str = "") -> GramLattice:
    return GramLattice(tuple(tuple(row) for row in rows), label)
