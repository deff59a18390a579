"""Exact linear algebra over ℤ/nℤ and the integer helpers every other module uses

Row spans are put in Howell form: rows in echelon order, every pivot a divisor of n,
entries above a pivot reduced below it, and closed under the annihilator rows so
that the rows with leading zeros span every element of the module with those
leading zeros. Two matrices have the same row span iff their Howell forms agree.
"""

import enum
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from numbers import Integral
from typing import Callable, Iterable, List, Sequence, Tuple

import numpy as np
from sympy import ZZ, Matrix, factorint, isprime

try:
    from sympy.core.intfunc import igcdex
except ImportError:  # sympy < 1.13
    from sympy.core.numbers import igcdex
from sympy.matrices.normalforms import smith_normal_form

from bsurf import config
from bsurf.errors import PreconditionError

logger = logging.getLogger(__name__)

Vector = Tuple[int, ...]
Key2 = Tuple[int, int, int, int]


class ModulusError(PreconditionError):
    pass


class NotPrimeError(PreconditionError):
    pass


class NotInvertibleError(PreconditionError):
    pass


class Valuation(enum.Enum):
    """Marker for the valuation of zero"""

    INFINITY = "infinity"

    def __repr__(self):
        return "Valuation.INFINITY"


INFINITY = Valuation.INFINITY


def valuation(x: int, ell: int) -> int | Valuation:
    """Largest e with ℓᵉ | x

    Args:
        x (int): Any integer
        ell (int): A prime

    Raises:
        NotPrimeError: ell is not prime

    Returns:
        int | Valuation: The exponent, or INFINITY when x = 0
    """
    if not isprime(ell):
        raise NotPrimeError(f"{ell} is not prime")
    if x == 0:
        return INFINITY

    x = abs(x)
    e = 0
    while x % ell == 0:
        x //= ell
        e += 1

    return e


def gcd_power(a: int, b: int) -> int:
    """gcd(a, b^∞): the largest divisor of a supported on primes dividing b

    Args:
        a (int): Positive integer
        b (int): Positive integer

    Raises:
        PreconditionError: Non-positive input

    Returns:
        int: The b-primary part of a
    """
    if a < 1 or b < 1:
        raise PreconditionError(f"gcd_power needs positive inputs, got ({a}, {b})")

    result = 1
    g = math.gcd(a, b)
    while g > 1:
        result *= g
        a //= g
        g = math.gcd(a, g)

    return result


def odd_part(n: int) -> int:
    """n with every factor of 2 removed"""
    if n < 1:
        raise PreconditionError(f"odd_part needs a positive integer, got {n}")
    while n % 2 == 0:
        n //= 2
    return n


def is_prime(n: int) -> bool:
    return bool(isprime(n))


def prime_factors(n: int) -> dict[int, int]:
    """Factorization of n as {prime: exponent}"""
    return {int(p): int(e) for p, e in factorint(n).items()}


@dataclass(frozen=True)
class Modulus:
    """The integer n of ℤ/nℤ"""

    n: int

    def __post_init__(self):
        if not isinstance(self.n, Integral) or isinstance(self.n, bool):
            raise ModulusError(f"modulus must be an integer, got {self.n!r}")
        if self.n < 1:
            raise ModulusError(f"modulus must be at least 1, got {self.n}")
        if self.n > config.MODULUS_CAP:
            raise ModulusError(f"modulus {self.n} exceeds the cap {config.MODULUS_CAP}")

    @cached_property
    def factorization(self) -> dict[int, int]:
        factors = prime_factors(self.n)
        assert math.prod(p**e for p, e in factors.items()) == self.n
        return factors

    @property
    def primes(self) -> List[int]:
        return sorted(self.factorization)

    def units(self) -> List[int]:
        return [u for u in range(self.n) if math.gcd(u, self.n) == 1]

    def is_unit(self, x: int) -> bool:
        return math.gcd(x % self.n, self.n) == 1

    def __int__(self):
        return self.n

    def __str__(self):
        return str(self.n)


def as_modulus(modulus: "int | Modulus") -> Modulus:
    if isinstance(modulus, Modulus):
        return modulus
    return Modulus(int(modulus))


def _matmul_mod(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    inner = a.shape[1]
    if inner and (n - 1) ** 2 * inner >= 2**63:
        return ((a.astype(object) @ b.astype(object)) % n).astype(np.int64)
    return (a @ b) % n


class ModMatrix:
    """A rectangular matrix over ℤ/nℤ with entries stored reduced in [0, n)"""

    def __init__(
        self,
        entries: Sequence[Sequence[int]] | np.ndarray,
        modulus: "int | Modulus",
        shape: Tuple[int, int] | None = None,
    ):
        """
        Args:
            entries (Sequence[Sequence[int]] | np.ndarray): Row-major integer entries
            modulus (int | Modulus): The modulus n
            shape (Tuple[int, int] | None, optional): Needed only for matrices without rows. Defaults to None.

        Raises:
            ValueError: Entries are not integers or rows are ragged
        """
        self.modulus = as_modulus(modulus)
        n = self.modulus.n

        if isinstance(entries, np.ndarray) and entries.dtype == np.int64:
            array = entries % n
        else:
            rows = [list(row) for row in entries]
            if not rows:
                array = np.zeros(shape if shape is not None else (0, 0), dtype=np.int64)
            else:
                width = len(rows[0])
                for row in rows:
                    if len(row) != width:
                        raise ValueError("ragged matrix rows")
                    for x in row:
                        if not isinstance(x, Integral) or isinstance(x, bool):
                            raise ValueError(f"matrix entries must be integers, got {x!r}")
                array = np.array(
                    [[int(x) % n for x in row] for row in rows], dtype=np.int64
                ).reshape(len(rows), width)

        if array.ndim != 2:
            raise ValueError("matrix entries must form a two dimensional array")
        if shape is not None and array.shape != tuple(shape):
            raise ValueError(f"expected shape {shape}, got {array.shape}")

        array.flags.writeable = False
        self._array = array

    @classmethod
    def identity(cls, size: int, modulus: "int | Modulus") -> "ModMatrix":
        return _wrap(np.eye(size, dtype=np.int64), as_modulus(modulus))

    @classmethod
    def zeros(cls, nrows: int, ncols: int, modulus: "int | Modulus") -> "ModMatrix":
        return _wrap(np.zeros((nrows, ncols), dtype=np.int64), as_modulus(modulus))

    @property
    def n(self) -> int:
        return self.modulus.n

    @property
    def array(self) -> np.ndarray:
        return self._array

    @property
    def shape(self) -> Tuple[int, int]:
        return self._array.shape

    @property
    def nrows(self) -> int:
        return self._array.shape[0]

    @property
    def ncols(self) -> int:
        return self._array.shape[1]

    def rows(self) -> List[Vector]:
        return [tuple(int(x) for x in row) for row in self._array.tolist()]

    def vector(self) -> Vector:
        """Row-major flattening"""
        return tuple(int(x) for x in self._array.reshape(-1).tolist())

    def key(self) -> Tuple[int, Tuple[int, int], Vector]:
        return (self.n, self.shape, self.vector())

    def _check_compatible(self, other: "ModMatrix"):
        if not isinstance(other, ModMatrix):
            raise TypeError(f"expected a ModMatrix, got {type(other).__name__}")
        if other.n != self.n:
            raise ModulusError(f"moduli differ: {self.n} and {other.n}")

    def __matmul__(self, other: "ModMatrix") -> "ModMatrix":
        self._check_compatible(other)
        if self.ncols != other.nrows:
            raise ValueError(f"cannot multiply {self.shape} by {other.shape}")
        return _wrap(_matmul_mod(self._array, other._array, self.n), self.modulus)

    def __add__(self, other: "ModMatrix") -> "ModMatrix":
        self._check_compatible(other)
        return _wrap((self._array + other._array) % self.n, self.modulus)

    def __sub__(self, other: "ModMatrix") -> "ModMatrix":
        self._check_compatible(other)
        return _wrap((self._array - other._array) % self.n, self.modulus)

    def __neg__(self) -> "ModMatrix":
        return _wrap((-self._array) % self.n, self.modulus)

    def __mul__(self, scalar: int) -> "ModMatrix":
        if not isinstance(scalar, Integral):
            return NotImplemented
        return _wrap((self._array * (int(scalar) % self.n)) % self.n, self.modulus)

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, ModMatrix) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"{type(self).__name__}({self._array.tolist()}, mod {self.n})"

    def transpose(self) -> "ModMatrix":
        return _wrap(np.ascontiguousarray(self._array.T), self.modulus)

    def reduce(self, m: int) -> "ModMatrix":
        """Image under ℤ/nℤ → ℤ/mℤ

        Raises:
            ModulusError: m does not divide n
        """
        if m < 1 or self.n % m:
            raise ModulusError(f"{m} does not divide {self.n}")
        return _wrap(self._array % m, as_modulus(m))

    def is_zero(self) -> bool:
        return not self._array.any()

    def is_square(self) -> bool:
        return self.nrows == self.ncols

    def is_scalar(self) -> bool:
        if not self.is_square():
            return False
        if not self.nrows:
            return True
        diagonal = np.diag(self._array)
        off = self._array - np.diag(diagonal)
        return not off.any() and bool((diagonal == diagonal[0]).all())

    def det(self) -> int:
        if not self.is_square():
            raise ValueError(f"determinant of a non-square {self.shape} matrix")
        if self.shape == (2, 2):
            a, b, c, d = self.vector()
            return (a * d - b * c) % self.n
        return int(Matrix(self.rows()).det(method="bareiss")) % self.n

    def is_invertible(self) -> bool:
        return self.is_square() and math.gcd(self.det(), self.n) == 1

    def inverse(self) -> "ModMatrix":
        """
        Raises:
            NotInvertibleError: The determinant is not a unit mod n
        """
        if not self.is_invertible():
            raise NotInvertibleError(f"{self!r} is not invertible")
        if self.shape == (2, 2):
            return _wrap(
                np.array(mat2_inv(self.vector(), self.n), dtype=np.int64).reshape(2, 2),
                self.modulus,
            )
        inverse = Matrix(self.rows()).inv_mod(self.n)
        return ModMatrix([[int(x) for x in row] for row in inverse.tolist()], self.modulus)


class ResidueMatrix(ModMatrix):
    """A 2×2 matrix over ℤ/nℤ"""

    def __init__(self, entries, modulus: "int | Modulus"):
        super().__init__(entries, modulus)
        if self.shape != (2, 2):
            raise ValueError(f"a residue matrix is 2x2, got {self.shape}")

    @classmethod
    def from_key(cls, key: Sequence[int], modulus: "int | Modulus") -> "ResidueMatrix":
        a, b, c, d = key
        return cls([[a, b], [c, d]], modulus)

    @classmethod
    def scalar(cls, x: int, modulus: "int | Modulus") -> "ResidueMatrix":
        return cls([[x, 0], [0, x]], modulus)

    @property
    def entries(self) -> Key2:
        return self.vector()


def _wrap(array: np.ndarray, modulus: Modulus) -> ModMatrix:
    array = np.ascontiguousarray(array, dtype=np.int64)
    if array.shape == (2, 2):
        return ResidueMatrix(array, modulus)
    return ModMatrix(array, modulus, shape=array.shape)


# 2x2 arithmetic on row-major tuples, used by the enumeration hot loops


def mat2_mul(x: Key2, y: Key2, n: int) -> Key2:
    a, b, c, d = x
    e, f, g, h = y
    return ((a * e + b * g) % n, (a * f + b * h) % n, (c * e + d * g) % n, (c * f + d * h) % n)


def mat2_det(x: Key2, n: int) -> int:
    a, b, c, d = x
    return (a * d - b * c) % n


def mat2_inv(x: Key2, n: int) -> Key2:
    a, b, c, d = x
    det = (a * d - b * c) % n
    if math.gcd(det, n) != 1:
        raise NotInvertibleError(f"{x} is not invertible mod {n}")
    u = pow(det, -1, n) if n > 1 else 0
    return ((d * u) % n, (-b * u) % n, (-c * u) % n, (a * u) % n)


def mat2_is_scalar(x: Key2, n: int) -> bool:
    a, b, c, d = x
    return b % n == 0 and c % n == 0 and (a - d) % n == 0


def m2_basis(modulus: "int | Modulus") -> List[ResidueMatrix]:
    """The elementary matrices E₀₀, E₀₁, E₁₀, E₁₁"""
    modulus = as_modulus(modulus)
    return [ResidueMatrix.from_key(tuple(int(i == j) for j in range(4)), modulus) for i in range(4)]


def m2_operator(fn: Callable[[ResidueMatrix], ResidueMatrix], modulus: "int | Modulus") -> ModMatrix:
    """4×4 matrix of a ℤ/nℤ-linear map on M₂(ℤ/nℤ) in row-major coordinates

    Column j is the image of the j-th elementary matrix.
    """
    modulus = as_modulus(modulus)
    columns = [fn(e).vector() for e in m2_basis(modulus)]
    return ModMatrix([list(row) for row in zip(*columns)], modulus)


# Howell form and the module computations built on it


def _normalizing_unit(a: int, n: int) -> int:
    """A unit u with u·a ≡ gcd(a, n) mod n"""
    g = math.gcd(a, n)
    cofactor = n // g
    if cofactor == 1:
        return 1
    u = pow((a // g) % cofactor, -1, cofactor)
    while math.gcd(u, n) != 1:
        u += cofactor
    return u % n


def _howell_rows(rows: Iterable[Sequence[int]], n: int, width: int) -> List[List[int]]:
    if n == 1:
        return []

    work = [[int(x) % n for x in row] for row in rows]
    r = 0
    for j in range(width):
        if r >= len(work):
            break
        for i in range(r + 1, len(work)):
            b = work[i][j]
            if b == 0:
                continue
            a = work[r][j]
            s, t, g = igcdex(a, b)
            s, t, g = int(s), int(t), int(g)
            ag, bg = a // g, b // g
            upper, lower = work[r], work[i]
            work[r] = [(s * x + t * y) % n for x, y in zip(upper, lower)]
            work[i] = [(-bg * x + ag * y) % n for x, y in zip(upper, lower)]

        pivot = work[r][j]
        if pivot == 0:
            continue

        u = _normalizing_unit(pivot, n)
        work[r] = [(u * x) % n for x in work[r]]
        pivot = work[r][j]
        for k in range(r):
            q = work[k][j] // pivot
            if q:
                work[k] = [(x - q * y) % n for x, y in zip(work[k], work[r])]

        annihilator = [(n // pivot * x) % n for x in work[r]]
        if any(annihilator):
            work.append(annihilator)
        r += 1

    return work[:r]


def _pivot(row: Sequence[int]) -> int:
    return next(j for j, x in enumerate(row) if x)


def howell_basis(m: ModMatrix) -> ModMatrix:
    """Canonical basis of the row span of m

    Args:
        m (ModMatrix): Any matrix

    Returns:
        ModMatrix: Howell form with zero rows dropped; shape (k, m.ncols)
    """
    rows = _howell_rows(m.rows(), m.n, m.ncols)
    return ModMatrix(rows, m.modulus, shape=(len(rows), m.ncols))


def _vectors(generators: Iterable[Sequence[int]], dim: int | None) -> Tuple[List[List[int]], int]:
    vectors = [list(v) for v in generators]
    if vectors:
        width = len(vectors[0])
        if any(len(v) != width for v in vectors):
            raise ValueError("generators have different lengths")
        if dim is not None and dim != width:
            raise ValueError(f"generators have length {width}, expected {dim}")
        return vectors, width
    return vectors, dim or 0


def span_order(
    generators: Iterable[Sequence[int]], modulus: "int | Modulus", dim: int | None = None
) -> int:
    """Order of the submodule of (ℤ/nℤ)^k spanned by the generators"""
    n = as_modulus(modulus).n
    vectors, width = _vectors(generators, dim)
    return math.prod(n // _pivot_value(row) for row in _howell_rows(vectors, n, width))


def _pivot_value(row: Sequence[int]) -> int:
    return row[_pivot(row)]


def _reduce_against(vector: Sequence[int], basis: List[List[int]], n: int) -> List[int]:
    v = [int(x) % n for x in vector]
    for row in basis:
        j = _pivot(row)
        q, r = divmod(v[j], row[j])
        if r:
            return v
        if q:
            v = [(x - q * y) % n for x, y in zip(v, row)]
    return v


def in_span(
    vector: Sequence[int], generators: Iterable[Sequence[int]], modulus: "int | Modulus"
) -> bool:
    """Membership of vector in the submodule spanned by generators"""
    n = as_modulus(modulus).n
    vectors, width = _vectors(generators, len(vector))
    basis = _howell_rows(vectors, n, width)
    return not any(_reduce_against(vector, basis, n))


def kernel(m: ModMatrix) -> ModMatrix:
    """Generators of the right kernel {v : m·v = 0}

    The Howell form of [mᵀ | I] is taken; rows vanishing on the mᵀ block carry the kernel.

    Args:
        m (ModMatrix): An r×c matrix

    Returns:
        ModMatrix: Generators as rows, shape (k, c)
    """
    n, r, c = m.n, m.nrows, m.ncols
    columns = m.transpose().rows()
    augmented = [list(columns[k]) + [int(i == k) for i in range(c)] for k in range(c)]
    rows = _howell_rows(augmented, n, r + c)
    generators = [row[r:] for row in rows if not any(row[:r])]

    result = ModMatrix(generators, m.modulus, shape=(len(generators), c))
    if generators and (m @ result.transpose()).array.any():
        raise ArithmeticError("kernel generator does not satisfy m·v = 0")

    return result


@dataclass(frozen=True)
class AbelianShape:
    """Invariant factors d₁ | d₂ | … | d_k of a finite abelian group"""

    factors: Tuple[int, ...] = ()

    def __post_init__(self):
        factors = tuple(int(f) for f in self.factors)
        object.__setattr__(self, "factors", factors)
        for f in factors:
            if f < 2:
                raise ValueError(f"invariant factors are at least 2, got {factors}")
        for small, big in zip(factors, factors[1:]):
            if big % small:
                raise ValueError(f"invariant factors must form a divisibility chain: {factors}")

    @classmethod
    def from_cyclic_orders(cls, orders: Iterable[int]) -> "AbelianShape":
        """Canonical shape of a direct sum of cyclic groups of the given orders"""
        by_prime: dict[int, List[int]] = {}
        for order in orders:
            if order < 1:
                raise ValueError(f"cyclic orders are positive, got {order}")
            for p, e in prime_factors(order).items():
                by_prime.setdefault(p, []).append(e)

        length = max((len(es) for es in by_prime.values()), default=0)
        factors = [1] * length
        for p, es in by_prime.items():
            for i, e in enumerate(sorted(es, reverse=True)):
                factors[i] *= p**e

        return cls(tuple(sorted(f for f in factors if f > 1)))

    @property
    def order(self) -> int:
        return math.prod(self.factors)

    @property
    def exponent(self) -> int:
        return self.factors[-1] if self.factors else 1

    @property
    def rank(self) -> int:
        return len(self.factors)

    def rank_at(self, p: int) -> int:
        return sum(1 for f in self.factors if f % p == 0)

    def is_trivial(self) -> bool:
        return not self.factors

    def is_cyclic(self) -> bool:
        return len(self.factors) <= 1

    def __str__(self):
        if not self.factors:
            return "0"
        return " x ".join(f"Z/{f}" for f in self.factors)


def _smith_diagonal(rows: List[List[int]]) -> List[int]:
    snf = smith_normal_form(Matrix(rows), domain=ZZ)
    return [abs(int(snf[i, i])) for i in range(min(snf.shape))]


def subgroup_shape(
    generators: Iterable[Sequence[int]], modulus: "int | Modulus", dim: int | None = None
) -> AbelianShape:
    """Invariant factors of the subgroup of (ℤ/nℤ)^k spanned by the generators

    The Smith diagonal e₁, …, e_k of the integer relation matrix [generators; n·I]
    gives the cyclic orders n / eᵢ.

    Args:
        generators (Iterable[Sequence[int]]): Vectors of one common length
        modulus (int | Modulus): The modulus n
        dim (int | None, optional): Vector length, when there may be no generators. Defaults to None.

    Returns:
        AbelianShape: Shape of the spanned subgroup
    """
    n = as_modulus(modulus).n
    vectors, width = _vectors(generators, dim)
    if not vectors or n == 1:
        return AbelianShape()

    relations = [[x % n for x in v] for v in vectors]
    relations += [[n * int(i == j) for j in range(width)] for i in range(width)]
    shape = AbelianShape.from_cyclic_orders(n // math.gcd(e, n) for e in _smith_diagonal(relations))

    order = span_order(vectors, n, width)
    if shape.order != order:
        raise ArithmeticError(f"Smith form order {shape.order} disagrees with span order {order}")

    return shape


def quotient_shape(
    generators: Iterable[Sequence[int]],
    sub_generators: Iterable[Sequence[int]],
    modulus: "int | Modulus",
    dim: int | None = None,
) -> AbelianShape:
    """Invariant factors of ⟨generators⟩ / ⟨sub_generators⟩

    For each prime p the orders |pʲQ| = |pʲ·big + sub| / |sub| give the p-ranks of the
    quotient Q, hence its elementary divisors.

    Args:
        generators (Iterable[Sequence[int]]): Spanning set of the big module
        sub_generators (Iterable[Sequence[int]]): Spanning set of a submodule of it
        modulus (int | Modulus): The modulus n
        dim (int | None, optional): Vector length, when both sets may be empty. Defaults to None.

    Raises:
        PreconditionError: A sub generator is outside the big module

    Returns:
        AbelianShape: Shape of the quotient
    """
    modulus = as_modulus(modulus)
    n = modulus.n
    big, width = _vectors(generators, dim)
    sub, width = _vectors(sub_generators, width if big else dim)

    basis = _howell_rows(big, n, width)
    for v in sub:
        if any(_reduce_against(v, basis, n)):
            raise PreconditionError(f"{tuple(v)} is not in the ambient module")

    sub_order = span_order(sub, n, width)
    orders: List[int] = []
    for p, e in modulus.factorization.items():
        sizes = []
        for j in range(e + 1):
            scaled = [[(p**j * x) % n for x in v] for v in big]
            sizes.append(span_order(scaled + sub, n, width) // sub_order)
        ranks = [valuation(sizes[j] // sizes[j + 1], p) for j in range(e)]
        for j in range(e):
            following = ranks[j + 1] if j + 1 < e else 0
            orders += [p ** (j + 1)] * (ranks[j] - following)

    shape = AbelianShape.from_cyclic_orders(orders)
    logger.debug("quotient of order %d by %d has shape %s", span_order(big, n, width), sub_order, shape)
    return shape
