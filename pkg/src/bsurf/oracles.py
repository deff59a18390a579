"""Exhaustive checkers for small moduli, used as oracles by the tests and the acceptance script"""

import itertools
from typing import Iterable, Sequence, Set, Tuple

import networkx as nx
import numpy as np

from bsurf.brauer import IntegerActionGroup
from bsurf.gl2 import MatrixGroup
from bsurf.modring import ModMatrix, ResidueMatrix, mat2_mul
from bsurf.torsionhom import PairAction

EXHAUSTIVE_LIMIT = 10**6


def _check_size(count: int):
    if count > EXHAUSTIVE_LIMIT:
        raise ValueError(f"exhaustive search over {count} elements is above the limit {EXHAUSTIVE_LIMIT}")


def all_m2(n: int) -> np.ndarray:
    """Every 2x2 matrix mod n as an array of shape (n⁴, 2, 2)"""
    _check_size(n**4)
    return np.indices((n,) * 4).reshape(4, -1).T.reshape(-1, 2, 2).astype(np.int64)


def brute_commutant(matrix: ResidueMatrix) -> np.ndarray:
    """All F with AF = FA"""
    n = matrix.n
    everything = all_m2(n)
    a = matrix.array
    mask = ((a @ everything) % n == (everything @ a) % n).all(axis=(1, 2))
    return everything[mask]


def brute_commutant_order(matrix: ResidueMatrix) -> int:
    return len(brute_commutant(matrix))


def brute_invariant_hom_count(action: PairAction) -> int:
    """Number of F with M'_σ F = F M_σ for every generator"""
    n = action.n
    everything = all_m2(n)
    mask = np.ones(len(everything), dtype=bool)
    for p in action.pairs:
        mask &= ((p.target.array @ everything) % n == (everything @ p.source.array) % n).all(axis=(1, 2))
    return int(mask.sum())


def brute_span(generators: Sequence[Sequence[int]], n: int) -> Set[Tuple[int, ...]]:
    """Every ℤ/nℤ-combination of the generators"""
    if not generators:
        return set()
    _check_size(n ** len(generators))
    vectors = np.array(generators, dtype=np.int64)
    coefficients = np.indices((n,) * len(generators)).reshape(len(generators), -1).T
    return {tuple(int(x) for x in row) for row in (coefficients @ vectors) % n}


def brute_span_order(generators: Sequence[Sequence[int]], n: int) -> int:
    return max(len(brute_span(generators, n)), 1)


def brute_kernel_order(matrix: ModMatrix) -> int:
    """Number of v with m·v = 0"""
    n, c = matrix.n, matrix.ncols
    _check_size(n**c)
    vectors = np.indices((n,) * c).reshape(c, -1)
    return int((((matrix.array @ vectors) % n) == 0).all(axis=0).sum())


def brute_gl2_order(n: int) -> int:
    everything = all_m2(n)
    det = (everything[:, 0, 0] * everything[:, 1, 1] - everything[:, 0, 1] * everything[:, 1, 0]) % n
    return int((np.gcd(det, n) == 1).sum())


def brute_end_divisors(image: MatrixGroup) -> Tuple[int, int]:
    """(n₁, n₂) by reducing the whole closure modulo every divisor of n

    The reduced image is abelian iff every element commutes with every generator.
    """
    n = image.n
    elements = np.array(image.element_keys(), dtype=np.int64).reshape(-1, 2, 2)
    generators = [g.array for g in image.generators]
    n1 = n2 = 1
    for m in range(1, n + 1):
        if n % m:
            continue
        reduced = elements % m
        if all(((reduced @ g) % m == (g @ reduced) % m).all() for g in generators):
            n1 = max(n1, m)
        off_diagonal = reduced[:, 0, 1].any() or reduced[:, 1, 0].any()
        if not off_diagonal and (reduced[:, 0, 0] == reduced[:, 1, 1]).all():
            n2 = max(n2, m)
    return n1, n2


def is_abelian_exhaustive(elements: Iterable[Tuple[int, int, int, int]], n: int) -> bool:
    elements = list(elements)
    return all(mat2_mul(x, y, n) == mat2_mul(y, x, n) for x, y in itertools.combinations(elements, 2))


def h1_brute_force(group: IntegerActionGroup, box: int | None = None) -> int:
    """#H¹(G, ℤʳ) as crossed homomorphisms modulo principal ones, found by enumeration

    A crossed homomorphism z is fixed by its values on the generators. Every candidate
    with generator values in [−B, B]^r is extended along the Cayley graph and kept when
    z(xy) = z(x) + x·z(y) holds on the whole multiplication table. Each class contains
    some z(g) = (1 − g)w with w ∈ [0, 1)^r, so B = max row sum of |1 − g| over the
    generators reaches every class. Two kept maps are in the same class when they differ
    by (g − 1)v for v ∈ [−V, V]^r, V = 2B + r, and the classes are the connected components.

    Args:
        group (IntegerActionGroup): A small finite action
        box (int | None, optional): B, overriding the default. Defaults to None.

    Raises:
        ValueError: The search space is above EXHAUSTIVE_LIMIT

    Returns:
        int: The number of classes
    """
    r = group.rank
    identity = np.eye(r, dtype=np.int64)
    generators = [g for g in group.generators if not np.array_equal(g, identity)]
    if not generators:
        return 1
    elements = group.elements()
    index = {x.tobytes(): i for i, x in enumerate(elements)}

    bound = box if box is not None else max(int(np.abs(identity - g).sum(axis=1).max()) for g in generators)
    width = 2 * bound + 1
    k = len(generators)
    _check_size(width ** (k * r))
    values = (np.indices((width,) * (k * r)).reshape(k * r, -1).T - bound).reshape(-1, k, r)

    cocycles = np.zeros((len(values), len(elements), r), dtype=np.int64)
    reached = {index[identity.tobytes()]}
    frontier = [identity]
    while frontier:
        following = []
        for x in frontier:
            source = index[x.tobytes()]
            for j, g in enumerate(generators):
                y = x @ g
                target = index[y.tobytes()]
                if target not in reached:
                    cocycles[:, target] = cocycles[:, source] + values[:, j] @ x.T
                    reached.add(target)
                    following.append(y)
        frontier = following

    valid = np.ones(len(values), dtype=bool)
    for a, x in enumerate(elements):
        for b, y in enumerate(elements):
            product = index[(x @ y).tobytes()]
            valid &= (cocycles[:, product] == cocycles[:, a] + cocycles[:, b] @ x.T).all(axis=1)
    kept = values[valid].reshape(-1, k * r)

    radius = 2 * bound + r
    shifts = np.indices((2 * radius + 1,) * r).reshape(r, -1).T - radius
    moves = np.unique(np.concatenate([shifts @ (g - identity).T for g in generators], axis=1), axis=0)
    moves = moves[(moves != 0).any(axis=1)]

    def encode(points: np.ndarray) -> np.ndarray:
        return ((points + bound) * width ** np.arange(k * r)).sum(axis=1)

    keys = encode(kept)
    graph = nx.Graph()
    graph.add_nodes_from(keys.tolist())
    for move in moves:
        shifted = kept + move
        inside = (np.abs(shifted) <= bound).all(axis=1)
        targets = encode(shifted[inside])
        present = np.isin(targets, keys)
        graph.add_edges_from(zip(keys[inside][present].tolist(), targets[present].tolist()))
    return nx.number_connected_components(graph)
