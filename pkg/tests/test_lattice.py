import pytest

from bsurf.lattice import (
    KUMMER_RANK,
    GramLattice,
    LatticeError,
    build_family_gram,
    build_kummer_lattice,
    build_lambda_prod,
    gram_determinant,
    gram_from_rows,
    hyperbolic_plane,
    isogeny_degree_from_disc,
    kummer_basis,
    kummer_rank_bookkeeping,
    lattice_report,
    orthogonal_sum,
    signature,
)


@pytest.mark.parametrize("d", range(1, 51))
def test_family_gram(d: int):
    lattice = build_family_gram(d)
    assert gram_determinant(lattice) == 2 * d
    assert signature(lattice) == (1, 2, 0)
    assert lattice.is_even()
    assert isogeny_degree_from_disc(lattice) == d


def test_family_gram_rejects():
    with pytest.raises(LatticeError):
        build_family_gram(0)


def test_kummer_lattice():
    lattice = build_kummer_lattice()
    assert lattice.rank == KUMMER_RANK
    assert gram_determinant(lattice) == 64
    assert signature(lattice) == (0, 16, 0)
    assert lattice.is_even()


def test_kummer_basis_glue():
    basis = kummer_basis()
    assert len(basis) == KUMMER_RANK
    assert all(len(row) == KUMMER_RANK for row in basis)
    # five glue vectors from the code, the rest are doubled exceptional classes
    glue = [row for row in basis if any(x % 2 for x in row)]
    assert len(glue) == 5
    assert all(set(row) <= {0, 1} for row in glue)


def test_lambda_prod():
    report = lattice_report(build_lambda_prod())
    assert report.rank == 18
    assert report.determinant == -64
    assert report.signature == (1, 17)
    assert report.even
    assert not report.degenerate


def test_hyperbolic_report():
    report = lattice_report(hyperbolic_plane()).as_dict()
    assert report == {
        "label": "U",
        "rank": 2,
        "determinant": -1,
        "even": True,
        "signature": [1, 1],
        "degenerate": False,
    }


def test_degenerate_report():
    report = lattice_report(gram_from_rows([[0, 0], [0, 0]], "zero"))
    assert report.degenerate
    assert report.signature == (0, 0)


def test_odd_lattice():
    assert not gram_from_rows([[1, 0], [0, 2]]).is_even()
    assert signature(gram_from_rows([[1, 0], [0, -1]])) == (1, 1, 0)


def test_gram_validation():
    with pytest.raises(LatticeError):
        GramLattice(((0, 1), (2, 0)))
    with pytest.raises(LatticeError):
        GramLattice(((0, 1, 0), (1, 0)))
    with pytest.raises(LatticeError):
        GramLattice(())


def test_orthogonal_sum():
    lattice = orthogonal_sum(hyperbolic_plane(), hyperbolic_plane())
    assert lattice.rank == 4
    assert gram_determinant(lattice) == 1
    assert lattice.pairing(2, 3) == 1
    assert lattice.pairing(0, 3) == 0
    assert lattice.label == "U + U"


def test_rank_bookkeeping():
    assert kummer_rank_bookkeeping() == (16, 3, 19)


def test_isogeny_degree_from_disc_rejects():
    with pytest.raises(LatticeError):
        isogeny_degree_from_disc(hyperbolic_plane())
    with pytest.raises(LatticeError):
        isogeny_degree_from_disc(gram_from_rows([[1, 0, 0], [0, 1, 0], [0, 0, 1]]))
