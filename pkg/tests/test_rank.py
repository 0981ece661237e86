from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mdforms.operators import integer_derivative
from mdforms.rank import exact_rank, rank_mod_p


def fraction_rank(a) -> int:
    rows = [[Fraction(int(v)) for v in r] for r in a]
    rank = 0
    ncols = len(rows[0]) if rows else 0
    for c in range(ncols):
        piv = next((i for i in range(rank, len(rows)) if rows[i][c] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        for i in range(len(rows)):
            if i != rank and rows[i][c] != 0:
                f = rows[i][c] / rows[rank][c]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[rank])]
        rank += 1
    return rank


matrices = st.tuples(st.integers(1, 9), st.integers(1, 9)).flatmap(
    lambda s: arrays(np.int64, s, elements=st.integers(-3, 3))
)


@given(matrices)
def test_exact_rank_matches_rational_elimination(a):
    assert exact_rank(sp.csr_matrix(a)) == fraction_rank(a)


@given(matrices)
def test_rank_mod_p_agrees_for_small_entries(a):
    assert rank_mod_p(sp.csr_matrix(a)) == fraction_rank(a)


def test_rank_detects_mod_two_pitfall():
    a = np.array([[1, 1], [1, -1]])
    assert exact_rank(sp.csr_matrix(a)) == 2
    assert rank_mod_p(sp.csr_matrix(a), p=2) == 1


def test_rank_of_empty_and_zero():
    assert exact_rank(sp.csr_matrix((0, 4), dtype=np.int64)) == 0
    assert exact_rank(sp.csr_matrix((3, 3), dtype=np.int64)) == 0


def test_large_entries_stay_exact():
    # determinant is -1, yet the rows agree to double precision
    b = 2**60
    a = np.array([[b, b + 1], [b + 1, b + 2]], dtype=np.int64)
    assert exact_rank(sp.csr_matrix(a)) == 2
    assert np.linalg.matrix_rank(a.astype(np.float64)) == 1
    assert exact_rank(sp.csr_matrix(np.array([[3, 5], [6, 10]]))) == 1


@pytest.mark.parametrize("name", ["slit_regions", "annulus", "torus", "cube_single"])
def test_fixture_ranks_agree_with_modular(geometries, name):
    g = geometries[name]
    for k in range(g.n):
        D = integer_derivative(g, k)
        if max(D.shape) <= 600:
            assert exact_rank(D) == rank_mod_p(D)
