import os
import subprocess
import sys

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mdforms import _kernels
from mdforms.fixtures import grid
from mdforms.operators import integer_derivative
from mdforms.rank import exact_rank

needs_numba = pytest.mark.skipif(_kernels.numba is None, reason="numba not installed")


sparse_ints = st.tuples(st.integers(1, 12), st.integers(1, 12)).flatmap(
    lambda s: arrays(np.int64, s, elements=st.sampled_from([0, 0, 0, 1, -1, 2]))
)


@needs_numba
@given(sparse_ints)
def test_peel_paths_agree_on_rank(a):
    m = sp.csr_matrix(a)
    totals = []
    for flag in (True, False):
        r, rows, cols = _kernels.peel_singletons(m, use_numba=flag)
        core = m[rows][:, cols]
        totals.append(r + np.linalg.matrix_rank(core.toarray()) if core.size else r)
    assert totals[0] == totals[1] == np.linalg.matrix_rank(a)


@needs_numba
@given(arrays(np.int64, (7, 9), elements=st.integers(-50, 50)))
def test_rank_mod_p_paths_agree(a):
    assert _kernels.rank_mod_p(a, use_numba=True) == _kernels.rank_mod_p(a, use_numba=False)


@needs_numba
@pytest.mark.parametrize("p", [0, 1, 2])
def test_dual_volume_paths_agree(p):
    coords, tris, _ = grid(5, 4)
    rng = np.random.default_rng(1)
    coords = coords + 0.02 * rng.standard_normal(coords.shape)
    a = _kernels.dual_volumes_per_simplex(coords, tris, p, use_numba=True)
    b = _kernels.dual_volumes_per_simplex(coords, tris, p, use_numba=False)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-15)


def test_dual_volumes_partition_the_simplex():
    coords, tris, _ = grid(3, 3)
    # the vertex dual cells tile each triangle
    pieces = _kernels.dual_volumes_per_simplex(coords, tris, 0)
    np.testing.assert_allclose(pieces.sum(axis=1), 1 / 18)


def test_peeling_is_a_lower_bound(geometries):
    D = integer_derivative(geometries["annulus"], 1)
    for flag in (False, True) if _kernels.numba else (False,):
        assert _kernels.peel_singletons(D, use_numba=flag)[0] <= exact_rank(D)


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, MDFORMS_USE_NUMBA="0")
    out = subprocess.run(
        [sys.executable, "-c", "from mdforms import _kernels; print(_kernels.backend())"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "numpy"


def test_betti_same_under_numpy_backend():
    env = dict(os.environ, MDFORMS_USE_NUMBA="0")
    code = "from mdforms.fixtures import load_fixture; from mdforms import betti_numbers; print(betti_numbers(load_fixture('annulus')))"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "[1, 1, 0]"
