"""Structural invariants not covered by the per-module tests."""

import copy

import numpy as np
import pytest

from mdforms.cochains import MixedForm, degree_layout, restriction_operator
from mdforms.fixtures import load_fixture
from mdforms.geometry import geometry_from_dict, validate_conforming
from mdforms.hodge import harmonic_matrix
from mdforms.laplace import CoefficientField, coercivity_estimate, solve_hodge_laplace
from mdforms.operators import d_local, free_mask, integer_derivative, mass, mixed_derivative

from conftest import ALL_NAMES


@pytest.mark.parametrize("name", ALL_NAMES)
def test_trace_commutes_with_local_derivative(geometries, name):
    g = geometries[name]
    for k in range(g.n):
        lk, lk1 = degree_layout(g, k), degree_layout(g, k + 1)
        dl = d_local(g, k)
        for j in g.nodes:
            if lk.is_void(g, j) or lk1.is_void(g, j):
                continue
            c = g.mesh_of(j).coboundary(lk.local_degree[j])
            diff = restriction_operator(g, lk1, j) @ dl - c @ restriction_operator(g, lk, j)
            assert diff.nnz == 0 or abs(diff).max() == 0


@pytest.mark.parametrize("name", ALL_NAMES)
def test_gamma_inverse_is_transpose(geometries, name):
    g = geometries[name]
    fwd = {(l, t) for l, ts in g.gamma.items() if ts for t in ts}
    back = {(l, t) for t, ls in g.gamma_inverse.items() for l, _ in ls}
    assert fwd == back
    for t, ls in g.gamma_inverse.items():
        assert all(eps in (-1, 1) for _, eps in ls)


@pytest.mark.parametrize("name", ["slit_regions", "slit_regions_flipped", "square_fracture"])
def test_validation_is_idempotent(name):
    g = load_fixture(name)
    a, b = validate_conforming(g).to_dict(), validate_conforming(g).to_dict()
    assert a == b


def test_degenerate_meshes_are_flagged():
    g = load_fixture("square_single")
    doc = copy.deepcopy(g.document)
    mesh = next(iter(doc["meshes"].values()))
    tri = mesh["simplices"]["2"][0]
    # pull one vertex of a triangle onto another
    mesh["vertices"][tri[1]] = list(mesh["vertices"][tri[0]])
    details = [v.detail for v in validate_conforming(geometry_from_dict(doc)).of_kind("mesh")]
    assert any("zero-measure" in d for d in details)
    assert any("duplicate coordinates" in d for d in details)


def test_empty_forest_is_flagged():
    rep = validate_conforming(geometry_from_dict({"n": 2, "nodes": [], "meshes": {}, "maps": []}))
    assert not rep.ok


@pytest.mark.parametrize("name", ["annulus", "square_fracture", "interval_pair"])
def test_mass_positive_on_random_vectors(geometries, name):
    g = geometries[name]
    rng = np.random.default_rng(11)
    for k in range(g.n + 1):
        m = mass(g, k).diag
        X = rng.standard_normal((len(m), 1000))
        assert (np.einsum("ij,i,ij->j", X, m, X) > 0).all()


@pytest.mark.parametrize("name", ["annulus", "square_fracture"])
def test_coercivity_scales_with_coefficients(geometries, name):
    g = geometries[name]
    rf = CoefficientField(1, 1.5, 0.7)
    c1 = coercivity_estimate(g, 1, rf)
    c10 = coercivity_estimate(g, 1, rf.scaled(10.0))
    assert c10 == pytest.approx(10 * c1, rel=1e-9)


@pytest.mark.parametrize("name", ["annulus", "square_fracture"])
def test_rayleigh_quotients_positive_off_harmonics(geometries, name):
    g = geometries[name]
    rng = np.random.default_rng(3)
    k = 1
    m = mass(g, k, bc="essential").diag
    H = harmonic_matrix(g, k, "essential")
    up = mixed_derivative(g, k, bc="essential")
    lo = mixed_derivative(g, k - 1, bc="essential")
    for _ in range(50):
        v = rng.standard_normal(len(m))
        v -= H @ (H.T @ (m * v))
        num = (up.Df @ v) @ (up.M_k1.diag * (up.Df @ v))
        z = (lo.Df.T @ (m * v)) / lo.M_k.diag
        num += z @ (lo.M_k.diag * z)
        assert num / (v @ (m * v)) > 1e-8


@pytest.mark.parametrize("r", [1.0, 3.0])
def test_fracture_flux_balance(geometries, r):
    """Top degree: D sigma equals the source minus its harmonic part, row by row."""
    g = geometries["square_fracture"]
    n = g.n
    rng = np.random.default_rng(2)
    mask = free_mask(g, n, "essential")
    x = np.zeros(len(mask))
    x[mask] = rng.standard_normal(mask.sum())
    rep = solve_hodge_laplace(g, n, CoefficientField(n, r, 1.0), MixedForm(n, x))
    H = harmonic_matrix(g, n, "essential")
    m = mass(g, n, bc="essential").diag
    f = x[mask] - H @ (H.T @ (m * x[mask]))
    sig = rep.sigma.coefficients[free_mask(g, n - 1, "essential")]
    Ds = integer_derivative(g, n - 1, "essential") @ sig
    assert np.abs(Ds - f).max() <= 1e-10 * max(1.0, np.abs(f).max())
