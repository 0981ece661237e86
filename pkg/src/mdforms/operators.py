"""Exterior derivative, jump operator and codifferential on forests."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .cochains import (
    DegreeLayout,
    MassMatrix,
    MixedForm,
    degree_layout,
    essential_mask,
    mass_matrix,
)
from .geometry import ForestGeometry

BC_VARIANTS = ("natural", "essential")


def local_exterior_derivative(mesh, p: int) -> sp.csr_matrix:
    """Signed incidence from p-cochains to (p+1)-cochains of one mesh."""
    return mesh.coboundary(p)


@lru_cache(maxsize=128)
def _layout(g: ForestGeometry, k: int) -> DegreeLayout:
    return degree_layout(g, k)


@lru_cache(maxsize=128)
def _mass(g: ForestGeometry, k: int, weights: str) -> MassMatrix:
    return mass_matrix(g, _layout(g, k), weights)


@lru_cache(maxsize=128)
def _free(g: ForestGeometry, k: int) -> np.ndarray:
    return essential_mask(g, _layout(g, k))


def layout(g, k):
    return _layout(g, k)


def mass(g, k, weights="measure", bc="natural") -> MassMatrix:
    M = _mass(g, k, weights)
    return M.restrict(_free(g, k)) if bc == "essential" else M


def free_mask(g, k, bc="natural") -> np.ndarray:
    if bc == "essential":
        return _free(g, k)
    return np.ones(_layout(g, k).total, dtype=bool)


def d_local(g: ForestGeometry, k: int) -> sp.csr_matrix:
    lk, lk1 = _layout(g, k), _layout(g, k + 1)
    blocks = []
    for i in g.roots:
        ki = lk.local_degree[i]
        if lk.counts[i] == 0 or lk1.counts[i] == 0:
            continue
        mesh = g.meshes[g.nodes[i].mesh_ref]
        c = mesh.coboundary(ki).tocoo()
        blocks.append((c.row + lk1.offsets[i], c.col + lk.offsets[i], c.data))
    return _assemble(blocks, (lk1.total, lk.total))


def jump_operator(g: ForestGeometry, k: int) -> sp.csr_matrix:
    """J_k: sign (-1)^(n-k) times the signed pullbacks from gamma^-1."""
    lk, lk1 = _layout(g, k), _layout(g, k + 1)
    pref = (-1) ** (g.n - k)
    blocks = []
    for t in g.roots:
        if lk1.counts[t] == 0:
            continue
        kt = lk1.local_degree[t]
        for l, eps in g.gamma_inverse[t]:
            r = g.nodes[l].tree_root
            cols, signs = g.pullback(l, kt)
            if (cols < 0).any():
                raise ValueError(f"branch {l}: map does not land on simplices")
            rows = np.arange(len(cols)) + lk1.offsets[t]
            blocks.append((rows, cols + lk.offsets[r], pref * eps * signs))
    return _assemble(blocks, (lk1.total, lk.total))


def _assemble(blocks, shape) -> sp.csr_matrix:
    if not blocks:
        return sp.csr_matrix(shape, dtype=np.int64)
    r = np.concatenate([b[0] for b in blocks])
    c = np.concatenate([b[1] for b in blocks])
    v = np.concatenate([np.asarray(b[2], dtype=np.int64) for b in blocks])
    out = sp.csr_matrix((v, (r, c)), shape=shape, dtype=np.int64)
    out.sum_duplicates()
    out.eliminate_zeros()
    return out


@lru_cache(maxsize=128)
def _D(g: ForestGeometry, k: int):
    dl = d_local(g, k)
    J = jump_operator(g, k)
    D = (dl + J).tocsr()
    D.eliminate_zeros()
    return dl, J, D


def integer_derivative(g: ForestGeometry, k: int, bc: str = "natural") -> sp.csr_matrix:
    """Exact integer matrix of D_k, restricted to free DOFs for ``essential``.

    Degrees outside [0, n-1] give an empty operator of the right shape.
    """
    lo = _layout(g, k).total if 0 <= k <= g.n else 0
    hi = _layout(g, k + 1).total if 0 <= k + 1 <= g.n else 0
    if not 0 <= k < g.n:
        D = sp.csr_matrix((hi, lo), dtype=np.int64)
    else:
        D = _D(g, k)[2]
    if bc == "essential":
        rows = free_mask(g, k + 1, bc) if hi else np.zeros(0, bool)
        cols = free_mask(g, k, bc) if lo else np.zeros(0, bool)
        D = D[rows][:, cols]
    return D.tocsr()


@dataclass
class OperatorBundle:
    """Assembled operators for one degree ``k`` (and one bc variant).

    ``D``, ``d_local`` and ``J`` are exact integer matrices; ``D`` is the
    differential restricted to free DOFs when ``bc == "essential"``.
    """

    k: int
    D: sp.csr_matrix
    d_local: sp.csr_matrix
    J: sp.csr_matrix
    M_k: MassMatrix
    M_k1: MassMatrix
    weights: str
    bc: str
    free_k: np.ndarray
    free_k1: np.ndarray

    @property
    def Df(self) -> sp.csr_matrix:
        return self.D.astype(np.float64)

    def codiff_apply(self, b):
        return self.M_k.solve(self.Df.T @ self.M_k1.apply(b))


def mixed_derivative(g: ForestGeometry, k: int, weights: str = "measure", bc: str = "natural") -> OperatorBundle:
    if not 0 <= k < g.n:
        raise ValueError(f"degree {k} outside [0, {g.n - 1}]")
    if bc not in BC_VARIANTS:
        raise ValueError(f"unknown boundary variant {bc!r}")
    dl, J, D = _D(g, k)
    fk, fk1 = free_mask(g, k, bc), free_mask(g, k + 1, bc)
    if bc == "essential":
        D = D[fk1][:, fk]
        dl = dl[fk1][:, fk]
        J = J[fk1][:, fk]
    return OperatorBundle(
        k=k,
        D=D.tocsr(),
        d_local=dl.tocsr(),
        J=J.tocsr(),
        M_k=mass(g, k, weights, bc),
        M_k1=mass(g, k + 1, weights, bc),
        weights=weights,
        bc=bc,
        free_k=fk,
        free_k1=fk1,
    )


def codifferential_apply(bundle: OperatorBundle, b: MixedForm) -> MixedForm:
    if b.k != bundle.k + 1:
        raise ValueError(f"expected a degree-{bundle.k + 1} form, got degree {b.k}")
    return MixedForm(bundle.k, bundle.codiff_apply(b.coefficients))


def stokes_check(g: ForestGeometry, a: MixedForm) -> tuple[float, float]:
    """Discrete integral of D a over the forest versus the dirichlet boundary term."""
    if a.k != g.n - 1:
        raise ValueError(f"Stokes check needs degree {g.n - 1}, got {a.k}")
    ln = _layout(g, g.n)
    l1 = _layout(g, g.n - 1)
    # or^T D is an exact integer row, so cancellation on closed forests is exact
    orient = np.zeros(ln.total, dtype=np.int64)
    for i in g.roots:
        orient[ln.block(i)] = g.meshes[g.nodes[i].mesh_ref].top_orientation
    w = _D(g, g.n - 1)[2].T @ orient
    nz = np.flatnonzero(w)
    lhs = math.fsum(w[nz] * a.coefficients[nz])
    terms = []
    for i in g.roots:
        mesh = g.meshes[g.nodes[i].mesh_ref]
        if mesh.dim == 0 or l1.counts[i] == 0:
            continue
        vals = a.coefficients[l1.block(i)]
        for f in mesh.dirichlet_facets.tolist():
            terms.append(mesh.boundary_orientation(f) * vals[f])
    return float(lhs), float(math.fsum(terms))


def export_operators(g: ForestGeometry, k: int, out_dir, weights: str = "measure", bc: str = "natural") -> list:
    """Write D, J, d_local, M_k in Matrix Market format; returns the paths."""
    b = mixed_derivative(g, k, weights, bc)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, mat in (("D", b.D), ("J", b.J), ("dlocal", b.d_local), ("M", b.M_k.matrix)):
        p = out / f"{g.hash}_{name}_{k}.mtx"
        scipy.io.mmwrite(str(p), sp.coo_matrix(mat))
        paths.append(p)
    return paths
