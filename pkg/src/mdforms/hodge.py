"""Cohomology, harmonic forms and Hodge decompositions."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cochains import MixedForm
from .geometry import ForestGeometry
from .operators import free_mask, integer_derivative, mass
from .rank import exact_rank

DENSE_LIMIT = 2500


class SolverError(RuntimeError):
    """An iterative or eigen solve failed to reach its tolerance."""


def _dim(g, k, bc):
    if not 0 <= k <= g.n:
        return 0
    return int(free_mask(g, k, bc).sum())


@lru_cache(maxsize=64)
def _ranks(g: ForestGeometry, bc: str) -> tuple:
    return tuple(exact_rank(integer_derivative(g, k, bc)) for k in range(g.n))


def betti_numbers(g: ForestGeometry, bc: str = "natural", reduced: bool = False) -> list:
    """Cohomology dimensions beta_0..beta_n from exact integer ranks.

    ``reduced=True`` (natural variant only) prepends the inclusion of the
    constants, lowering beta_0 by one.
    """
    ranks = _ranks(g, bc)
    out = []
    for k in range(g.n + 1):
        r_out = ranks[k] if k < g.n else 0
        r_in = ranks[k - 1] if k > 0 else 0
        out.append(_dim(g, k, bc) - r_out - r_in)
    if reduced and bc == "natural" and out[0] > 0:
        out[0] -= 1
    return out


def _float_D(g, k, bc):
    return integer_derivative(g, k, bc).astype(np.float64)


def hodge_laplacian(g: ForestGeometry, k: int, bc: str = "natural", weights: str = "measure"):
    """Return ``(L, m)`` with L the symmetric Hodge Laplacian and m = diag(M_k)."""
    m = mass(g, k, weights, bc).diag
    L = sp.csr_matrix((len(m), len(m)))
    if k < g.n:
        D = _float_D(g, k, bc)
        L = L + D.T @ sp.diags(mass(g, k + 1, weights, bc).diag) @ D
    if k > 0:
        Dm = _float_D(g, k - 1, bc)
        inv = 1.0 / mass(g, k - 1, weights, bc).diag
        B = sp.diags(m) @ Dm
        L = L + B @ sp.diags(inv) @ B.T
    return L.tocsr(), m


def _smallest_pairs(L, m, count: int):
    """Smallest ``count`` eigenpairs of L v = lam M v with M = diag(m)."""
    size = len(m)
    count = min(count, size)
    if count <= 0:
        return np.zeros(0), np.zeros((size, 0))
    s = 1.0 / np.sqrt(m)
    S = sp.diags(s) @ L @ sp.diags(s)
    if size <= DENSE_LIMIT or count >= size - 1:
        lam, V = scipy.linalg.eigh(S.toarray())
        lam, V = lam[:count], V[:, :count]
    else:
        scale = max(abs(S).sum(axis=1).max(), 1.0)
        try:
            lam, V = spla.eigsh(S.tocsc(), k=count, sigma=-1e-6 * scale, which="LM", tol=1e-12)
        except spla.ArpackNoConvergence as exc:
            raise SolverError(f"eigen solver did not converge: {exc}") from exc
        order = np.argsort(lam)
        lam, V = lam[order], V[:, order]
    return lam, s[:, None] * V


def _embed(g, k, bc, vec):
    mask = free_mask(g, k, bc)
    out = np.zeros(len(mask))
    out[mask] = vec
    return out


def harmonic_basis(g: ForestGeometry, k: int, bc: str = "natural", weights: str = "measure") -> list:
    """M_k-orthonormal basis of the discrete harmonic space (full-length forms)."""
    beta = betti_numbers(g, bc)[k]
    if beta == 0:
        return []
    H = harmonic_matrix(g, k, bc, weights)
    return [MixedForm(k, _embed(g, k, bc, H[:, c])) for c in range(H.shape[1])]


def harmonic_matrix(g, k, bc="natural", weights="measure", beta=None) -> np.ndarray:
    """Harmonic basis as columns over the free DOFs."""
    if beta is None:
        beta = betti_numbers(g, bc)[k]
    L, m = hodge_laplacian(g, k, bc, weights)
    if beta == 0:
        return np.zeros((len(m), 0))
    lam, V = _smallest_pairs(L, m, beta)
    V = _refine(L, m, V)
    return _m_orthonormal(V, m)


def _m_orthonormal(V, m):
    R = np.linalg.cholesky(V.T @ (m[:, None] * V))
    return np.linalg.solve(R, V.T).T


def _refine(L, m, V, steps=2):
    """Inverse iteration with a tiny shift to strip non-harmonic residue."""
    shift = 1e-8 * max(abs(L).sum(axis=1).max() / m.min(), 1.0)
    lu = spla.splu((L + shift * sp.diags(m)).tocsc())
    for _ in range(steps):
        V = _m_orthonormal(V, m)
        V = lu.solve(m[:, None] * V)
    return V


def poincare_constant(g: ForestGeometry, k: int, bc: str = "natural", weights: str = "measure") -> float:
    """C = lambda^-1/2 for the first nonzero generalised eigenvalue of (L_k, M_k)."""
    beta = betti_numbers(g, bc)[k]
    L, m = hodge_laplacian(g, k, bc, weights)
    if beta >= len(m):
        return 0.0
    lam, _ = _smallest_pairs(L, m, beta + 1)
    gap = lam[beta]
    if not np.isfinite(gap) or gap <= 0:
        raise SolverError(f"nonpositive first nonzero eigenvalue {gap}")
    return float(1.0 / np.sqrt(gap))


@dataclass
class HodgeDecomposition:
    k: int
    a_d: MixedForm
    a_dstar: MixedForm
    a_0: MixedForm
    b_d: MixedForm | None
    b_dstar: MixedForm | None
    bc_variant: str
    residuals: dict = field(default_factory=dict)


def _lstsq(A, rhs):
    if A.shape[1] == 0 or A.shape[0] == 0:
        return np.zeros(A.shape[1])
    if max(A.shape) <= 4 * DENSE_LIMIT:
        x, *_ = np.linalg.lstsq(A.toarray(), rhs, rcond=None)
        return x
    res = spla.lsqr(A, rhs, atol=1e-15, btol=1e-15, iter_lim=20 * max(A.shape))
    if res[1] not in (1, 2, 4, 5):
        raise SolverError(f"lsqr stopped with flag {res[1]}, residual {res[3]:.3e}")
    return res[0]


def hodge_decompose(g: ForestGeometry, a: MixedForm, bc: str = "natural", weights: str = "measure") -> HodgeDecomposition:
    """Split ``a`` into exact, coexact and harmonic parts, M_k-orthogonally."""
    k = a.k
    mask = free_mask(g, k, bc)
    x = np.asarray(a.coefficients, dtype=np.float64)
    if len(x) != len(mask):
        raise ValueError(f"form has {len(x)} coefficients, layout has {len(mask)}")
    if bc == "essential" and np.any(x[~mask] != 0):
        raise ValueError("essential variant needs zero values on the dirichlet part")
    x = x[mask]
    m = mass(g, k, weights, bc).diag
    sq = np.sqrt(m)

    b_d = b_ds = None
    a_d = np.zeros_like(x)
    a_ds = np.zeros_like(x)
    if k > 0:
        D = _float_D(g, k - 1, bc)
        coef = _lstsq(sp.diags(sq) @ D, sq * x)
        a_d = D @ coef
        b_d = MixedForm(k - 1, _embed(g, k - 1, bc, coef))
    if k < g.n:
        D = _float_D(g, k, bc)
        m1 = mass(g, k + 1, weights, bc).diag
        op = sp.diags(1.0 / sq) @ D.T @ sp.diags(m1)
        coef = _lstsq(op, sq * x)
        a_ds = (D.T @ (m1 * coef)) / m
        b_ds = MixedForm(k + 1, _embed(g, k + 1, bc, coef))
    a0 = x - a_d - a_ds

    def ip(u, v):
        return float(u @ (m * v))

    nrm = np.sqrt(max(ip(x, x), 0.0)) or 1.0
    residuals = {
        "reconstruction": float(np.sqrt(ip(x - a_d - a_ds - a0, x - a_d - a_ds - a0)) / nrm),
        "orth_d_dstar": abs(ip(a_d, a_ds)) / nrm**2,
        "orth_d_0": abs(ip(a_d, a0)) / nrm**2,
        "orth_dstar_0": abs(ip(a_ds, a0)) / nrm**2,
    }
    # a_0 must be closed and coclosed
    if k < g.n:
        m1 = mass(g, k + 1, weights, bc).diag
        r = _float_D(g, k, bc) @ a0
        residuals["harmonic_d"] = float(np.sqrt(r @ (m1 * r))) / nrm
    if k > 0:
        mm = mass(g, k - 1, weights, bc).diag
        r = (_float_D(g, k - 1, bc).T @ (m * a0)) / mm
        residuals["harmonic_dstar"] = float(np.sqrt(r @ (mm * r))) / nrm
    return HodgeDecomposition(
        k=k,
        a_d=MixedForm(k, _embed(g, k, bc, a_d)),
        a_dstar=MixedForm(k, _embed(g, k, bc, a_ds)),
        a_0=MixedForm(k, _embed(g, k, bc, a0)),
        b_d=b_d,
        b_dstar=b_ds,
        bc_variant=bc,
        residuals=residuals,
    )
