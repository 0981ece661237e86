"""Mixed-form Hodge-Laplace solver with SPD coefficients.

Unknowns are ``sigma`` at degree k-1 and ``a`` at degree k. With
``A = M (M^r)^-1 M``, ``B = M_k D_{k-1}``, ``K = D_k^T M^{r*} D_k`` and the
harmonic deflation ``P = M_k H H^T M_k`` the solver assembles::

    [ A    -B^T     ] [sigma]   [     0       ]
    [ -B   -K - P   ] [  a  ] = [ -M_k f_proj ]

which is symmetric and nonsingular; its solution has ``sigma = r d* a`` and
``a`` orthogonal to the harmonic forms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cochains import MixedForm, weighted_mass
from .geometry import ForestGeometry
from .hodge import SolverError, harmonic_matrix
from .operators import free_mask, integer_derivative, layout, mass

VTK_CELL = {0: 1, 1: 3, 2: 5, 3: 10}


@dataclass
class CoefficientField:
    """Per-node coefficients ``r`` (degree k-1 side) and ``r*`` (degree k+1 side).

    Overrides map a node id to a scalar or to a vector over that node's
    cochains; every other node uses the defaults.
    """

    k: int
    default_r: float = 1.0
    default_rstar: float = 1.0
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = [self.default_r, self.default_rstar]
        for ov in self.overrides.values():
            vals.extend(np.atleast_1d(ov.get("r", 1.0)).tolist())
            vals.extend(np.atleast_1d(ov.get("rstar", 1.0)).tolist())
        if not all(np.isfinite(v) and v > 0 for v in vals):
            raise ValueError("coefficients must be finite and strictly positive")

    def _scale(self, key, default):
        def fn(j, size):
            val = self.overrides.get(j, {}).get(key, default)
            arr = np.broadcast_to(np.asarray(val, dtype=np.float64), (size,))
            return arr

        return fn

    @property
    def r(self):
        return self._scale("r", self.default_r)

    @property
    def rstar(self):
        return self._scale("rstar", self.default_rstar)

    def lower_bound(self) -> float:
        vals = [self.default_r, self.default_rstar]
        for ov in self.overrides.values():
            for key in ("r", "rstar"):
                if key in ov:
                    vals.append(float(np.min(ov[key])))
        return float(min(vals))

    def scaled(self, factor: float) -> "CoefficientField":
        ov = {j: {key: np.asarray(v) * factor for key, v in o.items()} for j, o in self.overrides.items()}
        return CoefficientField(self.k, self.default_r * factor, self.default_rstar * factor, ov)


def coefficients_from_dict(doc: dict) -> CoefficientField:
    overrides = {}
    for ov in doc.get("overrides", []):
        entry = {key: ov[key] for key in ("r", "rstar") if key in ov}
        if not entry:
            raise ValueError(f"override for node {ov['node']} sets neither r nor rstar")
        overrides[int(ov["node"])] = entry
    return CoefficientField(int(doc["k"]), float(doc.get("default_r", 1.0)), float(doc.get("default_rstar", 1.0)), overrides)


def load_coefficients(path) -> CoefficientField:
    return coefficients_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class SolveReport:
    a: MixedForm
    sigma: MixedForm | None
    harmonic_removed: MixedForm
    residuals: dict
    energy: float
    iterations: int
    bc: str = "essential"


class _System:
    """Reduced-space pieces of the Hodge-Laplace problem at degree k."""

    def __init__(self, g, k, rfield, weights, bc):
        if not 0 <= k <= g.n:
            raise ValueError(f"degree {k} outside [0, {g.n}]")
        self.g, self.k, self.bc, self.weights = g, k, bc, weights
        self.m = mass(g, k, weights, bc).diag
        self.free = free_mask(g, k, bc)
        if k > 0:
            self.Dm = integer_derivative(g, k - 1, bc).astype(np.float64)
            self.mm = mass(g, k - 1, weights, bc).diag
            lo = layout(g, k - 1)
            self.mr = weighted_mass(g, lo, weights, rfield.r)[free_mask(g, k - 1, bc)]
        if k < g.n:
            self.Dp = integer_derivative(g, k, bc).astype(np.float64)
            hi = layout(g, k + 1)
            self.mrs = weighted_mass(g, hi, weights, rfield.rstar)[free_mask(g, k + 1, bc)]
        self.H = harmonic_matrix(g, k, bc, weights)

    @property
    def size(self):
        return len(self.m)

    def codiff(self, a):
        return (self.Dm.T @ (self.m * a)) / self.mm

    def quadratic(self) -> sp.csr_matrix:
        """Q with a^T Q a = (r d*a, d*a) + (r* D a, D a)."""
        Q = sp.csr_matrix((self.size, self.size))
        if self.k > 0:
            B = sp.diags(self.m) @ self.Dm
            Q = Q + B @ sp.diags(self.mr / self.mm**2) @ B.T
        if self.k < self.g.n:
            Q = Q + self.Dp.T @ sp.diags(self.mrs) @ self.Dp
        return Q.tocsr()

    def energy(self, a, f):
        val = 0.0
        if self.k > 0:
            s = self.codiff(a)
            val += 0.5 * s @ (self.mr * s)
        if self.k < self.g.n:
            da = self.Dp @ a
            val += 0.5 * da @ (self.mrs * da)
        return float(val - f @ (self.m * a))


def _reduce(sysm: _System, form: MixedForm | None, k: int) -> np.ndarray:
    if form is None:
        return np.zeros(sysm.size)
    if form.k != k:
        raise ValueError(f"expected degree {k}, got {form.k}")
    x = np.asarray(form.coefficients, dtype=np.float64)
    if len(x) != len(sysm.free):
        raise ValueError(f"form has {len(x)} coefficients, layout has {len(sysm.free)}")
    return x[sysm.free]


def _embed(mask, vec):
    out = np.zeros(len(mask))
    out[mask] = vec
    return out


def energy_functional(g: ForestGeometry, k: int, rfield: CoefficientField, weights="measure", bc="essential"):
    """Build J once; the returned callable takes full-length forms ``(a, f)``."""
    sysm = _System(g, k, rfield, weights, bc)

    def J(a: MixedForm, f: MixedForm) -> float:
        return sysm.energy(_reduce(sysm, a, k), _reduce(sysm, f, k))

    return J


def evaluate_functional(g: ForestGeometry, a: MixedForm, rfield: CoefficientField, f: MixedForm, weights="measure", bc="essential") -> float:
    """J(a) = 1/2 (r d*a, d*a) + 1/2 (r* Da, Da) - (f, a)."""
    if a.k != f.k:
        raise ValueError("degree mismatch between a and f")
    return energy_functional(g, a.k, rfield, weights, bc)(a, f)


def solve_hodge_laplace(
    g: ForestGeometry,
    k: int,
    rfield: CoefficientField,
    f: MixedForm | None = None,
    weights: str = "measure",
    bc: str = "essential",
    method: str = "direct",
    tol: float = 1e-10,
) -> SolveReport:
    """Minimise J over forms orthogonal to the harmonic space."""
    sysm = _System(g, k, rfield, weights, bc)
    m, H = sysm.m, sysm.H
    fr = _reduce(sysm, f, k)
    harm = H @ (H.T @ (m * fr))
    fp = fr - harm

    MH = m[:, None] * H
    n_a = sysm.size
    K = sysm.Dp.T @ sp.diags(sysm.mrs) @ sysm.Dp if k < g.n else sp.csr_matrix((n_a, n_a))
    lower = -(K + sp.csr_matrix(MH @ MH.T))
    if k > 0:
        A = sp.diags(sysm.mm**2 / sysm.mr)
        B = sp.diags(m) @ sysm.Dm
        S = sp.bmat([[A, -B.T], [-B, lower]], format="csc")
        n_s = A.shape[0]
    else:
        S = lower.tocsc()
        n_s = 0
    rhs = np.concatenate([np.zeros(n_s), -m * fp])

    iters = 0
    if not np.any(rhs):
        sol = np.zeros_like(rhs)
    elif method == "direct":
        sol = spla.spsolve(S, rhs)
    elif method == "minres":
        counter = {"n": 0}

        def cb(_x):
            counter["n"] += 1

        sol, info = spla.minres(S, rhs, rtol=tol, maxiter=20 * S.shape[0], callback=cb)
        iters = counter["n"]
        if info != 0:
            raise SolverError(f"MINRES stopped with info {info}")
    else:
        raise ValueError(f"unknown method {method!r}")
    if not np.all(np.isfinite(sol)):
        raise SolverError("linear solve produced non-finite values")
    res = np.linalg.norm(S @ sol - rhs) / max(np.linalg.norm(rhs), 1e-300)
    if np.any(rhs) and res > max(tol, 1e-10) * 1e2:
        raise SolverError(f"saddle residual {res:.3e} above tolerance")

    sigma, a = sol[:n_s], sol[n_s:]
    # weak-form residual vector: Q a - M f_proj
    el = sysm.quadratic() @ a - m * fp
    scale = max(np.linalg.norm(m * fp), np.linalg.norm(sysm.quadratic() @ a), 1e-300)
    residuals = {
        "saddle": float(res) if np.any(rhs) else 0.0,
        "euler_lagrange": float(np.linalg.norm(el) / scale) if np.any(rhs) else 0.0,
        "harmonic_orthogonality": float(np.abs(H.T @ (m * a)).max()) if H.shape[1] else 0.0,
        "harmonic_part_of_f": float(np.sqrt(harm @ (m * harm))),
    }
    return SolveReport(
        a=MixedForm(k, _embed(sysm.free, a)),
        sigma=MixedForm(k - 1, _embed(free_mask(g, k - 1, bc), sigma)) if k > 0 else None,
        harmonic_removed=MixedForm(k, _embed(sysm.free, harm)),
        residuals=residuals,
        energy=sysm.energy(a, fp),
        iterations=iters,
        bc=bc,
    )


def euler_lagrange_residuals(g, report: SolveReport, rfield, f, tests: np.ndarray, weights="measure") -> np.ndarray:
    """Relative weak-form residuals for each column of ``tests`` (full length)."""
    k = report.a.k
    sysm = _System(g, k, rfield, weights, report.bc)
    a = _reduce(sysm, report.a, k)
    fr = _reduce(sysm, f, k)
    fp = fr - sysm.H @ (sysm.H.T @ (sysm.m * fr))
    r = sysm.quadratic() @ a - sysm.m * fp
    T = tests[sysm.free]
    # the bilinear form is bounded by the G-norm; use it as the scale
    Q = sysm.quadratic()
    num = np.abs(r @ T)
    den = np.sqrt(np.einsum("ij,ij->j", T, Q @ T) + np.einsum("ij,ij->j", T, sysm.m[:, None] * T))
    nrm = np.sqrt(a @ (Q @ a) + fp @ (sysm.m * fp)) or 1.0
    return num / (den * nrm)


def coercivity_estimate(g: ForestGeometry, k: int, rfield: CoefficientField, weights="measure", bc="essential") -> float:
    """Smallest eigenvalue of Q against the graph-norm Gram matrix off the harmonics."""
    sysm = _System(g, k, rfield, weights, bc)
    n_a = sysm.size
    if n_a == 0:
        return float("inf")
    if n_a > 4000:
        raise SolverError("coercivity estimate is dense; problem too large")
    Q = sysm.quadratic().toarray()
    G = np.diag(sysm.m)
    if k < g.n:
        m1 = mass(g, k + 1, weights, bc).diag
        G += (sysm.Dp.T @ sp.diags(m1) @ sysm.Dp).toarray()
    if k > 0:
        B = sp.diags(sysm.m) @ sysm.Dm
        G += (B @ sp.diags(1.0 / sysm.mm) @ B.T).toarray()
    MH = sysm.m[:, None] * sysm.H
    Z = scipy.linalg.null_space(MH.T) if MH.shape[1] else np.eye(n_a)
    lam = scipy.linalg.eigh(Z.T @ Q @ Z, Z.T @ G @ Z, eigvals_only=True)
    return float(lam[0])


def write_vtk(g: ForestGeometry, form: MixedForm, prefix) -> list:
    """Legacy ASCII VTK per root mesh, cell data on the k_i-simplices."""
    lay = layout(g, form.k)
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in g.roots:
        if lay.counts[i] == 0:
            continue
        mesh = g.meshes[g.nodes[i].mesh_ref]
        ki = lay.local_degree[i]
        cells = mesh.simplices[ki]
        vals = form.coefficients[lay.block(i)]
        pts = np.zeros((mesh.n_vertices, 3))
        pts[:, : mesh.dim] = mesh.vertices
        lines = ["# vtk DataFile Version 3.0", f"root {i} degree {ki}", "ASCII", "DATASET UNSTRUCTURED_GRID"]
        lines.append(f"POINTS {len(pts)} double")
        lines += [" ".join(f"{x:.17g}" for x in p) for p in pts]
        lines.append(f"CELLS {len(cells)} {len(cells) * (ki + 2)}")
        lines += [" ".join(str(v) for v in [ki + 1, *c]) for c in cells]
        lines.append(f"CELL_TYPES {len(cells)}")
        lines += [str(VTK_CELL[ki])] * len(cells)
        lines += [f"CELL_DATA {len(cells)}", "SCALARS value double 1", "LOOKUP_TABLE default"]
        lines += [f"{v:.17g}" for v in vals]
        p = prefix.with_name(f"{prefix.name}_root{i}.vtk")
        p.write_text("\n".join(lines) + "\n", encoding="ascii")
        paths.append(p)
    return paths
