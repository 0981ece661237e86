"""DOF layouts, restrictions and mass matrices for mixed-dimensional forms.

Degrees of freedom live on roots only. A node ``j`` in the tree of root ``i``
carries local degree ``k_j = k - (n - d_i)``; branch values are signed
pullbacks of the root cochain and are never stored.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .geometry import ForestGeometry

WEIGHT_MODES = ("measure", "unit")


@dataclass(frozen=True)
class DegreeLayout:
    """Root DOF layout for global degree ``k``.

    Attributes:
        k: Global degree.
        n: Ambient dimension.
        local_degree: Node id to local degree ``k_j``.
        counts: Root id to number of ``k_i``-simplices (0 if void).
        offsets: Root id to the first global DOF index of that root.
        total: Total number of root DOFs.
    """

    k: int
    n: int
    local_degree: dict
    counts: dict
    offsets: dict
    total: int

    def block(self, i: int) -> slice:
        return slice(self.offsets[i], self.offsets[i] + self.counts[i])

    def is_void(self, g: ForestGeometry, j: int) -> bool:
        kj = self.local_degree[j]
        return not 0 <= kj <= g.nodes[j].dim

    def owner(self) -> np.ndarray:
        """Root id owning each DOF."""
        out = np.zeros(self.total, dtype=np.int64)
        for i, off in self.offsets.items():
            out[off : off + self.counts[i]] = i
        return out


@dataclass
class MixedForm:
    """Coefficient vector over the root DOFs of ``DegreeLayout(k)``."""

    k: int
    coefficients: np.ndarray

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=np.float64)

    def __len__(self):
        return self.coefficients.shape[0]


@dataclass
class MassMatrix:
    """Diagonal SPD mass matrix over root DOFs."""

    k: int
    diag: np.ndarray

    @property
    def matrix(self) -> sp.csr_matrix:
        return sp.diags(self.diag, format="csr")

    def restrict(self, mask: np.ndarray) -> "MassMatrix":
        return MassMatrix(self.k, self.diag[mask])

    def apply(self, x):
        return self.diag[:, None] * x if np.ndim(x) == 2 else self.diag * x

    def solve(self, x):
        return x / self.diag[:, None] if np.ndim(x) == 2 else x / self.diag


def degree_layout(g: ForestGeometry, k: int) -> DegreeLayout:
    if not 0 <= k <= g.n:
        raise ValueError(f"degree {k} outside [0, {g.n}]")
    local = {j: k - (g.n - g.root_dim(j)) for j in g.nodes}
    counts, offsets, off = {}, {}, 0
    for i in g.roots:
        ki = local[i]
        mesh = g.meshes[g.nodes[i].mesh_ref]
        counts[i] = mesh.count(ki) if 0 <= ki <= g.nodes[i].dim else 0
        offsets[i] = off
        off += counts[i]
    return DegreeLayout(k, g.n, local, counts, offsets, off)


def path_orientation(g: ForestGeometry, j: int) -> int:
    sign = 1
    while not g.nodes[j].is_root:
        sign *= g.maps[j].orientation
        j = g.nodes[j].parent
    return sign


def pullback_matrix(g: ForestGeometry, layout: DegreeLayout, j: int) -> sp.csr_matrix:
    """Unsigned-orientation pullback from tree-root DOFs to node-j cochains."""
    kj = layout.local_degree[j]
    if layout.is_void(g, j):
        return sp.csr_matrix((0, layout.total))
    i = g.nodes[j].tree_root
    cols, signs = g.pullback(j, kj)
    if (cols < 0).any():
        raise ValueError(f"node {j}: composite map does not land on simplices")
    rows = np.arange(len(cols))
    return sp.csr_matrix(
        (signs.astype(np.float64), (rows, cols + layout.offsets[i])),
        shape=(len(cols), layout.total),
    )


def restriction_operator(g: ForestGeometry, layout: DegreeLayout, j: int) -> sp.csr_matrix:
    """Signed 0/+-1 restriction R_j from root DOFs to node-j cochains."""
    return path_orientation(g, j) * pullback_matrix(g, layout, j)


def node_weights(g: ForestGeometry, j: int, kj: int, weights: str) -> np.ndarray:
    mesh = g.mesh_of(j)
    if weights == "unit":
        return np.ones(mesh.count(kj))
    if weights == "measure":
        return mesh.dual_weights(kj)
    raise ValueError(f"unknown weights mode {weights!r}")


def weighted_mass(g, layout, weights: str, scale=None) -> np.ndarray:
    """Diagonal of sum_j R_j^T diag(scale_j * w_j) R_j over nonvoid nodes."""
    diag = np.zeros(layout.total)
    for j in sorted(g.nodes):
        if layout.is_void(g, j):
            continue
        kj = layout.local_degree[j]
        w = node_weights(g, j, kj, weights)
        if scale is not None:
            w = w * scale(j, len(w))
        cols, _ = g.pullback(j, kj)
        np.add.at(diag, cols + layout.offsets[g.nodes[j].tree_root], w)
    return diag


def mass_matrix(g: ForestGeometry, layout: DegreeLayout, weights: str = "measure") -> MassMatrix:
    return MassMatrix(layout.k, weighted_mass(g, layout, weights))


def inner_product(a: MixedForm, b: MixedForm, M: MassMatrix) -> float:
    if a.k != b.k or a.k != M.k:
        raise ValueError(f"degree mismatch: {a.k}, {b.k}, {M.k}")
    return float(a.coefficients @ M.apply(b.coefficients))


def norm_l2(a: MixedForm, M: MassMatrix) -> float:
    return float(np.sqrt(max(inner_product(a, a, M), 0.0)))


def essential_mask(g: ForestGeometry, layout: DegreeLayout) -> np.ndarray:
    """True for DOFs off the closure of dirichlet facets."""
    free = np.ones(layout.total, dtype=bool)
    for i in g.roots:
        if layout.counts[i] == 0:
            continue
        mesh = g.meshes[g.nodes[i].mesh_ref]
        fixed = mesh.dirichlet_closure(layout.local_degree[i])
        free[layout.offsets[i] + fixed] = False
    return free


# -- CSV exchange ---------------------------------------------------------------


def write_form(path, form: MixedForm, geometry_hash: str) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dof_index", "value"])
        for idx, val in enumerate(form.coefficients):
            w.writerow([idx, f"{float(val):.17g}"])
    sidecar = {"k": int(form.k), "geometry_hash": geometry_hash}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, sort_keys=True) + "\n")


def read_form(path) -> tuple[MixedForm, dict]:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    idx, vals = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["dof_index", "value"]:
            raise ValueError(f"{path}: expected header dof_index,value")
        for row in reader:
            if row:
                idx.append(int(row[0]))
                vals.append(float(row[1]))
    coeffs = np.zeros(len(idx))
    coeffs[np.asarray(idx, dtype=np.int64)] = vals
    return MixedForm(int(meta["k"]), coeffs), meta
