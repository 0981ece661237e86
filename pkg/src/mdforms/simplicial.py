"""Simplicial meshes in reference coordinates."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from . import _kernels

DIRICHLET = "dirichlet"


def _keys(rows: np.ndarray, base: int) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.int64)
    if rows.shape[1] == 0:
        return np.zeros(rows.shape[0], dtype=np.int64)
    key = np.zeros(rows.shape[0], dtype=np.int64)
    for c in range(rows.shape[1]):
        key = key * base + rows[:, c]
    return key


def permutation_sign(seq) -> int:
    """Sign of the permutation sorting ``seq`` (entries distinct)."""
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def _volume(points: np.ndarray) -> float:
    m = points.shape[0] - 1
    if m == 0:
        return 1.0
    e = points[1:] - points[0]
    det = np.linalg.det(e @ e.T)
    return float(np.sqrt(max(det, 0.0)) / np.prod(np.arange(1, m + 1)))


@dataclass(eq=False)
class SimplicialMesh:
    """A simplicial complex of dimension ``dim`` with coordinates in R^dim.

    ``simplices[p]`` is an ``(N_p, p + 1)`` integer array whose rows are sorted
    vertex tuples. ``boundary_labels`` maps a sorted facet tuple to either
    ``"dirichlet"`` or the integer id of the branch node covering it.
    """

    dim: int
    vertices: np.ndarray
    simplices: list
    boundary_labels: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=np.float64)
        if verts.ndim != 2:
            verts = verts.reshape(-1, self.dim) if self.dim else verts.reshape(len(verts), 0)
        self.vertices = verts
        simp = []
        for p in range(self.dim + 1):
            arr = np.asarray(self.simplices[p], dtype=np.int64).reshape(-1, p + 1)
            simp.append(np.sort(arr, axis=1))
        self.simplices = simp

    # -- counting and lookup -------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    def count(self, p: int) -> int:
        if p < 0 or p > self.dim:
            return 0
        return self.simplices[p].shape[0]

    @cached_property
    def _lookup(self):
        out = []
        base = max(self.n_vertices, 1)
        for p in range(self.dim + 1):
            keys = _keys(self.simplices[p], base)
            order = np.argsort(keys, kind="stable")
            out.append((keys[order], order))
        return out

    def find(self, p: int, rows) -> np.ndarray:
        """Indices of the given sorted p-simplices, -1 where absent."""
        rows = np.asarray(rows, dtype=np.int64).reshape(-1, p + 1)
        keys, order = self._lookup[p]
        q = _keys(rows, max(self.n_vertices, 1))
        pos = np.searchsorted(keys, q)
        pos = np.clip(pos, 0, max(len(keys) - 1, 0))
        if len(keys) == 0:
            return np.full(len(q), -1, dtype=np.int64)
        hit = keys[pos] == q
        return np.where(hit, order[pos], -1)

    def index(self, p: int, simplex) -> int:
        return int(self.find(p, [sorted(simplex)])[0])

    # -- topology ------------------------------------------------------------
    def faces_of(self, p: int) -> tuple[np.ndarray, np.ndarray]:
        """Face indices and signs of every p-simplex, shape ``(N_p, p + 1)``.

        Column i holds the face omitting vertex i, with sign (-1)^i.
        """
        s = self.simplices[p]
        idx = np.empty((s.shape[0], p + 1), dtype=np.int64)
        for i in range(p + 1):
            idx[:, i] = self.find(p - 1, np.delete(s, i, axis=1))
        signs = np.array([(-1) ** i for i in range(p + 1)], dtype=np.int64)
        return idx, np.broadcast_to(signs, idx.shape)

    def coboundary(self, p: int) -> sp.csr_matrix:
        """Signed incidence from p-cochains to (p+1)-cochains."""
        if p < 0 or p >= self.dim:
            raise ValueError(f"coboundary degree {p} out of range for a {self.dim}-mesh")
        idx, signs = self.faces_of(p + 1)
        n = idx.shape[0]
        rows = np.repeat(np.arange(n), p + 2)
        mat = sp.csr_matrix(
            (signs.ravel().astype(np.int64), (rows, idx.ravel())),
            shape=(n, self.count(p)),
        )
        return mat

    def missing_faces(self) -> list:
        bad = []
        for p in range(1, self.dim + 1):
            idx, _ = self.faces_of(p)
            rows = np.flatnonzero((idx < 0).any(axis=1))
            bad.extend((p, tuple(int(v) for v in self.simplices[p][r])) for r in rows)
        return bad

    @cached_property
    def facet_cofaces(self) -> list:
        """For each (dim-1)-simplex, the list of (top index, incidence sign)."""
        out = [[] for _ in range(self.count(self.dim - 1))]
        if self.dim == 0:
            return out
        idx, signs = self.faces_of(self.dim)
        for t in range(idx.shape[0]):
            for i in range(self.dim + 1):
                f = idx[t, i]
                if f >= 0:
                    out[f].append((t, int(signs[t, i])))
        return out

    @cached_property
    def boundary_facets(self) -> np.ndarray:
        if self.dim == 0:
            return np.zeros(0, dtype=np.int64)
        return np.array(
            [f for f, cof in enumerate(self.facet_cofaces) if len(cof) == 1], dtype=np.int64
        )

    # -- geometry ------------------------------------------------------------
    def measures(self, p: int) -> np.ndarray:
        s = self.simplices[p]
        if p == 0:
            return np.ones(s.shape[0])
        return np.array([_volume(self.vertices[row]) for row in s])

    @cached_property
    def top_orientation(self) -> np.ndarray:
        """Sign of det(v_i - v_0) for each top simplex; +1 for 0-d meshes."""
        s = self.simplices[self.dim]
        if self.dim == 0:
            return np.ones(s.shape[0], dtype=np.int64)
        pts = self.vertices[s]
        e = pts[:, 1:, :] - pts[:, :1, :]
        return np.sign(np.linalg.det(e)).astype(np.int64)

    def boundary_orientation(self, facet: int) -> int:
        """Outward-induced orientation sign of a boundary facet."""
        (t, sign), = self.facet_cofaces[facet]
        return int(self.top_orientation[t] * sign)

    def dual_weights(self, p: int) -> np.ndarray:
        """Barycentric Hodge-star diagonal |sigma*| / |sigma| for p-simplices."""
        if self.dim == 0:
            return np.ones(self.count(p))
        top = self.simplices[self.dim]
        pieces = _kernels.dual_volumes_per_simplex(self.vertices, top, p)
        local = list(combinations(range(self.dim + 1), p + 1))
        dual = np.zeros(self.count(p))
        for c, face in enumerate(local):
            gidx = self.find(p, top[:, list(face)])
            np.add.at(dual, gidx, pieces[:, c])
        return dual / self.measures(p)

    # -- boundary labels -----------------------------------------------------
    def labelled_facets(self, label) -> np.ndarray:
        rows = [f for f, lab in self.boundary_labels.items() if lab == label]
        if not rows:
            return np.zeros(0, dtype=np.int64)
        return self.find(self.dim - 1, rows)

    @cached_property
    def dirichlet_facets(self) -> np.ndarray:
        return self.labelled_facets(DIRICHLET)

    def closure(self, p: int, facets: np.ndarray) -> np.ndarray:
        """Sorted indices of p-simplices lying in the closure of given facets."""
        if len(facets) == 0 or p > self.dim - 1:
            return np.zeros(0, dtype=np.int64)
        rows = self.simplices[self.dim - 1][facets]
        subs = [rows[:, list(c)] for c in combinations(range(self.dim), p + 1)]
        return np.unique(self.find(p, np.concatenate(subs)))

    @cached_property
    def _dirichlet_closure(self):
        return [self.closure(p, self.dirichlet_facets) for p in range(self.dim + 1)]

    def dirichlet_closure(self, p: int) -> np.ndarray:
        if p < 0 or p > self.dim:
            return np.zeros(0, dtype=np.int64)
        return self._dirichlet_closure[p]
