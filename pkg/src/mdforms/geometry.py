"""Forest geometries: parsing, derived neighbour indexes and conformity checks.

A geometry file is JSON with four normative top-level fields::

    {"n": 2,
     "nodes":  [{"id": 1, "dim": 2, "root": true, "tree": 1, "s": 1,
                 "parent": 0, "mesh": "square"}, ...],
     "meshes": {"square": {"dim": 2, "vertices": [[0, 0], ...],
                           "simplices": {"0": [[0], ...], "1": ..., "2": ...},
                           "boundary_labels": [{"facet": [0, 1],
                                                "label": "dirichlet"}, ...]}},
     "maps":   [{"branch": 5, "vertex_map": [[0, 12], [1, 13]],
                 "orientation": -1}, ...]}

A branch ``j`` references the mesh of its target root ``s_j``. Its
``vertex_map`` pairs ``[target vertex, parent vertex]`` where the parent vertex
lives in the parent's mesh (the tree root's mesh at depth one, otherwise the
mesh of the parent's own target). An optional ``"meta"`` object is carried
along untouched.
"""

from __future__ import annotations

import hashlib
import json
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .simplicial import DIRICHLET, SimplicialMesh, permutation_sign


class ParseError(ValueError):
    """Malformed geometry input."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


@dataclass(frozen=True)
class NodeRecord:
    node_id: int
    dim: int
    is_root: bool
    tree_root: int
    s_target: int
    parent: int
    mesh_ref: str


@dataclass(frozen=True)
class IdentificationMap:
    branch_node: int
    vertex_map: np.ndarray  # (m, 2): target-mesh vertex, parent-mesh vertex
    orientation: int

    def as_array(self, n_target: int) -> np.ndarray:
        out = np.full(n_target, -1, dtype=np.int64)
        out[self.vertex_map[:, 0]] = self.vertex_map[:, 1]
        return out


@dataclass(frozen=True)
class Violation:
    kind: str
    nodes: tuple
    detail: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "nodes": list(self.nodes), "detail": self.detail}


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def of_kind(self, kind: str) -> list:
        return [v for v in self.violations if v.kind == kind]

    def to_dict(self) -> dict:
        return {
            "conforming": self.ok,
            "violations": [v.to_dict() for v in self.violations],
        }


class ForestGeometry:
    """Parsed forest with derived index sets. Treat as immutable."""

    def __init__(self, n: int, nodes: dict, meshes: dict, maps: dict, document: dict):
        self.n = n
        self.nodes = nodes
        self.meshes = meshes
        self.maps = maps
        self.document = document
        self.meta = document.get("meta", {})
        self._index()

    # -- basic accessors -----------------------------------------------------
    @property
    def roots(self) -> list:
        return sorted(j for j, nd in self.nodes.items() if nd.is_root)

    @property
    def branches(self) -> list:
        return sorted(j for j, nd in self.nodes.items() if not nd.is_root)

    def mesh_of(self, j: int) -> SimplicialMesh:
        """Mesh carrying node j (its target root's mesh)."""
        return self.meshes[self.nodes[self.nodes[j].s_target].mesh_ref]

    def parent_mesh(self, j: int) -> SimplicialMesh:
        return self.mesh_of(self.nodes[j].parent)

    def root_dim(self, j: int) -> int:
        return self.nodes[self.nodes[j].tree_root].dim

    @property
    def hash(self) -> str:
        return geometry_hash(self.document)

    def is_closed(self) -> bool:
        return all(len(self.meshes[self.nodes[i].mesh_ref].dirichlet_facets) == 0 for i in self.roots)

    # -- derived indexes -----------------------------------------------------
    def _index(self):
        nodes = self.nodes
        self.children = defaultdict(list)
        for j in self.branches:
            self.children[nodes[j].parent].append(j)

        self.depth = {}
        for j in sorted(nodes):
            d, cur, seen = 0, j, set()
            while not nodes[cur].is_root and cur not in seen:
                seen.add(cur)
                cur = nodes[cur].parent
                d += 1
                if cur not in nodes:
                    break
            self.depth[j] = d

        # composite vertex maps into the tree root's mesh, shallow nodes first
        self.psi = {}
        for j in sorted(nodes, key=lambda q: (self.depth[q], q)):
            nd = nodes[j]
            mesh = self.mesh_of(j)
            if nd.is_root:
                self.psi[j] = np.arange(mesh.n_vertices, dtype=np.int64)
                continue
            local = self.maps[j].as_array(mesh.n_vertices)
            up = self.psi.get(nd.parent)
            if up is None or (local < 0).any() or (local >= len(up)).any():
                self.psi[j] = np.full(mesh.n_vertices, -1, dtype=np.int64)
            else:
                self.psi[j] = up[local]

        self.s_inverse = defaultdict(list)
        for j in self.branches:
            self.s_inverse[nodes[j].s_target].append(j)

        # composite-map lookup per tree
        self._by_map = {}
        for j in self.branches:
            nd = nodes[j]
            key = (nd.tree_root, nd.s_target, tuple(int(v) for v in self.psi[j]))
            self._by_map.setdefault(key, j)

        self.gamma_inverse = {}
        self.unmatched = {}
        for i in self.roots:
            d = nodes[i].dim
            self.gamma_inverse[i] = [
                (l, self.maps[l].orientation)
                for l in sorted(self.s_inverse[i])
                if nodes[nodes[l].tree_root].dim == d + 1 and self.depth[l] == 1
            ]
        for l in self.branches:
            self.gamma_inverse[l], self.unmatched[l] = self._branch_gamma_inverse(l)

        self.gamma = defaultdict(list)
        for j, lst in self.gamma_inverse.items():
            for l, _ in lst:
                self.gamma[l].append(j)

        self.J_up = {}
        for j in nodes:
            p = nodes[j].parent
            self.J_up[j] = [p] if (not nodes[j].is_root and nodes[p].dim == nodes[j].dim + 1) else []

    def _branch_gamma_inverse(self, l: int):
        """Nodes reached by pushing the root-level jump of root(l) through l."""
        nd = self.nodes[l]
        acc = defaultdict(int)
        for m, eps in self.gamma_inverse.get(nd.tree_root, []):
            pm = self.psi[m]
            pl = self.psi[l]
            if (pl < 0).any() or (pm < 0).any() or pl.max() >= len(pm):
                continue
            acc[(self.nodes[m].tree_root, tuple(int(v) for v in pm[pl]))] += eps
        found, missing = [], []
        for (tree, comp), sign in sorted(acc.items()):
            if sign == 0:
                continue
            hit = self._by_map.get((tree, nd.s_target, comp))
            if hit is None:
                missing.append((tree, comp, sign))
            else:
                found.append((hit, sign))
        return sorted(found), missing

    # -- pullbacks -----------------------------------------------------------
    def pullback(self, j: int, p: int):
        """Column indices and signs of the p-cochain pullback along psi_j.

        Row t of the pullback reads the tree-root cochain at ``cols[t]`` with
        sign ``signs[t]``; entries are -1 where the image is not a simplex.
        """
        mesh = self.mesh_of(j)
        root_mesh = self.meshes[self.nodes[self.nodes[j].tree_root].mesh_ref]
        img = self.psi[j][mesh.simplices[p]]
        signs = np.array([permutation_sign(row) for row in img], dtype=np.int64)
        cols = root_mesh.find(p, np.sort(img, axis=1)) if img.size else np.zeros(0, np.int64)
        return cols, signs


# ---------------------------------------------------------------------------
# parsing


def geometry_hash(document: dict) -> str:
    canon = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _require(obj, key, where, kind):
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(f"missing field '{key}'", field=where)
    val = obj[key]
    if kind is int and (isinstance(val, bool) or not isinstance(val, int)):
        raise ParseError(f"expected integer for '{key}'", field=f"{where}.{key}")
    if kind is bool and not isinstance(val, bool):
        raise ParseError(f"expected boolean for '{key}'", field=f"{where}.{key}")
    if kind is str and not isinstance(val, str):
        raise ParseError(f"expected string for '{key}'", field=f"{where}.{key}")
    return val


def _parse_mesh(name: str, obj: dict) -> SimplicialMesh:
    where = f"meshes.{name}"
    dim = _require(obj, "dim", where, int)
    if dim < 0:
        raise ParseError("negative mesh dimension", field=f"{where}.dim")
    verts = obj.get("vertices")
    if not isinstance(verts, list):
        raise ParseError("vertices must be a list", field=f"{where}.vertices")
    try:
        coords = np.array(verts, dtype=np.float64).reshape(len(verts), dim)
    except (ValueError, TypeError) as exc:
        raise ParseError(f"vertex coordinates must have length {dim}", field=f"{where}.vertices") from exc
    simp_obj = obj.get("simplices")
    if not isinstance(simp_obj, dict):
        raise ParseError("simplices must be an object", field=f"{where}.simplices")
    simplices = []
    nv = coords.shape[0]
    for p in range(dim + 1):
        rows = simp_obj.get(str(p))
        fld = f"{where}.simplices.{p}"
        if rows is None:
            raise ParseError(f"missing {p}-simplices", field=fld)
        for r, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != p + 1:
                raise ParseError(f"non-simplicial cell {row!r}: expected {p + 1} vertices", field=f"{fld}[{r}]")
            if len(set(row)) != p + 1:
                raise ParseError(f"degenerate cell {row!r}", field=f"{fld}[{r}]")
            if any((not isinstance(v, int)) or v < 0 or v >= nv for v in row):
                raise ParseError(f"vertex index out of range in {row!r}", field=f"{fld}[{r}]")
        simplices.append(np.array(rows, dtype=np.int64).reshape(-1, p + 1))
    extra = set(simp_obj) - {str(p) for p in range(dim + 1)}
    if extra:
        raise ParseError(f"simplices of unexpected degree {sorted(extra)}", field=f"{where}.simplices")
    labels = {}
    for r, entry in enumerate(obj.get("boundary_labels", [])):
        fld = f"{where}.boundary_labels[{r}]"
        facet = _require(entry, "facet", fld, None)
        lab = _require(entry, "label", fld, None)
        if not isinstance(facet, list) or len(facet) != dim:
            raise ParseError("facet must list dim vertices", field=f"{fld}.facet")
        if lab == DIRICHLET:
            val = DIRICHLET
        elif isinstance(lab, dict) and isinstance(lab.get("branch"), int):
            val = int(lab["branch"])
        else:
            raise ParseError(f"unknown label {lab!r}", field=f"{fld}.label")
        key = tuple(sorted(int(v) for v in facet))
        if key in labels:
            raise ParseError(f"facet {key} labelled twice", field=fld)
        labels[key] = val
    return SimplicialMesh(dim, coords, simplices, labels, name=name)


def geometry_from_dict(doc: dict) -> ForestGeometry:
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object")
    n = _require(doc, "n", "$", int)
    for key in ("nodes", "meshes", "maps"):
        if key not in doc:
            raise ParseError(f"missing field '{key}'", field="$")
    meshes = {}
    if not isinstance(doc["meshes"], dict):
        raise ParseError("meshes must be an object", field="meshes")
    for name, obj in doc["meshes"].items():
        meshes[name] = _parse_mesh(name, obj)

    nodes = {}
    for r, obj in enumerate(doc["nodes"]):
        fld = f"nodes[{r}]"
        rec = NodeRecord(
            node_id=_require(obj, "id", fld, int),
            dim=_require(obj, "dim", fld, int),
            is_root=_require(obj, "root", fld, bool),
            tree_root=_require(obj, "tree", fld, int),
            s_target=_require(obj, "s", fld, int),
            parent=_require(obj, "parent", fld, int),
            mesh_ref=_require(obj, "mesh", fld, str),
        )
        if rec.node_id <= 0:
            raise ParseError("node ids must be positive (0 is the implicit global root)", field=f"{fld}.id")
        if rec.node_id in nodes:
            raise ParseError(f"duplicate node id {rec.node_id}", field=f"{fld}.id")
        if rec.mesh_ref not in meshes:
            raise ParseError(f"dangling mesh reference '{rec.mesh_ref}'", field=f"{fld}.mesh")
        nodes[rec.node_id] = rec
    for r, rec in enumerate(nodes.values()):
        fld = f"nodes[{r}]"
        if rec.parent != 0 and rec.parent not in nodes:
            raise ParseError(f"dangling parent {rec.parent}", field=f"{fld}.parent")
        if rec.is_root and rec.parent != 0:
            raise ParseError("root nodes must have parent 0", field=f"{fld}.parent")
        if not rec.is_root and rec.parent == 0:
            raise ParseError("branch nodes need a parent node", field=f"{fld}.parent")
        for key, ref in (("tree", rec.tree_root), ("s", rec.s_target)):
            if ref not in nodes or not nodes[ref].is_root:
                raise ParseError(f"'{key}' must reference a root node, got {ref}", field=f"{fld}.{key}")

    maps = {}
    for r, obj in enumerate(doc["maps"]):
        fld = f"maps[{r}]"
        b = _require(obj, "branch", fld, int)
        if b not in nodes or nodes[b].is_root:
            raise ParseError(f"map for unknown branch {b}", field=f"{fld}.branch")
        if b in maps:
            raise ParseError(f"second map for branch {b}", field=f"{fld}.branch")
        orient = _require(obj, "orientation", fld, int)
        if orient not in (1, -1):
            raise ParseError("orientation must be 1 or -1", field=f"{fld}.orientation")
        pairs = _require(obj, "vertex_map", fld, None)
        try:
            arr = np.array(pairs, dtype=np.int64).reshape(-1, 2)
        except (ValueError, TypeError) as exc:
            raise ParseError("vertex_map must be a list of [int, int]", field=f"{fld}.vertex_map") from exc
        target = meshes[nodes[nodes[b].s_target].mesh_ref]
        parent_mesh = meshes[nodes[nodes[nodes[b].parent].s_target].mesh_ref]
        if sorted(arr[:, 0].tolist()) != list(range(target.n_vertices)):
            raise ParseError(f"vertex_map of branch {b} must list every target vertex once", field=f"{fld}.vertex_map")
        if arr.size and (arr[:, 1].min() < 0 or arr[:, 1].max() >= parent_mesh.n_vertices):
            raise ParseError(f"vertex_map of branch {b} leaves the parent mesh", field=f"{fld}.vertex_map")
        maps[b] = IdentificationMap(b, arr, orient)
    for j, rec in nodes.items():
        if not rec.is_root and j not in maps:
            raise ParseError(f"branch {j} has no identification map", field="maps")
    return ForestGeometry(n, nodes, meshes, maps, doc)


def parse_geometry(text: str) -> ForestGeometry:
    """Parse geometry-file contents into an indexed (unvalidated) forest."""
    if not text.strip():
        raise ParseError("empty geometry file", line=1)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"syntax error: {exc.msg}", line=exc.lineno, field=f"column {exc.colno}") from exc
    return geometry_from_dict(doc)


def load_geometry(path) -> ForestGeometry:
    with open(path, encoding="utf-8") as fh:
        return parse_geometry(fh.read())


# ---------------------------------------------------------------------------
# queries


def neighbor_sets(g: ForestGeometry, j: int):
    """Return ``(gamma_inverse, gamma, J_up, s_j)`` for node ``j``."""
    if j not in g.nodes:
        raise KeyError(f"unknown node {j}")
    return (
        [l for l, _ in g.gamma_inverse[j]],
        sorted(g.gamma.get(j, [])),
        list(g.J_up[j]),
        g.nodes[j].s_target,
    )


def orientation_sign(g: ForestGeometry, j: int, l: int) -> int:
    """Relative orientation eps_{jl} for l in gamma_j^{-1}."""
    for node, sign in g.gamma_inverse.get(j, []):
        if node == l:
            return int(np.sign(sign))
    raise ValueError(f"node {l} is not in gamma^-1 of node {j}")


# ---------------------------------------------------------------------------
# validation


def _check_meshes(g, out):
    for name in sorted(g.meshes):
        mesh = g.meshes[name]
        for p, simplex in mesh.missing_faces()[:5]:
            out.append(Violation("mesh", (), f"mesh {name}: face of {p}-simplex {simplex} missing"))
        if mesh.dim > 0:
            vol = mesh.measures(mesh.dim)
            scale = np.ptp(mesh.vertices, axis=0).max() if mesh.n_vertices else 1.0
            tiny = np.flatnonzero(vol <= 1e-14 * max(scale, 1e-300) ** mesh.dim)
            for t in tiny[:5]:
                out.append(Violation("mesh", (), f"mesh {name}: zero-measure simplex {mesh.simplices[mesh.dim][t].tolist()}"))
            _, first, counts = np.unique(mesh.vertices, axis=0, return_index=True, return_counts=True)
            for v in first[counts > 1][:5]:
                out.append(Violation("mesh", (), f"mesh {name}: duplicate coordinates at vertex {int(v)}"))
            over = [f for f, cof in enumerate(mesh.facet_cofaces) if len(cof) > 2]
            for f in over[:5]:
                out.append(Violation("mesh", (), f"mesh {name}: facet {mesh.simplices[mesh.dim - 1][f].tolist()} has more than two cofaces"))
        elif mesh.n_vertices != 1:
            out.append(Violation("mesh", (), f"mesh {name}: a 0-d mesh needs exactly one vertex"))
        bset = set(mesh.boundary_facets.tolist())
        for facet in mesh.boundary_labels:
            idx = mesh.index(mesh.dim - 1, facet) if mesh.dim > 0 else -1
            if idx < 0 or idx not in bset:
                out.append(Violation("labels", (), f"mesh {name}: label on non-boundary facet {list(facet)}"))
        labelled = {mesh.index(mesh.dim - 1, f) for f in mesh.boundary_labels} if mesh.dim > 0 else set()
        for f in sorted(bset - labelled)[:5]:
            out.append(Violation("labels", (), f"mesh {name}: boundary facet {mesh.simplices[mesh.dim - 1][f].tolist()} unlabelled"))


def _check_dimensions(g, out):
    n = g.n
    for j in sorted(g.nodes):
        nd = g.nodes[j]
        if not 0 <= nd.dim <= n:
            out.append(Violation("dimension", (j,), f"dim {nd.dim} outside [0, {n}]"))
        if nd.dim != g.nodes[nd.s_target].dim:
            out.append(Violation("dimension", (j,), f"dim {nd.dim} differs from target root {nd.s_target}"))
        if nd.is_root:
            if nd.s_target != j or nd.tree_root != j:
                out.append(Violation("dimension", (j,), "root must satisfy s = tree = id"))
            if g.meshes[nd.mesh_ref].dim != nd.dim:
                out.append(Violation("dimension", (j,), "mesh dimension differs from node dimension"))
            continue
        par = g.nodes[nd.parent]
        if nd.dim >= par.dim:
            out.append(Violation("dimension", (j, nd.parent), "child dimension not below parent"))
        if nd.tree_root != par.tree_root and not (par.is_root and nd.tree_root == par.node_id):
            out.append(Violation("dimension", (j, nd.parent), "child and parent in different trees"))
        if g.depth[j] > g.nodes[nd.tree_root].dim:
            out.append(Violation("dimension", (j,), "tree deeper than root dimension"))
        if nd.mesh_ref != g.nodes[nd.s_target].mesh_ref:
            out.append(Violation("mapping", (j,), "branch must reference its target root's mesh"))


def _check_maps(g, out):
    for j in g.branches:
        nd = g.nodes[j]
        mesh = g.mesh_of(j)
        pmesh = g.parent_mesh(j)
        local = g.maps[j].as_array(mesh.n_vertices)
        if len(set(local.tolist())) != len(local):
            out.append(Violation("mapping", (j,), "vertex_map not injective"))
            continue
        for p in range(mesh.dim + 1):
            img = np.sort(local[mesh.simplices[p]], axis=1)
            if (pmesh.find(p, img) < 0).any():
                out.append(Violation("mapping", (j, nd.parent), f"{p}-simplex not mapped onto a parent simplex"))
                break
        # the image must sit on the boundary of the parent geometry
        if pmesh.dim > 0:
            bclose = pmesh.closure(mesh.dim, pmesh.boundary_facets)
            img = np.sort(local[mesh.simplices[mesh.dim]], axis=1)
            if not np.isin(pmesh.find(mesh.dim, img), bclose).all():
                out.append(Violation("mapping", (j, nd.parent), "image leaves the parent boundary"))
        # telescoping: composed maps land on simplices of the tree root mesh
        root_mesh = g.meshes[g.nodes[nd.tree_root].mesh_ref]
        psi = g.psi[j]
        if (psi < 0).any():
            out.append(Violation("telescoping", (j,), "composite map undefined"))
            continue
        for p in range(mesh.dim + 1):
            img = np.sort(psi[mesh.simplices[p]], axis=1)
            if (root_mesh.find(p, img) < 0).any():
                out.append(Violation("telescoping", (j, nd.tree_root), f"composite map breaks {p}-simplices"))
                break


def _check_covering(g, out):
    for i in g.roots:
        mesh = g.meshes[g.nodes[i].mesh_ref]
        if mesh.dim == 0:
            continue
        cover = defaultdict(list)
        seen = defaultdict(list)
        for j in g.branches:
            if g.nodes[j].tree_root != i or (g.psi[j] < 0).any():
                continue
            jm = g.mesh_of(j)
            img = np.sort(g.psi[j][jm.simplices[jm.dim]], axis=1)
            idx = mesh.find(jm.dim, img)
            for t in idx.tolist():
                seen[(jm.dim, t)].append(j)
            if g.depth[j] == 1 and g.nodes[j].dim == mesh.dim - 1:
                for f in idx.tolist():
                    cover[f].append(j)
        for (p, t), js in sorted(seen.items()):
            if len(js) > 1 and p < mesh.dim - 1:
                out.append(Violation("covering", (i, *sorted(js)), f"{p}-simplex {mesh.simplices[p][t].tolist()} covered twice"))
        for f in mesh.boundary_facets.tolist():
            key = tuple(int(v) for v in mesh.simplices[mesh.dim - 1][f])
            label = mesh.boundary_labels.get(key)
            js = cover.get(f, [])
            if label == DIRICHLET:
                if js:
                    out.append(Violation("covering", (i, *js), f"dirichlet facet {list(key)} also covered by a branch"))
            elif len(js) != 1:
                out.append(Violation("covering", (i, *js), f"facet {list(key)} covered {len(js)} times"))
            elif label != js[0]:
                out.append(Violation("labels", (i, js[0]), f"facet {list(key)} labelled {label!r} but covered by {js[0]}"))


def _geometric_orientation(g, j):
    mesh = g.mesh_of(j)
    pmesh = g.parent_mesh(j)
    local = g.maps[j].as_array(mesh.n_vertices)
    top = mesh.simplices[mesh.dim]
    img = local[top]
    facets = pmesh.find(mesh.dim, np.sort(img, axis=1))
    vals = set()
    bset = set(pmesh.boundary_facets.tolist())
    for t in range(top.shape[0]):
        f = int(facets[t])
        if f < 0 or f not in bset:
            return None
        vals.add(pmesh.boundary_orientation(f) * int(mesh.top_orientation[t]) * permutation_sign(img[t]))
    return vals


def _check_orientation(g, out):
    for j in g.branches:
        nd = g.nodes[j]
        if g.nodes[nd.parent].dim != nd.dim + 1:
            continue
        vals = _geometric_orientation(g, j)
        if vals is None:
            continue
        if len(vals) != 1:
            out.append(Violation("orientation", (j,), "patch is not coherently oriented"))
        elif vals.pop() != g.maps[j].orientation:
            out.append(Violation("orientation", (j, nd.parent), "stored orientation disagrees with the induced boundary orientation"))


def _check_sign_identity(g, out):
    for u in g.roots:
        acc = defaultdict(int)
        via = defaultdict(set)
        for l, eps in g.gamma_inverse[u]:
            for lp, sign in g.gamma_inverse.get(l, []):
                acc[lp] += eps * sign
                via[lp].add(l)
            for tree, _comp, sign in g.unmatched.get(l, []):
                out.append(Violation("sign_identity", (u, l), f"trace of tree {tree} through {l} has no matching node (net sign {sign})"))
        for lp in sorted(acc):
            if acc[lp] != 0:
                out.append(Violation("sign_identity", (u, *sorted(via[lp]), lp), f"signs through {sorted(via[lp])} to {lp} sum to {acc[lp]}"))


def _check_dirichlet(g, out):
    for j in g.branches:
        if g.depth[j] != 1 or (g.psi[j] < 0).any():
            continue
        mesh = g.mesh_of(j)
        root_mesh = g.meshes[g.nodes[g.nodes[j].tree_root].mesh_ref]
        for p in range(mesh.dim + 1):
            dc = mesh.dirichlet_closure(p)
            if len(dc) == 0:
                continue
            img = np.sort(g.psi[j][mesh.simplices[p][dc]], axis=1)
            if not np.isin(root_mesh.find(p, img), root_mesh.dirichlet_closure(p)).all():
                out.append(Violation("dirichlet", (j,), f"dirichlet {p}-simplices of the target map off the dirichlet part of the source"))
                break


def validate_conforming(g: ForestGeometry) -> ValidationReport:
    """Run every conformity check; violations are returned, never raised."""
    out: list = []
    if not g.nodes:
        return ValidationReport([Violation("empty", (), "forest has no nodes")])
    _check_meshes(g, out)
    _check_dimensions(g, out)
    _check_maps(g, out)
    if any(v.kind in {"mapping", "telescoping"} for v in out):
        return ValidationReport(out)
    _check_covering(g, out)
    _check_orientation(g, out)
    _check_sign_identity(g, out)
    _check_dirichlet(g, out)
    return ValidationReport(out)


def geometry_to_json(doc) -> str:
    if isinstance(doc, ForestGeometry):
        doc = doc.document
    return json.dumps(doc, sort_keys=True, indent=1)


__all__ = [
    "ForestGeometry",
    "IdentificationMap",
    "NodeRecord",
    "ParseError",
    "ValidationReport",
    "Violation",
    "geometry_from_dict",
    "geometry_hash",
    "load_geometry",
    "neighbor_sets",
    "orientation_sign",
    "parse_geometry",
    "validate_conforming",
]

