"""Builders for the shipped forest fixtures.

``python -m mdforms.fixtures [DIR]`` regenerates the JSON files in
``mdforms/data``. Each document carries its expected cohomology dimensions
under ``meta.betti``.
"""

from __future__ import annotations

import json
import sys
from collections import defaultdict
from importlib import resources
from itertools import combinations
from pathlib import Path

import numpy as np

from .geometry import ForestGeometry, geometry_from_dict


# -- small helpers ---------------------------------------------------------------


def all_faces(top: np.ndarray, dim: int) -> list:
    top = np.sort(np.asarray(top, dtype=np.int64), axis=1)
    out = []
    for p in range(dim + 1):
        subs = np.concatenate([top[:, list(c)] for c in combinations(range(dim + 1), p + 1)])
        out.append(np.unique(subs, axis=0))
    return out


def mesh_doc(coords, top, dim, labels=None) -> dict:
    coords = np.asarray(coords, dtype=np.float64).reshape(-1, dim)
    faces = all_faces(np.asarray(top).reshape(-1, dim + 1), dim)
    return {
        "dim": dim,
        "vertices": [[round(float(x), 15) for x in row] for row in coords],
        "simplices": {str(p): faces[p].tolist() for p in range(dim + 1)},
        "boundary_labels": labels or [],
    }


def point_mesh() -> dict:
    return {"dim": 0, "vertices": [[]], "simplices": {"0": [[0]]}, "boundary_labels": []}


def boundary_facets(top: np.ndarray, dim: int) -> list:
    count = defaultdict(int)
    for row in np.sort(top, axis=1):
        for c in combinations(row.tolist(), dim):
            count[c] += 1
    return sorted(f for f, c in count.items() if c == 1)


def grid(nx: int, ny: int, x0=0.0, x1=1.0, y0=0.0, y1=1.0):
    """Structured right-triangle grid; returns (coords, CCW triangles)."""
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    coords = np.array([[x, y] for y in ys for x in xs])
    vid = lambda i, j: j * (nx + 1) + i  # noqa: E731
    tris = []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            tris += [[a, b, c], [a, c, d]]
    return coords, np.array(tris), vid


def _cross2(u, v):
    u, v = np.asarray(u), np.asarray(v)
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def _meta(name, natural, essential, note=""):
    return {"name": name, "betti": {"natural": natural, "essential": essential}, "note": note}


# -- single roots ------------------------------------------------------------------


def single_root(coords, top, dim: int, n: int | None = None, name="single") -> dict:
    top = np.asarray(top)
    labels = [{"facet": list(f), "label": "dirichlet"} for f in boundary_facets(top, dim)]
    return {
        "n": dim if n is None else n,
        "nodes": [{"id": 1, "dim": dim, "root": True, "tree": 1, "s": 1, "parent": 0, "mesh": "X1"}],
        "meshes": {"X1": mesh_doc(coords, top, dim, labels)},
        "maps": [],
        "meta": {"name": name},
    }


def unit_square_single(nx: int = 6) -> dict:
    coords, tris, _ = grid(nx, nx)
    doc = single_root(coords, tris, 2, name="square_single")
    doc["meta"] = _meta("square_single", [1, 0, 0], [0, 0, 1])
    return doc


def interval_single(m: int = 10, length: float = 1.0) -> dict:
    coords = np.linspace(0.0, length, m + 1)[:, None]
    top = np.array([[i, i + 1] for i in range(m)])
    doc = single_root(coords, top, 1, name="interval_single")
    doc["meta"] = _meta("interval_single", [1, 0], [0, 1])
    return doc


def cube_single(m: int = 2) -> dict:
    """Unit cube, m^3 cells, each split into six Kuhn tetrahedra."""
    xs = np.linspace(0.0, 1.0, m + 1)
    coords = np.array([[x, y, z] for z in xs for y in xs for x in xs])
    vid = lambda i, j, k: (k * (m + 1) + j) * (m + 1) + i  # noqa: E731
    tets = []
    perms = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
    for k in range(m):
        for j in range(m):
            for i in range(m):
                for perm in perms:
                    cur = [i, j, k]
                    path = [vid(*cur)]
                    for ax in perm:
                        cur[ax] += 1
                        path.append(vid(*cur))
                    tets.append(path)
    doc = single_root(coords, np.array(tets), 3, name="cube_single")
    doc["meta"] = _meta("cube_single", [1, 0, 0, 0], [0, 0, 0, 1])
    return doc


# -- one-dimensional chains ------------------------------------------------------


def interval_chain(breaks=(0.0, 1.0, 2.0), m: int = 4, name="chain") -> dict:
    """Segments between consecutive breakpoints, joined at 0-d roots.

    The outer ends are dirichlet; each interior breakpoint is a point root.
    """
    nseg = len(breaks) - 1
    npt = nseg - 1
    nodes, meshes, maps = [], {}, []
    for q in range(npt):
        pid = q + 1
        nodes.append({"id": pid, "dim": 0, "root": True, "tree": pid, "s": pid, "parent": 0, "mesh": f"X{pid}"})
        meshes[f"X{pid}"] = point_mesh()
    nxt = npt + nseg + 1
    for s in range(nseg):
        sid = npt + s + 1
        coords = np.linspace(breaks[s], breaks[s + 1], m + 1)[:, None]
        top = np.array([[i, i + 1] for i in range(m)])
        labels = []
        nodes.append({"id": sid, "dim": 1, "root": True, "tree": sid, "s": sid, "parent": 0, "mesh": f"X{sid}"})
        for end, local, orient in ((0, 0, -1), (1, m, 1)):
            pt = s + end  # breakpoint index
            if 0 < pt < nseg:
                pid = pt
                nodes.append({"id": nxt, "dim": 0, "root": False, "tree": sid, "s": pid, "parent": sid, "mesh": f"X{pid}"})
                maps.append({"branch": nxt, "vertex_map": [[0, local]], "orientation": orient})
                labels.append({"facet": [local], "label": {"branch": nxt}})
                nxt += 1
            else:
                labels.append({"facet": [local], "label": "dirichlet"})
        meshes[f"X{sid}"] = mesh_doc(coords, top, 1, labels)
    nat = [1, 0]
    ess = [0, 1]
    return {"n": 1, "nodes": nodes, "meshes": meshes, "maps": maps, "meta": _meta(name, nat, ess)}


# -- two-dimensional cut builder --------------------------------------------------


class _UF:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def cut_forest(coords, tris, points, fractures, boundary_paths=(), region_seeds=None, corner_coords=None, name="forest") -> dict:
    """Build a conforming 2-d forest by cutting a triangulation along paths.

    Args:
        coords: Physical vertex coordinates ``(N, 2)``.
        tris: Triangles ``(T, 3)``.
        points: Physical vertex ids that become 0-d roots, in id order.
        fractures: Vertex paths that become interior 1-d roots.
        boundary_paths: Vertex paths along the outer boundary that become
            1-d roots (a closed forest when they cover the boundary). They
            must run with the domain on their left.
        region_seeds: Optional points fixing the order of the 2-d roots.
        corner_coords: Optional ``(T, 3, 2)`` per-corner coordinates, for
            periodic meshes where one vertex id has several positions.
    """
    coords = np.asarray(coords, dtype=np.float64)
    tris = np.array(tris)
    tc = coords[tris] if corner_coords is None else np.array(corner_coords, dtype=np.float64)
    flip = _cross2(tc[:, 1] - tc[:, 0], tc[:, 2] - tc[:, 0]) < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    tc[flip] = tc[flip][:, [0, 2, 1]]

    def at(t, v):
        return tc[t][tris[t].tolist().index(v)]

    points = list(points)
    paths = [list(p) for p in fractures] + [list(p) for p in boundary_paths]
    n_pt, n_path = len(points), len(paths)

    edge_tris = defaultdict(list)
    for t, tri in enumerate(tris):
        for a, b in combinations(sorted(tri.tolist()), 2):
            edge_tris[(a, b)].append(t)
    cut = {}
    for f, path in enumerate(paths):
        for i in range(len(path) - 1):
            key = tuple(sorted((path[i], path[i + 1])))
            if key not in edge_tris:
                raise ValueError(f"path {f} step {i} is not a mesh edge")
            cut[key] = (f, i)

    # regions and vertex sectors
    reg = _UF()
    sec = _UF()
    for t, tri in enumerate(tris):
        reg.find(t)
        for v in tri:
            sec.find((int(v), t))
    for (a, b), ts in edge_tris.items():
        if len(ts) == 2 and (a, b) not in cut:
            t1, t2 = ts
            reg.union(t1, t2)
            sec.union((a, t1), (a, t2))
            sec.union((b, t1), (b, t2))
    comps = defaultdict(list)
    for t in range(len(tris)):
        comps[reg.find(t)].append(t)
    order = sorted(comps, key=lambda r: min(comps[r]))
    if region_seeds is not None:
        cent = tc.mean(axis=1)
        rank = {}
        for q, seed in enumerate(region_seeds):
            t = int(np.argmin(np.linalg.norm(cent - np.asarray(seed), axis=1)))
            rank.setdefault(reg.find(t), q)
        order = sorted(order, key=lambda r: (rank.get(r, len(region_seeds)), min(comps[r])))

    point_id = {v: q + 1 for q, v in enumerate(points)}
    path_id = [n_pt + f + 1 for f in range(n_path)]
    region_id = {r: n_pt + n_path + q + 1 for q, r in enumerate(order)}
    next_id = n_pt + n_path + len(order) + 1

    nodes, meshes, maps = [], {}, []
    for v, pid in point_id.items():
        nodes.append({"id": pid, "dim": 0, "root": True, "tree": pid, "s": pid, "parent": 0, "mesh": f"X{pid}"})
        meshes[f"X{pid}"] = point_mesh()

    # 1-d roots
    path_labels = {}
    path_branches = []
    for f, path in enumerate(paths):
        fid = path_id[f]
        L = len(path)
        nodes.append({"id": fid, "dim": 1, "root": True, "tree": fid, "s": fid, "parent": 0, "mesh": f"X{fid}"})
        labels = []
        for local, orient in ((0, -1), (L - 1, 1)):
            v = path[local]
            if v in point_id:
                bid = next_id
                next_id += 1
                path_branches.append({"id": bid, "dim": 0, "root": False, "tree": fid, "s": point_id[v], "parent": fid, "mesh": f"X{point_id[v]}"})
                maps.append({"branch": bid, "vertex_map": [[0, local]], "orientation": orient})
                labels.append({"facet": [local], "label": {"branch": bid}})
            else:
                if f >= len(fractures):
                    raise ValueError("boundary paths must end at point roots")
                labels.append({"facet": [local], "label": "dirichlet"})
        path_labels[f] = labels
        seg = []
        for i in range(L - 1):
            t = edge_tris[tuple(sorted((path[i], path[i + 1])))][0]
            seg.append(np.linalg.norm(at(t, path[i + 1]) - at(t, path[i])))
        arclen = np.concatenate([[0.0], np.cumsum(seg)])
        meshes[f"X{fid}"] = mesh_doc(arclen[:, None], [[i, i + 1] for i in range(L - 1)], 1, labels)

    # 2-d roots
    patches = {}  # (region, path, side) -> {"edges": {i: (ca, cb)}}
    region_local = {}
    for r in order:
        rid = region_id[r]
        ts = comps[r]
        classes = sorted({sec.find((int(v), t)) for t in ts for v in tris[t]})
        local = {c: q for q, c in enumerate(classes)}
        phys = np.array([c[0] for c in classes])
        members = defaultdict(list)
        for t in ts:
            for v in tris[t]:
                members[sec.find((int(v), t))].append(t)
        xy = np.array([at(members[c][0], c[0]) for c in classes])
        # displace repeated copies of a physical vertex into their own sector
        multi = defaultdict(list)
        for c in classes:
            multi[c[0]].append(c)
        for v, cs in multi.items():
            if len(cs) < 2:
                continue
            for c in cs:
                x = xy[local[c]].copy()
                dirs, dist = np.zeros(2), np.inf
                for t in members[c]:
                    u = tc[t].mean(axis=0) - x
                    dirs += u / np.linalg.norm(u)
                    a, b = [at(t, w) for w in tris[t] if w != v]
                    e = b - a
                    dist = min(dist, abs(_cross2(e, x - a)) / np.linalg.norm(e))
                xy[local[c]] = x + 0.1 * dist * dirs / np.linalg.norm(dirs)
        ltris = np.array([[local[sec.find((int(v), t))] for v in tris[t]] for t in ts])
        region_local[rid] = (ltris, phys)

        labels = []
        for f_local in boundary_facets(ltris, 2):
            ca, cb = f_local
            va, vb = int(phys[ca]), int(phys[cb])
            key = tuple(sorted((va, vb)))
            if key in cut:
                f, i = cut[key]
                path = paths[f]
                t = next(t for t, lt in zip(ts, ltris) if ca in lt and cb in lt)
                a, b = at(t, path[i]), at(t, path[i + 1])
                side = "left" if _cross2(b - a, tc[t].mean(axis=0) - a) > 0 else "right"
                pk = (rid, f, side)
                cp = {int(phys[ca]): ca, int(phys[cb]): cb}
                patches.setdefault(pk, {})[i] = (cp[path[i]], cp[path[i + 1]])
                labels.append({"facet": [ca, cb], "label": ("patch", pk)})
            else:
                labels.append({"facet": [ca, cb], "label": "dirichlet"})
        meshes[f"X{rid}"] = (xy, ltris, labels)
        nodes.append({"id": rid, "dim": 2, "root": True, "tree": rid, "s": rid, "parent": 0, "mesh": f"X{rid}"})

    nodes.extend(path_branches)
    patch_id = {}
    corner_seen = set()
    corners = []
    for pk in sorted(patches, key=lambda k: (k[0], k[1], k[2] != "left")):
        rid, f, side = pk
        path = paths[f]
        edges = patches[pk]
        if sorted(edges) != list(range(len(path) - 1)):
            raise ValueError(f"side {side} of path {f} is split between regions")
        vm = {}
        for i, (ca, cb) in edges.items():
            for q, c in ((i, ca), (i + 1, cb)):
                if vm.setdefault(q, c) != c:
                    raise ValueError(f"path {f} vertex {q} has two copies on one side")
        bid = next_id
        next_id += 1
        patch_id[pk] = bid
        nodes.append({"id": bid, "dim": 1, "root": False, "tree": rid, "s": path_id[f], "parent": rid, "mesh": f"X{path_id[f]}"})
        maps.append({"branch": bid, "vertex_map": [[q, vm[q]] for q in sorted(vm)], "orientation": 1 if side == "left" else -1})
        for local, orient in ((0, -1), (len(path) - 1, 1)):
            v = path[local]
            if v in point_id and (rid, vm[local]) not in corner_seen:
                corner_seen.add((rid, vm[local]))
                corners.append((rid, bid, point_id[v], local, orient))
    for rid, bid, pid, local, orient in corners:
        cid = next_id
        next_id += 1
        nodes.append({"id": cid, "dim": 0, "root": False, "tree": rid, "s": pid, "parent": bid, "mesh": f"X{pid}"})
        maps.append({"branch": cid, "vertex_map": [[0, local]], "orientation": orient})

    for q, r in enumerate(order):
        rid = region_id[r]
        xy, ltris, labels = meshes[f"X{rid}"]
        for lab in labels:
            if isinstance(lab["label"], tuple):
                lab["label"] = {"branch": patch_id[lab["label"][1]]}
        meshes[f"X{rid}"] = mesh_doc(xy, ltris, 2, labels)

    nodes.sort(key=lambda nd: nd["id"])
    return {"n": 2, "nodes": nodes, "meshes": meshes, "maps": maps, "meta": {"name": name}}


# -- named fixtures ------------------------------------------------------------------


def slit_regions(h_inv: int = 8) -> dict:
    """(0,2)x(0,1) split by x = 1 into two regions, with a slit into the right one.

    Roots: junction (1, .5) and slit tip (1.5, .5); the upper and lower halves
    of x = 1 and the slit; left and right regions.
    """
    coords, tris, vid = grid(2 * h_inv, h_inv, 0.0, 2.0, 0.0, 1.0)
    mid, half = h_inv, h_inv // 2
    junction, tip = vid(mid, half), vid(mid + half, half)
    seg3 = [vid(mid, j) for j in range(half, h_inv + 1)]
    seg4 = [vid(i, half) for i in range(mid, mid + half + 1)]
    seg5 = [vid(mid, j) for j in range(0, half + 1)]
    doc = cut_forest(coords, tris, [junction, tip], [seg3, seg4, seg5], region_seeds=[(0.5, 0.5), (1.5, 0.25)])
    doc["meta"] = _meta("slit_regions", [1, 0, 0], [0, 0, 1], "two regions, a T-junction and a slit ending at a tip")
    return doc


def slit_regions_flipped(h_inv: int = 8) -> tuple[dict, int]:
    """Slit-regions layout with the orientation of one junction branch reversed."""
    doc = slit_regions(h_inv)
    target = next(nd["id"] for nd in doc["nodes"] if not nd["root"] and nd["tree"] == 4 and nd["s"] == 1)
    for mp in doc["maps"]:
        if mp["branch"] == target:
            mp["orientation"] = -mp["orientation"]
    doc["meta"] = {"name": "slit_regions_flipped", "flipped_branch": target}
    return doc, target


def square_fracture(nx: int = 8) -> dict:
    coords, tris, vid = grid(nx, nx)
    y = nx // 2
    path = [vid(i, y) for i in range(nx // 4, 3 * nx // 4 + 1)]
    doc = cut_forest(coords, tris, [path[0], path[-1]], [path])
    doc["meta"] = _meta("square_fracture", [1, 0, 0], [0, 0, 1], "unit square, interior fracture with two tips")
    return doc


def annulus(nr: int = 4, nt: int = 24, r0: float = 0.5, r1: float = 1.0) -> dict:
    rs = np.linspace(r0, r1, nr + 1)
    th = 2 * np.pi * np.arange(nt) / nt
    coords = np.array([[r * np.cos(t), r * np.sin(t)] for r in rs for t in th])
    vid = lambda i, j: i * nt + (j % nt)  # noqa: E731
    tris = []
    for i in range(nr):
        for j in range(nt):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            tris += [[a, b, c], [a, c, d]]
    path = [vid(i, 0) for i in range(nr + 1)]
    doc = cut_forest(coords, np.array(tris), [], [path])
    doc["meta"] = _meta("annulus", [1, 1, 0], [0, 1, 1], "annulus with one radial fracture")
    return doc


def torus(nx: int = 4) -> dict:
    """Flat periodic square cut along x = 0 and y = 0, meeting at one point.

    The forest has no dirichlet facets at all.
    """
    vid = lambda i, j: (j % nx) * nx + (i % nx)  # noqa: E731
    coords = np.array([[i / nx, j / nx] for j in range(nx) for i in range(nx)])
    tris, corner = [], []
    for j in range(nx):
        for i in range(nx):
            quad = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
            for a, b, c in ((0, 1, 2), (0, 2, 3)):
                tri = [quad[a], quad[b], quad[c]]
                tris.append([vid(*q) for q in tri])
                corner.append([[q[0] / nx, q[1] / nx] for q in tri])
    xcut = [vid(0, j) for j in range(nx + 1)]
    ycut = [vid(i, 0) for i in range(nx + 1)]
    doc = cut_forest(coords, np.array(tris), [vid(0, 0)], [xcut, ycut], corner_coords=np.array(corner))
    doc["meta"] = _meta("torus", [1, 2, 1], [1, 2, 1], "closed forest: flat torus cut along two circles")
    return doc


def interval_pair(m: int = 4) -> dict:
    return interval_chain((0.0, 1.0, 2.0), m, name="interval_pair")


SHIPPED = {
    "slit_regions": slit_regions,
    "square_fracture": square_fracture,
    "annulus": annulus,
    "torus": torus,
    "interval_pair": interval_pair,
    "square_single": unit_square_single,
    "interval_single": interval_single,
    "cube_single": cube_single,
}


def fixture_names() -> list:
    return sorted(SHIPPED) + ["slit_regions_flipped"]


def fixture_text(name: str) -> str:
    return resources.files("mdforms.data").joinpath(f"{name}.json").read_text(encoding="utf-8")


def load_fixture(name: str) -> ForestGeometry:
    return geometry_from_dict(json.loads(fixture_text(name)))


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("mdforms.data").joinpath(f"{name}.json")))


def write_all(out_dir) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    docs = {name: build() for name, build in SHIPPED.items()}
    docs["slit_regions_flipped"] = slit_regions_flipped()[0]
    for name, doc in sorted(docs.items()):
        p = out / f"{name}.json"
        p.write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n", encoding="utf-8")
        written.append(p)
    return written


if __name__ == "__main__":  # pragma: no cover
    target = sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parent / "data"
    for p in write_all(target):
        print(p)
