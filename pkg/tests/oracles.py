"""Independent reference computations used by several test files."""

import numpy as np
import scipy.linalg

from mdforms.fixtures import grid


def textbook_mixed_poisson(nx, r, source):
    """Lowest-order mixed Poisson on a triangulated unit square.

    Counterclockwise triangles, flux unknowns on interior edges oriented
    low -> high vertex, pressure per triangle with zero mean enforced by a
    bordering multiplier.
    """
    coords, tris, _ = grid(nx, nx)
    ccw = []
    for a, b, c in tris:
        e1, e2 = coords[b] - coords[a], coords[c] - coords[a]
        ccw.append((a, b, c) if e1[0] * e2[1] - e1[1] * e2[0] > 0 else (a, c, b))
    owners = {}
    for t, tri in enumerate(ccw):
        for i in range(3):
            e = tuple(sorted((tri[i], tri[(i + 1) % 3])))
            owners.setdefault(e, []).append(t)
    interior = sorted(e for e, ts in owners.items() if len(ts) == 2)
    eid = {e: i for i, e in enumerate(interior)}
    nt, ne = len(ccw), len(interior)
    pts = coords[np.array(ccw)]
    area = 0.5 * np.abs(
        (pts[:, 1, 0] - pts[:, 0, 0]) * (pts[:, 2, 1] - pts[:, 0, 1])
        - (pts[:, 1, 1] - pts[:, 0, 1]) * (pts[:, 2, 0] - pts[:, 0, 0])
    )
    centroid = pts.mean(axis=1)
    star1 = np.zeros(ne)
    for e, i in eid.items():
        mid = 0.5 * (coords[e[0]] + coords[e[1]])
        dual = sum(np.linalg.norm(mid - centroid[t]) for t in owners[e])
        star1[i] = dual / np.linalg.norm(coords[e[0]] - coords[e[1]])
    div = np.zeros((nt, ne))
    for t, tri in enumerate(ccw):
        for i in range(3):
            p, q = tri[i], tri[(i + 1) % 3]
            e = tuple(sorted((p, q)))
            if e in eid:
                div[t, eid[e]] = 1.0 if p < q else -1.0
    f = area * source(centroid[:, 0], centroid[:, 1])
    M1, M2 = np.diag(star1), np.diag(1 / area)
    one = np.ones((nt, 1))
    K = np.block([
        [M1 / r, -div.T @ M2, np.zeros((ne, 1))],
        [-M2 @ div, np.zeros((nt, nt)), -M2 @ one],
        [np.zeros((1, ne)), -one.T @ M2, np.zeros((1, 1))],
    ])
    rhs = np.concatenate([np.zeros(ne), -M2 @ f, [0.0]])
    sol = scipy.linalg.solve(K, rhs)
    return np.sort(np.array(ccw), axis=1), interior, sol[ne:ne + nt], sol[:ne], f
