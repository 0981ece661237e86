"""Hot numeric kernels.

Every kernel exists twice: a loop implementation compiled with ``numba.njit``
and a vectorised pure-numpy implementation. ``MDFORMS_USE_NUMBA=0`` (or a
missing numba install) selects the numpy path. Both paths return identical
results; ``benchmarks/bench_kernels.py`` compares their speed.
"""

from __future__ import annotations

import os
import warnings
from math import factorial

import numpy as np

try:  # pragma: no cover - exercised implicitly
    import numba
except ImportError:  # pragma: no cover
    numba = None


def _env_wants_numba() -> bool:
    flag = os.environ.get("MDFORMS_USE_NUMBA", "1").strip().lower()
    return flag not in {"0", "false", "no", "off"}


USE_NUMBA = numba is not None and _env_wants_numba()

# largest prime below 2**31; keeps every product below 2**62
DEFAULT_PRIME = 2147483647


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


def set_threads(count: int) -> int:
    """Cap the numba thread pool; returns the count in effect."""
    if numba is None:
        return 1
    count = max(1, min(int(count), numba.config.NUMBA_NUM_THREADS))
    with warnings.catch_warnings():
        # thread-pool probing may warn about optional threading layers
        warnings.simplefilter("ignore")
        numba.set_num_threads(count)
    return count


def _njit(fn):
    if numba is None:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


# ---------------------------------------------------------------------------
# singleton peeling


def _peel_loop(nrows, ncols, rp, ri, cp, ci):
    row_alive = np.ones(nrows, dtype=np.bool_)
    col_alive = np.ones(ncols, dtype=np.bool_)
    row_cnt = np.empty(nrows, dtype=np.int64)
    col_cnt = np.empty(ncols, dtype=np.int64)
    for r in range(nrows):
        row_cnt[r] = rp[r + 1] - rp[r]
    for c in range(ncols):
        col_cnt[c] = cp[c + 1] - cp[c]

    # stack holds encoded candidates: c >= 0 for columns, -(r + 1) for rows
    stack = np.empty(2 * (nrows + ncols) + rp[nrows] + cp[ncols] + 2, dtype=np.int64)
    top = 0
    for c in range(ncols):
        if col_cnt[c] <= 1:
            stack[top] = c
            top += 1
    for r in range(nrows):
        if row_cnt[r] <= 1:
            stack[top] = -(r + 1)
            top += 1

    rank = 0
    while top > 0:
        top -= 1
        item = stack[top]
        if item >= 0:
            c = item
            if not col_alive[c]:
                continue
            if col_cnt[c] == 0:
                col_alive[c] = False
                continue
            if col_cnt[c] != 1:
                continue
            r = -1
            for q in range(cp[c], cp[c + 1]):
                if row_alive[ci[q]]:
                    r = ci[q]
                    break
        else:
            r = -item - 1
            if not row_alive[r]:
                continue
            if row_cnt[r] == 0:
                row_alive[r] = False
                continue
            if row_cnt[r] != 1:
                continue
            c = -1
            for q in range(rp[r], rp[r + 1]):
                if col_alive[ri[q]]:
                    c = ri[q]
                    break
        rank += 1
        row_alive[r] = False
        col_alive[c] = False
        for q in range(rp[r], rp[r + 1]):
            cc = ri[q]
            if col_alive[cc]:
                col_cnt[cc] -= 1
                if col_cnt[cc] <= 1:
                    stack[top] = cc
                    top += 1
        for q in range(cp[c], cp[c + 1]):
            rr = ci[q]
            if row_alive[rr]:
                row_cnt[rr] -= 1
                if row_cnt[rr] <= 1:
                    stack[top] = -(rr + 1)
                    top += 1
    return rank, row_alive, col_alive


_peel_loop_jit = _njit(_peel_loop)


def _peel_numpy(nrows, ncols, rows, cols):
    """Round-based peeling: every round removes a batch of singleton pairs."""
    row_alive = np.ones(nrows, dtype=bool)
    col_alive = np.ones(ncols, dtype=bool)
    rank = 0
    while True:
        live = row_alive[rows] & col_alive[cols]
        r_live, c_live = rows[live], cols[live]
        row_cnt = np.bincount(r_live, minlength=nrows)
        col_cnt = np.bincount(c_live, minlength=ncols)
        # empty lines never contribute to the rank
        row_alive &= row_cnt > 0
        col_alive &= col_cnt > 0

        picked = False
        single_c = col_cnt[c_live] == 1
        if single_c.any():
            pr, pc = r_live[single_c], c_live[single_c]
            pr, first = np.unique(pr, return_index=True)
            pc = pc[first]
            row_alive[pr] = False
            col_alive[pc] = False
            rank += pr.size
            picked = True
        else:
            single_r = row_cnt[r_live] == 1
            if single_r.any():
                pr, pc = r_live[single_r], c_live[single_r]
                pc, first = np.unique(pc, return_index=True)
                pr = pr[first]
                row_alive[pr] = False
                col_alive[pc] = False
                rank += pc.size
                picked = True
        if not picked:
            return rank, row_alive, col_alive


def peel_singletons(matrix, use_numba: bool | None = None):
    """Strip rows/columns carrying a single live nonzero.

    If column ``c`` has exactly one nonzero, at row ``r``, then
    ``rank(A) = 1 + rank(A without r and c)`` over any field, so the pair is
    removed without fill. Returns ``(rank_removed, row_mask, col_mask)`` with
    the masks marking the untouched core.
    """
    use_numba = USE_NUMBA if use_numba is None else use_numba
    coo = matrix.tocoo()
    keep = coo.data != 0
    rows = coo.row[keep].astype(np.int64)
    cols = coo.col[keep].astype(np.int64)
    nrows, ncols = matrix.shape
    if not use_numba:
        return _peel_numpy(nrows, ncols, rows, cols)
    order = np.lexsort((cols, rows))
    ri = cols[order]
    rp = np.zeros(nrows + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=nrows), out=rp[1:])
    order = np.lexsort((rows, cols))
    ci = rows[order]
    cp = np.zeros(ncols + 1, dtype=np.int64)
    np.cumsum(np.bincount(cols, minlength=ncols), out=cp[1:])
    rank, ra, ca = _peel_loop_jit(nrows, ncols, rp, ri, cp, ci)
    return int(rank), ra, ca


# ---------------------------------------------------------------------------
# rank over GF(p)


def _rank_mod_p_loop(a, p):
    m, n = a.shape
    rank = 0
    for col in range(n):
        if rank == m:
            break
        piv = -1
        for r in range(rank, m):
            if a[r, col] != 0:
                piv = r
                break
        if piv < 0:
            continue
        if piv != rank:
            for c in range(col, n):
                tmp = a[piv, c]
                a[piv, c] = a[rank, c]
                a[rank, c] = tmp
        # Fermat inverse
        inv = 1
        base = a[rank, col]
        e = p - 2
        while e > 0:
            if e & 1:
                inv = (inv * base) % p
            base = (base * base) % p
            e >>= 1
        for c in range(col, n):
            a[rank, c] = (a[rank, c] * inv) % p
        for r in range(rank + 1, m):
            f = a[r, col]
            if f != 0:
                for c in range(col, n):
                    a[r, c] = (a[r, c] - f * a[rank, c]) % p
        rank += 1
    return rank


_rank_mod_p_jit = _njit(_rank_mod_p_loop)


def _rank_mod_p_numpy(a, p):
    m, n = a.shape
    rank = 0
    for col in range(n):
        if rank == m:
            break
        nz = np.flatnonzero(a[rank:, col])
        if nz.size == 0:
            continue
        piv = rank + nz[0]
        if piv != rank:
            a[[rank, piv]] = a[[piv, rank]]
        inv = pow(int(a[rank, col]), p - 2, p)
        a[rank, col:] = (a[rank, col:] * inv) % p
        below = a[rank + 1 :, col].copy()
        hit = np.flatnonzero(below)
        if hit.size:
            rows = rank + 1 + hit
            a[rows, col:] = (a[rows, col:] - np.outer(below[hit], a[rank, col:]) % p) % p
        rank += 1
    return rank


def rank_mod_p(dense, p: int = DEFAULT_PRIME, use_numba: bool | None = None) -> int:
    """Rank of an integer matrix over the field with ``p`` elements."""
    use_numba = USE_NUMBA if use_numba is None else use_numba
    a = np.mod(np.asarray(dense, dtype=np.int64), p)
    if a.size == 0:
        return 0
    if use_numba:
        return int(_rank_mod_p_jit(a, np.int64(p)))
    return _rank_mod_p_numpy(a, p)


# ---------------------------------------------------------------------------
# barycentric dual volumes


def _chains(d: int, p: int) -> np.ndarray:
    """All flags sigma_p < ... < sigma_d of a reference d-simplex.

    Returns an int array ``(n_chains, d - p + 1, d + 1)`` of vertex masks, one
    mask per flag level. Chains are grouped by their starting p-face in the
    order of ``itertools.combinations``.
    """
    from itertools import combinations, permutations

    out = []
    for face in combinations(range(d + 1), p + 1):
        rest = [v for v in range(d + 1) if v not in face]
        for perm in permutations(rest):
            members = list(face)
            levels = []
            mask = np.zeros(d + 1, dtype=np.int64)
            mask[members] = 1
            levels.append(mask.copy())
            for v in perm:
                mask[v] = 1
                levels.append(mask.copy())
            out.append(levels)
    if not out:
        return np.zeros((0, d - p + 1, d + 1), dtype=np.int64)
    return np.asarray(out, dtype=np.int64)


def _simplex_volume(points):
    m = points.shape[0] - 1
    if m == 0:
        return 1.0
    e = points[1:] - points[0]
    g = e @ e.T
    det = np.linalg.det(g)
    if det < 0.0:
        det = 0.0
    return np.sqrt(det) / _fact(m)


def _fact(m):
    out = 1.0
    for i in range(2, m + 1):
        out *= i
    return out


def _dual_pieces_loop(coords, simplices, chains, per_face):
    nsimp = simplices.shape[0]
    nchain, nlev, nv = chains.shape
    dim = coords.shape[1]
    out = np.zeros((nsimp, nchain // per_face))
    pts = np.empty((nlev, dim))
    for s in range(nsimp):
        for c in range(nchain):
            for lev in range(nlev):
                cnt = 0.0
                for q in range(dim):
                    pts[lev, q] = 0.0
                for v in range(nv):
                    if chains[c, lev, v]:
                        cnt += 1.0
                        for q in range(dim):
                            pts[lev, q] += coords[simplices[s, v], q]
                for q in range(dim):
                    pts[lev, q] /= cnt
            out[s, c // per_face] += _simplex_volume(pts)
    return out


if numba is not None:
    _simplex_volume_jit = numba.njit(cache=True)(_simplex_volume)
    _fact_jit = numba.njit(cache=True)(_fact)

    @numba.njit(cache=True)
    def _simplex_volume_nb(points):  # pragma: no cover - compiled
        m = points.shape[0] - 1
        if m == 0:
            return 1.0
        e = points[1:] - points[0]
        g = e @ e.T
        det = np.linalg.det(g)
        if det < 0.0:
            det = 0.0
        f = 1.0
        for i in range(2, m + 1):
            f *= i
        return np.sqrt(det) / f

    @numba.njit(cache=True)
    def _dual_pieces_jit(coords, simplices, chains, per_face):  # pragma: no cover
        nsimp = simplices.shape[0]
        nchain, nlev, nv = chains.shape
        dim = coords.shape[1]
        out = np.zeros((nsimp, nchain // per_face))
        pts = np.empty((nlev, dim))
        for s in range(nsimp):
            for c in range(nchain):
                for lev in range(nlev):
                    cnt = 0.0
                    for q in range(dim):
                        pts[lev, q] = 0.0
                    for v in range(nv):
                        if chains[c, lev, v]:
                            cnt += 1.0
                            for q in range(dim):
                                pts[lev, q] += coords[simplices[s, v], q]
                    for q in range(dim):
                        pts[lev, q] /= cnt
                out[s, c // per_face] += _simplex_volume_nb(pts)
        return out


def _dual_pieces_numpy(coords, simplices, chains, per_face):
    nsimp = simplices.shape[0]
    nchain, nlev, _ = chains.shape
    out = np.zeros((nsimp, nchain // per_face))
    corner = coords[simplices]  # (nsimp, d+1, dim)
    m = nlev - 1
    for c in range(nchain):
        w = chains[c] / chains[c].sum(axis=1, keepdims=True)  # (nlev, d+1)
        pts = np.einsum("lv,svq->slq", w, corner)
        if m == 0:
            vol = np.ones(nsimp)
        else:
            e = pts[:, 1:, :] - pts[:, :1, :]
            g = np.einsum("saq,sbq->sab", e, e)
            vol = np.sqrt(np.clip(np.linalg.det(g), 0.0, None)) / factorial(m)
        out[:, c // per_face] += vol
    return out


def dual_volumes_per_simplex(coords, simplices, p: int, use_numba: bool | None = None):
    """Barycentric dual-cell pieces of every p-face inside every top simplex.

    Returns ``(n_top, C(d+1, p+1))``; column order follows
    ``itertools.combinations(range(d + 1), p + 1)`` over the sorted vertices.
    """
    use_numba = USE_NUMBA if use_numba is None else use_numba
    simplices = np.ascontiguousarray(simplices, dtype=np.int64)
    coords = np.ascontiguousarray(coords, dtype=np.float64)
    d = simplices.shape[1] - 1
    chains = _chains(d, p)
    per_face = factorial(d - p)
    if simplices.shape[0] == 0:
        return np.zeros((0, chains.shape[0] // per_face))
    if d == 0 or coords.shape[1] == 0:
        return np.ones((simplices.shape[0], chains.shape[0] // per_face))
    if use_numba and numba is not None:
        return _dual_pieces_jit(coords, simplices, chains, per_face)
    return _dual_pieces_numpy(coords, simplices, chains, per_face)
