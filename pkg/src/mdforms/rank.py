"""Exact rank of sparse integer matrices."""

from __future__ import annotations

from math import gcd

import numpy as np
import scipy.sparse as sp

from . import _kernels


def _core_rows(matrix, row_mask, col_mask):
    core = sp.csr_matrix(matrix)[row_mask][:, col_mask].tocsr()
    core.eliminate_zeros()
    rows = []
    for r in range(core.shape[0]):
        lo, hi = core.indptr[r], core.indptr[r + 1]
        if hi > lo:
            rows.append({int(c): int(v) for c, v in zip(core.indices[lo:hi], core.data[lo:hi])})
    return rows


def _normalise(row: dict) -> dict:
    g = 0
    for v in row.values():
        g = gcd(g, v)
        if g == 1:
            return row
    return {c: v // g for c, v in row.items()} if g > 1 else row


def _eliminate(rows: list) -> int:
    """Fraction-free sparse elimination; returns the rank."""
    rank = 0
    col_rows: dict = {}
    for idx, row in enumerate(rows):
        for c in row:
            col_rows.setdefault(c, set()).add(idx)
    alive = set(range(len(rows)))
    while alive:
        # sparsest column, then sparsest row with a unit entry if possible
        c = min(col_rows, key=lambda q: (len(col_rows[q]), q), default=None)
        if c is None:
            break
        cands = col_rows.pop(c)
        if not cands:
            continue
        piv = min(cands, key=lambda r: (abs(rows[r][c]) != 1, len(rows[r]), r))
        prow = rows[piv]
        pval = prow[c]
        alive.discard(piv)
        for q in prow:
            if q != c:
                col_rows[q].discard(piv)
        rank += 1
        for r in cands:
            if r == piv:
                continue
            row = rows[r]
            a = row.pop(c)
            g = gcd(pval, a)
            mp, ma = pval // g, a // g
            new = {}
            for q, v in row.items():
                new[q] = v * mp
            for q, v in prow.items():
                if q == c:
                    continue
                val = new.get(q, 0) - ma * v
                if val:
                    new[q] = val
                else:
                    new.pop(q, None)
            for q in row:
                if q not in new:
                    col_rows[q].discard(r)
            for q in new:
                col_rows.setdefault(q, set()).add(r)
            rows[r] = _normalise(new)
            if not new:
                alive.discard(r)
        col_rows = {q: s for q, s in col_rows.items() if s}
    return rank


def exact_rank(matrix) -> int:
    """Rank over the rationals of an integer sparse matrix."""
    m = sp.csr_matrix(matrix)
    if m.shape[0] == 0 or m.shape[1] == 0 or m.nnz == 0:
        return 0
    data = m.data
    if not np.all(np.equal(np.round(data), data)):
        raise ValueError("exact rank needs integer entries")
    m = sp.csr_matrix((data.astype(np.int64), m.indices, m.indptr), shape=m.shape)
    peeled, row_mask, col_mask = _kernels.peel_singletons(m)
    if not row_mask.any() or not col_mask.any():
        return int(peeled)
    return int(peeled) + _eliminate(_core_rows(m, row_mask, col_mask))


def rank_mod_p(matrix, p: int = _kernels.DEFAULT_PRIME) -> int:
    """Rank over GF(p); a lower bound for the rational rank, used as cross-check."""
    m = sp.csr_matrix(matrix)
    if m.shape[0] == 0 or m.shape[1] == 0 or m.nnz == 0:
        return 0
    peeled, rmask, cmask = _kernels.peel_singletons(m.astype(np.int64))
    core = m[rmask][:, cmask].toarray()
    return int(peeled) + _kernels.rank_mod_p(core, p)
