"""Hot loops shared by the sparse, coloring and solver modules.

Every kernel here is written in plain array style so that it runs both as a
numba ``@njit`` function (the default) and as ordinary Python (the fallback).
Set the environment variable ``VNENTROPY_DISABLE_NUMBA=1`` before import to
select the fallback path; ``benchmarks/kernel_bench.py`` compares the two.
"""

import os

import numpy as np

NUMBA_ENABLED = os.environ.get("VNENTROPY_DISABLE_NUMBA", "0").lower() not in (
    "1",
    "true",
    "yes",
)

if NUMBA_ENABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a hard dependency
        NUMBA_ENABLED = False

if not NUMBA_ENABLED:

    def njit(*args, **kwargs):
        """No-op replacement for numba.njit on the fallback path."""
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


@njit(cache=True, nogil=True)
def csr_matvec(row_ptr, col_idx, values, x, out):
    """out = A @ x for a CSR matrix, fixed row-major summation order."""
    n = row_ptr.shape[0] - 1
    for i in range(n):
        acc = 0.0
        for p in range(row_ptr[i], row_ptr[i + 1]):
            acc += values[p] * x[col_idx[p]]
        out[i] = acc
    return out


def csr_matvec_numpy(row_ptr, col_idx, values, x, out):
    """Vectorized matvec used when numba is disabled."""
    out[:] = 0.0
    if values.shape[0] == 0:
        return out
    prod = values * x[col_idx]
    starts = row_ptr[:-1]
    nonempty = row_ptr[1:] > starts
    out[nonempty] = np.add.reduceat(prod, starts[nonempty])
    return out


if NUMBA_ENABLED:
    matvec_kernel = csr_matvec
else:
    matvec_kernel = csr_matvec_numpy


@njit(cache=True)
def connected_components(row_ptr, col_idx):
    """Label nodes by connected component, components numbered by first node."""
    n = row_ptr.shape[0] - 1
    labels = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    ncomp = 0
    for s in range(n):
        if labels[s] != -1:
            continue
        labels[s] = ncomp
        queue[0] = s
        head = 0
        tail = 1
        while head < tail:
            u = queue[head]
            head += 1
            for p in range(row_ptr[u], row_ptr[u + 1]):
                v = col_idx[p]
                if labels[v] == -1:
                    labels[v] = ncomp
                    queue[tail] = v
                    tail += 1
        ncomp += 1
    return labels, ncomp


@njit(cache=True)
def greedy_distance_coloring_kernel(row_ptr, col_idx, order, d):
    """Greedy distance-d coloring; W_i found by a depth-limited BFS from i.

    Nodes are processed in ``order``; each gets the smallest positive color
    not present among already-colored nodes within graph distance d.
    """
    n = row_ptr.shape[0] - 1
    color = np.zeros(n, dtype=np.int64)
    visited = np.full(n, -1, dtype=np.int64)
    forbidden = np.full(n + 2, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    for idx in range(n):
        i = order[idx]
        visited[i] = i
        queue[0] = i
        f_start = 0
        f_end = 1
        for _depth in range(d):
            nxt = f_end
            for qi in range(f_start, f_end):
                u = queue[qi]
                for p in range(row_ptr[u], row_ptr[u + 1]):
                    v = col_idx[p]
                    if visited[v] != i:
                        visited[v] = i
                        queue[nxt] = v
                        nxt += 1
                        if color[v] > 0:
                            forbidden[color[v]] = i
            f_start = f_end
            f_end = nxt
            if f_start == f_end:
                break
        c = 1
        while forbidden[c] == i:
            c += 1
        color[i] = c
    return color


@njit(cache=True)
def coloring_from_neighbor_pattern(row_ptr, col_idx, order):
    """Greedy coloring when the distance-d neighborhood pattern is explicit."""
    n = row_ptr.shape[0] - 1
    color = np.zeros(n, dtype=np.int64)
    forbidden = np.full(n + 2, -1, dtype=np.int64)
    for idx in range(n):
        i = order[idx]
        for p in range(row_ptr[i], row_ptr[i + 1]):
            c = color[col_idx[p]]
            if c > 0:
                forbidden[c] = i
        c = 1
        while forbidden[c] == i:
            c += 1
        color[i] = c
    return color


@njit(cache=True)
def validate_distance_coloring(row_ptr, col_idx, color, d):
    """Check the distance-d property with a depth-d BFS from every node.

    Returns (ok, i, j); (i, j) is the first same-color pair within distance d.
    """
    n = row_ptr.shape[0] - 1
    visited = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    for i in range(n):
        visited[i] = i
        queue[0] = i
        f_start = 0
        f_end = 1
        for _depth in range(d):
            nxt = f_end
            for qi in range(f_start, f_end):
                u = queue[qi]
                for p in range(row_ptr[u], row_ptr[u + 1]):
                    v = col_idx[p]
                    if visited[v] != i:
                        visited[v] = i
                        queue[nxt] = v
                        nxt += 1
                        if v != i and color[v] == color[i]:
                            return False, i, v
            f_start = f_end
            f_end = nxt
            if f_start == f_end:
                break
    return True, -1, -1


@njit(cache=True)
def bfs_levels(row_ptr, col_idx, start, level):
    """BFS filling ``level`` (-1 = unreached); returns (visit count, ecc)."""
    queue = np.empty(level.shape[0], dtype=np.int64)
    level[start] = 0
    queue[0] = start
    head = 0
    tail = 1
    ecc = 0
    while head < tail:
        u = queue[head]
        head += 1
        for p in range(row_ptr[u], row_ptr[u + 1]):
            v = col_idx[p]
            if level[v] == -1:
                level[v] = level[u] + 1
                if level[v] > ecc:
                    ecc = level[v]
                queue[tail] = v
                tail += 1
    return tail, ecc


@njit(cache=True)
def rcm_kernel(row_ptr, col_idx):
    """Reverse Cuthill-McKee ordering, per connected component.

    Each component is rooted at a pseudo-peripheral node found by repeated
    BFS eccentricity sweeps; BFS children are visited by ascending degree
    with node-index tie-break, and the concatenated order is reversed.
    """
    n = row_ptr.shape[0] - 1
    degree = np.empty(n, dtype=np.int64)
    for i in range(n):
        deg = 0
        for p in range(row_ptr[i], row_ptr[i + 1]):
            if col_idx[p] != i:
                deg += 1
        degree[i] = deg
    order = np.empty(n, dtype=np.int64)
    placed = np.zeros(n, dtype=np.bool_)
    level = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    nbrs = np.empty(n, dtype=np.int64)
    pos = 0
    for seed in range(n):
        if placed[seed]:
            continue
        # pseudo-peripheral root: repeat BFS from a min-degree farthest node
        root = seed
        level[:] = -1
        for i in range(n):
            if placed[i]:
                level[i] = -2
        count, ecc = bfs_levels(row_ptr, col_idx, root, level)
        while True:
            best = -1
            for i in range(n):
                if level[i] == ecc:
                    if best == -1 or degree[i] < degree[best]:
                        best = i
            level[:] = -1
            for i in range(n):
                if placed[i]:
                    level[i] = -2
            count2, ecc2 = bfs_levels(row_ptr, col_idx, best, level)
            if ecc2 > ecc:
                root = best
                ecc = ecc2
            else:
                root = best
                break
        # Cuthill-McKee BFS from root
        head = pos
        queue[pos] = root
        placed[root] = True
        tail = pos + 1
        while head < tail:
            u = queue[head]
            head += 1
            k = 0
            for p in range(row_ptr[u], row_ptr[u + 1]):
                v = col_idx[p]
                if not placed[v]:
                    placed[v] = True
                    nbrs[k] = v
                    k += 1
            # insertion sort by (degree, index)
            for a in range(1, k):
                key = nbrs[a]
                b = a - 1
                while b >= 0 and (
                    degree[nbrs[b]] > degree[key]
                    or (degree[nbrs[b]] == degree[key] and nbrs[b] > key)
                ):
                    nbrs[b + 1] = nbrs[b]
                    b -= 1
                nbrs[b + 1] = key
            for a in range(k):
                queue[tail] = nbrs[a]
                tail += 1
        pos = tail
    for i in range(n):
        order[i] = queue[n - 1 - i]
    return order


@njit(cache=True)
def spgemm_pattern(ap, aj, bp, bj, n):
    """Pattern of the boolean product A @ B for square CSR patterns."""
    mark = np.full(n, -1, dtype=np.int64)
    cp = np.empty(n + 1, dtype=np.int64)
    cp[0] = 0
    # counting pass
    for i in range(n):
        cnt = 0
        for p in range(ap[i], ap[i + 1]):
            k = aj[p]
            for q in range(bp[k], bp[k + 1]):
                j = bj[q]
                if mark[j] != i:
                    mark[j] = i
                    cnt += 1
        cp[i + 1] = cp[i] + cnt
    cj = np.empty(cp[n], dtype=np.int64)
    mark[:] = -1
    for i in range(n):
        w = cp[i]
        for p in range(ap[i], ap[i + 1]):
            k = aj[p]
            for q in range(bp[k], bp[k + 1]):
                j = bj[q]
                if mark[j] != i:
                    mark[j] = i
                    cj[w] = j
                    w += 1
        cj[cp[i] : cp[i + 1]] = np.sort(cj[cp[i] : cp[i + 1]])
    return cp, cj


@njit(cache=True)
def chol_symbolic(n, ap_low, aj_low):
    """Symbolic Cholesky of a permuted SPD pattern.

    ``ap_low/aj_low`` hold the strictly lower triangle by rows. Returns the
    elimination tree, the row pattern of L (strictly lower, sorted per row)
    and the column pointers of L (diagonal entry first in every column).
    """
    parent = np.full(n, -1, dtype=np.int64)
    ancestor = np.full(n, -1, dtype=np.int64)
    # elimination tree via path compression
    for k in range(n):
        for p in range(ap_low[k], ap_low[k + 1]):
            i = aj_low[p]
            while ancestor[i] != -1 and ancestor[i] != k:
                nxt = ancestor[i]
                ancestor[i] = k
                i = nxt
            if ancestor[i] == -1:
                ancestor[i] = k
                parent[i] = k
    # row patterns of L via ereach (path climbing with marks)
    mark = np.full(n, -1, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    rp = np.empty(n + 1, dtype=np.int64)
    rp[0] = 0
    for k in range(n):
        mark[k] = k
        cnt = 0
        for p in range(ap_low[k], ap_low[k + 1]):
            j = aj_low[p]
            while mark[j] != k:
                mark[j] = k
                cnt += 1
                j = parent[j]
        rp[k + 1] = rp[k] + cnt
    rj = np.empty(rp[n], dtype=np.int64)
    mark[:] = -1
    colcount = np.ones(n, dtype=np.int64)  # diagonal entries
    for k in range(n):
        mark[k] = k
        w = rp[k]
        for p in range(ap_low[k], ap_low[k + 1]):
            j = aj_low[p]
            depth = 0
            while mark[j] != k:
                mark[j] = k
                stack[depth] = j
                depth += 1
                j = parent[j]
            for t in range(depth):
                rj[w] = stack[t]
                w += 1
        row = np.sort(rj[rp[k] : rp[k + 1]])
        rj[rp[k] : rp[k + 1]] = row
        for t in range(row.shape[0]):
            colcount[row[t]] += 1
    lp = np.empty(n + 1, dtype=np.int64)
    lp[0] = 0
    for j in range(n):
        lp[j + 1] = lp[j] + colcount[j]
    # static column row-indices: diagonal first, then rows in ascending order
    li = np.empty(lp[n], dtype=np.int64)
    fill = np.empty(n, dtype=np.int64)
    for j in range(n):
        li[lp[j]] = j
        fill[j] = lp[j] + 1
    for k in range(n):
        for p in range(rp[k], rp[k + 1]):
            j = rj[p]
            li[fill[j]] = k
            fill[j] += 1
    return parent, rp, rj, lp, li


@njit(cache=True)
def chol_numeric(n, ap_low, aj_low, ax_low, diag, tau, rp, rj, lp, li, lx):
    """Up-looking numeric Cholesky of tau*I + A on the static symbolic pattern.

    Returns -1 on success, else the index of the first non-positive pivot.
    """
    x = np.zeros(n, dtype=np.float64)
    fill = np.empty(n, dtype=np.int64)
    for j in range(n):
        fill[j] = lp[j] + 1
    for k in range(n):
        for p in range(ap_low[k], ap_low[k + 1]):
            x[aj_low[p]] = ax_low[p]
        d = diag[k] + tau
        for p in range(rp[k], rp[k + 1]):
            j = rj[p]
            lkj = x[j] / lx[lp[j]]
            x[j] = 0.0
            for q in range(lp[j] + 1, fill[j]):
                x[li[q]] -= lx[q] * lkj
            d -= lkj * lkj
            lx[fill[j]] = lkj
            fill[j] += 1
        if d <= 0.0:
            return k
        lx[lp[k]] = np.sqrt(d)
    return -1


@njit(cache=True, nogil=True)
def chol_solve_kernel(n, lp, li, lx, b):
    """Solve L L^T x = b in place on a copy of b (column-stored L)."""
    x = b.copy()
    for j in range(n):
        xj = x[j] / lx[lp[j]]
        x[j] = xj
        for p in range(lp[j] + 1, lp[j + 1]):
            x[li[p]] -= lx[p] * xj
    for j in range(n - 1, -1, -1):
        acc = x[j]
        for p in range(lp[j] + 1, lp[j + 1]):
            acc -= lx[p] * x[li[p]]
        x[j] = acc / lx[lp[j]]
    return x
