"""Distance-d colorings of sparse graphs and the induced probing vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import (
    coloring_from_neighbor_pattern,
    greedy_distance_coloring_kernel,
    rcm_kernel,
    spgemm_pattern,
    validate_distance_coloring,
)
from .sparse import SparseSymMatrix


@dataclass(frozen=True)
class Coloring:
    """Node partition realizing a distance-d coloring.

    ``color`` maps node -> color id (1-based, contiguous 1..num_colors);
    ``classes[l]`` is the sorted node set of color l+1.
    """

    d: int
    color: np.ndarray
    num_colors: int
    classes: tuple

    @property
    def n(self) -> int:
        return int(self.color.shape[0])

    def class_sizes(self) -> np.ndarray:
        return np.array([c.shape[0] for c in self.classes], dtype=np.int64)


def _make_coloring(d: int, color: np.ndarray) -> Coloring:
    num = int(color.max()) if color.size else 0
    used = np.unique(color)
    if used.shape[0] != num:  # compact to 1..s (greedy output is already contiguous)
        remap = np.zeros(num + 1, dtype=np.int64)
        remap[used] = np.arange(1, used.shape[0] + 1)
        color = remap[color]
        num = used.shape[0]
    classes = tuple(np.flatnonzero(color == c + 1) for c in range(num))
    return Coloring(d=d, color=color, num_colors=num, classes=classes)


def degree_descending_order(graph: SparseSymMatrix) -> np.ndarray:
    """Stable node order by descending degree, ties by ascending index."""
    deg = graph.degrees()
    return np.lexsort((np.arange(graph.n), -deg))


def rcm_order(graph: SparseSymMatrix) -> np.ndarray:
    """Reverse Cuthill-McKee ordering; order[k] is the node placed at k."""
    return rcm_kernel(graph.row_ptr, graph.col_idx)


def bandwidth(graph: SparseSymMatrix, order=None) -> int:
    """Max |i - j| over stored off-diagonal entries, optionally reordered."""
    rows = np.repeat(np.arange(graph.n), np.diff(graph.row_ptr))
    cols = graph.col_idx
    if order is not None:
        pos = np.empty(graph.n, dtype=np.int64)
        pos[order] = np.arange(graph.n)
        rows, cols = pos[rows], pos[cols]
    if rows.size == 0:
        return 0
    return int(np.abs(rows - cols).max())


def greedy_distance_coloring(
    graph: SparseSymMatrix,
    d: int,
    order=None,
    use_power_pattern: bool = False,
) -> Coloring:
    """Greedy distance-d coloring of the graph of A.

    Processes nodes in ``order`` (natural order by default) and assigns each
    the smallest color not used within distance d. Neighborhoods come from a
    depth-limited BFS, or from the pattern of (A+I)^d when
    ``use_power_pattern`` is set (repeated squaring of the sparse pattern).
    """
    if d < 1:
        raise ValueError("d must be at least 1")
    if order is None:
        order = np.arange(graph.n, dtype=np.int64)
    else:
        order = np.asarray(order, dtype=np.int64)
    if use_power_pattern:
        rp, cj = _distance_pattern(graph, d)
        color = coloring_from_neighbor_pattern(rp, cj, order)
    else:
        color = greedy_distance_coloring_kernel(graph.row_ptr, graph.col_idx, order, d)
    return _make_coloring(d, color)


def _distance_pattern(graph: SparseSymMatrix, d: int):
    """CSR pattern of (A + I)^d via repeated squaring (distance <= d pairs)."""
    n = graph.n
    rows = np.repeat(np.arange(n), np.diff(graph.row_ptr))
    rows = np.concatenate([rows, np.arange(n)])
    cols = np.concatenate([graph.col_idx, np.arange(n)])
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    keep = np.ones(rows.size, dtype=bool)
    keep[1:] = (np.diff(rows) != 0) | (np.diff(cols) != 0)
    rows, cols = rows[keep], cols[keep]
    bp = np.zeros(n + 1, dtype=np.int64)
    np.add.at(bp, rows + 1, 1)
    np.cumsum(bp, out=bp)
    bj = cols.astype(np.int64)
    # exponentiation by squaring on the pattern
    rp, rj = None, None
    sq_p, sq_j = bp, bj
    e = d
    while e > 0:
        if e & 1:
            if rp is None:
                rp, rj = sq_p, sq_j
            else:
                rp, rj = spgemm_pattern(rp, rj, sq_p, sq_j, n)
        e >>= 1
        if e:
            sq_p, sq_j = spgemm_pattern(sq_p, sq_j, sq_p, sq_j, n)
    return rp, rj


def banded_coloring(n: int, beta: int, d: int) -> Coloring:
    """col(i) = ((i-1) mod (d*beta+1)) + 1; valid for any beta-banded matrix
    and optimal with s = d*beta+1 when the band is full."""
    if n < 1 or beta < 1 or d < 1:
        raise ValueError("need n, beta, d >= 1")
    period = d * beta + 1
    color = np.arange(n, dtype=np.int64) % period + 1
    return _make_coloring(d, color)


def grid2d_coloring(side: int, d: int) -> Coloring:
    """Optimal distance-d coloring of the side x side grid graph with
    ceil((d+1)^2 / 2) colors, from a lattice sublattice construction.

    Nodes are numbered row-major: node = x * side + y.
    """
    if d < 1:
        raise ValueError("d must be at least 1")
    x, y = np.divmod(np.arange(side * side, dtype=np.int64), side)
    if d % 2 == 1:
        # sublattice generated by (t, t), (t, -t), index 2 t^2 = (d+1)^2 / 2
        t = (d + 1) // 2
        u = (x + y) % (2 * t)
        v = (x - y) % (2 * t)
        color = u * t + (v - (u % 2)) // 2 + 1
    else:
        # sublattice generated by (s, s+1), (-(s+1), s), index 2 s^2 + 2 s + 1
        s = d // 2
        m = 2 * s * s + 2 * s + 1
        k = (s + 1) * pow(s, -1, m) % m
        color = (x + k * y) % m + 1
    return _make_coloring(d, color)


def probing_vectors(coloring: Coloring):
    """Implicit probing vectors: for each color the index set V_l defining
    v_l = sum of the canonical basis vectors over V_l, ||v_l|| = |V_l|^{1/2}."""
    return coloring.classes


def probing_vector_dense(coloring: Coloring, ell: int) -> np.ndarray:
    v = np.zeros(coloring.n)
    v[coloring.classes[ell]] = 1.0
    return v


def validate_coloring(graph: SparseSymMatrix, coloring: Coloring, d: int):
    """Depth-d BFS check of the distance property.

    Returns (True, None) or (False, (i, j)) with a violating same-color pair.
    """
    ok, i, j = validate_distance_coloring(graph.row_ptr, graph.col_idx, coloring.color, d)
    return (True, None) if ok else (False, (int(i), int(j)))
