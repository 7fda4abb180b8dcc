"""Shifted SPD solves (xi*I - A)x = y for the rational Krylov engine:
AMD-ordered sparse Cholesky with per-pole factor caching, and a
Jacobi-preconditioned conjugate gradient fallback."""

from __future__ import annotations

import heapq
import threading
from dataclasses import dataclass, field

import numpy as np

from ._kernels import chol_numeric, chol_solve_kernel, chol_symbolic
from .sparse import SparseSymMatrix, matvec


def amd_order(mat: SparseSymMatrix) -> np.ndarray:
    """Fill-reducing permutation by quotient-graph minimum degree with
    approximate (union-bound) external degrees. Runs once per matrix."""
    n = mat.n
    adj = [set() for _ in range(n)]
    for i in range(n):
        for p in range(mat.row_ptr[i], mat.row_ptr[i + 1]):
            j = int(mat.col_idx[p])
            if j != i:
                adj[i].add(j)
    elem = [set() for _ in range(n)]
    boundary = {}
    degree = [len(adj[i]) for i in range(n)]
    heap = [(degree[i], i) for i in range(n)]
    heapq.heapify(heap)
    alive = np.ones(n, dtype=bool)
    order = np.empty(n, dtype=np.int64)
    pos = 0
    while pos < n:
        d, p = heapq.heappop(heap)
        if not alive[p] or d != degree[p]:
            continue
        new_boundary = set(adj[p])
        for e in elem[p]:
            new_boundary |= boundary.pop(e)
        new_boundary.discard(p)
        absorbed = elem[p]
        boundary[p] = new_boundary
        for i in new_boundary:
            adj[i] -= new_boundary
            adj[i].discard(p)
            elem[i] = (elem[i] - absorbed) | {p}
            dd = len(adj[i])
            for e in elem[i]:
                dd += len(boundary[e]) - 1
            degree[i] = min(dd, n - pos - 1)
            heapq.heappush(heap, (degree[i], i))
        alive[p] = False
        adj[p] = elem[p] = set()
        order[pos] = p
        pos += 1
    return order


@dataclass
class SymbolicAnalysis:
    """AMD permutation plus the symbolic factor shared by all poles."""

    perm: np.ndarray          # perm[k] = original index eliminated k-th
    inv_perm: np.ndarray
    ap_low: np.ndarray        # permuted strictly-lower CSR
    aj_low: np.ndarray
    ax_low: np.ndarray
    diag: np.ndarray          # permuted diagonal of A
    rp: np.ndarray            # row pattern of L (strictly lower)
    rj: np.ndarray
    lp: np.ndarray            # static column structure of L
    li: np.ndarray
    nnz_matrix: int

    @property
    def nnz_factor(self) -> int:
        return int(self.lp[-1])

    @property
    def fill_ratio(self) -> float:
        return self.nnz_factor / max(1, self.nnz_matrix)


def analyze(mat: SparseSymMatrix) -> SymbolicAnalysis:
    """AMD ordering plus symbolic Cholesky of the permuted pattern.

    The pattern of xi*I - A is pole-independent, so one analysis serves
    every factorization of the same matrix.
    """
    perm = amd_order(mat)
    inv_perm = np.empty(mat.n, dtype=np.int64)
    inv_perm[perm] = np.arange(mat.n)
    rows_old = np.repeat(np.arange(mat.n), np.diff(mat.row_ptr))
    ri, ci = inv_perm[rows_old], inv_perm[mat.col_idx]
    diag = np.zeros(mat.n)
    dmask = ri == ci
    diag[ri[dmask]] = mat.values[dmask]
    lmask = ri > ci
    lr, lc, lv = ri[lmask], ci[lmask], mat.values[lmask]
    order = np.lexsort((lc, lr))
    lr, lc, lv = lr[order], lc[order], lv[order]
    ap_low = np.zeros(mat.n + 1, dtype=np.int64)
    np.add.at(ap_low, lr + 1, 1)
    np.cumsum(ap_low, out=ap_low)
    _, rp, rj, lp, li = chol_symbolic(mat.n, ap_low, lc.astype(np.int64))
    return SymbolicAnalysis(
        perm=perm,
        inv_perm=inv_perm,
        ap_low=ap_low,
        aj_low=lc.astype(np.int64),
        ax_low=lv,
        diag=diag,
        rp=rp,
        rj=rj,
        lp=lp,
        li=li,
        nnz_matrix=mat.nnz,
    )


class FactorizationError(RuntimeError):
    """Non-positive pivot; xi*I - A was not negative definite as required."""


@dataclass
class CholeskyFactor:
    """Numeric factor of -(xi*I - A) = |xi| I + A, P C P^T = L L^T."""

    xi: float
    analysis: SymbolicAnalysis
    lx: np.ndarray

    def solve_spd(self, y: np.ndarray) -> np.ndarray:
        """x with (|xi| I + A) x = y."""
        sym = self.analysis
        n = sym.lp.shape[0] - 1
        z = chol_solve_kernel(n, sym.lp, sym.li, self.lx, np.ascontiguousarray(y[sym.perm]))
        x = np.empty_like(z)
        x[sym.perm] = z
        return x

    def solve(self, y: np.ndarray) -> np.ndarray:
        """x with (xi*I - A) x = y."""
        return -self.solve_spd(y)


@dataclass
class FactorCache:
    """Append-only pole -> factor map with a shared symbolic analysis."""

    matrix: SparseSymMatrix
    analysis: SymbolicAnalysis | None = None
    factors: dict = field(default_factory=dict)
    factor_count: int = 0
    solve_count: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def get_analysis(self) -> SymbolicAnalysis:
        with self._lock:
            if self.analysis is None:
                self.analysis = analyze(self.matrix)
            return self.analysis

    @property
    def fill_ratio(self) -> float:
        return self.get_analysis().fill_ratio


def factorize(mat: SparseSymMatrix, xi: float, cache: FactorCache) -> CholeskyFactor:
    """Cholesky factor of |xi| I + A for a pole xi < 0, cached by pole.

    Insertion is serialized: the first caller factorizes, others wait on the
    cache lock; reads of existing factors are safe concurrently.
    """
    if xi >= 0:
        raise ValueError("pole must be negative")
    if xi in cache.factors:
        return cache.factors[xi]
    with cache._lock:
        if xi in cache.factors:
            return cache.factors[xi]
        if cache.analysis is None:
            cache.analysis = analyze(cache.matrix)
        sym = cache.analysis
        lx = np.empty(sym.nnz_factor, dtype=np.float64)
        bad = chol_numeric(
            mat.n, sym.ap_low, sym.aj_low, sym.ax_low, sym.diag, -xi,
            sym.rp, sym.rj, sym.lp, sym.li, lx,
        )
        if bad >= 0:
            raise FactorizationError(f"non-positive pivot at permuted index {bad}")
        factor = CholeskyFactor(xi=xi, analysis=sym, lx=lx)
        cache.factors[xi] = factor
        cache.factor_count = len(cache.factors)
    return factor


def solve(factor: CholeskyFactor, y: np.ndarray) -> np.ndarray:
    """Two triangular solves (plus permutations): (xi*I - A) x = y."""
    if y.shape[0] != factor.analysis.diag.shape[0]:
        raise ValueError("dimension mismatch")
    return factor.solve(y)


def cg_solve(
    mat: SparseSymMatrix,
    xi: float,
    y: np.ndarray,
    tol_rel: float = 1e-10,
    max_iter: int | None = None,
) -> np.ndarray:
    """Jacobi-preconditioned CG on |xi| I + A, returning x with
    (xi*I - A) x = y and ||r|| / ||y|| <= tol_rel."""
    if xi >= 0:
        raise ValueError("pole must be negative")
    tau = -xi
    norm_y = np.linalg.norm(y)
    if norm_y == 0:
        return np.zeros_like(y)
    if max_iter is None:
        max_iter = max(1000, 10 * mat.n)
    dinv = 1.0 / (tau + mat.diagonal())
    x = np.zeros_like(y)
    r = y.copy()
    z = dinv * r
    p = z.copy()
    rz = r @ z
    for _ in range(max_iter):
        ap = matvec(mat, p) + tau * p
        alpha = rz / (p @ ap)
        x += alpha * p
        r -= alpha * ap
        if np.linalg.norm(r) <= tol_rel * norm_y:
            return -x
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise RuntimeError(f"CG did not converge in {max_iter} iterations")


class PoleSolver:
    """Backend-dispatching shifted solver used by the Krylov engine.

    ``backend`` is one of direct/cg/auto; auto picks CG when the symbolic
    analysis predicts a fill-in ratio above ``fill_threshold``.
    """

    def __init__(
        self,
        mat: SparseSymMatrix,
        backend: str = "auto",
        fill_threshold: float = 50.0,
        cg_tol: float = 1e-10,
        cache: FactorCache | None = None,
    ):
        if backend not in ("direct", "cg", "auto"):
            raise ValueError(f"unknown backend {backend!r}")
        self.matrix = mat
        self.cache = cache if cache is not None else FactorCache(matrix=mat)
        self.requested_backend = backend
        self.fill_threshold = fill_threshold
        self.cg_tol = cg_tol
        self._resolved = backend if backend != "auto" else None
        self.solve_count = 0

    @property
    def backend(self) -> str:
        if self._resolved is None:
            ratio = self.cache.fill_ratio
            self._resolved = "cg" if ratio > self.fill_threshold else "direct"
        return self._resolved

    def solve_spd_shift(self, tau: float, y: np.ndarray) -> np.ndarray:
        """x with (tau I + A) x = y, tau > 0."""
        self.solve_count += 1
        if self.backend == "direct":
            factor = factorize(self.matrix, -tau, self.cache)
            return factor.solve_spd(y)
        return -cg_solve(self.matrix, -tau, y, tol_rel=self.cg_tol)

    @property
    def factorization_count(self) -> int:
        return self.cache.factor_count
