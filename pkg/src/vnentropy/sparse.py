"""Sparse symmetric matrices, Matrix Market I/O, graph Laplacians and the
dense reference oracle used throughout the test suite."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from ._kernels import connected_components, matvec_kernel


class MatrixFormatError(ValueError):
    """Malformed Matrix Market input or invalid matrix data."""


@dataclass(frozen=True)
class SparseSymMatrix:
    """Immutable CSR matrix storing the full symmetric pattern (both triangles).

    Column indices are strictly increasing within each row and explicit zeros
    are never stored; instances are safe to share across threads.
    """

    n: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray
    is_pattern: bool = False

    @property
    def nnz(self) -> int:
        return int(self.col_idx.shape[0])

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return matvec(self, x)

    def _row_indices(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), np.diff(self.row_ptr))

    def diagonal(self) -> np.ndarray:
        diag = np.zeros(self.n)
        rows = self._row_indices()
        mask = rows == self.col_idx
        diag[rows[mask]] = self.values[mask]
        return diag

    def trace(self) -> float:
        return float(self.diagonal().sum())

    def todense(self) -> np.ndarray:
        dense = np.zeros((self.n, self.n))
        dense[self._row_indices(), self.col_idx] = self.values
        return dense

    def degrees(self) -> np.ndarray:
        """Node degrees of the associated graph (off-diagonal entry counts)."""
        rows = self._row_indices()
        loops = np.bincount(rows[rows == self.col_idx], minlength=self.n)
        return np.diff(self.row_ptr).astype(np.int64) - loops

    def scaled(self, factor: float) -> "SparseSymMatrix":
        return SparseSymMatrix(
            self.n, self.row_ptr, self.col_idx, self.values * factor, False
        )


def from_coo(n, rows, cols, vals, is_pattern=False) -> SparseSymMatrix:
    """Build a SparseSymMatrix from symmetric COO triplets.

    Both (i, j) and (j, i) must be present with equal values; duplicates and
    explicit zeros are rejected, except zeros which are dropped.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    if rows.size and (rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= n):
        raise MatrixFormatError("index out of range")
    if not np.all(np.isfinite(vals)):
        raise MatrixFormatError("non-finite matrix entry")
    keep = vals != 0.0
    rows, cols, vals = rows[keep], cols[keep], vals[keep]
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if rows.size > 1:
        dup = (np.diff(rows) == 0) & (np.diff(cols) == 0)
        if dup.any():
            raise MatrixFormatError("duplicate entry in coordinate data")
    row_ptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(row_ptr, rows + 1, 1)
    np.cumsum(row_ptr, out=row_ptr)
    mat = SparseSymMatrix(n, row_ptr, cols, vals, is_pattern)
    _check_structural_symmetry(mat)
    return mat


def _check_structural_symmetry(mat: SparseSymMatrix) -> None:
    rows = np.repeat(np.arange(mat.n), np.diff(mat.row_ptr))
    fw = np.lexsort((mat.col_idx, rows))
    bw = np.lexsort((rows, mat.col_idx))
    if not (
        np.array_equal(rows[fw], mat.col_idx[bw])
        and np.array_equal(mat.col_idx[fw], rows[bw])
    ):
        raise MatrixFormatError("matrix is not structurally symmetric")
    if not np.allclose(mat.values[fw], mat.values[bw], rtol=0, atol=0):
        raise MatrixFormatError("unequal (i,j)/(j,i) values")


def parse_matrix_market(data) -> SparseSymMatrix:
    """Parse a Matrix Market coordinate file into a SparseSymMatrix.

    Accepts field real/integer/pattern and symmetry symmetric/general;
    general input must be structurally symmetric. For symmetric files only
    one triangle is stored in the file and the transpose is materialized.
    """
    if isinstance(data, bytes):
        text = data.decode("ascii", errors="replace")
    elif isinstance(data, str):
        text = data
    else:
        text = data.read()
        if isinstance(text, bytes):
            text = text.decode("ascii", errors="replace")
    lines = text.splitlines()
    if not lines:
        raise MatrixFormatError("empty input")
    header = lines[0].strip().split()
    if (
        len(header) != 5
        or header[0] != "%%MatrixMarket"
        or header[1].lower() != "matrix"
        or header[2].lower() != "coordinate"
    ):
        raise MatrixFormatError(f"unsupported header: {lines[0]!r}")
    fmt = header[3].lower()
    sym = header[4].lower()
    if fmt not in ("real", "integer", "pattern"):
        raise MatrixFormatError(f"unsupported field {fmt!r}")
    if sym not in ("symmetric", "general"):
        raise MatrixFormatError(f"unsupported symmetry {sym!r}")
    pos = 1
    while pos < len(lines) and (lines[pos].startswith("%") or not lines[pos].strip()):
        pos += 1
    if pos >= len(lines):
        raise MatrixFormatError("missing size line")
    size = lines[pos].split()
    if len(size) != 3:
        raise MatrixFormatError(f"bad size line: {lines[pos]!r}")
    nrows, ncols, nnz = (int(tok) for tok in size)
    if nrows != ncols:
        raise MatrixFormatError("matrix is not square")
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz, dtype=np.float64)
    k = 0
    for line in lines[pos + 1 :]:
        line = line.strip()
        if not line or line.startswith("%"):
            continue
        tok = line.split()
        if fmt == "pattern":
            if len(tok) < 2:
                raise MatrixFormatError(f"bad entry: {line!r}")
            i, j, v = int(tok[0]), int(tok[1]), 1.0
        else:
            if len(tok) < 3:
                raise MatrixFormatError(f"bad entry: {line!r}")
            i, j, v = int(tok[0]), int(tok[1]), float(tok[2])
        if not (1 <= i <= nrows and 1 <= j <= ncols):
            raise MatrixFormatError(f"index out of range: {line!r}")
        if k >= nnz:
            raise MatrixFormatError("more entries than declared")
        rows[k], cols[k], vals[k] = i - 1, j - 1, v
        k += 1
    if k != nnz:
        raise MatrixFormatError(f"expected {nnz} entries, found {k}")
    if sym == "symmetric":
        off = rows != cols
        rows, cols, vals = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
            np.concatenate([vals, vals[off]]),
        )
    return from_coo(nrows, rows, cols, vals, is_pattern=(fmt == "pattern"))


def write_matrix_market(mat: SparseSymMatrix) -> str:
    """Write the upper triangle in Matrix Market coordinate format."""
    field = "pattern" if mat.is_pattern else "real"
    rows = np.repeat(np.arange(mat.n), np.diff(mat.row_ptr))
    mask = rows <= mat.col_idx
    r, c, v = rows[mask], mat.col_idx[mask], mat.values[mask]
    lines = [f"%%MatrixMarket matrix coordinate {field} symmetric"]
    lines.append(f"{mat.n} {mat.n} {r.size}")
    if mat.is_pattern:
        lines.extend(f"{i + 1} {j + 1}" for i, j in zip(r, c))
    else:
        lines.extend(f"{i + 1} {j + 1} {x:.17g}" for i, j, x in zip(r, c, v))
    return "\n".join(lines) + "\n"


_CACHE_MAGIC = b"ENTR"
_CACHE_VERSION = 1


def write_binary_cache(mat: SparseSymMatrix, path) -> None:
    """Binary cache: magic "ENTR", u32 version, u8 pattern flag, u64 n and
    nnz, then raw little-endian CSR arrays (int64 ptr/idx, float64 values)."""
    with open(path, "wb") as fh:
        fh.write(_CACHE_MAGIC)
        fh.write(struct.pack("<IBQQ", _CACHE_VERSION, int(mat.is_pattern), mat.n, mat.nnz))
        fh.write(mat.row_ptr.astype("<i8").tobytes())
        fh.write(mat.col_idx.astype("<i8").tobytes())
        fh.write(mat.values.astype("<f8").tobytes())


def read_binary_cache(path) -> SparseSymMatrix:
    with open(path, "rb") as fh:
        if fh.read(4) != _CACHE_MAGIC:
            raise MatrixFormatError("bad cache magic")
        version, pat, n, nnz = struct.unpack("<IBQQ", fh.read(21))
        if version != _CACHE_VERSION:
            raise MatrixFormatError(f"unsupported cache version {version}")
        row_ptr = np.frombuffer(fh.read(8 * (n + 1)), dtype="<i8").astype(np.int64)
        col_idx = np.frombuffer(fh.read(8 * nnz), dtype="<i8").astype(np.int64)
        values = np.frombuffer(fh.read(8 * nnz), dtype="<f8").astype(np.float64)
    return SparseSymMatrix(int(n), row_ptr, col_idx, values, bool(pat))


@dataclass(frozen=True)
class DensityMatrix:
    """Unit-trace rescaling rho = scale * A_raw of a PSD matrix."""

    matrix: SparseSymMatrix
    scale: float
    trace_raw: float

    @property
    def n(self) -> int:
        return self.matrix.n


@dataclass(frozen=True)
class SpectralInterval:
    """Estimated spectral enclosure [a, b]; a is lambda_2 when desingularized."""

    a: float
    b: float
    widened: bool = field(default=False)


def matvec(mat: SparseSymMatrix, x: np.ndarray) -> np.ndarray:
    """Exact CSR product A @ x with deterministic summation order."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != mat.n:
        raise ValueError(f"dimension mismatch: {x.shape[0]} != {mat.n}")
    out = np.empty(mat.n, dtype=np.float64)
    return matvec_kernel(mat.row_ptr, mat.col_idx, mat.values, x, out)


def build_laplacian(adjacency: SparseSymMatrix) -> SparseSymMatrix:
    """Graph Laplacian L = D - A with D = diag(A 1); rows sum to zero."""
    rows = np.repeat(np.arange(adjacency.n), np.diff(adjacency.row_ptr))
    if np.any(rows == adjacency.col_idx):
        raise MatrixFormatError("adjacency matrix has nonzero diagonal")
    if np.any(adjacency.values < 0):
        raise MatrixFormatError("negative edge weight")
    deg = np.zeros(adjacency.n)
    np.add.at(deg, rows, adjacency.values)
    all_rows = np.concatenate([rows, np.arange(adjacency.n)])
    all_cols = np.concatenate([adjacency.col_idx, np.arange(adjacency.n)])
    all_vals = np.concatenate([-adjacency.values, deg])
    return from_coo(adjacency.n, all_rows, all_cols, all_vals)


def largest_component(mat: SparseSymMatrix):
    """Induced submatrix of the largest connected component.

    Returns (submatrix, old_to_new) where old_to_new[i] is the new index of
    node i, or -1 for dropped nodes. Size ties go to the component holding
    the smallest original node index (components are discovered in index
    order, and the first maximum wins).
    """
    if mat.n == 0:
        return mat, np.empty(0, dtype=np.int64)
    labels, ncomp = connected_components(mat.row_ptr, mat.col_idx)
    sizes = np.bincount(labels, minlength=ncomp)
    target = int(np.argmax(sizes))
    keep = labels == target
    old_to_new = np.full(mat.n, -1, dtype=np.int64)
    old_to_new[keep] = np.arange(int(keep.sum()))
    rows = np.repeat(np.arange(mat.n), np.diff(mat.row_ptr))
    mask = keep[rows] & keep[mat.col_idx]
    sub = from_coo(
        int(keep.sum()),
        old_to_new[rows[mask]],
        old_to_new[mat.col_idx[mask]],
        mat.values[mask],
        is_pattern=mat.is_pattern,
    )
    return sub, old_to_new


def normalize_trace(mat: SparseSymMatrix) -> DensityMatrix:
    """rho = A / trace(A), recording the scale 1/trace(A)."""
    tr = mat.trace()
    if tr <= 0:
        raise ValueError(f"trace must be positive, got {tr}")
    return DensityMatrix(matrix=mat.scaled(1.0 / tr), scale=1.0 / tr, trace_raw=tr)


def entropy_rescale(gamma: float, entropy_a: float, trace_a: float) -> float:
    """S(gamma*A) from S(A): gamma*S(A) - gamma*log(gamma)*trace(A)."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return gamma * entropy_a - gamma * np.log(gamma) * trace_a


def dense_sym_eig(a: np.ndarray):
    """Eigendecomposition of a small dense symmetric matrix.

    Contract: A = U diag(w) U^T with ||A U - U diag(w)|| <= 1e-12 n ||A||
    and ||U^T U - I|| <= 1e-12 n (LAPACK symmetric eigensolver).
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    scale = np.abs(a).max() if a.size else 0.0
    if scale > 0 and np.abs(a - a.T).max() > 1e-12 * scale * a.shape[0]:
        raise ValueError("matrix is not symmetric")
    w, u = np.linalg.eigh(0.5 * (a + a.T))
    return w, u


DENSE_ORACLE_CAP = 5000


def dense_entropy_oracle(mat, cap: int = DENSE_ORACLE_CAP) -> float:
    """-sum(lambda_i log lambda_i) by full eigendecomposition, 0 log 0 = 0.

    Accepts a SparseSymMatrix or a dense symmetric array; eigenvalues in
    [-1e-12 ||A||, 0) are clamped to zero, anything lower is an error.
    """
    dense = mat.todense() if isinstance(mat, SparseSymMatrix) else np.asarray(mat)
    if dense.shape[0] > cap:
        raise ValueError(f"n={dense.shape[0]} exceeds dense oracle cap {cap}")
    w, _ = dense_sym_eig(dense)
    return entropy_from_eigenvalues(w)


def entropy_from_eigenvalues(w: np.ndarray) -> float:
    norm = np.abs(w).max() if w.size else 0.0
    if norm > 0 and w.min() < -1e-12 * norm:
        raise ValueError(f"matrix is not PSD: eigenvalue {w.min()}")
    w = np.clip(w, 0.0, None)
    pos = w[w > 0]
    return float(-(pos * np.log(pos)).sum())


def spectral_interval(
    mat: SparseSymMatrix,
    desingularize: bool = False,
    iters: int = 200,
    lower_safety: float = 0.5,
    upper_safety: float = 1.1,
    seed: int = 0,
) -> SpectralInterval:
    """Widened Ritz enclosure of the spectrum from a Lanczos sweep.

    With ``desingularize`` the start vector is orthogonalized against the
    all-ones kernel direction so the smallest Ritz value tracks lambda_2.
    The Ritz interval is widened by the safety factors (lower clamped at 0).
    """
    if iters < 2:
        raise ValueError("iters must be at least 2")
    n = mat.n
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    ones = np.ones(n) / np.sqrt(n)
    if desingularize:
        v -= ones @ v * ones
    v /= np.linalg.norm(v)
    m = min(iters, n - 1 if desingularize else n)
    basis = np.zeros((n, m))
    alpha = np.zeros(m)
    beta = np.zeros(m)
    basis[:, 0] = v
    k = 0
    for k in range(m):
        w = matvec(mat, basis[:, k])
        alpha[k] = basis[:, k] @ w
        w -= basis[:, : k + 1] @ (basis[:, : k + 1].T @ w)
        w -= basis[:, : k + 1] @ (basis[:, : k + 1].T @ w)
        if desingularize:
            w -= ones @ w * ones
        nw = np.linalg.norm(w)
        if k + 1 >= m or nw < 1e-13 * max(1.0, np.abs(alpha).max()):
            k += 1
            break
        beta[k] = nw
        basis[:, k + 1] = w / nw
    t = np.diag(alpha[:k])
    if k > 1:
        t += np.diag(beta[: k - 1], 1) + np.diag(beta[: k - 1], -1)
    ritz = np.linalg.eigvalsh(t)
    a = max(0.0, float(ritz[0]) * lower_safety)
    b = float(ritz[-1]) * upper_safety
    return SpectralInterval(a=a, b=b, widened=True)
