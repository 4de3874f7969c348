"""Compressed-row matrices, shifted operators and the linear solvers behind them.

Storage and the matrix-vector kernel come from :mod:`scipy.sparse`; the
preconditioned conjugate gradient loop is written out here so that the
stopping rule, warm starts and iteration accounting are under our control.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DEFAULT_TOL = 1e-10


class DimensionError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    """Iterative solve stopped at the iteration cap."""

    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SingularMatrixError(RuntimeError):
    pass


class MatrixMarketError(ValueError):
    def __init__(self, message, line=None, path=None):
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.line = line
        self.path = path


class SparseMatrix:
    """Real CSR matrix with an optional, verified symmetry flag.

    Column indices are kept sorted and duplicate-free within each row.
    Explicit zeros are kept, so a sparsity pattern survives zero coefficients.
    """

    __slots__ = ("_csr", "symmetric")

    def __init__(self, csr, symmetric=False):
        csr = sp.csr_matrix(csr, dtype=float)
        csr.sum_duplicates()
        csr.sort_indices()
        self._csr = csr
        self.symmetric = bool(symmetric)
        if self.symmetric:
            if csr.shape[0] != csr.shape[1]:
                raise DimensionError(f"symmetric flag on non-square matrix {csr.shape}")
            scale = abs(csr).max() if csr.nnz else 0.0
            gap = abs(csr - csr.T).max() if csr.nnz else 0.0
            if gap > 1e-14 * scale:
                raise ValueError(f"matrix flagged symmetric but |a_ij - a_ji| reaches {gap:.3e}")

    @classmethod
    def from_coo(cls, rows, cols, vals, shape, symmetric=False):
        coo = sp.coo_matrix((np.asarray(vals, float), (np.asarray(rows), np.asarray(cols))), shape=shape)
        return cls(coo.tocsr(), symmetric=symmetric)

    @classmethod
    def from_dense(cls, a, symmetric=False):
        a = np.atleast_2d(np.asarray(a, dtype=float))
        return cls(sp.csr_matrix(a), symmetric=symmetric)

    @classmethod
    def identity(cls, n):
        return cls(sp.identity(n, format="csr"), symmetric=True)

    @classmethod
    def zeros(cls, n_rows, n_cols=None):
        n_cols = n_rows if n_cols is None else n_cols
        return cls(sp.csr_matrix((n_rows, n_cols)), symmetric=n_rows == n_cols)

    @property
    def csr(self):
        return self._csr

    @property
    def shape(self):
        return self._csr.shape

    @property
    def n_rows(self):
        return self._csr.shape[0]

    @property
    def n_cols(self):
        return self._csr.shape[1]

    @property
    def row_offsets(self):
        return self._csr.indptr

    @property
    def col_indices(self):
        return self._csr.indices

    @property
    def values(self):
        return self._csr.data

    @property
    def nnz(self):
        return self._csr.nnz

    def diagonal(self):
        return self._csr.diagonal()

    def to_dense(self):
        return self._csr.toarray()

    def is_zero(self):
        return not np.any(self._csr.data)

    def __matmul__(self, x):
        return matvec(self, x)

    def __repr__(self):
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz}, symmetric={self.symmetric})"


def matvec(m, x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != m.n_cols:
        raise DimensionError(f"vector of shape {x.shape} against matrix {m.shape}")
    return m.csr @ x


@dataclass
class ShiftedOperator:
    """``c_M*M + c_A*A + c_B*B`` with its solver state cached on first use."""

    coefficients: tuple
    matrix: SparseMatrix
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self):
        return self.matrix.n_rows

    @property
    def uses_cg(self):
        return self.matrix.symmetric and all(c >= 0 for c in self.coefficients)

    @classmethod
    def from_matrix(cls, m):
        return cls((1.0,), m)

    def prepare(self):
        """Build the preconditioner or factorization now instead of on first solve."""
        if "ready" in self._cache:
            return self
        if self.uses_cg:
            d = self.matrix.diagonal()
            if np.any(d <= 0):
                raise SingularMatrixError("non-positive diagonal in operator flagged SPD")
            self._cache["inv_diag"] = 1.0 / d
        else:
            try:
                self._cache["lu"] = spla.splu(self.matrix.csr.tocsc())
            except RuntimeError as exc:
                raise SingularMatrixError(str(exc)) from exc
        self._cache["ready"] = True
        return self


def combine(M, A, B, c_M, c_A, c_B):
    """Assemble ``c_M*M + c_A*A + c_B*B`` on the union sparsity pattern."""
    if not (M.shape == A.shape == B.shape):
        raise DimensionError(f"shapes differ: {M.shape}, {A.shape}, {B.shape}")
    parts = [(M, c_M), (A, c_A), (B, c_B)]
    rows, cols, vals = [], [], []
    for m, c in parts:
        coo = m.csr.tocoo()
        rows.append(coo.row)
        cols.append(coo.col)
        vals.append(c * coo.data)
    symmetric = all(m.symmetric for m, c in parts if c != 0)
    mat = SparseMatrix.from_coo(
        np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), M.shape, symmetric=False
    )
    # symmetry is inherited, not re-verified: sums of symmetric matrices stay symmetric
    mat.symmetric = symmetric and M.shape[0] == M.shape[1]
    return ShiftedOperator((float(c_M), float(c_A), float(c_B)), mat)


def _pcg(mat, inv_diag, b, tol, x0, maxiter):
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - mat @ x if x0 is not None else b.copy()
    bnorm = np.linalg.norm(b)
    target = tol * bnorm
    rnorm = np.linalg.norm(r)
    if rnorm <= target:
        return x, rnorm, 0
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        q = mat @ p
        alpha = rz / (p @ q)
        x += alpha * p
        r -= alpha * q
        rnorm = np.linalg.norm(r)
        if rnorm <= target:
            return x, rnorm, it
        z = inv_diag * r
        rz_new = r @ z
        p *= rz_new / rz
        p += z
        rz = rz_new
    raise ConvergenceError(
        f"CG did not reach relative residual {tol:g} in {maxiter} iterations "
        f"(achieved {rnorm / bnorm:.3e})",
        residual=rnorm / bnorm,
        iterations=maxiter,
    )


def solve(op, rhs, tol=DEFAULT_TOL, x0=None):
    """Solve ``op @ x = rhs`` so that ``|op x - rhs| <= tol |rhs|``.

    CG with a Jacobi preconditioner when the operator is symmetric with
    nonnegative shift coefficients, sparse LU otherwise.  ``x0`` warm-starts CG
    and is ignored by the direct path.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (op.n,):
        raise DimensionError(f"rhs of shape {rhs.shape} for operator of size {op.n}")
    if not np.all(np.isfinite(rhs)):
        raise ValueError("right-hand side is not finite")
    op.prepare()
    if not np.any(rhs):
        return np.zeros_like(rhs)
    if op.uses_cg:
        # unit-scale the system so CG inner products cannot overflow
        scale = float(np.abs(rhs).max())
        start = None if x0 is None else np.asarray(x0, dtype=float) / scale
        x, _, _ = _pcg(op.matrix.csr, op._cache["inv_diag"], rhs / scale, tol, start, 10 * op.n)
        x *= scale
    else:
        x = op._cache["lu"].solve(rhs)
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("solve produced non-finite values")
    return x


# -- Matrix Market (coordinate, real) -------------------------------------------------


def read_matrix_market(path, symmetric=None):
    """Read a real coordinate Matrix Market file.

    ``symmetric=None`` takes the flag from the header symmetry field; a general
    matrix can still be flagged (and checked) by passing ``True``.
    """
    path = Path(path)
    with path.open() as fh:
        lines = fh.readlines()
    if not lines:
        raise MatrixMarketError("empty file", path=path)
    header = lines[0].split()
    if len(header) != 5 or header[0].lower() != "%%matrixmarket":
        raise MatrixMarketError("missing %%MatrixMarket header", line=1, path=path)
    obj, fmt, kind, sym = (h.lower() for h in header[1:])
    if obj != "matrix" or fmt != "coordinate":
        raise MatrixMarketError(f"unsupported layout {obj} {fmt}", line=1, path=path)
    if kind not in ("real", "integer"):
        raise MatrixMarketError(f"unsupported field {kind}", line=1, path=path)
    if sym not in ("general", "symmetric"):
        raise MatrixMarketError(f"unsupported symmetry {sym}", line=1, path=path)

    idx = 1
    while idx < len(lines) and (lines[idx].startswith("%") or not lines[idx].strip()):
        idx += 1
    if idx == len(lines):
        raise MatrixMarketError("missing size line", line=idx + 1, path=path)
    try:
        n_rows, n_cols, nnz = (int(s) for s in lines[idx].split())
    except ValueError:
        raise MatrixMarketError("malformed size line", line=idx + 1, path=path) from None

    rows, cols, vals = [], [], []
    count = 0
    for lineno, line in enumerate(lines[idx + 1:], start=idx + 2):
        if not line.strip() or line.startswith("%"):
            continue
        parts = line.split()
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except (ValueError, IndexError):
            raise MatrixMarketError(f"malformed entry {line.strip()!r}", line=lineno, path=path) from None
        if len(parts) != 3:
            raise MatrixMarketError(f"malformed entry {line.strip()!r}", line=lineno, path=path)
        if not (1 <= i <= n_rows and 1 <= j <= n_cols):
            raise MatrixMarketError(f"index ({i}, {j}) out of range", line=lineno, path=path)
        count += 1
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
        if sym == "symmetric" and i != j:
            rows.append(j - 1)
            cols.append(i - 1)
            vals.append(v)
    if count != nnz:
        raise MatrixMarketError(f"expected {nnz} entries, found {count}", path=path)
    flag = (sym == "symmetric") if symmetric is None else symmetric
    return SparseMatrix.from_coo(rows, cols, vals, (n_rows, n_cols), symmetric=flag)


def write_matrix_market(m, path):
    """Write ``m`` in coordinate form with full float precision.

    Matrices flagged symmetric are written as their lower triangle with a
    ``symmetric`` header.
    """
    coo = m.csr.tocoo()
    kind = "general"
    if m.symmetric:
        keep = coo.row >= coo.col
        rows, cols, data = coo.row[keep], coo.col[keep], coo.data[keep]
        kind = "symmetric"
    else:
        rows, cols, data = coo.row, coo.col, coo.data
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"%%MatrixMarket matrix coordinate real {kind}\n")
        fh.write(f"{m.n_rows} {m.n_cols} {len(data)}\n")
        for i, j, v in zip(rows, cols, data):
            fh.write(f"{i + 1} {j + 1} {float(v)!r}\n")
    return path
