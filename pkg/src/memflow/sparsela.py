"""Saddle-point linear algebra on top of scipy.sparse.

Storage is scipy CSR/CSC (compressed rows, sorted indices); factorization is
SuperLU. Dirichlet conditions are imposed by row/column elimination with unit
diagonals at solve time, and the pressure null space is handled by pinning one
pressure DOF and restoring the zero mean afterwards.

SaddleSolver keeps the full sparsity pattern fixed so time steppers can
refactorize with updated velocity-block values without re-allocating.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class LinearAlgebraError(ValueError):
    pass


class ShapeMismatchError(LinearAlgebraError):
    pass


class SingularSystemError(LinearAlgebraError):
    def __init__(self, message, index=-1):
        super().__init__(message)
        self.index = index


class NonFiniteError(LinearAlgebraError):
    pass


def make_csr(rows, cols, vals, shape) -> sp.csr_matrix:
    """CSR with summed duplicates, sorted column indices, explicit zeros pruned."""
    m = sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()
    m.sum_duplicates()
    m.eliminate_zeros()
    m.sort_indices()
    return m


def spmv(matrix, x) -> np.ndarray:
    if matrix.shape[1] != np.shape(x)[0]:
        raise ShapeMismatchError(f"spmv shapes {matrix.shape} x {np.shape(x)}")
    return matrix @ x


def add_scaled(A, b: float, B):
    if A.shape != B.shape:
        raise ShapeMismatchError(f"add_scaled shapes {A.shape} vs {B.shape}")
    out = (A + b * B).tocsr()
    out.sum_duplicates()
    out.sort_indices()
    return out


def axpy(y, a: float, x) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if y.shape != x.shape:
        raise ShapeMismatchError(f"axpy shapes {y.shape} vs {x.shape}")
    return y + a * x


def _check_structure(csc: sp.csc_matrix) -> None:
    n = csc.shape[0]
    nz = csc.data != 0.0
    row_counts = np.bincount(csc.indices[nz], minlength=n)
    if (row_counts == 0).any():
        idx = int(np.argmin(row_counts))
        raise SingularSystemError(f"structurally singular: row {idx} is empty", idx)
    cum = np.concatenate([[0], np.cumsum(nz)])
    col_counts = cum[csc.indptr[1:]] - cum[csc.indptr[:-1]]
    if (col_counts == 0).any():
        idx = int(np.argmin(col_counts))
        raise SingularSystemError(f"structurally singular: column {idx} is empty", idx)


def _splu(csc: sp.csc_matrix):
    _check_structure(csc)
    try:
        return spla.splu(csc)
    except RuntimeError as exc:
        raise SingularSystemError(f"factorization failed: {exc}") from exc


class Factorization:
    """Reusable direct factorization of a general square sparse matrix."""

    def __init__(self, matrix):
        matrix = sp.csc_matrix(matrix)
        if matrix.shape[0] != matrix.shape[1]:
            raise ShapeMismatchError(f"matrix must be square, got {matrix.shape}")
        if not np.isfinite(matrix.data).all():
            raise NonFiniteError("non-finite matrix entry")
        self.shape = matrix.shape
        self._lu = _splu(matrix)

    def solve(self, rhs) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape != (self.shape[0],):
            raise ShapeMismatchError(f"rhs shape {rhs.shape} != ({self.shape[0]},)")
        if not np.isfinite(rhs).all():
            raise NonFiniteError("non-finite right-hand side")
        return self._lu.solve(rhs)


def factorize(matrix) -> Factorization:
    return Factorization(matrix)


def solve(handle: Factorization, rhs) -> np.ndarray:
    return handle.solve(rhs)


class SaddleSolver:
    """[[A, -B^T], [B, 0]] with Dirichlet elimination and a pinned pressure DOF.

    The pattern of the velocity block A is frozen at construction; factor()
    accepts either a CSR matrix with the identical pattern or its raw data
    array, so per-step updates cost no symbolic work.
    """

    def __init__(self, A: sp.csr_matrix, B: sp.csr_matrix, constrained: np.ndarray,
                 pin_index: int | None = 0):
        n_u = A.shape[0]
        n_p = B.shape[0]
        if A.shape != (n_u, n_u) or B.shape[1] != n_u:
            raise ShapeMismatchError(f"saddle blocks A {A.shape}, B {B.shape}")
        if constrained.shape != (n_u,):
            raise ShapeMismatchError("constrained mask must cover velocity DOFs")
        A = A.tocsr()
        A.sort_indices()
        self.n_u, self.n_p = n_u, n_p
        self.n = n_u + n_p
        self.a_pattern = (A.indptr.copy(), A.indices.copy())
        self.a_nnz = A.nnz

        if pin_index is not None:
            pin_slot = sp.coo_matrix(([0.0], ([pin_index], [pin_index])), shape=(n_p, n_p))
        else:
            pin_slot = None
        full = sp.bmat([[A, -B.T], [B, pin_slot]], format="csc")
        full.sort_indices()
        self.indptr = full.indptr
        self.indices = full.indices
        self.base_data = full.data.copy()

        # position of every (row, col) of the full matrix inside the CSC data
        # array: keys col*n + row are globally ascending in CSC order
        col_of = np.repeat(np.arange(self.n), np.diff(self.indptr))
        keys = col_of.astype(np.int64) * self.n + self.indices
        a_cols = np.repeat(np.arange(n_u), np.diff(A.indptr))
        self._a_map = np.searchsorted(keys, a_cols * self.n + A.indices)
        self.base_data[self._a_map] = 0.0  # A-block values are supplied per factor()

        self.constrained_full = np.zeros(self.n, dtype=bool)
        self.constrained_full[:n_u] = constrained
        if pin_index is not None:
            self.constrained_full[n_u + pin_index] = True
        self.pin_index = pin_index

        rows = self.indices
        cols = col_of
        killed = self.constrained_full[rows] | self.constrained_full[cols]
        self._keep = ~killed
        diag = rows == cols
        self._diag_ones = np.nonzero(diag & self.constrained_full[rows])[0]
        # entries in constrained columns feed the boundary-lift shift A.g
        in_bc_col = self.constrained_full[cols] & ~self.constrained_full[rows]
        self._shift_idx = np.nonzero(in_bc_col)[0]
        self._shift_rows = rows[self._shift_idx]
        self._shift_cols = cols[self._shift_idx]

        self._lu = None
        self._data = np.empty_like(self.base_data)
        self._shift_vals = None

    def factor(self, a_values) -> None:
        """Refactorize with new velocity-block values (CSR data or matrix)."""
        if sp.issparse(a_values):
            a_values = a_values.tocsr()
            a_values.sort_indices()
            if a_values.nnz != self.a_nnz:
                raise ShapeMismatchError("velocity block pattern changed")
            a_values = a_values.data
        if a_values.shape != (self.a_nnz,):
            raise ShapeMismatchError("velocity block data length mismatch")
        data = self._data
        data[:] = self.base_data
        data[self._a_map] += a_values
        if not np.isfinite(data).all():
            raise NonFiniteError("non-finite matrix entry")
        self._shift_vals = data[self._shift_idx].copy()
        np.multiply(data, self._keep, out=data)
        data[self._diag_ones] = 1.0
        mat = sp.csc_matrix((data.copy(), self.indices, self.indptr),
                            shape=(self.n, self.n))
        self._lu = _splu(mat)

    def solve(self, rhs_u, rhs_p, boundary_values=None) -> tuple[np.ndarray, np.ndarray]:
        """Solve with boundary_values imposed on constrained DOFs (pin forced to 0)."""
        if self._lu is None:
            raise LinearAlgebraError("factor() must be called before solve()")
        rhs = np.concatenate([rhs_u, rhs_p])
        if rhs.shape != (self.n,):
            raise ShapeMismatchError(f"rhs length {rhs.shape} != {self.n}")
        if not np.isfinite(rhs).all():
            raise NonFiniteError("non-finite right-hand side")
        g = np.zeros(self.n)
        if boundary_values is not None:
            g[:self.n_u][self.constrained_full[:self.n_u]] = \
                boundary_values[self.constrained_full[:self.n_u]]
        shift = np.zeros(self.n)
        gc = g[self._shift_cols]
        if gc.any():
            np.add.at(shift, self._shift_rows, self._shift_vals * gc)
        rhs = rhs - shift
        rhs[self.constrained_full] = g[self.constrained_full]
        x = self._lu.solve(rhs)
        return x[:self.n_u], x[self.n_u:]


def dump_matrix(matrix, path) -> None:
    coo = sp.coo_matrix(matrix)
    with open(path, "w") as fh:
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {v:.17g}\n")
