"""Compressed-sparse-row matrices over float64 or exact rationals.

A matrix is entirely one scalar domain: ``dtype == "float"`` stores a float64
value array, ``dtype == "rational"`` stores a list of fractions.Fraction.
Structural zeros are never stored.
"""

from fractions import Fraction

import numpy as np

from .errors import StormletError


class SparseMatrix:
    __slots__ = ("rows", "cols", "row_offsets", "col_indices", "values", "dtype")

    def __init__(self, rows, cols, row_offsets, col_indices, values, dtype):
        self.rows = int(rows)
        self.cols = int(cols)
        self.row_offsets = np.asarray(row_offsets, dtype=np.int64)
        self.col_indices = np.asarray(col_indices, dtype=np.int64)
        if dtype == "float":
            self.values = np.asarray(values, dtype=np.float64)
        elif dtype == "rational":
            self.values = [Fraction(v) for v in values]
        else:
            raise ValueError(f"unknown dtype {dtype!r}")
        self.dtype = dtype
        if len(self.row_offsets) != self.rows + 1:
            raise ValueError("row_offsets must have length rows+1")
        if self.row_offsets[-1] != len(self.col_indices) or len(self.col_indices) != len(values):
            raise ValueError("inconsistent entry counts")

    @property
    def nnz(self):
        return len(self.col_indices)

    def row(self, i):
        """(col_indices, values) of row i as a pair of sequences."""
        lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
        return self.col_indices[lo:hi], self.values[lo:hi]

    def entries(self):
        """Iterate (row, col, value) in CSR order."""
        for i in range(self.rows):
            lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
            for k in range(lo, hi):
                yield i, int(self.col_indices[k]), self.values[k]

    def to_dense(self):
        if self.dtype == "float":
            out = np.zeros((self.rows, self.cols))
            for i, j, v in self.entries():
                out[i, j] = v
            return out
        out = [[Fraction(0)] * self.cols for _ in range(self.rows)]
        for i, j, v in self.entries():
            out[i][j] = v
        return out

    def to_float(self):
        """Same structure with float64 values (identity for float matrices)."""
        if self.dtype == "float":
            return self
        return SparseMatrix(
            self.rows,
            self.cols,
            self.row_offsets,
            self.col_indices,
            [float(v) for v in self.values],
            "float",
        )

    def to_rational(self):
        """Same structure with values converted exactly to rationals."""
        if self.dtype == "rational":
            return self
        return SparseMatrix(
            self.rows,
            self.cols,
            self.row_offsets,
            self.col_indices,
            [Fraction(float(v)) for v in self.values],
            "rational",
        )

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (
            self.rows == other.rows
            and self.cols == other.cols
            and self.dtype == other.dtype
            and np.array_equal(self.row_offsets, other.row_offsets)
            and np.array_equal(self.col_indices, other.col_indices)
            and all(a == b for a, b in zip(self.values, other.values))
        )

    def __repr__(self):
        return f"SparseMatrix({self.rows}x{self.cols}, nnz={self.nnz}, dtype={self.dtype})"


def build_sparse(triples, rows, cols, dtype="float"):
    """Assemble a CSR matrix from (row, col, value) triples.

    Duplicate positions are coalesced by addition, columns are sorted within
    each row, and entries that end up exactly zero are dropped.
    """
    per_cell = {}
    for row, col, value in triples:
        if not (0 <= row < rows and 0 <= col < cols):
            raise StormletError(f"index ({row},{col}) out of range for {rows}x{cols} matrix")
        if dtype == "float":
            value = float(value)
            if not np.isfinite(value):
                raise StormletError(f"non-finite value at ({row},{col})")
        else:
            value = Fraction(value)
        key = (row, col)
        if key in per_cell:
            per_cell[key] += value
        else:
            per_cell[key] = value

    row_offsets = np.zeros(rows + 1, dtype=np.int64)
    col_indices = []
    values = []
    for (row, col), value in sorted(per_cell.items()):
        if value == 0:
            continue
        row_offsets[row + 1] += 1
        col_indices.append(col)
        values.append(value)
    np.cumsum(row_offsets, out=row_offsets)
    return SparseMatrix(rows, cols, row_offsets, col_indices, values, dtype)


def row_sums(m):
    """Vector of per-row entry sums."""
    if m.dtype == "float":
        out = np.zeros(m.rows)
        for i in range(m.rows):
            lo, hi = m.row_offsets[i], m.row_offsets[i + 1]
            s = 0.0
            for k in range(lo, hi):
                s += m.values[k]
            out[i] = s
        return out
    return [sum(m.values[m.row_offsets[i] : m.row_offsets[i + 1]], Fraction(0)) for i in range(m.rows)]


def transpose(m):
    return build_sparse(((j, i, v) for i, j, v in m.entries()), m.cols, m.rows, m.dtype)


def restrict(m, keep_rows, keep_cols):
    """Submatrix of the kept rows/columns with dense reindexing.

    Returns (submatrix, old-to-new column map); dropped positions map to -1.
    Mass in dropped columns is simply removed.
    """
    keep_rows = np.asarray(keep_rows, dtype=bool)
    keep_cols = np.asarray(keep_cols, dtype=bool)
    if len(keep_rows) != m.rows or len(keep_cols) != m.cols:
        raise StormletError("restriction bitsets must match matrix dimensions")
    col_map = np.full(m.cols, -1, dtype=np.int64)
    col_map[keep_cols] = np.arange(int(keep_cols.sum()))
    new_rows = int(keep_rows.sum())
    new_cols = int(keep_cols.sum())
    triples = []
    new_i = 0
    for i in range(m.rows):
        if not keep_rows[i]:
            continue
        lo, hi = m.row_offsets[i], m.row_offsets[i + 1]
        for k in range(lo, hi):
            j = m.col_indices[k]
            if keep_cols[j]:
                triples.append((new_i, int(col_map[j]), m.values[k]))
        new_i += 1
    return build_sparse(triples, new_rows, new_cols, m.dtype), col_map


def identity_like_rows(n, dtype="float"):
    """n x n identity matrix (used for absorbing-state padding)."""
    one = 1.0 if dtype == "float" else Fraction(1)
    return build_sparse(((i, i, one) for i in range(n)), n, n, dtype)
