# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled CSR kernels.

Each function is the hot inner loop of an iterative solver and must produce
bit-identical results to the pure-Python fallbacks in stormlet.kernels:
accumulation is strictly left-to-right in CSR order.
"""

from libc.math cimport fabs


def csr_matvec(long[::1] row_offsets, long[::1] col_indices, double[::1] values,
               double[::1] x, double[::1] out):
    cdef Py_ssize_t i, k
    cdef double acc
    cdef Py_ssize_t n = row_offsets.shape[0] - 1
    for i in range(n):
        acc = 0.0
        for k in range(row_offsets[i], row_offsets[i + 1]):
            acc += values[k] * x[col_indices[k]]
        out[i] = acc


def csr_matvec_reduce(long[::1] row_offsets, long[::1] col_indices, double[::1] values,
                      long[::1] choice_offsets, double[::1] b, double[::1] x,
                      bint maximize, double[::1] out, long[::1] arg_out):
    """Per state: opt over its choice rows of b[c] + A_c . x; lowest-index ties."""
    cdef Py_ssize_t s, c, k
    cdef double acc, best
    cdef long best_c
    cdef Py_ssize_t n = choice_offsets.shape[0] - 1
    for s in range(n):
        best = 0.0
        best_c = -1
        for c in range(choice_offsets[s], choice_offsets[s + 1]):
            acc = b[c]
            for k in range(row_offsets[c], row_offsets[c + 1]):
                acc += values[k] * x[col_indices[k]]
            if best_c < 0 or (acc > best if maximize else acc < best):
                best = acc
                best_c = c
        out[s] = best
        arg_out[s] = best_c - choice_offsets[s]


def gauss_seidel_sweep(long[::1] row_offsets, long[::1] col_indices, double[::1] values,
                       double[::1] b, double[::1] x, bint relative):
    """One in-place sweep in ascending row order with diagonal correction.

    Returns (max_diff, bad_row); bad_row >= 0 flags a diagonal entry >= 1.
    """
    cdef Py_ssize_t i, k
    cdef double acc, diag, new, diff, max_diff = 0.0
    cdef Py_ssize_t n = row_offsets.shape[0] - 1
    for i in range(n):
        acc = b[i]
        diag = 0.0
        for k in range(row_offsets[i], row_offsets[i + 1]):
            if col_indices[k] == i:
                diag = values[k]
            else:
                acc += values[k] * x[col_indices[k]]
        if diag >= 1.0:
            return 0.0, i
        new = acc / (1.0 - diag)
        diff = fabs(new - x[i])
        if relative and fabs(new) >= 1e-30:
            diff /= fabs(new)
        if diff > max_diff:
            max_diff = diff
        x[i] = new
    return max_diff, -1
