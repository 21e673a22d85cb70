"""CSR kernel backend selection.

The compiled extension (stormlet._ckernels) is preferred; the pure-Python
fallbacks below are the reference semantics. Both accumulate strictly
left-to-right in CSR order, so results are bit-identical across backends.
Set STORMLET_PURE=1 to force the fallback (used by the benchmark and tests).
"""

import os

import numpy as np


def _py_csr_matvec(row_offsets, col_indices, values, x, out):
    n = len(row_offsets) - 1
    for i in range(n):
        acc = 0.0
        for k in range(row_offsets[i], row_offsets[i + 1]):
            acc += values[k] * x[col_indices[k]]
        out[i] = acc


def _py_csr_matvec_reduce(row_offsets, col_indices, values, choice_offsets, b, x, maximize, out, arg_out):
    n = len(choice_offsets) - 1
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


def _py_gauss_seidel_sweep(row_offsets, col_indices, values, b, x, relative):
    n = len(row_offsets) - 1
    max_diff = 0.0
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
        diff = abs(new - x[i])
        if relative and abs(new) >= 1e-30:
            diff /= abs(new)
        if diff > max_diff:
            max_diff = diff
        x[i] = new
    return max_diff, -1


if os.environ.get("STORMLET_PURE") == "1":
    _backend = None
else:
    try:
        from . import _ckernels as _backend
    except ImportError:
        _backend = None

if _backend is not None:
    csr_matvec = _backend.csr_matvec
    csr_matvec_reduce = _backend.csr_matvec_reduce
    gauss_seidel_sweep = _backend.gauss_seidel_sweep
    BACKEND = "compiled"
else:
    csr_matvec = _py_csr_matvec
    csr_matvec_reduce = _py_csr_matvec_reduce
    gauss_seidel_sweep = _py_gauss_seidel_sweep
    BACKEND = "pure-python"


def matvec(m, x):
    """y = m . x for a float CSR matrix; fixed left-to-right accumulation."""
    from .errors import StormletError

    x = np.ascontiguousarray(x, dtype=np.float64)
    if len(x) != m.cols:
        raise StormletError(f"dimension mismatch: matrix has {m.cols} columns, vector length {len(x)}")
    out = np.empty(m.rows)
    csr_matvec(m.row_offsets, m.col_indices, m.values, x, out)
    return out


def matvec_reduce(m, choice_offsets, x, maximize, b=None):
    """Per-state opt over choice rows of b + A.x; returns (values, argopt)."""
    from .errors import StormletError

    x = np.ascontiguousarray(x, dtype=np.float64)
    if len(x) != m.cols:
        raise StormletError(f"dimension mismatch: matrix has {m.cols} columns, vector length {len(x)}")
    choice_offsets = np.ascontiguousarray(choice_offsets, dtype=np.int64)
    if b is None:
        b = np.zeros(m.rows)
    else:
        b = np.ascontiguousarray(b, dtype=np.float64)
    n = len(choice_offsets) - 1
    out = np.empty(n)
    arg_out = np.empty(n, dtype=np.int64)
    csr_matvec_reduce(m.row_offsets, m.col_indices, m.values, choice_offsets, b, x, maximize, out, arg_out)
    return out, arg_out


def matvec_rational(m, x):
    """Exact-rational mat-vec (always pure Python)."""
    from fractions import Fraction

    out = [Fraction(0)] * m.rows
    for i in range(m.rows):
        acc = Fraction(0)
        for k in range(m.row_offsets[i], m.row_offsets[i + 1]):
            acc += m.values[k] * x[m.col_indices[k]]
        out[i] = acc
    return out
