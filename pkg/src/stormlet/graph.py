"""Graph-based qualitative precomputation for until formulas.

All functions work on the transition structure only (values ignored beyond
being positive). MDP variants take the choice_offsets grouping matrix rows
by state; deterministic models pass the identity grouping.
"""

import numpy as np


def _row_hit_counts(m, in_set):
    """Per matrix row: number of successors inside in_set (empty rows give 0)."""
    if m.nnz == 0:
        return np.zeros(m.rows, dtype=np.int64)
    cum = np.concatenate(([0], np.cumsum(in_set[m.col_indices], dtype=np.int64)))
    return cum[m.row_offsets[1:]] - cum[m.row_offsets[:-1]]


def _per_row_exists(m, in_set):
    """Per matrix row: has some successor inside in_set."""
    return _row_hit_counts(m, in_set) > 0


def _per_row_all(m, in_set):
    """Per matrix row: all successors inside in_set (vacuously true for empty rows)."""
    return _row_hit_counts(m, in_set) == np.diff(m.row_offsets)


def _state_exists(per_row, choice_offsets):
    return np.logical_or.reduceat(per_row, choice_offsets[:-1])


def _state_all(per_row, choice_offsets):
    return np.logical_and.reduceat(per_row, choice_offsets[:-1])


def _backward_closure(m, start, frontier_allowed):
    """Least set containing start, closed under: s allowed and s has a successor in the set."""
    reach = start.copy()
    while True:
        add = frontier_allowed & ~reach & _per_row_exists(m, reach)
        if not add.any():
            return reach
        reach |= add


def prob0(matrix, safe, target):
    """States from which no path satisfies (safe U target)."""
    safe = np.asarray(safe, dtype=bool)
    target = np.asarray(target, dtype=bool)
    return ~_backward_closure(matrix, target, safe)


def prob1(matrix, safe, target, p0):
    """States satisfying (safe U target) with probability one.

    p0 must be the prob0 result for the same inputs.
    """
    safe = np.asarray(safe, dtype=bool)
    target = np.asarray(target, dtype=bool)
    bad = _backward_closure(matrix, np.asarray(p0, dtype=bool), safe & ~target)
    return ~bad


def prob01_max(matrix, choice_offsets, safe, target):
    """(prob0A, prob1E): all-scheduler probability 0 / some-scheduler probability 1."""
    safe = np.asarray(safe, dtype=bool)
    target = np.asarray(target, dtype=bool)
    choice_offsets = np.asarray(choice_offsets, dtype=np.int64)

    # Pmax > 0: backward reachability with existential choice.
    reach = target.copy()
    while True:
        add = safe & ~reach & _state_exists(_per_row_exists(matrix, reach), choice_offsets)
        if not add.any():
            break
        reach |= add
    prob0a = ~reach

    # Pmax = 1: greatest fixed point over a nested least fixed point.
    u = np.ones(matrix.cols, dtype=bool)
    while True:
        v = target.copy()
        while True:
            ok_rows = _per_row_all(matrix, u) & _per_row_exists(matrix, v)
            add = safe & ~v & _state_exists(ok_rows, choice_offsets)
            if not add.any():
                break
            v |= add
        if np.array_equal(v, u):
            break
        u = v
    return prob0a, u


def prob01_min(matrix, choice_offsets, safe, target):
    """(prob0E, prob1A): some-scheduler probability 0 / all-scheduler probability 1."""
    safe = np.asarray(safe, dtype=bool)
    target = np.asarray(target, dtype=bool)
    choice_offsets = np.asarray(choice_offsets, dtype=np.int64)

    # Pmin > 0: backward reachability with universal choice.
    reach = target.copy()
    while True:
        add = safe & ~reach & _state_all(_per_row_exists(matrix, reach), choice_offsets)
        if not add.any():
            break
        reach |= add
    prob0e = ~reach

    # Pmin < 1: some scheduler reaches prob0E while avoiding target.
    bad = prob0e.copy()
    while True:
        add = safe & ~target & ~bad & _state_exists(_per_row_exists(matrix, bad), choice_offsets)
        if not add.any():
            break
        bad |= add
    return prob0e, ~bad


def prob1e_witness(matrix, choice_offsets, safe, target, prob1e):
    """A per-state choice certifying probability-1 reachability inside prob1e.

    For states outside prob1e (or in target) the entry is 0. The returned
    choices keep all successors inside prob1e and make progress toward
    target, so the induced chain reaches target almost surely.
    """
    choice_offsets = np.asarray(choice_offsets, dtype=np.int64)
    n = len(choice_offsets) - 1
    witness = np.zeros(n, dtype=np.int64)
    v = np.asarray(target, dtype=bool).copy()
    safe = np.asarray(safe, dtype=bool)
    pending = prob1e & safe & ~v
    while pending.any():
        ok_rows = _per_row_all(matrix, prob1e) & _per_row_exists(matrix, v)
        progressed = False
        for s in np.flatnonzero(pending):
            for c in range(choice_offsets[s], choice_offsets[s + 1]):
                if ok_rows[c]:
                    witness[s] = c - choice_offsets[s]
                    pending[s] = False
                    v[s] = True
                    progressed = True
                    break
        if not progressed:
            break
    return witness
