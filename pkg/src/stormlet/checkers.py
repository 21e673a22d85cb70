"""Sparse verification engine: property dispatch, precomputation, solving."""

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import graph, kernels, props, solvers, sparse
from .errors import PropertyError, UnsupportedCombination
from .models import ModelKind

UNIFORMIZATION_SLACK = 1.02  # diagonal slack factor on the uniformization rate


@dataclass
class CheckResult:
    values: object  # bool array for bounded operators, else numeric vector
    numeric: object  # underlying per-state quantities
    metadata: dict = field(default_factory=dict)

    def value_at(self, state):
        return self.values[state]


def check(model, prop, env):
    """Check a resolved property; nested state operators are checked bottom-up."""
    start = time.perf_counter()
    numeric, meta = _check_quantitative(model, prop, env)
    meta["time_ms"] = (time.perf_counter() - start) * 1000.0
    if prop.bound is None:
        return CheckResult(values=numeric, numeric=numeric, metadata=meta)
    rel, threshold = prop.bound
    if model.dtype == "float":
        threshold = float(threshold)
    compare = {
        "<": lambda v: v < threshold,
        "<=": lambda v: v <= threshold,
        ">": lambda v: v > threshold,
        ">=": lambda v: v >= threshold,
    }[rel]
    booleans = np.array([bool(compare(v)) for v in numeric])
    return CheckResult(values=booleans, numeric=numeric, metadata=meta)


def _check_quantitative(model, prop, env):
    if isinstance(prop, props.RewardOperator):
        return _dispatch_reward(model, prop, env)
    if prop.condition is not None:
        if model.kind is not ModelKind.DTMC:
            raise UnsupportedCombination("conditional probabilities are supported on DTMCs only")
        return check_conditional(model, prop.path, prop.condition, env)
    return _dispatch_path(model, prop.path, prop.optimum, env)


def _dispatch_path(model, path, optimum, env):
    if isinstance(path, props.Next):
        target = _bits(model, path.target, env)
        return check_next(model, target, optimum), {"method": "matvec"}
    if isinstance(path, props.Globally):
        return _check_globally(model, path, optimum, env)
    left = _bits(model, path.left, env)
    right = _bits(model, path.right, env)
    if path.bound is not None:
        q = path.bound[1]
        if model.kind is ModelKind.CTMC:
            if q < 0:
                raise PropertyError("time bound must be nonnegative")
            return check_timebounded_until_ctmc(model, left, right, q, env)
        if q.denominator != 1:
            raise UnsupportedCombination(
                "fractional (time) bounds require a continuous-time model"
            )
        k = int(q)
        if k < 0:
            raise PropertyError("step bound must be nonnegative")
        return check_bounded_until(model, left, right, k, optimum), {"method": "stepping"}
    if model.kind is ModelKind.MDP:
        return check_until_mdp(model, left, right, optimum, env)
    return check_until(model, left, right, env)


def _check_globally(model, path, optimum, env):
    """G f is checked as one minus reaching the complement of f."""
    target = _bits(model, path.target, env)
    dual = None if optimum is None else ("min" if optimum == "max" else "max")
    if path.bound is not None and model.kind is not ModelKind.CTMC:
        k = int(path.bound[1])
        values = check_bounded_until(
            model, np.ones(model.n_states, dtype=bool), ~target, k, dual
        )
        meta = {"method": "stepping"}
    elif path.bound is not None:
        values, meta = check_timebounded_until_ctmc(
            model, np.ones(model.n_states, dtype=bool), ~target, path.bound[1], env
        )
    elif model.kind is ModelKind.MDP:
        values, meta = check_until_mdp(
            model, np.ones(model.n_states, dtype=bool), ~target, dual, env
        )
    else:
        values, meta = check_until(model, np.ones(model.n_states, dtype=bool), ~target, env)
    one = Fraction(1) if model.dtype == "rational" else 1.0
    if isinstance(values, np.ndarray):
        return one - values, meta
    return [one - v for v in values], meta


def _bits(model, state_formula, env):
    """Evaluate a resolved state formula into a bitset (checking nested operators)."""
    if isinstance(state_formula, np.ndarray):
        return state_formula
    if isinstance(state_formula, props.Not):
        return ~_bits(model, state_formula.operand, env)
    if isinstance(state_formula, props.And):
        return _bits(model, state_formula.left, env) & _bits(model, state_formula.right, env)
    if isinstance(state_formula, props.Or):
        return _bits(model, state_formula.left, env) | _bits(model, state_formula.right, env)
    if isinstance(state_formula, props.NestedCheck):
        return check(model, state_formula.operator, env).values
    raise PropertyError(f"cannot evaluate state formula {type(state_formula).__name__}")


# --- probability operators ------------------------------------------------


def check_next(model, target, optimum=None):
    rational = model.dtype == "rational"
    if rational:
        x = [Fraction(1) if t else Fraction(0) for t in target]
        q = kernels.matvec_rational(model.matrix, x)
    else:
        x = target.astype(np.float64)
        q = kernels.matvec(model.matrix, x)
    if model.kind is not ModelKind.MDP:
        return np.asarray(q) if not rational else q
    return _reduce_choices(model, q, optimum == "max", rational)


def _reduce_choices(model, per_choice, maximize, rational):
    if not rational:
        out = np.empty(model.n_states)
        for s in range(model.n_states):
            lo, hi = model.choice_offsets[s], model.choice_offsets[s + 1]
            out[s] = max(per_choice[lo:hi]) if maximize else min(per_choice[lo:hi])
        return out
    out = []
    for s in range(model.n_states):
        lo, hi = model.choice_offsets[s], model.choice_offsets[s + 1]
        seg = per_choice[lo:hi]
        out.append(max(seg) if maximize else min(seg))
    return out


def check_bounded_until(model, left, right, k, optimum=None):
    """k synchronized backward steps; right states pinned to one."""
    rational = model.dtype == "rational"
    active = left & ~right
    if rational:
        x = [Fraction(1) if r else Fraction(0) for r in right]
        for _ in range(k):
            q = kernels.matvec_rational(model.matrix, x)
            if model.kind is ModelKind.MDP:
                q = _reduce_choices(model, q, optimum == "max", True)
            x = [
                Fraction(1) if right[s] else (q[s] if active[s] else Fraction(0))
                for s in range(model.n_states)
            ]
        return x
    x = right.astype(np.float64)
    for _ in range(k):
        if model.kind is ModelKind.MDP:
            q, _ = kernels.matvec_reduce(model.matrix, model.choice_offsets, x, optimum == "max")
        else:
            q = kernels.matvec(model.matrix, x)
        x = np.where(right, 1.0, np.where(active, q, 0.0))
    return x


def _row_mass_into(matrix, rows_keep, target):
    """Per kept row, the one-step mass into target states (CSR order)."""
    rational = matrix.dtype == "rational"
    out = []
    for i in range(matrix.rows):
        if not rows_keep[i]:
            continue
        acc = Fraction(0) if rational else 0.0
        lo, hi = matrix.row_offsets[i], matrix.row_offsets[i + 1]
        for kk in range(lo, hi):
            if target[matrix.col_indices[kk]]:
                acc += matrix.values[kk]
        out.append(acc)
    return out


def check_until(model, left, right, env):
    """Unbounded until on a DTMC (or the embedded chain of a CTMC)."""
    matrix = model.matrix
    p0 = graph.prob0(matrix, left, right)
    p1 = graph.prob1(matrix, left, right, p0)
    maybe = ~(p0 | p1)
    rational = matrix.dtype == "rational"
    meta = {"prob0": int(p0.sum()), "prob1": int(p1.sum())}

    if rational:
        values = [Fraction(1) if p1[s] else Fraction(0) for s in range(model.n_states)]
    else:
        values = p1.astype(np.float64)
    if maybe.any():
        sub, _ = sparse.restrict(matrix, maybe, maybe)
        b = _row_mass_into(matrix, maybe, p1)
        outcome = solvers.solve_linear(solvers.LinearSystem(sub, b), env)
        meta["iterations"] = outcome.iterations
        meta["method"] = outcome.method
        idx = np.flatnonzero(maybe)
        for out_i, s in enumerate(idx):
            values[s] = outcome.x[out_i]
    else:
        meta["iterations"] = 0
        meta["method"] = "precomputation"
    return values, meta


def check_until_mdp(model, left, right, direction, env):
    if direction not in ("min", "max"):
        raise PropertyError("MDP until needs a min or max direction")
    matrix = model.matrix
    offsets = model.choice_offsets
    if direction == "max":
        p0, p1 = graph.prob01_max(matrix, offsets, left, right)
    else:
        p0, p1 = graph.prob01_min(matrix, offsets, left, right)
    maybe = ~(p0 | p1)
    rational = matrix.dtype == "rational"
    meta = {"prob0": int(p0.sum()), "prob1": int(p1.sum()), "direction": direction}

    if rational:
        values = [Fraction(1) if p1[s] else Fraction(0) for s in range(model.n_states)]
    else:
        values = p1.astype(np.float64)
    scheduler = np.zeros(model.n_states, dtype=np.int64)
    if maybe.any():
        rows_keep = np.zeros(matrix.rows, dtype=bool)
        sub_offsets = [0]
        for s in np.flatnonzero(maybe):
            rows_keep[offsets[s] : offsets[s + 1]] = True
            sub_offsets.append(sub_offsets[-1] + int(offsets[s + 1] - offsets[s]))
        sub, _ = sparse.restrict(matrix, rows_keep, maybe)
        b = _row_mass_into(matrix, rows_keep, p1)
        system = solvers.BellmanSystem(
            sub, np.asarray(sub_offsets), b, "maximize" if direction == "max" else "minimize"
        )
        outcome = solvers.solve_minmax(system, env)
        meta["iterations"] = outcome.iterations
        meta["method"] = outcome.method
        for out_i, s in enumerate(np.flatnonzero(maybe)):
            values[s] = outcome.x[out_i]
            scheduler[s] = outcome.scheduler[out_i]
    else:
        meta["iterations"] = 0
        meta["method"] = "precomputation"
    meta["scheduler"] = scheduler
    return values, meta


# --- reward operators -----------------------------------------------------


def _dispatch_reward(model, prop, env):
    rm = model.reward_model(prop.reward_name)
    kind, arg = prop.target
    if kind == "cumulative":
        if model.kind is ModelKind.CTMC:
            raise UnsupportedCombination("cumulative rewards are supported on discrete-time models only")
        k = arg
        if k.denominator != 1 or k < 0:
            raise PropertyError("cumulative bound must be a nonnegative integer")
        return check_cumulative_reward(model, rm, int(k), prop.optimum), {"method": "stepping"}
    target = _bits(model, arg, env)
    if model.kind is ModelKind.MDP:
        return check_reach_reward_mdp(model, rm, target, prop.optimum, env)
    return check_reach_reward(model, rm, target, env)


def _choice_rewards(model, rm):
    """Reward collected when taking each choice row (state plus action part)."""
    rational = model.dtype == "rational"
    zero = Fraction(0) if rational else 0.0
    out = []
    for s in range(model.n_states):
        state_part = rm.state_rewards[s] if rm.state_rewards is not None else zero
        for c in model.choices_of(s):
            action_part = rm.action_rewards[c] if rm.action_rewards is not None else zero
            out.append(state_part + action_part)
    return out


def check_reach_reward(model, rm, target, env):
    """Expected reward accumulated until reaching target (DTMC / embedded CTMC)."""
    matrix = model.matrix
    everywhere = np.ones(model.n_states, dtype=bool)
    p0 = graph.prob0(matrix, everywhere, target)
    p1 = graph.prob1(matrix, everywhere, target, p0)
    infinite = ~p1
    maybe = p1 & ~target
    rational = matrix.dtype == "rational"
    rewards = _choice_rewards(model, rm)
    meta = {"infinite": int(infinite.sum())}

    zero = Fraction(0) if rational else 0.0
    values = [zero] * model.n_states if rational else np.zeros(model.n_states)
    for s in np.flatnonzero(infinite):
        values[s] = math.inf
    if maybe.any():
        sub, _ = sparse.restrict(matrix, maybe, maybe)
        b = [rewards[s] for s in np.flatnonzero(maybe)]
        outcome = solvers.solve_linear(solvers.LinearSystem(sub, b), env)
        meta["iterations"] = outcome.iterations
        meta["method"] = outcome.method
        for out_i, s in enumerate(np.flatnonzero(maybe)):
            values[s] = outcome.x[out_i]
    if rational and isinstance(values, list):
        values = [v for v in values]
    return values, meta


def check_reach_reward_mdp(model, rm, target, direction, env):
    if direction not in ("min", "max"):
        raise PropertyError("MDP reward needs a min or max direction")
    matrix = model.matrix
    offsets = model.choice_offsets
    everywhere = np.ones(model.n_states, dtype=bool)
    rational = matrix.dtype == "rational"
    rewards = _choice_rewards(model, rm)
    initial_scheduler = None

    if direction == "max":
        # infinite wherever some scheduler misses the target with positive probability
        _, p1a = graph.prob01_min(matrix, offsets, everywhere, target)
        finite = p1a
        choice_ok = np.ones(matrix.rows, dtype=bool)
    else:
        # infinite wherever no scheduler reaches the target almost surely
        _, p1e = graph.prob01_max(matrix, offsets, everywhere, target)
        finite = p1e
        # choices leaving the almost-sure region would have infinite value
        choice_ok = graph._per_row_all(matrix, finite)
        witness = graph.prob1e_witness(matrix, offsets, everywhere, target, p1e)
        initial_scheduler = witness

    infinite = ~finite
    maybe = finite & ~target
    meta = {"infinite": int(infinite.sum()), "direction": direction}
    zero = Fraction(0) if rational else 0.0
    values = [zero] * model.n_states if rational else np.zeros(model.n_states)
    for s in np.flatnonzero(infinite):
        values[s] = math.inf
    scheduler = np.zeros(model.n_states, dtype=np.int64)

    if maybe.any():
        rows_keep = np.zeros(matrix.rows, dtype=bool)
        sub_offsets = [0]
        kept_choice_index = []  # original per-state choice index of each kept row
        init_sub = []
        for s in np.flatnonzero(maybe):
            count = 0
            picked = 0
            for c in range(offsets[s], offsets[s + 1]):
                if choice_ok[c]:
                    if c - offsets[s] == (initial_scheduler[s] if initial_scheduler is not None else -1):
                        picked = count
                    rows_keep[c] = True
                    kept_choice_index.append(int(c - offsets[s]))
                    count += 1
            sub_offsets.append(sub_offsets[-1] + count)
            init_sub.append(picked)
        sub, _ = sparse.restrict(matrix, rows_keep, maybe)
        b = [rewards[r] for r in np.flatnonzero(rows_keep)]
        system = solvers.BellmanSystem(
            sub, np.asarray(sub_offsets), b, "maximize" if direction == "max" else "minimize"
        )
        outcome = solvers.solve_minmax(
            system, env, initial_scheduler=np.asarray(init_sub) if initial_scheduler is not None else None
        )
        meta["iterations"] = outcome.iterations
        meta["method"] = outcome.method
        for out_i, s in enumerate(np.flatnonzero(maybe)):
            values[s] = outcome.x[out_i]
            row = sub_offsets[out_i] + int(outcome.scheduler[out_i])
            scheduler[s] = kept_choice_index[row]
    meta["scheduler"] = scheduler
    return values, meta


def check_cumulative_reward(model, rm, k, optimum=None):
    """Expected reward accumulated over the first k steps (one collection per step)."""
    rational = model.dtype == "rational"
    rewards = _choice_rewards(model, rm)
    if rational:
        x = [Fraction(0)] * model.n_states
        for _ in range(k):
            q = kernels.matvec_rational(model.matrix, x)
            q = [rewards[c] + q[c] for c in range(model.matrix.rows)]
            if model.kind is ModelKind.MDP:
                x = _reduce_choices(model, q, optimum == "max", True)
            else:
                x = q
        return x
    b = np.asarray(rewards, dtype=np.float64)
    x = np.zeros(model.n_states)
    for _ in range(k):
        if model.kind is ModelKind.MDP:
            x, _ = kernels.matvec_reduce(model.matrix, model.choice_offsets, x, optimum == "max", b)
        else:
            x = kernels.matvec(model.matrix, x) + b
    return x


# --- continuous time ------------------------------------------------------


def check_timebounded_until_ctmc(model, left, right, t, env):
    """CSL time-bounded until via uniformization with a truncated Poisson window."""
    t = float(t)
    n = model.n_states
    active = left & ~right
    meta = {"method": "uniformization"}
    if t == 0.0 or not active.any():
        return right.astype(np.float64), meta

    rates = np.array([float(model.exit_rates[s]) if active[s] else 0.0 for s in range(n)])
    q = UNIFORMIZATION_SLACK * rates.max()
    embedded = model.matrix.to_float()

    triples = []
    for s in range(n):
        if not active[s]:
            triples.append((s, s, 1.0))
            continue
        ratio = rates[s] / q
        diag = 1.0 - ratio
        cols, vals = embedded.row(s)
        for j, v in zip(cols, vals):
            if j == s:
                diag += ratio * v
            else:
                triples.append((s, int(j), ratio * v))
        if diag > 0.0:
            triples.append((s, s, diag))
    p_unif = sparse.build_sparse(triples, n, n, "float")

    lam = q * t
    L, R, w, total = solvers.fox_glynn(lam, env.precision * 0.1)
    meta["poisson_window"] = (L, R)
    v = right.astype(np.float64)
    result = np.zeros(n)
    for step in range(R + 1):
        if step >= L:
            result += (w[step - L] / total) * v
        if step < R:
            v = kernels.matvec(p_unif, v)
    # target states are absorbing successes: pin them to exactly one instead
    # of accumulating truncation noise from the normalized Poisson window
    result[right] = 1.0
    return result, meta


def check_until_ctmc_unbounded(model, left, right, env):
    """Unbounded CSL until: delegate to the embedded chain."""
    return check_until(model, left, right, env)


# --- conditional probabilities --------------------------------------------


_PENDING, _SUCCESS, _FAILED = 0, 1, 2


def _monitor_step(status, state, left, right):
    if status != _PENDING:
        return status
    if right[state]:
        return _SUCCESS
    if not left[state]:
        return _FAILED
    return _PENDING


def check_conditional(model, objective, condition, env):
    """P(objective | condition) on a DTMC via a monitor-product construction.

    Each path formula is tracked by a pending/success/failed monitor flipped
    on entering states; the numerator is reachability of the (success,
    success) monitor pair in the product, the denominator the unconditional
    condition probability. States with zero condition probability get NaN
    and are reported in metadata["condition_zero"].
    """
    for path in (objective, condition):
        if not isinstance(path, props.Until) or path.bound is not None:
            raise UnsupportedCombination(
                "conditional probabilities support unbounded reachability/until formulas only"
            )
    obj_l = _as_bits(model, objective.left, env)
    obj_r = _as_bits(model, objective.right, env)
    con_l = _as_bits(model, condition.left, env)
    con_r = _as_bits(model, condition.right, env)
    rational = model.dtype == "rational"

    index = {}
    order = []

    def intern(key):
        if key not in index:
            index[key] = len(order)
            order.append(key)
        return index[key]

    starts = []
    for s in range(model.n_states):
        a = _monitor_step(_PENDING, s, obj_l, obj_r)
        b = _monitor_step(_PENDING, s, con_l, con_r)
        starts.append(intern((s, a, b)))
    # close under successors
    frontier = list(order)
    while frontier:
        s, a, b = frontier.pop()
        cols, _ = model.matrix.row(s)
        for j in cols:
            j = int(j)
            key = (j, _monitor_step(a, j, obj_l, obj_r), _monitor_step(b, j, con_l, con_r))
            if key not in index:
                intern(key)
                frontier.append(key)

    triples = []
    for idx, (s, a, b) in enumerate(order):
        cols, vals = model.matrix.row(s)
        for j, v in zip(cols, vals):
            j = int(j)
            key = (j, _monitor_step(a, j, obj_l, obj_r), _monitor_step(b, j, con_l, con_r))
            triples.append((idx, index[key], v))
    product = sparse.build_sparse(triples, len(order), len(order), model.dtype)

    target = np.array([a == _SUCCESS and b == _SUCCESS for (_, a, b) in order])
    everywhere = np.ones(len(order), dtype=bool)

    class _ProductView:
        pass

    view = _ProductView()
    view.matrix = product
    view.n_states = len(order)
    num_all, _ = check_until(view, everywhere, target, env)
    den, den_meta = check_until(
        model, con_l, con_r, env
    )

    zero_states = []
    values = [None] * model.n_states
    for s in range(model.n_states):
        num = num_all[starts[s]]
        d = den[s]
        if d == 0:
            values[s] = math.nan
            zero_states.append(s)
        else:
            values[s] = num / d
    if not rational:
        values = np.array([float(v) for v in values])
    meta = {"method": "conditional-product", "product_states": len(order)}
    if zero_states:
        meta["condition_zero"] = zero_states
    meta.update({k: v for k, v in den_meta.items() if k == "iterations"})
    return values, meta


def _as_bits(model, sf, env):
    bits = _bits(model, sf, env)
    return np.asarray(bits, dtype=bool)
