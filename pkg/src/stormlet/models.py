"""In-memory probabilistic models: DTMC, CTMC and MDP.

CTMCs are stored as their embedded jump chain plus a per-state exit-rate
vector. Absorbing CTMC states carry a probability-1 self-loop with exit
rate 1 (the rate never influences any supported property).
"""

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from . import sparse
from .errors import DeadlockError, ModelError, StormletError

ROW_SUM_TOLERANCE = 1e-10


class ModelKind(Enum):
    DTMC = "dtmc"
    CTMC = "ctmc"
    MDP = "mdp"

    @property
    def continuous_time(self):
        return self is ModelKind.CTMC

    @property
    def nondeterministic(self):
        return self is ModelKind.MDP


def classify(time, nondeterministic):
    """Map (time domain, nondeterminism) to a model kind.

    Continuous-time nondeterministic models (Markov automata / CTMDPs) are
    not supported.
    """
    if time not in ("discrete", "continuous"):
        raise StormletError(f"unknown time domain {time!r}")
    if time == "discrete":
        return ModelKind.MDP if nondeterministic else ModelKind.DTMC
    if nondeterministic:
        raise ModelError("continuous-time nondeterministic models are unsupported")
    return ModelKind.CTMC


class StateLabeling:
    """Named bitsets over the state space."""

    def __init__(self, n_states, labels=None):
        self.n_states = n_states
        self._labels = {}
        for name, bits in (labels or {}).items():
            self.add(name, bits)

    def add(self, name, bits):
        bits = np.asarray(bits, dtype=bool)
        if len(bits) != self.n_states:
            raise ModelError(f"label {name!r} bitset has length {len(bits)}, expected {self.n_states}")
        self._labels[name] = bits

    def __contains__(self, name):
        return name in self._labels

    def get(self, name):
        if name not in self._labels:
            raise ModelError(f"unknown label {name!r}")
        return self._labels[name]

    def names(self):
        return sorted(self._labels)

    def states_with(self, name):
        return np.flatnonzero(self.get(name))

    def __eq__(self, other):
        if not isinstance(other, StateLabeling):
            return NotImplemented
        return self.names() == other.names() and all(
            np.array_equal(self._labels[n], other._labels[n]) for n in self._labels
        )


@dataclass
class RewardModel:
    name: str
    state_rewards: object = None  # length = states
    action_rewards: object = None  # length = choices (MDP) or states

    def __post_init__(self):
        for vec in (self.state_rewards, self.action_rewards):
            if vec is None:
                continue
            if any(v < 0 for v in vec):
                raise ModelError(f"reward model {self.name!r} contains negative rewards")


class Model:
    """A probabilistic model over a sparse transition matrix.

    ``choice_offsets`` maps state -> first matrix row; it is the identity for
    DTMC/CTMC and strictly increasing for MDPs (contiguous choice rows).
    """

    def __init__(self, kind, matrix, labeling, choice_offsets=None, rewards=None,
                 initial_states=None, exit_rates=None, deadlock_fixed=None):
        self.kind = kind
        self.matrix = matrix
        self.labeling = labeling
        if choice_offsets is None:
            choice_offsets = np.arange(matrix.rows + 1, dtype=np.int64)
        self.choice_offsets = np.asarray(choice_offsets, dtype=np.int64)
        self.rewards = dict(rewards or {})
        n = self.n_states
        if initial_states is None:
            initial_states = np.zeros(n, dtype=bool)
        self.initial_states = np.asarray(initial_states, dtype=bool)
        self.exit_rates = exit_rates
        if deadlock_fixed is None:
            deadlock_fixed = np.zeros(n, dtype=bool)
        self.deadlock_fixed = np.asarray(deadlock_fixed, dtype=bool)
        self._validate()

    @property
    def n_states(self):
        return len(self.choice_offsets) - 1

    @property
    def n_choices(self):
        return self.matrix.rows

    @property
    def dtype(self):
        return self.matrix.dtype

    def choices_of(self, state):
        return range(self.choice_offsets[state], self.choice_offsets[state + 1])

    def row_of_choice(self, choice_row):
        """State owning a given matrix row."""
        return int(np.searchsorted(self.choice_offsets, choice_row, side="right") - 1)

    def _validate(self):
        n = self.n_states
        m = self.matrix
        if self.kind is ModelKind.MDP:
            if np.any(np.diff(self.choice_offsets) < 1):
                raise ModelError("every MDP state needs at least one choice")
        else:
            if not np.array_equal(self.choice_offsets, np.arange(n + 1)):
                raise ModelError("choice_offsets must be the identity for deterministic models")
        if self.choice_offsets[-1] != m.rows:
            raise ModelError("choice_offsets do not cover the matrix rows")
        if m.cols != n:
            raise ModelError("matrix column count must equal the state count")
        if len(self.initial_states) != n:
            raise ModelError("initial_states bitset has wrong length")

        sums = sparse.row_sums(m)
        for r in range(m.rows):
            if m.row_offsets[r] == m.row_offsets[r + 1]:
                raise DeadlockError(self.row_of_choice(r), "row has no transitions")
            s = sums[r]
            if m.dtype == "rational":
                if s != 1:
                    raise ModelError(f"row {r} sums to {s}, expected exactly 1")
            elif abs(s - 1.0) > ROW_SUM_TOLERANCE:
                raise ModelError(f"row {r} sums to {s!r}, outside 1 +- {ROW_SUM_TOLERANCE}")

        if self.kind is ModelKind.CTMC:
            if self.exit_rates is None or len(self.exit_rates) != n:
                raise ModelError("CTMC requires one exit rate per state")
            for i, rate in enumerate(self.exit_rates):
                if rate <= 0:
                    raise ModelError(f"CTMC exit rate of state {i} must be positive")
        elif self.exit_rates is not None:
            raise ModelError("exit rates are only meaningful for CTMCs")

        for rm in self.rewards.values():
            if rm.state_rewards is not None and len(rm.state_rewards) != n:
                raise ModelError(f"reward model {rm.name!r}: state reward vector length mismatch")
            if rm.action_rewards is not None and len(rm.action_rewards) != m.rows:
                raise ModelError(f"reward model {rm.name!r}: action reward vector length mismatch")

    def reward_model(self, name=None):
        if not self.rewards:
            raise ModelError("model has no reward models")
        if name is None:
            if len(self.rewards) > 1:
                raise ModelError("reward model name required (several are defined)")
            return next(iter(self.rewards.values()))
        if name not in self.rewards:
            raise ModelError(f"unknown reward model {name!r}")
        return self.rewards[name]

    def zero_vector(self):
        if self.dtype == "float":
            return np.zeros(self.n_states)
        return [Fraction(0)] * self.n_states

    def __eq__(self, other):
        if not isinstance(other, Model):
            return NotImplemented
        same_rates = (self.exit_rates is None) == (other.exit_rates is None) and (
            self.exit_rates is None
            or all(a == b for a, b in zip(self.exit_rates, other.exit_rates))
        )
        return (
            self.kind == other.kind
            and self.matrix == other.matrix
            and np.array_equal(self.choice_offsets, other.choice_offsets)
            and self.labeling == other.labeling
            and sorted(self.rewards) == sorted(other.rewards)
            and all(
                _reward_vec_eq(self.rewards[k].state_rewards, other.rewards[k].state_rewards)
                and _reward_vec_eq(self.rewards[k].action_rewards, other.rewards[k].action_rewards)
                for k in self.rewards
            )
            and np.array_equal(self.initial_states, other.initial_states)
            and same_rates
        )


def _reward_vec_eq(a, b):
    if a is None and b is None:
        return True
    zero = lambda v: v is None or all(x == 0 for x in v)
    if a is None or b is None:
        return zero(a) and zero(b)
    return len(a) == len(b) and all(x == y for x, y in zip(a, b))
