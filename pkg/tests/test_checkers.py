"""End-to-end property checking against closed forms and brute-force oracles."""

import math
import random
from fractions import Fraction

import numpy as np
import pytest

from conftest import (
    oracle_bounded_until,
    oracle_cumulative_reward,
    oracle_mdp_reach,
    oracle_mdp_reach_reward,
    oracle_reach_probability,
    oracle_reach_reward,
    random_dtmc,
    random_mdp,
    random_stochastic_rows,
    rows_to_matrix,
)
from stormlet import checkers, sparse
from stormlet.errors import PropertyError, UnsupportedCombination
from stormlet.models import Model, ModelKind, RewardModel, StateLabeling
from stormlet.prism import ExploreOptions, explore, parse_program, typecheck
from stormlet.props import parse_property, resolve_atoms
from stormlet.solvers import SolverEnvironment

ENV = SolverEnvironment(precision=1e-10)
EXACT_ENV = SolverEnvironment(linear_method="exact", minmax_method="policy_iteration", exact=True)


def dtmc(rows, labels=None, rational=False, rewards=None):
    n = len(rows)
    model = Model(
        ModelKind.DTMC,
        rows_to_matrix(rows, n, rational),
        StateLabeling(n, labels or {}),
        rewards=rewards,
    )
    return model


def run(model, text, env=ENV, state_map=None):
    prop = resolve_atoms(parse_property(text), model, state_map)
    return checkers.check(model, prop, env)


F = Fraction


# --- next / bounded until -------------------------------------------------


def test_next_dtmc():
    model = dtmc([{0: F(1, 4), 1: F(3, 4)}, {1: F(1)}], {"goal": [False, True]})
    out = run(model, 'P=? [ X "goal" ]')
    assert out.values[0] == 0.75 and out.values[1] == 1.0


def test_next_mdp_directions():
    mat = rows_to_matrix([{1: F(1)}, {0: F(1)}, {1: F(1)}], 2, False)
    model = Model(
        ModelKind.MDP, mat, StateLabeling(2, {"goal": [False, True]}), choice_offsets=[0, 2, 3]
    )
    vmax = run(model, 'Pmax=? [ X "goal" ]').values
    vmin = run(model, 'Pmin=? [ X "goal" ]').values
    assert vmax[0] == 1.0 and vmin[0] == 0.0


@pytest.mark.parametrize("seed", range(12))
@pytest.mark.parametrize("k", [0, 1, 3, 5])
def test_bounded_until_matches_path_enumeration(seed, k):
    rng = random.Random(6000 + seed)
    rows = random_stochastic_rows(rng, 5, 5)
    left = [rng.random() < 0.8 for _ in range(5)]
    right = [rng.random() < 0.3 for _ in range(5)]
    model = dtmc(rows, {"l": left, "r": right})
    out = run(model, f'P=? [ "l" U<={k} "r" ]')
    for s in range(5):
        expected = oracle_bounded_until(rows, left, right, k, s)
        assert out.values[s] == pytest.approx(float(expected), abs=1e-12)


def test_bounded_until_exact_mode():
    rows = [{0: F(1, 2), 1: F(1, 2)}, {1: F(1)}]
    model = dtmc(rows, {"goal": [False, True]}, rational=True)
    out = run(model, 'P=? [ F<=2 "goal" ]', EXACT_ENV)
    assert out.values[0] == F(3, 4)


def test_bounded_until_monotone_in_k_converges_to_unbounded():
    rng = random.Random(77)
    rows = random_stochastic_rows(rng, 6, 6)
    right = [False] * 5 + [True]
    rows[5] = {5: F(1)}
    model = dtmc(rows, {"goal": right})
    exact = oracle_reach_probability(rows, [True] * 6, right)
    prev = None
    for k in (1, 2, 4, 8, 16, 32, 64, 256, 1024, 8192):
        vals = run(model, f'P=? [ F<={k} "goal" ]').values
        if prev is not None:
            assert all(vals[s] >= prev[s] - 1e-12 for s in range(6))
        prev = vals
    for s in range(6):
        assert prev[s] == pytest.approx(float(exact[s]), abs=1e-9)


# --- unbounded until ------------------------------------------------------


def test_until_simple_loop_probability_one():
    model = dtmc([{0: F(1, 2), 1: F(1, 2)}, {1: F(1)}], {"goal": [False, True]})
    out = run(model, 'P=? [ F "goal" ]')
    assert out.values[0] == pytest.approx(1.0, abs=1e-9)
    assert out.metadata["prob1"] == 2


def test_until_exact_geometric():
    rows = [{0: F(1, 3), 1: F(1, 3), 2: F(1, 3)}, {1: F(1)}, {2: F(1)}]
    model = dtmc(rows, {"goal": [False, True, False]}, rational=True)
    out = run(model, 'P=? [ F "goal" ]', EXACT_ENV)
    assert out.values[0] == F(1, 2)


@pytest.mark.parametrize("seed", range(20))
def test_until_matches_exact_oracle(seed):
    rng = random.Random(7000 + seed)
    rows = random_stochastic_rows(rng, 7, 7)
    left = [rng.random() < 0.85 for _ in range(7)]
    right = [rng.random() < 0.25 for _ in range(7)]
    model = dtmc(rows, {"l": left, "r": right})
    out = run(model, 'P=? [ "l" U "r" ]')
    expected = oracle_reach_probability(rows, left, right)
    for s in range(7):
        assert out.values[s] == pytest.approx(float(expected[s]), abs=1e-8)


def test_until_threshold_comparison():
    model = dtmc([{0: F(1, 2), 1: F(1, 2)}, {1: F(1)}], {"goal": [False, True]})
    assert list(run(model, 'P>=1 [ F "goal" ]').values) == [True, True]
    assert list(run(model, 'P<0.5 [ F "goal" ]').values) == [False, False]


def test_globally_is_dual_of_reachability():
    rows = [{0: F(1, 2), 1: F(1, 4), 2: F(1, 4)}, {1: F(1)}, {2: F(1)}]
    model = dtmc(rows, {"safe": [True, True, False]})
    out = run(model, 'P=? [ G "safe" ]')
    reach_bad = run(model, 'P=? [ F !"safe" ]')
    for s in range(3):
        assert out.values[s] == pytest.approx(1.0 - reach_bad.values[s], abs=1e-12)
    # state 1 loops inside safe forever, state 0 eventually falls into 2
    assert out.values[1] == pytest.approx(1.0, abs=1e-9)
    assert out.values[0] == pytest.approx(0.5, abs=1e-9)


# --- MDP until ------------------------------------------------------------


@pytest.mark.parametrize("direction", ["min", "max"])
@pytest.mark.parametrize("seed", range(12))
def test_mdp_until_matches_scheduler_enumeration(seed, direction):
    rng = random.Random(8000 + seed)
    model, rows, offsets = random_mdp(rng, 5, max_choices=3)
    target = [rng.random() < 0.3 for _ in range(5)]
    if not any(target):
        target[0] = True
    model.labeling.add("goal", target)
    out = run(model, f'P{direction}=? [ F "goal" ]')
    expected = oracle_mdp_reach(rows, offsets, target, direction == "max")
    for s in range(5):
        assert out.values[s] == pytest.approx(float(expected[s]), abs=1e-6)


def test_mdp_until_value_vs_policy_iteration():
    rng = random.Random(99)
    model, rows, offsets = random_mdp(rng, 6, max_choices=3)
    target = [False] * 5 + [True]
    model.labeling.add("goal", target)
    vi = SolverEnvironment(minmax_method="value_iteration", precision=1e-10)
    pi = SolverEnvironment(minmax_method="policy_iteration", precision=1e-10)
    for text in ('Pmax=? [ F "goal" ]', 'Pmin=? [ F "goal" ]'):
        a = run(model, text, vi).values
        b = run(model, text, pi).values
        assert np.allclose(a, b, atol=1e-8)


def test_mdp_until_exact_mode():
    mat = rows_to_matrix(
        [{0: F(1, 2), 1: F(1, 2)}, {2: F(1)}, {1: F(1)}, {2: F(1)}], 3, True
    )
    model = Model(
        ModelKind.MDP,
        mat,
        StateLabeling(3, {"goal": [False, True, False]}),
        choice_offsets=[0, 2, 3, 4],
    )
    out = run(model, 'Pmax=? [ F "goal" ]', EXACT_ENV)
    assert out.values[0] == F(1)
    out_min = run(model, 'Pmin=? [ F "goal" ]', EXACT_ENV)
    assert out_min.values[0] == F(0)  # the second choice diverts into the sink loop


def test_mdp_scheduler_metadata():
    mat = rows_to_matrix([{1: F(1)}, {2: F(1)}, {1: F(1)}, {2: F(1)}], 3, False)
    model = Model(
        ModelKind.MDP,
        mat,
        StateLabeling(3, {"goal": [False, True, False]}),
        choice_offsets=[0, 2, 3, 4],
    )
    out = run(model, 'Pmax=? [ F "goal" ]')
    assert out.metadata["direction"] == "max"


# --- rewards --------------------------------------------------------------


def expected_visits_model():
    # leave state 0 with probability 1/2 per step; reward 1 per visit of 0
    rows = [{0: F(1, 2), 1: F(1, 2)}, {1: F(1)}]
    rm = RewardModel("steps", state_rewards=np.array([1.0, 0.0]))
    return dtmc(rows, {"done": [False, True]}, rewards={"steps": rm})


def test_reach_reward_expected_visits():
    out = run(expected_visits_model(), 'R{"steps"}=? [ F "done" ]')
    assert out.values[0] == pytest.approx(2.0, abs=1e-8)  # geometric mean 1/p
    assert out.values[1] == 0.0


def test_reach_reward_exact():
    rows = [{0: F(1, 2), 1: F(1, 2)}, {1: F(1)}]
    rm = RewardModel("steps", state_rewards=[F(1), F(0)])
    model = dtmc(rows, {"done": [False, True]}, rational=True, rewards={"steps": rm})
    out = run(model, 'R{"steps"}=? [ F "done" ]', EXACT_ENV)
    assert out.values[0] == F(2)


def test_reach_reward_infinite_when_target_missed():
    rows = [{0: F(1, 2), 1: F(1, 4), 2: F(1, 4)}, {1: F(1)}, {2: F(1)}]
    rm = RewardModel("r", state_rewards=np.array([1.0, 1.0, 0.0]))
    model = dtmc(rows, {"goal": [False, False, True]}, rewards={"r": rm})
    out = run(model, 'R{"r"}=? [ F "goal" ]')
    assert math.isinf(out.values[0]) and math.isinf(out.values[1])
    assert out.values[2] == 0.0


@pytest.mark.parametrize("seed", range(10))
def test_reach_reward_matches_oracle(seed):
    rng = random.Random(9000 + seed)
    rows = random_stochastic_rows(rng, 6, 6)
    target = [False] * 5 + [True]
    rows[5] = {5: F(1)}
    reward = [F(rng.randint(1, 4)) for _ in range(6)]
    rm = RewardModel("r", state_rewards=np.array([float(v) for v in reward]))
    model = dtmc(rows, {"goal": target}, rewards={"r": rm})
    out = run(model, 'R{"r"}=? [ F "goal" ]')
    expected = oracle_reach_reward(rows, target, reward)
    for s in range(6):
        if expected[s] is None:
            assert math.isinf(out.values[s])
        else:
            assert out.values[s] == pytest.approx(float(expected[s]), abs=1e-7)


@pytest.mark.parametrize("direction", ["min", "max"])
@pytest.mark.parametrize("seed", range(10))
def test_mdp_reach_reward_matches_scheduler_enumeration(seed, direction):
    rng = random.Random(10_000 + seed)
    n = 4
    counts = [rng.randint(1, 2) for _ in range(n)]
    offsets = np.cumsum([0] + counts)
    rows = random_stochastic_rows(rng, int(offsets[-1]), n)
    target = [False] * (n - 1) + [True]
    rows[int(offsets[-1]) - 1] = {n - 1: F(1)}
    # strictly positive choice rewards keep zero-reward loops out of play
    choice_rewards = [F(rng.randint(1, 3)) for _ in range(int(offsets[-1]))]
    rm = RewardModel("r", action_rewards=np.array([float(v) for v in choice_rewards]))
    model = Model(
        ModelKind.MDP,
        rows_to_matrix(rows, n, False),
        StateLabeling(n, {"goal": target}),
        choice_offsets=offsets,
        rewards={"r": rm},
    )
    expected = oracle_mdp_reach_reward(rows, offsets, target, choice_rewards, direction == "max")
    out = run(model, f'R{direction}{{"r"}}=? [ F "goal" ]')
    for s in range(n):
        if expected[s] is None:
            assert math.isinf(out.values[s])
        else:
            assert out.values[s] == pytest.approx(float(expected[s]), abs=1e-6)


def test_cumulative_reward_constant_rate():
    rows = [{0: F(1)}]
    rm = RewardModel("r", state_rewards=np.array([1.5]))
    model = dtmc(rows, rewards={"r": rm})
    out = run(model, 'R{"r"}=? [ C<=4 ]')
    assert out.values[0] == pytest.approx(6.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(8))
def test_cumulative_reward_matches_recursion_oracle(seed):
    rng = random.Random(11_000 + seed)
    rows = random_stochastic_rows(rng, 5, 5)
    reward = [F(rng.randint(0, 3)) for _ in range(5)]
    rm = RewardModel("r", state_rewards=np.array([float(v) for v in reward]))
    model = dtmc(rows, rewards={"r": rm})
    out = run(model, 'R{"r"}=? [ C<=5 ]')
    for s in range(5):
        expected = oracle_cumulative_reward(rows, reward, 5, s)
        assert out.values[s] == pytest.approx(float(expected), abs=1e-10)


def test_cumulative_reward_rejected_on_ctmc():
    mat = rows_to_matrix([{1: F(1)}, {1: F(1)}], 2, False)
    rm = RewardModel("r", state_rewards=np.array([1.0, 0.0]))
    model = Model(
        ModelKind.CTMC, mat, StateLabeling(2), exit_rates=[1.0, 1.0], rewards={"r": rm}
    )
    with pytest.raises(UnsupportedCombination):
        run(model, 'R{"r"}=? [ C<=3 ]')


# --- CTMC -----------------------------------------------------------------


def two_state_ctmc(lam):
    mat = rows_to_matrix([{1: F(1)}, {1: F(1)}], 2, False)
    return Model(
        ModelKind.CTMC,
        mat,
        StateLabeling(2, {"goal": [False, True]}),
        exit_rates=[lam, 1.0],
    )


@pytest.mark.parametrize("lam,t", [(1.0, 1.0), (5.0, 0.5), (0.1, 10.0)])
def test_ctmc_time_bounded_exponential(lam, t):
    model = two_state_ctmc(lam)
    out = run(model, f'P=? [ F<={t} "goal" ]')
    assert out.values[0] == pytest.approx(1.0 - math.exp(-lam * t), abs=1e-6)
    assert out.values[1] == 1.0


def test_ctmc_series_chain_convolution():
    # 0 --rate 2--> 1 --rate 3--> 2: P(reach 2 by t=1) = 1 - 3e^-2 + 2e^-3
    mat = rows_to_matrix([{1: F(1)}, {2: F(1)}, {2: F(1)}], 3, False)
    model = Model(
        ModelKind.CTMC,
        mat,
        StateLabeling(3, {"goal": [False, False, True]}),
        exit_rates=[2.0, 3.0, 1.0],
    )
    out = run(model, 'P=? [ F<=1 "goal" ]')
    expected = 1.0 - 3.0 * math.exp(-2.0) + 2.0 * math.exp(-3.0)
    assert out.values[0] == pytest.approx(expected, abs=1e-6)


def test_ctmc_time_bound_zero():
    model = two_state_ctmc(1.0)
    out = run(model, 'P=? [ F<=0 "goal" ]')
    assert list(out.values) == [0.0, 1.0]


def test_ctmc_fractional_time_bounds_allowed_only_continuous():
    model = dtmc([{0: F(1)}], {"goal": [True]})
    with pytest.raises(UnsupportedCombination):
        run(model, 'P=? [ F<=1.5 "goal" ]')


def test_ctmc_rate_scaling_leaves_unbounded_until_unchanged():
    a = two_state_ctmc(1.0)
    b = two_state_ctmc(10.0)
    va = run(a, 'P=? [ F "goal" ]').values
    vb = run(b, 'P=? [ F "goal" ]').values
    assert np.array_equal(va, vb)


def test_ctmc_unbounded_until_delegates_to_embedded_chain():
    rng = random.Random(321)
    rows = random_stochastic_rows(rng, 5, 5)
    mat = rows_to_matrix(rows, 5, False)
    target = [False, False, True, False, False]
    ctmc = Model(
        ModelKind.CTMC,
        mat,
        StateLabeling(5, {"goal": target}),
        exit_rates=[1.0 + i for i in range(5)],
    )
    embedded = Model(ModelKind.DTMC, mat, StateLabeling(5, {"goal": target}))
    vc = run(ctmc, 'P=? [ F "goal" ]').values
    vd = run(embedded, 'P=? [ F "goal" ]').values
    assert np.array_equal(vc, vd)


# --- conditional probabilities --------------------------------------------


def three_branch_model(rational=False):
    one_third = F(1, 3)
    rows = [
        {1: one_third, 2: one_third, 3: one_third},
        {1: F(1)},
        {2: F(1)},
        {3: F(1)},
    ]
    labels = {
        "a": [False, True, False, False],
        "b": [False, True, True, False],
    }
    return dtmc(rows, labels, rational=rational)


def test_conditional_three_branch_exact():
    model = three_branch_model(rational=True)
    out = run(model, 'P=? [ F "a" || F "b" ]', EXACT_ENV)
    assert out.values[0] == F(1, 2)


def test_conditional_equals_num_over_den():
    model = three_branch_model()
    out = run(model, 'P=? [ F "a" || F "b" ]')
    num = run(model, 'P=? [ F "a" ]').values  # objective implies condition here
    den = run(model, 'P=? [ F "b" ]').values
    assert out.values[0] == pytest.approx(num[0] / den[0], abs=1e-12)


def test_conditional_with_trivial_condition():
    model = dtmc([{0: F(1, 2), 1: F(1, 2)}, {1: F(1)}], {"a": [False, True]})
    cond = run(model, 'P=? [ F "a" || F true ]').values
    plain = run(model, 'P=? [ F "a" ]').values
    assert np.allclose(cond, plain, atol=1e-12)


def test_conditional_zero_condition_gives_nan():
    model = dtmc([{0: F(1)}, {1: F(1)}], {"a": [False, True], "b": [False, True]})
    out = run(model, 'P=? [ F "a" || F "b" ]')
    assert math.isnan(out.values[0])
    assert out.metadata["condition_zero"] == [0]
    assert not math.isnan(out.values[1])


def test_conditional_rejected_on_mdp():
    mat = rows_to_matrix([{1: F(1)}, {1: F(1)}], 2, False)
    model = Model(
        ModelKind.MDP, mat, StateLabeling(2, {"a": [False, True], "b": [False, True]}),
        choice_offsets=[0, 1, 2],
    )
    with pytest.raises((UnsupportedCombination, PropertyError)):
        run(model, 'Pmax=? [ F "a" || F "b" ]')


def test_conditional_product_size_bound():
    rng = random.Random(55)
    rows = random_stochastic_rows(rng, 8, 8)
    labels = {
        "a": [rng.random() < 0.4 for _ in range(8)],
        "b": [rng.random() < 0.4 for _ in range(8)],
    }
    model = dtmc(rows, labels)
    out = run(model, 'P=? [ F "a" || F "b" ]')
    assert out.metadata["product_states"] <= 9 * 8


# --- nesting and misc -----------------------------------------------------


def test_nested_operator_as_target():
    # inner: states that reach "a" almost surely; outer: reach such a state
    rows = [{1: F(1, 2), 2: F(1, 2)}, {1: F(1)}, {2: F(1)}]
    model = dtmc(rows, {"a": [False, True, False]})
    out = run(model, 'P=? [ F P>=1 [ F "a" ] ]')
    assert out.values[1] == 1.0
    assert out.values[0] == pytest.approx(0.5, abs=1e-9)


def test_die_program_end_to_end(die_source):
    program = typecheck(parse_program(die_source))
    model, state_map = explore(program, ExploreOptions())
    out = run(model, 'P=? [ F "six" ]', state_map=state_map)
    assert out.values[0] == pytest.approx(1.0 / 6.0, abs=1e-6)
    exact_model, exact_map = explore(program, ExploreOptions(exact=True))
    exact_out = run(exact_model, 'P=? [ F "six" ]', EXACT_ENV, state_map=exact_map)
    assert exact_out.values[0] == F(1, 6)


def test_predicate_property_on_program_model(die_source):
    program = typecheck(parse_program(die_source))
    model, state_map = explore(program, ExploreOptions())
    out = run(model, 'P=? [ F (s=7 & d=6) ]', state_map=state_map)
    assert out.values[0] == pytest.approx(1.0 / 6.0, abs=1e-6)
