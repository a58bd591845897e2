import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fedorl.envs import Gridworld, random_mdp, random_policy
from fedorl.errors import ShapeMismatch, UnsupportedSupport
from fedorl.mdp import (Mdp, TabularPolicy, d_cql, d_cql_per_state, load_mdp, load_policy,
                        max_tv_distance, occupancy, occupancy_tv, policy_return, q_function,
                        save_mdp, save_policy, state_occupancy, state_values, value_iteration)


def truncated_return(mdp, probs, horizon=2000):
    # independent oracle: forward propagation of the state distribution
    dist = mdp.initial_dist.copy()
    r_pi = (probs * mdp.reward).sum(axis=1)
    P_pi = np.einsum("sa,sat->st", probs, mdp.transition)
    total, disc = 0.0, 1.0
    for _ in range(horizon):
        total += disc * dist @ r_pi
        dist = dist @ P_pi
        disc *= mdp.discount
    return total


def test_return_matches_truncated_sum(small_mdp):
    pi = random_policy(3, 2, np.random.default_rng(0))
    assert abs(policy_return(small_mdp, pi) - truncated_return(small_mdp, pi.probs)) < 1e-8


def test_single_state_return_closed_form():
    mdp = Mdp(np.ones((1, 2, 1)), [[0.3, 0.7]], [1.0], 0.8)
    pi = TabularPolicy([[0.5, 0.5]])
    assert policy_return(mdp, pi) == pytest.approx(0.5 / 0.2, abs=1e-12)


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_occupancy_is_distribution_and_gives_return(seed):
    rng = np.random.default_rng(seed)
    S, A = int(rng.integers(1, 7)), int(rng.integers(1, 4))
    mdp = random_mdp(S, A, seed=seed, gamma=float(rng.uniform(0.1, 0.99)))
    pi = random_policy(S, A, rng)
    rho = occupancy(mdp, pi)
    assert rho.min() >= -1e-12
    assert abs(rho.sum() - 1.0) < 1e-10
    # occupancy form of the return
    assert np.sum(rho * mdp.reward) / (1 - mdp.discount) == pytest.approx(policy_return(mdp, pi), rel=1e-9)


def test_occupancy_flow_equations(small_mdp):
    pi = random_policy(3, 2, np.random.default_rng(3))
    d = state_occupancy(small_mdp, pi)
    P_pi = np.einsum("sa,sat->st", pi.probs, small_mdp.transition)
    lhs = d - small_mdp.discount * d @ P_pi
    assert np.allclose(lhs, (1 - small_mdp.discount) * small_mdp.initial_dist, atol=1e-12)


def test_q_function_consistent_with_values(small_mdp):
    pi = random_policy(3, 2, np.random.default_rng(4))
    Q = q_function(small_mdp, pi)
    assert np.allclose((Q * pi.probs).sum(axis=1), state_values(small_mdp, pi), atol=1e-10)


def test_value_iteration_matches_policy_enumeration():
    mdp = random_mdp(4, 3, seed=11, gamma=0.9)
    best = max(policy_return(mdp, TabularPolicy.deterministic(acts, 3))
               for acts in itertools.product(range(3), repeat=4))
    V, greedy = value_iteration(mdp)
    assert policy_return(mdp, greedy) == pytest.approx(best, abs=1e-8)
    assert mdp.initial_dist @ V == pytest.approx(best, abs=1e-8)


def test_value_iteration_tie_break_lowest_index():
    mdp = Mdp(np.ones((1, 3, 1)), [[1.0, 1.0, 0.5]], [1.0], 0.5)
    _, greedy = value_iteration(mdp)
    assert greedy.probs.tolist() == [[1.0, 0.0, 0.0]]


def test_mdp_validation():
    with pytest.raises(ValueError):
        Mdp(np.full((2, 1, 2), 0.6), np.zeros((2, 1)), [1, 0], 0.9)
    with pytest.raises(ShapeMismatch):
        Mdp(np.full((2, 1, 2), 0.5), np.zeros((3, 1)), [1, 0], 0.9)
    with pytest.raises(ValueError):
        Mdp(np.full((2, 1, 2), 0.5), np.zeros((2, 1)), [1, 0], 1.0)
    with pytest.raises(ValueError):
        Mdp(np.full((2, 1, 2), 0.5), np.full((2, 1), 2.0), [1, 0], 0.9, r_max=1.0)
    with pytest.raises(ValueError):
        TabularPolicy([[0.5, 0.6]])
    with pytest.raises(ShapeMismatch):
        policy_return(random_mdp(2, 2, seed=0), TabularPolicy.uniform(3, 2))


def test_tables_are_read_only(small_mdp):
    with pytest.raises(ValueError):
        small_mdp.transition[0, 0, 0] = 1.0


def test_max_tv_and_dcql():
    p1 = TabularPolicy([[1.0, 0.0], [0.5, 0.5]])
    p2 = TabularPolicy([[0.5, 0.5], [0.5, 0.5]])
    assert max_tv_distance(p1, p2) == pytest.approx(0.5)
    # 1 + chi^2: row 0 -> 1 + 1*(1/0.5 - 1) = 2, row 1 -> 1
    assert d_cql_per_state(p1, p2).tolist() == pytest.approx([2.0, 1.0])
    assert d_cql([0.25, 0.75], p1, p2) == pytest.approx(1.25)
    with pytest.raises(UnsupportedSupport):
        d_cql_per_state(p2, p1)
    assert occupancy_tv([0.5, 0.5], [1.0, 0.0]) == pytest.approx(0.5)


def test_json_round_trip(tmp_path, small_mdp):
    save_mdp(small_mdp, tmp_path / "m.json")
    back = load_mdp(tmp_path / "m.json")
    assert np.array_equal(back.transition, small_mdp.transition)
    assert np.array_equal(back.reward, small_mdp.reward)
    assert back.discount == small_mdp.discount
    pi = random_policy(3, 2, np.random.default_rng(1))
    save_policy(pi, tmp_path / "p.json")
    assert np.array_equal(load_policy(tmp_path / "p.json").probs, pi.probs)


def test_gridworld_trivial_cases():
    one = Gridworld(1, 1).to_mdp()
    assert one.shape == (1, 4)
    assert np.all(one.transition == 1.0)
    det = Gridworld(3, 3, slip_prob=0.0).to_mdp()
    assert set(np.unique(det.transition)) == {0.0, 1.0}
    # moving east from the start cell reaches cell 1
    assert det.transition[0, 2, 1] == 1.0
    # walls keep the agent in place
    assert det.transition[0, 0, 0] == 1.0


def test_gridworld_slip_and_goal():
    mdp = Gridworld(3, 3, slip_prob=0.2).to_mdp()
    # from the centre, east lands east w.p. 0.8 and north/south w.p. 0.1 each
    assert mdp.transition[4, 2, 5] == pytest.approx(0.8)
    assert mdp.transition[4, 2, 1] == pytest.approx(0.1)
    assert mdp.transition[4, 2, 7] == pytest.approx(0.1)
    assert np.all(mdp.reward[8] == 1.0) and np.all(mdp.transition[8, :, 8] == 1.0)
    assert mdp.r_max == 1.0


def test_random_mdp_branching_and_determinism():
    a = random_mdp(6, 2, branching=2, seed=5)
    b = random_mdp(6, 2, branching=2, seed=5)
    assert np.array_equal(a.transition, b.transition)
    assert np.all((a.transition > 0).sum(axis=2) <= 2)
