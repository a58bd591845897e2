import numpy as np
import pytest

from fedorl.data import build_empirical_model, generate_dataset
from fedorl.envs import random_mdp, random_policy


def random_instance(seed, max_states=6, max_actions=3, trajectories=(1, 10), horizon=20,
                    delta_scale=0.5):
    """Random MDP, a dataset from a random behavior policy and its empirical model."""
    rng = np.random.default_rng(seed)
    S = int(rng.integers(2, max_states + 1))
    A = int(rng.integers(2, max_actions + 1))
    mdp = random_mdp(S, A, seed=int(rng.integers(2**31)), gamma=float(rng.uniform(0.5, 0.95)))
    behavior = random_policy(S, A, rng)
    ds = generate_dataset(mdp, behavior, int(rng.integers(*trajectories)), horizon, seed=[seed, 1])
    emp = build_empirical_model(ds, S, A, delta_scale / (S * A))
    return mdp, ds, emp, rng


@pytest.fixture
def small_mdp():
    return random_mdp(3, 2, seed=7, gamma=0.9)
