# Exact tabular MDP tools: returns, occupancy measures and value iteration.
#
# Everything here is a linear solve, so results are exact up to float error.

import numpy as np

from fedorl import Gridworld, TabularPolicy, occupancy, policy_return, q_function
from fedorl.mdp import max_tv_distance, state_occupancy, value_iteration

# A 4x4 gridworld with slip noise. The goal (bottom right) pays 1 per step and absorbs.
mdp = Gridworld(4, 4, slip_prob=0.1, goal_reward=1.0, gamma=0.95).to_mdp()
print("states, actions:", mdp.shape)

# The uniform policy and its discounted return J = mu0 . V.
uniform = TabularPolicy.uniform(*mdp.shape)
print("J(uniform) =", round(policy_return(mdp, uniform), 4))

# The normalized occupancy rho(s, a) sums to one, and the return is
# sum rho * R / (1 - gamma).
rho = occupancy(mdp, uniform)
print("occupancy mass:", rho.sum())
print("return from occupancy:", round(float((rho * mdp.reward).sum() / (1 - mdp.discount)), 4))

# Value iteration gives an optimal deterministic policy (ties go to the lowest index).
v_star, greedy = value_iteration(mdp)
print("J(optimal) =", round(policy_return(mdp, greedy), 4))

# Q-values are consistent with V: V(s) = sum_a pi(a|s) Q(s, a).
q = q_function(mdp, greedy)
print("max |V - pi.Q|:", np.abs((greedy.probs * q).sum(axis=1) - v_star).max())

# Where does the optimal policy spend its time?
print(state_occupancy(mdp, greedy).reshape(4, 4).round(3))

# Policy distance used for the regularizers: the max over states of row-wise TV.
print("max-TV(uniform, optimal) =", max_tv_distance(uniform, greedy))
