# Offline data: behavior tiers, trajectory datasets and the empirical model an agent learns from.

import numpy as np

from fedorl import Gridworld, behavioral_policy, build_empirical_model, empirical_mdp, generate_dataset
from fedorl import make_behavior_tier, policy_return

mdp = Gridworld(5, 5, slip_prob=0.1, goal_reward=1.0, gamma=0.95).to_mdp()

# Three behavior tiers: epsilon-greedy around the optimal policy (expert 0.05,
# medium 0.3) and uniform random. Better tiers have higher true returns.
for tier in ("expert", "medium", "random"):
    print(f"{tier:>7}: J = {policy_return(mdp, make_behavior_tier(mdp, tier)):.3f}")

# Five trajectories of length 50 from the medium policy, seeded.
behavior = make_behavior_tier(mdp, "medium")
ds = generate_dataset(mdp, behavior, num_trajectories=5, horizon=50, seed=0, agent_id="demo")
print("records:", len(ds), "first:", ds.records[0])

# The empirical model: counts, P~ (uniform on unseen pairs), R~ (0 on unseen
# pairs) and the floored frequency d used by the conservatism penalty.
emp = build_empirical_model(ds, *mdp.shape, delta_floor=1e-3)
print("pairs never seen:", int((emp.counts == 0).sum()), "of", emp.counts.size)
print("smallest d:", emp.d.min(), " state marginal sums to", emp.state_marginal.sum())

# The behavioral policy is the per-state action frequency (uniform on unseen states).
pib = behavioral_policy(ds, *mdp.shape)
print("estimated behavior at the start state:", pib.probs[0].round(2))

# How wrong is the empirical MDP about this policy's return?
m_emp = empirical_mdp(emp, mdp)
print(f"J(M, pib) = {policy_return(mdp, pib):.3f}   J(M~, pib) = {policy_return(m_emp, pib):.3f}")

# More data shrinks the transition error roughly like 1 / sqrt(N). A small
# random MDP with uniform behavior keeps every pair covered.
from fedorl import TabularPolicy, random_mdp

small = random_mdp(5, 2, seed=3, gamma=0.9)
for n in (5, 20, 80, 320):
    errs = []
    for seed in range(10):
        d = generate_dataset(small, TabularPolicy.uniform(5, 2), n, 40, seed=[seed, n])
        e = build_empirical_model(d, 5, 2, 0.05)
        errs.append(np.abs(e.transition_hat - small.transition).sum(axis=2).max())
    print(f"{n:3d} trajectories: worst-pair L1 transition error {np.mean(errs):.3f}")
