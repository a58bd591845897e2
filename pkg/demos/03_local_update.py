# One agent's local round: conservative evaluation plus the dual-anchored improvement.
#
# The agent holds a dataset, its behavior policy pib and the broadcast global
# policy pibar. It evaluates with a penalty that pushes Q down where the policy
# puts more mass than the data, then improves toward high Q while staying close
# to both anchors.

import numpy as np

from fedorl import (Gridworld, LocalConfig, TabularPolicy, behavioral_policy, build_empirical_model,
                    conservative_evaluate, drpo_local_round, generate_dataset, improve_policy,
                    make_behavior_tier, policy_return)
from fedorl.local import local_objective

mdp = Gridworld(5, 5, slip_prob=0.1, goal_reward=1.0, gamma=0.95).to_mdp()
ds = generate_dataset(mdp, make_behavior_tier(mdp, "medium"), 5, 50, seed=0)
emp = build_empirical_model(ds, *mdp.shape, 1e-3)
pib = behavioral_policy(ds, *mdp.shape)
pibar = TabularPolicy.uniform(*mdp.shape)

# Conservative evaluation of pibar. beta = 0 is plain evaluation on the empirical MDP.
for beta in (0.0, 1.0, 10.0):
    res = conservative_evaluate(emp, mdp, pibar, LocalConfig(beta=beta))
    print(f"beta={beta:5.1f}: mean Q on the start state {res.q[0].mean():9.3f}, residual {res.residual:.1e}")

# The improvement step has a closed form per state: pi(a) = w(a) / (c - Q(a))
# with w = lambda1 pib + lambda2 pibar and c chosen so that pi sums to one.
cfg = LocalConfig(beta=1.0, lambda1=0.1, lambda2=0.2)
q = conservative_evaluate(emp, mdp, pibar, cfg).q
pi = improve_policy(emp, q, pib, pibar, cfg)
# pib has zeros where pibar has mass, so its objective is -inf.
print("objective at pi, pibar, pib:",
      [round(local_objective(emp, p, q, pib, pibar, cfg), 3) for p in (pi, pibar, pib)])

# The exponentiated-gradient solver reaches the same point.
eg = improve_policy(emp, q, pib, pibar, cfg.replace(improvement_mode="exponentiated_gradient"))
print("closed form vs mirror ascent, max difference:", np.abs(eg.probs - pi.probs).max())

# A full local round alternates the two steps. Compare true returns. One
# round from a uniform start with one medium dataset stays below the
# behavior policy here; the federated rounds in 04 pool several agents.
for alt in (0, 2, 10):
    out = drpo_local_round(emp, mdp, pibar, pib, cfg.replace(improve_alternations=alt))
    print(f"{alt:2d} alternations: J(M, local) = {policy_return(mdp, out):.3f}")
print(f"behavior policy:   J(M, pib)   = {policy_return(mdp, pib):.3f}")
