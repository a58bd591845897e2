# Numerical checks of the improvement analysis.
#
# Hard bounds (penalty Lipschitz bounds, the simulation-lemma sandwich and the
# two TV lemmas) should never be violated. The brute-force improvement check
# reports a rate instead, because the guarantee is probabilistic.

import numpy as np

from fedorl.experiment import _lipschitz_table
from fedorl.theory import (brute_force_improvement, g_composed_check, g_lipschitz_check, g_penalty,
                           lemma1_suite, make_tiny_instance, markov_tv_suite, occupancy_suite,
                           solve_lambda_window)

print("g((1, 0); d = (0.5, 0.5)) =", g_penalty([1.0, 0.0], [0.5, 0.5]))

table = _lipschitz_table(0, 1e-3)
for rep in (g_lipschitz_check(table, 1e-3, 500), g_composed_check(table, 1e-3, 0.9, 500),
            lemma1_suite(200), markov_tv_suite(200, 50), occupancy_suite(500)):
    print(f"{rep.name:>22}: {rep.trials} trials, {rep.violations} violations, "
          f"worst lhs/rhs {rep.worst_ratio:.3f}")

# One tiny instance: 2 states, 2 actions, every pair seen >= 20 times.
base = make_tiny_instance(0, beta=0.1)
lam2 = 5 * base.mdp.r_max / (1 - base.mdp.discount)
inst, verdict = solve_lambda_window(base.replace(lambda2=lam2), grid_resolution=201)
print(f"lambda1 = {inst.lambda1:.3f}, lambda2 = {inst.lambda2:.3f}, delta_pi = {verdict.delta_pi:.3f}, "
      f"window ok: {verdict.lambda_window_ok}")
print(f"J(pi*) = {verdict.j_star:.4f}  J(pibar) = {verdict.j_bar:.4f}  J(pib) = {verdict.j_b:.4f}  "
      f"strict improvement: {verdict.strict_improvement}")
print("pi* =", np.round(verdict.pi_star, 3).tolist())

# A dominant lambda2 pins the optimum to the global policy.
pinned = brute_force_improvement(base.replace(lambda1=0.5e6, lambda2=1e6), 101)
print("pi* under lambda2 = 1e6:", np.round(pinned.pi_star, 2).tolist(), " pibar:",
      base.pibar.probs.round(2).tolist())
