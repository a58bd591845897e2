"""Numerical checks of the improvement analysis: penalty, gap bounds and lemmas.

Every check returns a :class:`CheckReport`. With ``strict=True`` (the
default) a violated hard bound raises :class:`BoundViolation` carrying the
report, so the failing instance is never lost.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import EmpiricalModel, build_empirical_model, empirical_mdp, generate_dataset
from .envs import random_mdp, random_policy
from .errors import BoundViolation, BudgetExceeded, UndefinedDeltaPi
from .mdp import (Mdp, TabularPolicy, as_probs, d_cql_per_state, max_tv_distance, occupancy,
                  occupancy_tv, policy_return, state_values)

BOUND_SLACK = 1e-8
CONFIDENCE = 0.05
BRUTE_FORCE_BUDGET = 10_000_000


@dataclass
class CheckReport:
    name: str
    trials: int = 0
    violations: int = 0
    worst_ratio: float = 0.0
    examples_of_failure: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def record(self, lhs: float, rhs: float, slack: float, example) -> None:
        self.trials += 1
        if rhs > 0:
            self.worst_ratio = max(self.worst_ratio, lhs / rhs)
        elif lhs > 0:
            self.worst_ratio = math.inf
        if lhs > rhs + slack:
            self.violations += 1
            if len(self.examples_of_failure) < 5:
                self.examples_of_failure.append(_jsonable(example))

    def merge(self, other: "CheckReport") -> "CheckReport":
        self.trials += other.trials
        self.violations += other.violations
        self.worst_ratio = max(self.worst_ratio, other.worst_ratio)
        room = 5 - len(self.examples_of_failure)
        self.examples_of_failure.extend(other.examples_of_failure[:max(room, 0)])
        return self

    def to_dict(self) -> dict:
        out = asdict(self)
        if not math.isfinite(out["worst_ratio"]):
            out["worst_ratio"] = str(out["worst_ratio"])
        return out

    def raise_if_violated(self):
        if self.violations:
            raise BoundViolation(f"{self.name}: {self.violations} of {self.trials} trials violate the bound",
                                 self.to_dict())
        return self


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, TabularPolicy):
        return obj.probs.tolist()
    if isinstance(obj, Mdp):
        return obj.to_dict()
    return obj


# penalty and its Lipschitz bounds

def g_penalty(rho, d) -> float:
    """Expected penalty sum_{s,a} rho (rho - d) / d."""
    rho = np.asarray(rho, dtype=float)
    d = np.asarray(d, dtype=float)
    return float(np.sum(rho * (rho - d) / d))


def data_weighted_dist(state_weights, pi) -> np.ndarray:
    return np.asarray(state_weights, dtype=float)[:, None] * as_probs(pi)


def _default_state_weights(d):
    w = np.asarray(d, dtype=float).sum(axis=1)
    return w / w.sum()


def g_lipschitz_check(d, delta: float, trials: int, seed: int = 0, state_weights=None,
                      strict: bool = True) -> CheckReport:
    """|g(rho1) - g(rho2)| <= (4 / delta) TV(rho1, rho2) over random policy pairs.

    ``rho_i(s, a) = w(s) pi_i(a|s)`` with ``w`` the supplied state weights
    (default: the normalized row sums of ``d``).
    """
    d = np.asarray(d, dtype=float)
    S, A = d.shape
    w = _default_state_weights(d) if state_weights is None else np.asarray(state_weights, float)
    L = 4.0 / delta
    rng = np.random.default_rng(seed)
    report = CheckReport("g_lipschitz", extra={"L": L, "delta": delta})
    for _ in range(trials):
        p1, p2 = random_policy(S, A, rng), random_policy(S, A, rng)
        r1, r2 = data_weighted_dist(w, p1), data_weighted_dist(w, p2)
        lhs = abs(g_penalty(r1, d) - g_penalty(r2, d))
        rhs = L * occupancy_tv(r1, r2)
        report.record(lhs, rhs, BOUND_SLACK * max(1.0, rhs), {"pi1": p1, "pi2": p2, "lhs": lhs, "rhs": rhs})
    return report.raise_if_violated() if strict else report


def g_composed_check(d, delta: float, gamma: float, trials: int, seed: int = 0,
                     state_weights=None, strict: bool = True) -> CheckReport:
    """|g(rho1) - g(rho2)| <= L / (1 - gamma) * max_s TV(pi1(.|s), pi2(.|s))."""
    d = np.asarray(d, dtype=float)
    S, A = d.shape
    w = _default_state_weights(d) if state_weights is None else np.asarray(state_weights, float)
    L = 4.0 / delta
    rng = np.random.default_rng(seed)
    report = CheckReport("g_lipschitz_composed", extra={"L": L, "delta": delta, "gamma": gamma})
    for _ in range(trials):
        p1, p2 = random_policy(S, A, rng), random_policy(S, A, rng)
        lhs = abs(g_penalty(data_weighted_dist(w, p1), d) - g_penalty(data_weighted_dist(w, p2), d))
        rhs = L / (1.0 - gamma) * max_tv_distance(p1, p2)
        report.record(lhs, rhs, BOUND_SLACK * max(1.0, rhs), {"pi1": p1, "pi2": p2, "lhs": lhs, "rhs": rhs})
    return report.raise_if_violated() if strict else report


# model-error gap (simulation lemma)

def lemma1_eta(mdp: Mdp, emp_mdp: Mdp, pi) -> float:
    """eta for policy ``pi``: transition and reward errors weighted by rho^pi.

    rho^pi is the occupancy in the true MDP and Q^pi is taken in the empirical
    one; with this pairing the simulation identity is exact, so the bound
    cannot be loose in the wrong direction.
    """
    probs = as_probs(pi)
    gamma = mdp.discount
    rho = occupancy(mdp, probs)
    v_emp = state_values(emp_mdp, probs)  # sum_a' pi(a'|s') Q^pi(s', a')
    dP = emp_mdp.transition - mdp.transition
    trans_term = abs(float(np.sum(rho * (dP @ v_emp))))
    reward_term = float(np.sum(rho * np.abs(emp_mdp.reward - mdp.reward)))
    return (gamma * trans_term + reward_term) / (1.0 - gamma)


def bound_lemma1_gap(mdp: Mdp, emp_mdp: Mdp, pi, strict: bool = True) -> tuple[float, float]:
    """Return ``(|J(M~, pi) - J(M, pi)|, eta)``; raises when gap > eta + 1e-8."""
    if mdp.shape != emp_mdp.shape:
        raise ValueError("MDPs have different shapes")
    gap = abs(policy_return(emp_mdp, pi) - policy_return(mdp, pi))
    eta = lemma1_eta(mdp, emp_mdp, pi)
    if strict and gap > eta + BOUND_SLACK:
        raise BoundViolation(f"model gap {gap:.6g} exceeds eta {eta:.6g}",
                             {"gap": gap, "eta": eta, "pi": as_probs(pi).tolist()})
    return gap, eta


def lemma1_suite(num_seeds: int = 500, seed: int = 0, strict: bool = True) -> CheckReport:
    report = CheckReport("lemma1_sandwich")
    for k in range(num_seeds):
        rng = np.random.default_rng([seed, k])
        S, A = int(rng.integers(2, 7)), int(rng.integers(2, 4))
        mdp = random_mdp(S, A, seed=int(rng.integers(2**31)), gamma=float(rng.uniform(0.5, 0.95)))
        behavior = random_policy(S, A, rng)
        ds = generate_dataset(mdp, behavior, int(rng.integers(1, 20)), 20,
                              reward_noise=float(rng.uniform(0, 0.3)), seed=[seed, k, 1])
        emp = build_empirical_model(ds, S, A, 0.5 / (S * A))
        m_emp = empirical_mdp(emp, mdp)
        pi = random_policy(S, A, rng)
        gap, eta = bound_lemma1_gap(mdp, m_emp, pi, strict=False)
        report.record(gap, eta, BOUND_SLACK, {"seed": k, "gap": gap, "eta": eta})
    return report.raise_if_violated() if strict else report


# concentration-based gap terms

def default_constants(num_states: int, r_max: float, confidence: float = CONFIDENCE) -> dict:
    """L1 / Hoeffding constants C_P and C_R at the given failure probability."""
    log_term = math.log(2.0 / confidence)
    return {"C_P": math.sqrt(2.0 * num_states * log_term), "C_R": r_max * math.sqrt(log_term / 2.0)}


def _floored_counts(emp: EmpiricalModel):
    floor = emp.delta_floor * emp.dataset_size
    n_sa = np.maximum(emp.counts, floor)
    n_s = np.maximum(emp.state_counts, floor)
    return n_s, n_sa


def _eta_terms(emp, mdp, pi_rows, per_state_factor, constants):
    gamma, r_max = mdp.discount, mdp.r_max
    c = constants or default_constants(emp.num_states, r_max)
    _, n_sa = _floored_counts(emp)
    weights = emp.state_marginal
    model = np.sum(np.where(weights > 0, weights * np.sqrt(per_state_factor), 0.0))
    rho = occupancy(mdp, pi_rows)
    reward = np.sum(rho / np.sqrt(n_sa))
    return (2.0 * gamma * r_max * c["C_P"] / (1.0 - gamma) ** 2 * model
            + c["C_R"] / (1.0 - gamma) * reward)


def eta_tilde(emp: EmpiricalModel, pib, pi, mdp: Mdp, constants: dict | None = None) -> float:
    """Upper gap of the learned policy; uses D_CQL(s; pi, pib) |A| / |D|.

    ``mdp`` supplies gamma, r_max and the MDP in which rho^pi is computed.
    Counts of unseen pairs are floored at delta |D|.
    """
    factor = d_cql_per_state(pi, pib) * emp.num_actions / emp.dataset_size
    return float(_eta_terms(emp, mdp, as_probs(pi), factor, constants))


def eta_bar(emp: EmpiricalModel, pib, pibar, mdp: Mdp, constants: dict | None = None) -> float:
    """Lower gap of the global policy; uses D_CQL(s; pibar, pib) |A| / |D(s)|."""
    n_s, _ = _floored_counts(emp)
    factor = d_cql_per_state(pibar, pib) * emp.num_actions / n_s
    return float(_eta_terms(emp, mdp, as_probs(pibar), factor, constants))


def eta_b(emp: EmpiricalModel, pib, mdp: Mdp, constants: dict | None = None) -> float:
    """Lower gap of the behavior policy; uses |A| / |D(s)|."""
    n_s, _ = _floored_counts(emp)
    factor = emp.num_actions / n_s
    return float(_eta_terms(emp, mdp, as_probs(pib), factor, constants))


def delta_pi(emp: EmpiricalModel, pi, pib, beta: float, lambda2: float, gamma: float) -> float:
    """beta (g(rho~^pi) - g(rho~^b)) / (lambda2 (1 - gamma) D(pi, pib))."""
    dist = max_tv_distance(pi, pib)
    if dist <= 0:
        raise UndefinedDeltaPi("D(pi, pib) = 0")
    if lambda2 <= 0:
        raise UndefinedDeltaPi("lambda2 must be positive")
    w = emp.state_marginal
    diff = g_penalty(data_weighted_dist(w, pi), emp.d) - g_penalty(data_weighted_dist(w, pib), emp.d)
    return beta * diff / (lambda2 * (1.0 - gamma) * dist)


# TV lemmas for chains and occupancy measures

def markov_tv_lemma_check(p1, p2, mu0, horizon: int, strict: bool = True) -> CheckReport:
    """TV of the step-h marginals of two chains is at most h * eps for all h <= horizon."""
    p1, p2, mu0 = (np.asarray(x, dtype=float) for x in (p1, p2, mu0))
    row_tv = 0.5 * np.abs(p1 - p2).sum(axis=1)
    m1, m2 = mu0.copy(), mu0.copy()
    tv, eps_terms = [0.0], []
    for _ in range(horizon):
        eps_terms.append(float(m1 @ row_tv))
        m1, m2 = m1 @ p1, m2 @ p2
        tv.append(0.5 * float(np.abs(m1 - m2).sum()))
    eps = max(eps_terms, default=0.0)
    report = CheckReport("markov_tv_lemma", extra={"epsilon": eps, "marginal_tv": tv})
    for h, lhs in enumerate(tv):
        report.record(lhs, h * eps, 1e-12, {"h": h, "lhs": lhs, "rhs": h * eps})
    return report.raise_if_violated() if strict else report


def markov_tv_suite(pairs: int = 500, horizon: int = 50, seed: int = 0, strict: bool = True) -> CheckReport:
    report = CheckReport("markov_tv_lemma")
    for k in range(pairs):
        rng = np.random.default_rng([seed, k])
        S = int(rng.integers(2, 9))
        p1 = rng.dirichlet(np.ones(S), size=S)
        # mix of close and far pairs
        mix = rng.uniform(0, 1)
        p2 = (1 - mix) * p1 + mix * rng.dirichlet(np.ones(S), size=S)
        mu0 = rng.dirichlet(np.ones(S))
        sub = markov_tv_lemma_check(p1, p2, mu0, horizon, strict=False)
        sub.extra = {}
        report.trials += 1
        report.worst_ratio = max(report.worst_ratio, sub.worst_ratio)
        if sub.violations:
            report.violations += 1
            if len(report.examples_of_failure) < 5:
                report.examples_of_failure.append(_jsonable({"seed": k, "p1": p1, "p2": p2, "mu0": mu0}))
    return report.raise_if_violated() if strict else report


def occupancy_lemma_check(mdp: Mdp, pi, pibar, strict: bool = True) -> tuple[float, float]:
    """Return ``(TV(rho^pi, rho^pibar), max_s TV(pi, pibar) / (1 - gamma))``."""
    lhs = occupancy_tv(occupancy(mdp, pi), occupancy(mdp, pibar))
    rhs = max_tv_distance(pi, pibar) / (1.0 - mdp.discount)
    if strict and lhs > rhs + 1e-12:
        raise BoundViolation(f"occupancy TV {lhs:.6g} exceeds {rhs:.6g}", {"lhs": lhs, "rhs": rhs})
    return lhs, rhs


def occupancy_suite(trials: int = 1000, seed: int = 0, strict: bool = True) -> CheckReport:
    report = CheckReport("occupancy_lemma")
    for k in range(trials):
        rng = np.random.default_rng([seed, k])
        S, A = int(rng.integers(1, 8)), int(rng.integers(2, 5))
        mdp = random_mdp(S, A, seed=int(rng.integers(2**31)), gamma=float(rng.uniform(0.1, 0.99)))
        pi, pibar = random_policy(S, A, rng), random_policy(S, A, rng)
        lhs, rhs = occupancy_lemma_check(mdp, pi, pibar, strict=False)
        report.record(lhs, rhs, 1e-12, {"seed": k, "lhs": lhs, "rhs": rhs})
    return report.raise_if_violated() if strict else report


# brute-force improvement on tiny instances

@dataclass(frozen=True, eq=False)
class TinyInstance:
    mdp: Mdp
    emp: EmpiricalModel
    pib: TabularPolicy
    pibar: TabularPolicy
    lambda1: float
    lambda2: float
    beta: float

    def replace(self, **changes) -> "TinyInstance":
        fields = dict(mdp=self.mdp, emp=self.emp, pib=self.pib, pibar=self.pibar,
                      lambda1=self.lambda1, lambda2=self.lambda2, beta=self.beta)
        fields.update(changes)
        return TinyInstance(**fields)

    def to_dict(self) -> dict:
        return {"mdp": self.mdp.to_dict(), "counts": self.emp.counts.tolist(),
                "reward_hat": self.emp.reward_hat.tolist(),
                "transition_hat": self.emp.transition_hat.tolist(),
                "delta_floor": self.emp.delta_floor, "pib": self.pib.probs.tolist(),
                "pibar": self.pibar.probs.tolist(), "lambda1": self.lambda1,
                "lambda2": self.lambda2, "beta": self.beta}


@dataclass
class ImprovementVerdict:
    j_star: float
    j_bar: float
    j_b: float
    delta_pi: float
    lambda_window_ok: bool
    strict_improvement: bool
    pi_star: list = field(default_factory=list)
    grid_resolution: int = 0
    objective: float = 0.0
    cell_slack: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def simplex_grid(num_actions: int, resolution: int) -> np.ndarray:
    """All distributions whose entries are multiples of 1 / (resolution - 1)."""
    n = resolution - 1
    rows = [c for c in itertools.product(range(n + 1), repeat=num_actions - 1) if sum(c) <= n]
    pts = np.array([list(c) + [n - sum(c)] for c in rows], dtype=float)
    return pts / n


def _batched_returns(mdp: Mdp, probs: np.ndarray) -> np.ndarray:
    """mu0 . V for a batch of policy tables of shape (n, S, A)."""
    S = mdp.num_states
    P_pi = np.einsum("nsa,sat->nst", probs, mdp.transition)
    r_pi = np.einsum("nsa,sa->ns", probs, mdp.reward)
    lhs = np.eye(S)[None] - mdp.discount * P_pi
    V = np.linalg.solve(lhs, r_pi[..., None])[..., 0]
    return V @ mdp.initial_dist


def exact_objective(inst: TinyInstance, probs: np.ndarray) -> np.ndarray:
    """J(M~, pi) - beta g(rho~^pi) / (1 - gamma) - lambda1 D(pi, pib) - lambda2 D(pi, pibar).

    ``probs`` is a batch (n, S, A); D is the max-state total variation.
    """
    emp = inst.emp
    m_emp = empirical_mdp(emp, inst.mdp)
    gamma = inst.mdp.discount
    J = _batched_returns(m_emp, probs)
    rho = emp.state_marginal[None, :, None] * probs
    g = np.sum(rho * (rho - emp.d[None]) / emp.d[None], axis=(1, 2))
    d_b = np.max(0.5 * np.abs(probs - inst.pib.probs[None]).sum(axis=2), axis=1)
    d_bar = np.max(0.5 * np.abs(probs - inst.pibar.probs[None]).sum(axis=2), axis=1)
    return J - inst.beta * g / (1.0 - gamma) - inst.lambda1 * d_b - inst.lambda2 * d_bar


def candidate_rows(inst: TinyInstance, grid_resolution: int) -> np.ndarray:
    """Per-state candidates: the simplex grid plus the rows of pibar and pib.

    Adding the two comparators keeps them exactly feasible, so the grid
    optimum is never beaten by an off-grid comparator through rounding.
    """
    pts = simplex_grid(inst.mdp.num_actions, grid_resolution)
    return np.stack([np.vstack([pts, inst.pibar.probs[s], inst.pib.probs[s]])
                     for s in range(inst.mdp.num_states)])


def grid_argmax(inst: TinyInstance, grid_resolution: int = 201,
                budget: int = BRUTE_FORCE_BUDGET, chunk: int = 50_000):
    """Optimal candidate policy of the exact objective, its value and the candidate table."""
    if grid_resolution < 2:
        raise ValueError("grid_resolution must be >= 2")
    S, A = inst.mdp.shape
    per_state = math.comb(grid_resolution - 1 + A - 1, A - 1) + 2
    size = per_state ** S
    if size > budget:
        raise BudgetExceeded(f"{size} candidates exceed the budget of {budget}")
    cands = candidate_rows(inst, grid_resolution)
    states = np.arange(S)
    best_val, best_idx = -np.inf, 0
    for start in range(0, size, chunk):
        flat = np.arange(start, min(start + chunk, size))
        digits = np.stack(np.unravel_index(flat, (per_state,) * S), axis=1)
        vals = exact_objective(inst, cands[states, digits])
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val, best_idx = float(vals[k]), int(flat[k])
    digits = np.array(np.unravel_index(best_idx, (per_state,) * S))
    return TabularPolicy(cands[states, digits]), best_val, cands


def _cell_slack(inst, pi_star, cands, best_val, grid_resolution):
    # largest objective change when one state moves to a neighbouring candidate
    step = 1.0 / (grid_resolution - 1)
    neighbours = []
    for s in range(pi_star.shape[0]):
        close = np.abs(cands[s] - pi_star.probs[s]).max(axis=1)
        for j in np.flatnonzero((close > 0) & (close <= step + 1e-12)):
            cand = pi_star.probs.copy()
            cand[s] = cands[s, j]
            neighbours.append(cand)
    if not neighbours:
        return 0.0
    vals = exact_objective(inst, np.array(neighbours))
    return float(np.max(np.abs(vals - best_val)))


def brute_force_improvement(inst: TinyInstance, grid_resolution: int = 201,
                            budget: int = BRUTE_FORCE_BUDGET) -> ImprovementVerdict:
    pi_star, best_val, cands = grid_argmax(inst, grid_resolution, budget)
    mdp = inst.mdp
    j_star = policy_return(mdp, pi_star)
    j_bar = policy_return(mdp, inst.pibar)
    j_b = policy_return(mdp, inst.pib)
    try:
        dpi = delta_pi(inst.emp, pi_star, inst.pib, inst.beta, inst.lambda2, mdp.discount)
    except UndefinedDeltaPi:
        dpi = float("nan")
    window = bool(np.isfinite(dpi) and (1.0 - dpi) * inst.lambda2 < inst.lambda1 < inst.lambda2)
    return ImprovementVerdict(
        j_star=j_star, j_bar=j_bar, j_b=j_b, delta_pi=dpi, lambda_window_ok=window,
        strict_improvement=bool(j_star > max(j_bar, j_b)), pi_star=pi_star.probs.tolist(),
        grid_resolution=grid_resolution, objective=best_val,
        cell_slack=_cell_slack(inst, pi_star, cands, best_val, grid_resolution))


def make_tiny_instance(seed: int, num_states: int = 2, num_actions: int = 2, gamma: float = 0.9,
                       min_count: int = 20, beta: float = 1.0, lambda2: float = 10.0,
                       lambda1: float = 5.0, delta_floor: float = 1e-3) -> TinyInstance:
    """Random MDP with a full-support behavior policy and data covering every pair >= min_count times."""
    rng = np.random.default_rng([seed, 17])
    mdp = random_mdp(num_states, num_actions, seed=int(rng.integers(2**31)), gamma=gamma)
    behavior = TabularPolicy(0.5 * random_policy(num_states, num_actions, rng).probs + 0.5 / num_actions)
    pibar = random_policy(num_states, num_actions, rng)
    trajectories = 4
    while True:
        ds = generate_dataset(mdp, behavior, trajectories, 50, seed=[seed, 17, trajectories])
        emp = build_empirical_model(ds, num_states, num_actions, delta_floor)
        if emp.counts.min() >= min_count:
            break
        trajectories *= 2
    pib = TabularPolicy(np.where(emp.state_counts[:, None] > 0,
                                 emp.counts / np.maximum(emp.state_counts[:, None], 1), 1.0 / num_actions))
    return TinyInstance(mdp, emp, pib, pibar, lambda1, lambda2, beta)


def solve_lambda_window(inst: TinyInstance, grid_resolution: int = 201, max_iters: int = 10):
    """Pick lambda1 inside ((1 - delta_pi) lambda2, lambda2) self-consistently.

    delta_pi depends on the optimum, which depends on lambda1; lambda1 is
    placed at the window midpoint and the pair is re-solved until the window
    computed from the resulting optimum contains it. Returns the final
    instance and verdict; ``verdict.lambda_window_ok`` tells whether the
    precondition was met.
    """
    lam2 = inst.lambda2
    cur = inst.replace(lambda1=0.5 * lam2)
    verdict = brute_force_improvement(cur, grid_resolution)
    for _ in range(max_iters):
        if verdict.lambda_window_ok:
            break
        if not np.isfinite(verdict.delta_pi) or verdict.delta_pi <= 0:
            break
        target = lam2 * (1.0 - 0.5 * min(verdict.delta_pi, 1.0))
        if abs(target - cur.lambda1) <= 1e-12 * lam2:
            break
        cur = cur.replace(lambda1=target)
        verdict = brute_force_improvement(cur, grid_resolution)
    return cur, verdict


def theorem1_suite(num_instances: int = 50, lambda2_multipliers=(1.0, 5.0, 20.0),
                   grid_resolution: int = 201, seed: int = 0, beta: float = 1.0,
                   gamma: float = 0.9, min_count: int = 20) -> dict:
    """Strict-improvement rate of the grid-optimal policy in the precondition regime.

    Instances whose self-consistent lambda window is empty (delta_pi <= 0 or
    no fixed point) are excluded from the rate, not counted as failures.
    """
    per_lambda = {}
    failures, eligible, successes, dpi_nonneg, total = [], 0, 0, 0, 0
    for m in lambda2_multipliers:
        row = {"eligible": 0, "strict": 0}
        for k in range(num_instances):
            base = make_tiny_instance(seed * 100003 + k, gamma=gamma, beta=beta, min_count=min_count)
            lam2 = m * base.mdp.r_max / (1.0 - base.mdp.discount)
            inst, verdict = solve_lambda_window(base.replace(lambda2=lam2), grid_resolution)
            total += 1
            dpi_nonneg += bool(np.isfinite(verdict.delta_pi) and verdict.delta_pi >= 0)
            if not verdict.lambda_window_ok:
                continue
            row["eligible"] += 1
            eligible += 1
            if verdict.strict_improvement:
                row["strict"] += 1
                successes += 1
            else:
                failures.append({"instance": k, "lambda2_multiplier": m,
                                 "verdict": verdict.to_dict(), "dump": inst.to_dict()})
        row["rate"] = row["strict"] / row["eligible"] if row["eligible"] else None
        per_lambda[str(m)] = row
    return {
        "name": "theorem1_strict_improvement",
        "trials": total,
        "eligible": eligible,
        "strict": successes,
        "rate": successes / eligible if eligible else None,
        "delta_pi_nonnegative_rate": dpi_nonneg / total if total else None,
        "per_lambda2": per_lambda,
        "examples_of_failure": failures,
    }
