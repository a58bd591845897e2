"""Exact finite-MDP machinery.

Everything here is solved with dense linear algebra so that the results can be
used as ground truth by the learners, the federation harness and the bound
checks. Arrays are stored read-only; the containers are immutable.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ShapeMismatch, UnsupportedSupport

SOLVE_TOL = 1e-10
PROB_TOL = 1e-12
OCCUPANCY_TOL = 1e-10

MAX_STATES = 64
MAX_ACTIONS = 8


def _frozen(x, dtype=float):
    arr = np.array(x, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Mdp:
    """Finite discounted MDP with deterministic per-(s, a) rewards.

    ``transition[s, a, s']`` is P(s' | s, a), ``reward[s, a]`` lies in
    ``[0, r_max]`` and ``initial_dist`` is mu_0.
    """

    transition: np.ndarray
    reward: np.ndarray
    initial_dist: np.ndarray
    discount: float
    r_max: float = 1.0

    def __post_init__(self):
        P = _frozen(self.transition)
        R = _frozen(self.reward)
        mu = _frozen(self.initial_dist)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "reward", R)
        object.__setattr__(self, "initial_dist", mu)
        object.__setattr__(self, "discount", float(self.discount))
        object.__setattr__(self, "r_max", float(self.r_max))

        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise ShapeMismatch(f"transition must be (S, A, S), got {P.shape}")
        S, A, _ = P.shape
        if S < 1 or A < 1:
            raise ValueError("need at least one state and one action")
        if R.shape != (S, A):
            raise ShapeMismatch(f"reward must be {(S, A)}, got {R.shape}")
        if mu.shape != (S,):
            raise ShapeMismatch(f"initial_dist must be {(S,)}, got {mu.shape}")
        if np.any(P < 0) or np.max(np.abs(P.sum(axis=2) - 1.0)) > PROB_TOL:
            raise ValueError("transition rows must be probability vectors")
        if not self.r_max > 0:
            raise ValueError("r_max must be positive")
        if np.any(R < 0) or np.any(R > self.r_max):
            raise ValueError("rewards must lie in [0, r_max]")
        if np.any(mu < 0) or abs(mu.sum() - 1.0) > PROB_TOL:
            raise ValueError("initial_dist must be a probability vector")
        if not 0.0 < self.discount < 1.0:
            raise ValueError("discount must lie in (0, 1)")

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.reward.shape

    def to_dict(self) -> dict:
        return {
            "num_states": self.num_states,
            "num_actions": self.num_actions,
            "gamma": self.discount,
            "r_max": self.r_max,
            "mu0": self.initial_dist.tolist(),
            "reward": self.reward.tolist(),
            "transition": self.transition.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Mdp":
        mdp = cls(
            transition=data["transition"],
            reward=data["reward"],
            initial_dist=data["mu0"],
            discount=data["gamma"],
            r_max=data.get("r_max", 1.0),
        )
        if mdp.shape != (data["num_states"], data["num_actions"]):
            raise ShapeMismatch("num_states/num_actions disagree with the tables")
        return mdp


@dataclass(frozen=True, eq=False)
class TabularPolicy:
    """Per-state action distribution ``probs[s, a] = pi(a | s)``."""

    probs: np.ndarray

    def __post_init__(self):
        p = _frozen(self.probs)
        object.__setattr__(self, "probs", p)
        if p.ndim != 2:
            raise ShapeMismatch(f"policy table must be 2-D, got {p.shape}")
        if np.any(p < 0) or np.max(np.abs(p.sum(axis=1) - 1.0)) > PROB_TOL:
            raise ValueError("policy rows must be probability vectors")

    @property
    def shape(self) -> tuple[int, int]:
        return self.probs.shape

    @classmethod
    def uniform(cls, num_states: int, num_actions: int) -> "TabularPolicy":
        return cls(np.full((num_states, num_actions), 1.0 / num_actions))

    @classmethod
    def deterministic(cls, actions, num_actions: int) -> "TabularPolicy":
        actions = np.asarray(actions, dtype=int)
        probs = np.zeros((actions.size, num_actions))
        probs[np.arange(actions.size), actions] = 1.0
        return cls(probs)

    def to_dict(self) -> dict:
        return {"probs": self.probs.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "TabularPolicy":
        return cls(data["probs"])


def as_probs(pi) -> np.ndarray:
    """Policy table of a ``TabularPolicy`` or of a raw array."""
    if isinstance(pi, TabularPolicy):
        return pi.probs
    return np.asarray(pi, dtype=float)


def _check_policy_shape(mdp: Mdp, probs: np.ndarray):
    if probs.shape != mdp.shape:
        raise ShapeMismatch(f"policy shape {probs.shape} != MDP shape {mdp.shape}")


def state_transition(mdp: Mdp, pi) -> np.ndarray:
    """P_pi[s, s'] = sum_a pi(a|s) P(s'|s, a)."""
    probs = as_probs(pi)
    _check_policy_shape(mdp, probs)
    return np.einsum("sa,sat->st", probs, mdp.transition)


def state_values(mdp: Mdp, pi) -> np.ndarray:
    """V^pi from the linear system (I - gamma P_pi) V = R_pi."""
    probs = as_probs(pi)
    P_pi = state_transition(mdp, probs)
    r_pi = np.einsum("sa,sa->s", probs, mdp.reward)
    lhs = np.eye(mdp.num_states) - mdp.discount * P_pi
    return np.linalg.solve(lhs, r_pi)


def policy_return(mdp: Mdp, pi) -> float:
    """Unnormalized discounted return J(M, pi) = mu_0 . V^pi."""
    return float(mdp.initial_dist @ state_values(mdp, pi))


def q_function(mdp: Mdp, pi) -> np.ndarray:
    V = state_values(mdp, pi)
    return mdp.reward + mdp.discount * mdp.transition @ V


def state_occupancy(mdp: Mdp, pi) -> np.ndarray:
    """Normalized discounted state visitation, solving the flow equations."""
    P_pi = state_transition(mdp, pi)
    lhs = np.eye(mdp.num_states) - mdp.discount * P_pi.T
    return np.linalg.solve(lhs, (1.0 - mdp.discount) * mdp.initial_dist)


def occupancy(mdp: Mdp, pi) -> np.ndarray:
    """rho^pi(s, a) = (1 - gamma) sum_h gamma^h Pr(s_h = s) pi(a|s)."""
    return state_occupancy(mdp, pi)[:, None] * as_probs(pi)


def value_iteration(mdp: Mdp, tol: float = SOLVE_TOL, max_iters: int = 1_000_000):
    """Optimal state values and a greedy optimal policy.

    Ties between actions go to the lowest index.
    """
    V = np.zeros(mdp.num_states)
    gamma = mdp.discount
    for _ in range(max_iters):
        Q = mdp.reward + gamma * mdp.transition @ V
        V_new = Q.max(axis=1)
        if np.max(np.abs(V_new - V)) * gamma / (1.0 - gamma) <= tol:
            V = V_new
            break
        V = V_new
    Q = mdp.reward + gamma * mdp.transition @ V
    greedy = TabularPolicy.deterministic(np.argmax(Q, axis=1), mdp.num_actions)
    return V, greedy


def _same_shape(x: np.ndarray, y: np.ndarray):
    if x.shape != y.shape:
        raise ShapeMismatch(f"shapes differ: {x.shape} vs {y.shape}")


def max_tv_distance(p1, p2) -> float:
    """max_s of the total variation between the two action distributions."""
    a, b = as_probs(p1), as_probs(p2)
    _same_shape(a, b)
    return float(np.max(0.5 * np.abs(a - b).sum(axis=1)))


def occupancy_tv(rho1, rho2) -> float:
    a, b = np.asarray(rho1, dtype=float), np.asarray(rho2, dtype=float)
    _same_shape(a, b)
    return float(0.5 * np.abs(a - b).sum())


def d_cql_per_state(pi1, pi2) -> np.ndarray:
    """1 + chi^2(pi1 || pi2) for each state."""
    a, b = as_probs(pi1), as_probs(pi2)
    _same_shape(a, b)
    bad = (a > 0) & (b <= 0)
    if np.any(bad):
        s, act = np.argwhere(bad)[0]
        raise UnsupportedSupport(f"pi2 has no mass at state {s}, action {act}")
    safe_b = np.where(a > 0, b, 1.0)
    return 1.0 + np.sum(np.where(a > 0, a * (a / safe_b - 1.0), 0.0), axis=1)


def d_cql(s_weights, pi1, pi2) -> float:
    w = np.asarray(s_weights, dtype=float)
    per_state = d_cql_per_state(pi1, pi2)
    if w.shape != per_state.shape:
        raise ShapeMismatch("state weights do not match the policy tables")
    return float(w @ per_state)


def save_mdp(mdp: Mdp, path) -> None:
    Path(path).write_text(json.dumps(mdp.to_dict()) + "\n")


def load_mdp(path) -> Mdp:
    return Mdp.from_dict(json.loads(Path(path).read_text()))


def save_policy(pi: TabularPolicy, path) -> None:
    Path(path).write_text(json.dumps(pi.to_dict()) + "\n")


def load_policy(path) -> TabularPolicy:
    return TabularPolicy.from_dict(json.loads(Path(path).read_text()))
