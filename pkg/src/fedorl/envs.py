"""Environment builders: a slippery gridworld and seeded random (Garnet-style) MDPs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdp import Mdp, TabularPolicy

# (drow, dcol) for N, S, E, W
MOVES = ((-1, 0), (1, 0), (0, 1), (0, -1))
PERPENDICULAR = {0: (2, 3), 1: (2, 3), 2: (0, 1), 3: (0, 1)}


@dataclass(frozen=True)
class Gridworld:
    """Grid with 4 compass actions, slip noise and an absorbing rewarding goal.

    With probability ``slip_prob`` the agent moves in one of the two
    perpendicular directions (chosen uniformly). Moves into a wall leave the
    agent in place. Every action taken in the goal cell pays ``goal_reward``
    and keeps the agent there; all other steps pay 0.
    """

    width: int
    height: int
    slip_prob: float = 0.1
    goal_reward: float = 1.0
    gamma: float = 0.99
    start: tuple[int, int] = (0, 0)
    goal: tuple[int, int] | None = None

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("gridworld dimensions must be positive")
        if not 0.0 <= self.slip_prob < 1.0:
            raise ValueError("slip_prob must lie in [0, 1)")
        if self.goal_reward <= 0:
            raise ValueError("goal_reward must be positive")
        for r, c in [self.start, self.goal_cell]:
            if not (0 <= r < self.height and 0 <= c < self.width):
                raise ValueError(f"cell {(r, c)} outside the grid")

    @property
    def goal_cell(self) -> tuple[int, int]:
        return self.goal if self.goal is not None else (self.height - 1, self.width - 1)

    @property
    def num_states(self) -> int:
        return self.width * self.height

    def state(self, row: int, col: int) -> int:
        return row * self.width + col

    def _target(self, row, col, move):
        dr, dc = MOVES[move]
        r, c = row + dr, col + dc
        if 0 <= r < self.height and 0 <= c < self.width:
            return self.state(r, c)
        return self.state(row, col)

    def to_mdp(self) -> Mdp:
        S, A = self.num_states, 4
        P = np.zeros((S, A, S))
        R = np.zeros((S, A))
        goal = self.state(*self.goal_cell)
        for row in range(self.height):
            for col in range(self.width):
                s = self.state(row, col)
                if s == goal:
                    P[s, :, s] = 1.0
                    R[s, :] = self.goal_reward
                    continue
                for a in range(A):
                    P[s, a, self._target(row, col, a)] += 1.0 - self.slip_prob
                    for side in PERPENDICULAR[a]:
                        P[s, a, self._target(row, col, side)] += self.slip_prob / 2
        mu0 = np.zeros(S)
        mu0[self.state(*self.start)] = 1.0
        return Mdp(P, R, mu0, self.gamma, r_max=self.goal_reward)


def random_mdp(num_states: int, num_actions: int, branching: int | None = None,
               seed: int = 0, gamma: float = 0.9, r_max: float = 1.0) -> Mdp:
    """Random MDP: each (s, a) reaches ``branching`` uniformly chosen successors
    with Dirichlet(1) weights; rewards are uniform on [0, r_max]; mu_0 is Dirichlet(1).
    """
    if num_states < 1 or num_actions < 1:
        raise ValueError("invalid dimensions")
    branching = num_states if branching is None else branching
    if not 1 <= branching <= num_states:
        raise ValueError("branching must lie in [1, num_states]")
    rng = np.random.default_rng(seed)
    P = np.zeros((num_states, num_actions, num_states))
    for s in range(num_states):
        for a in range(num_actions):
            succ = rng.choice(num_states, size=branching, replace=False)
            P[s, a, succ] = rng.dirichlet(np.ones(branching))
    P /= P.sum(axis=2, keepdims=True)
    R = rng.uniform(0.0, r_max, size=(num_states, num_actions))
    mu0 = rng.dirichlet(np.ones(num_states))
    mu0 /= mu0.sum()
    return Mdp(P, R, mu0, gamma, r_max=r_max)


def random_policy(num_states: int, num_actions: int, rng, concentration: float = 1.0):
    """Dirichlet policy table; used by tests and randomized bound checks."""
    probs = rng.dirichlet(np.full(num_actions, concentration), size=num_states)
    return TabularPolicy(probs / probs.sum(axis=1, keepdims=True))
