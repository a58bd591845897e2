"""Offline datasets: generation, behavioral policies and empirical models."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyDataset, ShapeMismatch
from .mdp import Mdp, TabularPolicy, value_iteration

DEFAULT_DELTA = 1e-3
TIER_EPSILON = {"expert": 0.05, "medium": 0.3}
TIERS = ("expert", "medium", "random")


def _ro(arr):
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TransitionDataset:
    """Ordered (s, a, r, s') records held column-wise."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    agent_id: str = "0"
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        cols = {
            "states": np.array(self.states, dtype=np.int64).reshape(-1),
            "actions": np.array(self.actions, dtype=np.int64).reshape(-1),
            "rewards": np.array(self.rewards, dtype=float).reshape(-1),
            "next_states": np.array(self.next_states, dtype=np.int64).reshape(-1),
        }
        if len({c.size for c in cols.values()}) != 1:
            raise ShapeMismatch("dataset columns have different lengths")
        for name, col in cols.items():
            object.__setattr__(self, name, _ro(col))
        object.__setattr__(self, "agent_id", str(self.agent_id))

    def __len__(self):
        return self.states.size

    @property
    def records(self) -> list[tuple[int, int, float, int]]:
        return list(zip(self.states.tolist(), self.actions.tolist(),
                        self.rewards.tolist(), self.next_states.tolist()))

    @classmethod
    def from_records(cls, records, agent_id="0", provenance=None) -> "TransitionDataset":
        records = list(records)
        if not records:
            return cls([], [], [], [], agent_id, provenance or {})
        s, a, r, sp = zip(*records)
        return cls(s, a, r, sp, agent_id, provenance or {})

    def check_bounds(self, num_states: int, num_actions: int):
        for col, hi in [(self.states, num_states), (self.actions, num_actions),
                        (self.next_states, num_states)]:
            if col.size and (col.min() < 0 or col.max() >= hi):
                raise ValueError("dataset index out of range")


def _sample_rows(cdf_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    idx = (u[:, None] >= cdf_rows).sum(axis=1)
    return np.minimum(idx, cdf_rows.shape[1] - 1)


def generate_dataset(mdp: Mdp, behavior: TabularPolicy, num_trajectories: int,
                     horizon: int, reward_noise: float = 0.0, seed=0,
                     agent_id="0", provenance=None) -> TransitionDataset:
    """Roll out ``behavior`` from mu_0 for a fixed horizon.

    Recorded rewards are R(s, a) plus uniform noise of half-width
    ``reward_noise``, clamped at 0. Records are ordered trajectory by
    trajectory. ``seed`` may be anything ``np.random.default_rng`` accepts.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if reward_noise < 0:
        raise ValueError("reward_noise must be >= 0")
    if behavior.shape != mdp.shape:
        raise ShapeMismatch("behavior policy does not match the MDP")
    prov = {"seed": seed if isinstance(seed, int) else list(seed),
            "num_trajectories": num_trajectories, "horizon": horizon,
            "reward_noise": reward_noise}
    prov.update(provenance or {})
    n = int(num_trajectories)
    if n == 0:
        return TransitionDataset([], [], [], [], agent_id, prov)

    rng = np.random.default_rng(seed)
    mu_cdf = np.cumsum(mdp.initial_dist)[None, :]
    pi_cdf = np.cumsum(behavior.probs, axis=1)
    P_cdf = np.cumsum(mdp.transition, axis=2)

    S = np.empty((horizon, n), dtype=np.int64)
    A = np.empty_like(S)
    SP = np.empty_like(S)
    s = _sample_rows(np.repeat(mu_cdf, n, axis=0), rng.random(n))
    for h in range(horizon):
        a = _sample_rows(pi_cdf[s], rng.random(n))
        sp = _sample_rows(P_cdf[s, a], rng.random(n))
        S[h], A[h], SP[h] = s, a, sp
        s = sp
    R = mdp.reward[S, A]
    if reward_noise > 0:
        R = np.maximum(R + rng.uniform(-reward_noise, reward_noise, size=R.shape), 0.0)
    # trajectory-major order
    return TransitionDataset(S.T.ravel(), A.T.ravel(), R.T.ravel(), SP.T.ravel(),
                             agent_id, prov)


def behavioral_policy(ds: TransitionDataset, num_states: int, num_actions: int) -> TabularPolicy:
    """Empirical action frequencies per visited state; uniform elsewhere."""
    ds.check_bounds(num_states, num_actions)
    counts = np.zeros((num_states, num_actions))
    np.add.at(counts, (ds.states, ds.actions), 1.0)
    per_state = counts.sum(axis=1, keepdims=True)
    probs = np.where(per_state > 0, counts / np.maximum(per_state, 1.0), 1.0 / num_actions)
    return TabularPolicy(probs)


@dataclass(frozen=True, eq=False)
class EmpiricalModel:
    """Count-based model of one dataset.

    ``d`` is the state-action frequency floored at ``delta_floor``; the floor
    only enters the conservatism penalty, never ``transition_hat``.
    """

    counts: np.ndarray
    transition_hat: np.ndarray
    reward_hat: np.ndarray
    d: np.ndarray
    delta_floor: float
    dataset_size: int

    @property
    def num_states(self) -> int:
        return self.counts.shape[0]

    @property
    def num_actions(self) -> int:
        return self.counts.shape[1]

    @property
    def state_counts(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def state_marginal(self) -> np.ndarray:
        """Un-floored empirical state distribution |D(s)| / |D|."""
        return self.state_counts / self.dataset_size

    @property
    def seen(self) -> np.ndarray:
        return self.counts > 0


def build_empirical_model(ds: TransitionDataset, num_states: int, num_actions: int,
                          delta_floor: float = DEFAULT_DELTA) -> EmpiricalModel:
    if not 0.0 < delta_floor < 1.0 / (num_states * num_actions):
        raise ValueError("delta_floor must lie in (0, 1/(|S||A|))")
    if len(ds) == 0:
        raise EmptyDataset(f"agent {ds.agent_id} has no records")
    ds.check_bounds(num_states, num_actions)

    # canonical record order makes the floating-point sums order-independent
    order = np.lexsort((ds.next_states, ds.rewards, ds.actions, ds.states))
    s, a = ds.states[order], ds.actions[order]
    r, sp = ds.rewards[order], ds.next_states[order]

    counts = np.zeros((num_states, num_actions), dtype=np.int64)
    np.add.at(counts, (s, a), 1)
    next_counts = np.zeros((num_states, num_actions, num_states))
    np.add.at(next_counts, (s, a, sp), 1.0)
    reward_sum = np.zeros((num_states, num_actions))
    np.add.at(reward_sum, (s, a), r)

    seen = counts > 0
    n_sa = np.maximum(counts, 1)[:, :, None]
    P_hat = np.where(seen[:, :, None], next_counts / n_sa, 1.0 / num_states)
    R_hat = np.where(seen, reward_sum / n_sa[:, :, 0], 0.0)
    size = len(ds)
    d = np.maximum(counts / size, delta_floor)
    return EmpiricalModel(_ro(counts), _ro(P_hat), _ro(R_hat), _ro(d), float(delta_floor), size)


def empirical_mdp(model: EmpiricalModel, template: Mdp) -> Mdp:
    """The MDP with estimated dynamics and the template's mu_0 and discount.

    ``r_max`` is widened when noisy rewards push the estimates above the
    template's bound.
    """
    if template.shape != (model.num_states, model.num_actions):
        raise ShapeMismatch("model and template disagree on |S| x |A|")
    r_max = max(template.r_max, float(model.reward_hat.max()))
    return Mdp(model.transition_hat, model.reward_hat, template.initial_dist,
               template.discount, r_max=r_max)


def epsilon_greedy(greedy: TabularPolicy, epsilon: float) -> TabularPolicy:
    A = greedy.shape[1]
    return TabularPolicy((1.0 - epsilon) * greedy.probs + epsilon / A)


def make_behavior_tier(mdp: Mdp, tier: str, epsilon_overrides: dict | None = None) -> TabularPolicy:
    """Behavior policy of a data-quality tier.

    expert and medium are epsilon-greedy around the value-iteration optimum
    (epsilon 0.05 and 0.3 unless overridden); random is uniform.
    """
    if tier not in TIERS:
        raise ValueError(f"unknown tier {tier!r}; expected one of {TIERS}")
    if tier == "random":
        return TabularPolicy.uniform(mdp.num_states, mdp.num_actions)
    eps = dict(TIER_EPSILON, **(epsilon_overrides or {}))[tier]
    _, greedy = value_iteration(mdp)
    return epsilon_greedy(greedy, eps)


def save_dataset(ds: TransitionDataset, path) -> None:
    with open(path, "w") as fh:
        for s, a, r, sp in ds.records:
            fh.write(json.dumps({"s": s, "a": a, "r": r, "sp": sp}) + "\n")


def load_dataset(path, agent_id="0", provenance=None) -> TransitionDataset:
    records = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                records.append((rec["s"], rec["a"], rec["r"], rec["sp"]))
    return TransitionDataset.from_records(records, agent_id, provenance)


def write_manifest(entries: list[dict], path) -> None:
    """``entries``: dicts with agent_id, file, tier, seed, num_trajectories, horizon."""
    Path(path).write_text(json.dumps({"agents": entries}, indent=2) + "\n")


def read_manifest(path) -> list[dict]:
    return json.loads(Path(path).read_text())["agents"]


def load_manifest_datasets(path) -> list[TransitionDataset]:
    root = Path(path).parent
    out = []
    for entry in read_manifest(path):
        prov = {k: v for k, v in entry.items() if k not in ("agent_id", "file")}
        out.append(load_dataset(root / entry["file"], entry["agent_id"], prov))
    return out
