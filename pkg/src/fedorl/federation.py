"""Synchronous federated rounds: broadcast, local updates, unweighted policy averaging."""
from __future__ import annotations

import csv
import json
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import (DEFAULT_DELTA, EmpiricalModel, TransitionDataset, behavioral_policy,
                   build_empirical_model)
from .errors import AgentFailure, NotConverged, ShapeMismatch
from .local import LocalConfig, conservative_evaluate, drpo_local_round, improve_policy
from .mdp import Mdp, TabularPolicy, max_tv_distance, policy_return

STRATEGIES = ("drpo", "fed_cql", "fed_bc", "individual_cql")
FED_CQL_ANCHOR = 1e-3

CSV_COLUMNS = ("round", "global_return", "mean_local_return", "frac_improved_global",
               "frac_improved_behavior", "mean_tv_to_global", "wall_time_ms")


@dataclass(frozen=True)
class FederationConfig:
    num_agents: int = 10
    num_rounds: int = 30
    strategy: str = "drpo"
    local: LocalConfig = field(default_factory=LocalConfig)
    eval_every: int = 1
    seed: int = 0
    fed_cql_anchor: float = FED_CQL_ANCHOR
    delta_floor: float = DEFAULT_DELTA
    record_wall_time: bool = False

    def __post_init__(self):
        if self.num_agents < 1:
            raise ValueError("num_agents must be >= 1")
        if self.num_rounds < 0:
            raise ValueError("num_rounds must be >= 0")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if self.fed_cql_anchor <= 0:
            raise ValueError("fed_cql_anchor must be positive")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["local"] = self.local.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "FederationConfig":
        data = dict(data)
        data["local"] = LocalConfig(**data.get("local", {}))
        return cls(**data)


@dataclass
class RoundReport:
    """True-MDP metrics of one round.

    For ``individual_cql`` there is no global policy: ``global_return`` is the
    mean of the agents' returns. The TV column measures each local policy
    against the policy the agent started the round from.
    """

    round: int
    global_return: float
    per_agent_local_return: list
    improvement_over_global: list
    improvement_over_behavior: list
    mean_tv_to_global: float
    wall_time_ms: int = 0
    not_converged: list = field(default_factory=list)

    @property
    def mean_local_return(self) -> float:
        return float(np.mean(self.per_agent_local_return))

    def csv_row(self) -> list:
        n = len(self.per_agent_local_return)
        return [self.round, repr(self.global_return), repr(self.mean_local_return),
                repr(sum(self.improvement_over_global) / n),
                repr(sum(self.improvement_over_behavior) / n),
                repr(self.mean_tv_to_global), self.wall_time_ms]

    def to_dict(self) -> dict:
        return asdict(self)


def aggregate(policies) -> TabularPolicy:
    """Unweighted mean of the probability tables."""
    policies = list(policies)
    if not policies:
        raise ValueError("cannot aggregate an empty list of policies")
    shape = policies[0].shape
    if any(p.shape != shape for p in policies):
        raise ShapeMismatch("policies have different shapes")
    return TabularPolicy(np.mean([p.probs for p in policies], axis=0))


def local_strategy_fed_bc(ds: TransitionDataset, pibar: TabularPolicy, cfg=None) -> TabularPolicy:
    """Behavior cloning: the empirical action frequencies of the agent's data."""
    S, A = pibar.shape
    return behavioral_policy(ds, S, A)


def local_strategy_fed_cql(emp: EmpiricalModel, template: Mdp, pibar: TabularPolicy,
                           cfg: LocalConfig, anchor: float = FED_CQL_ANCHOR,
                           pib: TabularPolicy | None = None) -> TabularPolicy:
    """Conservative evaluation plus a near-greedy improvement.

    The improvement keeps only a small ``anchor`` weight toward the behavior
    policy so that one-hot collapse does not make averaging meaningless.
    """
    if pib is None:
        pib = TabularPolicy(_behavior_from_counts(emp))
    improve_cfg = cfg.replace(lambda1=anchor, lambda2=0.0)
    pi, q = pibar, None
    for _ in range(cfg.improve_alternations):
        q = conservative_evaluate(emp, template, pi, cfg, q_init=q if cfg.warm_start else None).q
        pi = improve_policy(emp, q, pib, pibar, improve_cfg)
    return pi


def _behavior_from_counts(emp: EmpiricalModel) -> np.ndarray:
    n_s = emp.counts.sum(axis=1, keepdims=True)
    return np.where(n_s > 0, emp.counts / np.maximum(n_s, 1), 1.0 / emp.num_actions)


def _local_update(strategy, ds, emp, pib, template, start, cfg: FederationConfig):
    if strategy == "drpo":
        return drpo_local_round(emp, template, start, pib, cfg.local)
    if strategy == "fed_bc":
        return local_strategy_fed_bc(ds, start, cfg.local)
    return local_strategy_fed_cql(emp, template, start, cfg.local, cfg.fed_cql_anchor, pib)


def federation_rounds(mdp: Mdp, datasets, cfg: FederationConfig):
    """Yield ``(report_or_None, global_policy, local_policies)`` after every round.

    Learners only see their datasets (and the discount via ``mdp``); the true
    MDP is used solely to score policies for the report. Reports are produced
    every ``eval_every`` rounds and on the last round.
    """
    datasets = list(datasets)
    if len(datasets) != cfg.num_agents:
        raise ValueError(f"expected {cfg.num_agents} datasets, got {len(datasets)}")
    S, A = mdp.shape
    emps, pibs = [], []
    for ds in datasets:
        try:
            emps.append(build_empirical_model(ds, S, A, cfg.delta_floor))
            pibs.append(behavioral_policy(ds, S, A))
        except Exception as exc:
            raise AgentFailure(ds.agent_id, exc) from exc
    behavior_returns = [policy_return(mdp, pib) for pib in pibs]

    individual = cfg.strategy == "individual_cql"
    global_pi = TabularPolicy.uniform(S, A)
    starts = [global_pi] * cfg.num_agents

    for t in range(1, cfg.num_rounds + 1):
        tic = time.perf_counter()
        local, flags = [], []
        for i, (ds, emp, pib) in enumerate(zip(datasets, emps, pibs)):
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", NotConverged)
                try:
                    pi = _local_update(cfg.strategy, ds, emp, pib, mdp, starts[i], cfg)
                except Exception as exc:
                    raise AgentFailure(ds.agent_id, exc) from exc
            flags.append(any(issubclass(w.category, NotConverged) for w in caught))
            local.append(pi)
        wall = int(round((time.perf_counter() - tic) * 1000)) if cfg.record_wall_time else 0

        report = None
        if t % cfg.eval_every == 0 or t == cfg.num_rounds:
            local_returns = [policy_return(mdp, pi) for pi in local]
            start_returns = [policy_return(mdp, s) for s in starts]
            if individual:
                g_return = float(np.mean(local_returns))
            else:
                g_return = policy_return(mdp, aggregate(local))
            report = RoundReport(
                round=t,
                global_return=g_return,
                per_agent_local_return=local_returns,
                improvement_over_global=[j > j0 for j, j0 in zip(local_returns, start_returns)],
                improvement_over_behavior=[j > jb for j, jb in zip(local_returns, behavior_returns)],
                mean_tv_to_global=float(np.mean([max_tv_distance(p, s) for p, s in zip(local, starts)])),
                wall_time_ms=wall,
                not_converged=flags,
            )
        if individual:
            starts = local
            global_pi = aggregate(local)
        else:
            global_pi = aggregate(local)
            starts = [global_pi] * cfg.num_agents
        yield report, global_pi, local


def run_federation(mdp: Mdp, datasets, cfg: FederationConfig) -> list[RoundReport]:
    return [r for r, _, _ in federation_rounds(mdp, datasets, cfg) if r is not None]


def rounds_to_fraction(reports, fraction: float = 0.95):
    """First round whose global return reaches ``fraction`` of the final one."""
    if not reports:
        return None
    final = reports[-1].global_return
    target = final - (1.0 - fraction) * abs(final)
    for r in reports:
        if r.global_return >= target:
            return r.round
    return reports[-1].round


def write_reports_csv(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in reports:
            writer.writerow(r.csv_row())


def write_reports_jsonl(reports, path) -> None:
    with open(path, "w") as fh:
        for r in reports:
            fh.write(json.dumps(r.to_dict()) + "\n")
