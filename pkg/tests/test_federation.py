import csv
import itertools

import numpy as np
import pytest

from fedorl.data import TransitionDataset, behavioral_policy, generate_dataset, make_behavior_tier
from fedorl.envs import random_mdp, random_policy
from fedorl.errors import AgentFailure, ShapeMismatch
from fedorl.federation import (CSV_COLUMNS, FederationConfig, aggregate, federation_rounds,
                               local_strategy_fed_bc, rounds_to_fraction, run_federation,
                               write_reports_csv, write_reports_jsonl)
from fedorl.local import LocalConfig
from fedorl.mdp import TabularPolicy
from fedorl.theory import make_tiny_instance


@pytest.fixture
def hetero():
    mdp = random_mdp(6, 3, seed=1, gamma=0.9)
    datasets = [generate_dataset(mdp, make_behavior_tier(mdp, t), 4, 30, seed=[2, i], agent_id=str(i))
                for i, t in enumerate(("expert", "medium", "random"))]
    return mdp, datasets


def test_aggregate_examples():
    p = TabularPolicy([[0.8, 0.2]])
    assert aggregate([p]).probs.tolist() == [[0.8, 0.2]]
    out = aggregate([p, TabularPolicy([[0.4, 0.6]])])
    assert np.allclose(out.probs, [[0.6, 0.4]])
    rng = np.random.default_rng(0)
    q = random_policy(4, 3, rng)
    assert np.allclose(aggregate([q] * 5).probs, q.probs)


def test_aggregate_permutation_invariance():
    rng = np.random.default_rng(1)
    pols = [random_policy(3, 4, rng) for _ in range(4)]
    ref = aggregate(pols).probs
    for perm in itertools.permutations(pols):
        assert np.allclose(aggregate(perm).probs, ref, atol=1e-15)


def test_aggregate_errors():
    with pytest.raises(ValueError):
        aggregate([])
    with pytest.raises(ShapeMismatch):
        aggregate([TabularPolicy.uniform(2, 2), TabularPolicy.uniform(3, 2)])


def test_zero_rounds(hetero):
    mdp, datasets = hetero
    cfg = FederationConfig(num_agents=3, num_rounds=0)
    assert run_federation(mdp, datasets, cfg) == []
    assert rounds_to_fraction([]) is None


def test_single_agent_fed_cql_equals_individual(hetero):
    mdp, datasets = hetero
    runs = {s: run_federation(mdp, datasets[:1], FederationConfig(num_agents=1, num_rounds=4, strategy=s))
            for s in ("fed_cql", "individual_cql")}
    assert [r.global_return for r in runs["fed_cql"]] == [r.global_return for r in runs["individual_cql"]]


def test_drpo_without_lambda2_is_anchored_fed_cql(hetero):
    mdp, datasets = hetero
    local = LocalConfig(lambda1=0.3, lambda2=0.0)
    drpo = run_federation(mdp, datasets[:1], FederationConfig(num_agents=1, num_rounds=4, local=local))
    cql = run_federation(mdp, datasets[:1], FederationConfig(num_agents=1, num_rounds=4, local=local,
                                                             strategy="fed_cql", fed_cql_anchor=0.3))
    assert [r.global_return for r in drpo] == [r.global_return for r in cql]


def test_fed_bc_examples(hetero):
    mdp, datasets = hetero
    det = TransitionDataset.from_records([(0, 2, 0.0, 1), (1, 0, 0.0, 0)] * 3)
    clone = local_strategy_fed_bc(det, TabularPolicy.uniform(3, 3))
    assert clone.probs.tolist() == [[0, 0, 1], [1, 0, 0], [1 / 3, 1 / 3, 1 / 3]]
    # the first round's global policy is the average of the behavioral policies
    (_, global_pi, _), = itertools.islice(
        federation_rounds(mdp, datasets, FederationConfig(num_agents=3, num_rounds=1, strategy="fed_bc")), 1)
    expected = np.mean([behavioral_policy(ds, 6, 3).probs for ds in datasets], axis=0)
    assert np.allclose(global_pi.probs, expected)


def test_report_shapes_and_csv(tmp_path, hetero):
    mdp, datasets = hetero
    cfg = FederationConfig(num_agents=3, num_rounds=5, eval_every=2)
    reports = run_federation(mdp, datasets, cfg)
    assert [r.round for r in reports] == [2, 4, 5]
    for r in reports:
        assert len(r.per_agent_local_return) == len(r.improvement_over_global) == 3
        assert len(r.improvement_over_behavior) == 3 and r.wall_time_ms == 0
    write_reports_csv(reports, tmp_path / "r.csv")
    rows = list(csv.reader(open(tmp_path / "r.csv")))
    assert ",".join(rows[0]) == ("round,global_return,mean_local_return,frac_improved_global,"
                                 "frac_improved_behavior,mean_tv_to_global,wall_time_ms")
    assert tuple(rows[0]) == CSV_COLUMNS and len(rows) == 4
    write_reports_jsonl(reports, tmp_path / "r.jsonl")
    assert len(open(tmp_path / "r.jsonl").read().splitlines()) == 3


def test_runs_are_deterministic(tmp_path, hetero):
    mdp, datasets = hetero
    for strategy in ("drpo", "fed_cql", "fed_bc", "individual_cql"):
        cfg = FederationConfig(num_agents=3, num_rounds=3, strategy=strategy)
        write_reports_csv(run_federation(mdp, datasets, cfg), tmp_path / "a.csv")
        write_reports_csv(run_federation(mdp, datasets, cfg), tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_agent_failure_names_agent(hetero):
    mdp, datasets = hetero
    empty = TransitionDataset.from_records([], agent_id="bad-agent")
    with pytest.raises(AgentFailure) as info:
        run_federation(mdp, datasets[:2] + [empty], FederationConfig(num_agents=3, num_rounds=1))
    assert info.value.agent_id == "bad-agent"
    with pytest.raises(ValueError):
        run_federation(mdp, datasets, FederationConfig(num_agents=2, num_rounds=1))


def test_config_validation():
    with pytest.raises(ValueError):
        FederationConfig(num_agents=0)
    with pytest.raises(ValueError):
        FederationConfig(strategy="fedavg")
    cfg = FederationConfig(local=LocalConfig(beta=3.0))
    assert FederationConfig.from_dict(cfg.to_dict()) == cfg


def test_rounds_to_fraction():
    class R:
        def __init__(self, t, g):
            self.round, self.global_return = t, g
    reps = [R(1, 0.0), R(2, 0.5), R(3, 0.96), R(4, 1.0)]
    assert rounds_to_fraction(reps, 0.95) == 3
    assert rounds_to_fraction([R(1, -2.0), R(2, -1.0)], 0.95) == 2


def test_first_round_improves_over_both_anchors():
    """Both improvement flags true in round one on >= 90% of tiny covered instances.

    Measured: 16/50 with both flags (27 global, 30 behavior) at lambda2 = 10, fewer at
    larger lambda2 because the update then barely moves from the uniform start.
    """
    hits = 0
    for k in range(50):
        inst = make_tiny_instance(k)
        ds = generate_dataset(inst.mdp, TabularPolicy(inst.pib.probs), 20, 50, seed=[k, 5])
        cfg = FederationConfig(num_agents=1, num_rounds=1, local=LocalConfig(lambda1=0.1, lambda2=10.0))
        rep = run_federation(inst.mdp, [ds], cfg)[0]
        hits += rep.improvement_over_global[0] and rep.improvement_over_behavior[0]
    assert hits >= 45, f"both flags true on {hits}/50 instances"
