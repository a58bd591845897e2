"""End-to-end pipelines behind the command line: data, training, sweeps, theory."""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .data import (generate_dataset, load_manifest_datasets, make_behavior_tier, save_dataset,
                   write_manifest)
from .federation import rounds_to_fraction, run_federation, write_reports_csv, write_reports_jsonl
from .mdp import Mdp, load_mdp, save_mdp
from . import theory

log = logging.getLogger("fedorl")

SWEEP_COLUMNS = ("parameter", "value", "seed", "strategy", "final_global_return",
                 "mean_local_return", "rounds_to_95")


def make_datasets(cfg: ExperimentConfig, mdp: Mdp):
    """Per-agent datasets and manifest entries; agent i uses seed [dataset.seed, i]."""
    ds_cfg = cfg.dataset
    datasets, entries = [], []
    for i, spec in enumerate(cfg.agent_tiers()):
        overrides = None if spec.epsilon is None else {spec.tier: spec.epsilon}
        behavior = make_behavior_tier(mdp, spec.tier, overrides)
        seed = [ds_cfg.seed, i]
        ds = generate_dataset(mdp, behavior, ds_cfg.trajectories_per_agent, ds_cfg.horizon,
                              ds_cfg.reward_noise, seed=seed, agent_id=str(i),
                              provenance={"tier": spec.tier})
        datasets.append(ds)
        entries.append({"agent_id": str(i), "file": f"data/agent_{i}.jsonl", "tier": spec.tier,
                        "seed": seed, "num_trajectories": ds_cfg.trajectories_per_agent,
                        "horizon": ds_cfg.horizon})
    return datasets, entries


def gen_env(cfg: ExperimentConfig, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "mdp.json"
    save_mdp(cfg.env.build(), path)
    return path


def gen_data(cfg: ExperimentConfig, out_dir) -> Path:
    out = Path(out_dir)
    env_path = out / "mdp.json"
    if not env_path.exists():
        raise FileNotFoundError(f"missing env file {env_path}; run gen-env first")
    mdp = load_mdp(env_path)
    datasets, entries = make_datasets(cfg, mdp)
    (out / "data").mkdir(parents=True, exist_ok=True)
    for ds, entry in zip(datasets, entries):
        save_dataset(ds, out / entry["file"])
    manifest = out / "manifest.json"
    write_manifest(entries, manifest)
    return manifest


@dataclass
class TrainResult:
    strategy: str
    reports: list
    final_global_return: float
    rounds_to_95: int | None


def train_in_memory(cfg: ExperimentConfig, mdp: Mdp | None = None, datasets=None) -> list[TrainResult]:
    """Run every configured strategy on one set of datasets."""
    mdp = cfg.env.build() if mdp is None else mdp
    if datasets is None:
        datasets, _ = make_datasets(cfg, mdp)
    results = []
    for strategy in cfg.run_strategies:
        fed = replace(cfg.federation, strategy=strategy)
        reports = run_federation(mdp, datasets, fed)
        final = reports[-1].global_return if reports else float("nan")
        results.append(TrainResult(strategy, reports, final, rounds_to_fraction(reports, 0.95)))
        log.info("strategy=%s final_global_return=%.6g", strategy, final)
    return results


def train(cfg: ExperimentConfig, out_dir) -> list[TrainResult]:
    """Use mdp.json and manifest.json from ``out_dir`` when present, else create them."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not (out / "mdp.json").exists():
        gen_env(cfg, out)
    if not (out / "manifest.json").exists():
        gen_data(cfg, out)
    mdp = load_mdp(out / "mdp.json")
    datasets = load_manifest_datasets(out / "manifest.json")
    results = train_in_memory(cfg, mdp, datasets)
    for res in results:
        write_reports_csv(res.reports, out / f"rounds_{res.strategy}.csv")
        write_reports_jsonl(res.reports, out / f"rounds_{res.strategy}.jsonl")
    return results


def _sweep_point(args):
    cfg, parameter, value, seed = args
    point = cfg.with_value(parameter, value).with_seed(seed)
    rows = []
    for res in train_in_memory(point):
        mean_local = res.reports[-1].mean_local_return if res.reports else float("nan")
        rows.append({"parameter": parameter, "value": value, "seed": seed, "strategy": res.strategy,
                     "final_global_return": res.final_global_return,
                     "mean_local_return": mean_local, "rounds_to_95": res.rounds_to_95})
    return rows


def sweep(cfg: ExperimentConfig, out_dir, jobs: int = 1) -> Path:
    """One tidy row per (value, seed, strategy); rows are in (value, seed) order regardless of jobs."""
    if cfg.sweep is None:
        raise ValueError("config has no sweep section")
    points = [(cfg, cfg.sweep.parameter, v, s) for v in cfg.sweep.values for s in cfg.sweep.seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_sweep_point, points))
    else:
        chunks = [_sweep_point(p) for p in points]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "sweep.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for rows in chunks:
            for row in rows:
                writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return path


def _lipschitz_table(seed: int, delta: float) -> np.ndarray:
    # sparse empirical frequencies so that many entries sit on the floor
    rng = np.random.default_rng([seed, 20])
    counts = rng.multinomial(1000, rng.dirichlet(np.full(32, 0.3)))
    return np.maximum(counts / 1000.0, delta).reshape(8, 4)


def _theory_task(args):
    name, th = args
    if name == "g_lipschitz":
        return theory.g_lipschitz_check(_lipschitz_table(th.seed, th.delta), th.delta,
                                        th.lipschitz_trials, th.seed, strict=False).to_dict()
    if name == "g_lipschitz_composed":
        return theory.g_composed_check(_lipschitz_table(th.seed, th.delta), th.delta, th.gamma,
                                       th.lipschitz_trials, th.seed, strict=False).to_dict()
    if name == "lemma1_sandwich":
        return theory.lemma1_suite(th.lemma1_seeds, th.seed, strict=False).to_dict()
    if name == "markov_tv_lemma":
        return theory.markov_tv_suite(th.markov_pairs, th.markov_horizon, th.seed, strict=False).to_dict()
    if name == "occupancy_lemma":
        return theory.occupancy_suite(th.occupancy_trials, th.seed, strict=False).to_dict()
    return theory.theorem1_suite(th.theorem1_instances, th.lambda2_multipliers, th.grid_resolution,
                                 th.seed, th.theorem1_beta, th.theorem1_gamma)


HARD_CHECKS = ("g_lipschitz", "g_lipschitz_composed", "lemma1_sandwich", "markov_tv_lemma",
               "occupancy_lemma")


def verify_theory(cfg: ExperimentConfig, out_dir, jobs: int = 1) -> tuple[bool, dict]:
    """Write one JSON report per check; return (all hard checks passed, reports)."""
    th = cfg.theory
    names = list(HARD_CHECKS) + ["theorem1_strict_improvement"]
    tasks = [(n, th) for n in names]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_theory_task, tasks))
    else:
        results = [_theory_task(t) for t in tasks]
    out = Path(out_dir) / "theory"
    out.mkdir(parents=True, exist_ok=True)
    reports = dict(zip(names, results))
    for name, rep in reports.items():
        (out / f"{name}.json").write_text(json.dumps(rep, indent=2, sort_keys=True) + "\n")
    ok = all(reports[n]["violations"] == 0 for n in HARD_CHECKS)
    return ok, reports
