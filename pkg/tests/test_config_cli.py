import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from fedorl import cli
from fedorl.config import ExperimentConfig, load_config
from fedorl.errors import ConfigError
from fedorl.experiment import SWEEP_COLUMNS
from fedorl.mdp import load_mdp

CONFIG_DIR = Path(__file__).resolve().parents[1] / "src" / "fedorl" / "configs"

SMALL = {
    "env": {"type": "random_mdp", "num_states": 5, "num_actions": 3, "branching": 3, "seed": 4,
            "gamma": 0.9},
    "tiers": ["expert", "random"],
    "dataset": {"trajectories_per_agent": 3, "horizon": 20, "seed": 1},
    "federation": {"num_agents": 2, "num_rounds": 3, "local": {"improve_alternations": 2}},
    "strategies": ["drpo", "fed_bc"],
}


def _write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIG_DIR.glob("*.json")))
def test_shipped_configs_round_trip(name):
    cfg = load_config(CONFIG_DIR / name)
    again = ExperimentConfig.from_dict(json.loads(cfg.to_json()))
    assert again == cfg and again.to_json() == cfg.to_json()


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**SMALL, "tiers": ["expert"]})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**SMALL, "unknown": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**SMALL, "sweep": {"parameter": "nonsense", "values": [1]}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**SMALL, "strategies": ["fedavg"]})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**SMALL, "tiers": ["novice", "random"]})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**SMALL, "federation": {"num_agents": 0}})
    # sweeping the agent count lifts the tier-count check and cycles tiers
    cfg = ExperimentConfig.from_dict({**SMALL, "sweep": {"parameter": "num_agents", "values": [1, 3]}})
    assert [t.tier for t in cfg.with_value("num_agents", 3).tiers] == ["expert", "random", "expert"]


def test_with_value_and_seed():
    cfg = ExperimentConfig.from_dict(SMALL)
    assert cfg.with_value("lambda2", 4.0).federation.local.lambda2 == 4.0
    assert cfg.with_value("dataset.horizon", 7).dataset.horizon == 7
    seeded = cfg.with_seed(9)
    assert seeded.dataset.seed == seeded.federation.seed == 9


def test_exit_codes(tmp_path, capsys):
    assert cli.main(["train", "--config", str(tmp_path / "missing.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["gen-env", "--config", str(bad)]) == 1
    with pytest.raises(SystemExit) as info:
        cli.main(["explode", "--config", "x"])
    assert info.value.code == 1
    cfg = _write(tmp_path, SMALL)
    # gen-data without an env file is a runtime failure
    assert cli.main(["gen-data", "--config", str(cfg), "--output-dir", str(tmp_path / "o")]) == 3


def test_gen_env_one_cell(tmp_path):
    cfg = _write(tmp_path, {"env": {"type": "gridworld", "width": 1, "height": 1}})
    assert cli.main(["gen-env", "--config", str(cfg), "--output-dir", str(tmp_path)]) == 0
    mdp = load_mdp(tmp_path / "mdp.json")
    assert mdp.shape == (1, 4) and np.all(mdp.transition == 1.0)
    assert cli.main(["gen-env", "--config", str(_write(tmp_path, {"env": {"width": 0}}, "z.json")),
                     "--output-dir", str(tmp_path / "z")]) == 1


def test_pipeline_is_byte_identical(tmp_path):
    cfg = _write(tmp_path, SMALL)
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        for cmd in ("gen-env", "gen-data", "train"):
            assert cli.main([cmd, "--config", str(cfg), "--output-dir", str(out)]) == 0
        outs.append(out)
    names = sorted(p.relative_to(outs[0]).as_posix() for p in outs[0].rglob("*") if p.is_file())
    assert "rounds_drpo.csv" in names and "rounds_fed_bc.jsonl" in names
    assert "data/agent_1.jsonl" in names and "manifest.json" in names
    for name in names:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name
    manifest = json.loads((outs[0] / "manifest.json").read_text())["agents"]
    assert [e["tier"] for e in manifest] == ["expert", "random"]


def test_train_prints_summary(tmp_path, capsys):
    cfg = _write(tmp_path, SMALL)
    assert cli.main(["train", "--config", str(cfg), "--output-dir", str(tmp_path / "t"), "--seed", "3"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert [l.split()[0] for l in lines] == ["strategy=drpo", "strategy=fed_bc"]
    assert all("final_global_return=" in l and "rounds_to_95=" in l for l in lines)


def test_singleton_sweep_matches_train(tmp_path):
    data = {**SMALL, "strategies": ["drpo"],
            "sweep": {"parameter": "lambda2", "values": [0.2], "seeds": [1]}}
    cfg = _write(tmp_path, data)
    assert cli.main(["sweep", "--config", str(cfg), "--output-dir", str(tmp_path / "s")]) == 0
    assert cli.main(["train", "--config", str(cfg), "--output-dir", str(tmp_path / "t"), "--seed", "1"]) == 0
    (row,) = list(csv.DictReader(open(tmp_path / "s" / "sweep.csv")))
    train_rows = list(csv.DictReader(open(tmp_path / "t" / "rounds_drpo.csv")))
    assert row["final_global_return"] == train_rows[-1]["global_return"]
    assert row["mean_local_return"] == train_rows[-1]["mean_local_return"]


def test_sweep_schema_and_jobs(tmp_path):
    data = {**SMALL, "strategies": ["fed_bc"],
            "sweep": {"parameter": "trajectories_per_agent", "values": [1, 2], "seeds": [0, 1]}}
    cfg = _write(tmp_path, data)
    assert cli.main(["sweep", "--config", str(cfg), "--output-dir", str(tmp_path / "a")]) == 0
    assert cli.main(["sweep", "--config", str(cfg), "--output-dir", str(tmp_path / "b"), "--jobs", "2"]) == 0
    text = (tmp_path / "a" / "sweep.csv").read_text()
    assert text.splitlines()[0] == ",".join(SWEEP_COLUMNS)
    assert SWEEP_COLUMNS == ("parameter", "value", "seed", "strategy", "final_global_return",
                             "mean_local_return", "rounds_to_95")
    assert len(text.splitlines()) == 5
    assert text == (tmp_path / "b" / "sweep.csv").read_text()
    assert cli.main(["sweep", "--config", str(_write(tmp_path, SMALL, "n.json")),
                     "--output-dir", str(tmp_path / "c")]) == 3


def test_verify_theory_vacuous(tmp_path, capsys):
    zero = {k: 0 for k in ("lipschitz_trials", "lemma1_seeds", "markov_pairs", "occupancy_trials",
                           "theorem1_instances")}
    cfg = _write(tmp_path, {"theory": zero})
    assert cli.main(["verify-theory", "--config", str(cfg), "--output-dir", str(tmp_path)]) == 0
    reports = {p.stem: json.loads(p.read_text()) for p in (tmp_path / "theory").glob("*.json")}
    assert len(reports) == 6
    for name, rep in reports.items():
        assert rep["trials"] == 0 and rep["examples_of_failure"] == []
        assert rep["name"] == name


def test_verify_theory_small(tmp_path):
    small = {"lipschitz_trials": 50, "lemma1_seeds": 20, "markov_pairs": 20, "occupancy_trials": 50,
             "theorem1_instances": 3, "grid_resolution": 51}
    cfg = _write(tmp_path, {"theory": small})
    assert cli.main(["verify-theory", "--config", str(cfg), "--output-dir", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "theory" / "lemma1_sandwich.json").read_text())
    assert set(rep) >= {"name", "trials", "violations", "worst_ratio", "examples_of_failure"}
    t1 = json.loads((tmp_path / "theory" / "theorem1_strict_improvement.json").read_text())
    assert set(t1["per_lambda2"]) == {"1.0", "5.0", "20.0"}


def test_console_script_runs(tmp_path):
    cfg = _write(tmp_path, {"env": {"type": "gridworld", "width": 2, "height": 2}})
    proc = subprocess.run([sys.executable, "-m", "fedorl.cli", "gen-env", "--config", str(cfg),
                           "--output-dir", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0 and (tmp_path / "mdp.json").exists()
