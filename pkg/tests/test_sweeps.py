from pathlib import Path

import numpy as np
import pytest

from fedorl.config import load_config
from fedorl.experiment import train_in_memory

CONFIG_DIR = Path(__file__).resolve().parents[1] / "src" / "fedorl" / "configs"


@pytest.mark.slow
def test_more_agents_help():
    """Final DRPO return with 10 agents exceeds that with 1 agent on >= 80% of seeds."""
    cfg = load_config(CONFIG_DIR / "agents_sweep.json")
    wins = []
    for seed in cfg.sweep.seeds:
        finals = {n: train_in_memory(cfg.with_value("num_agents", n).with_seed(seed))[0].final_global_return
                  for n in (1, 10)}
        wins.append(finals[10] > finals[1])
    assert np.mean(wins) >= 0.8, wins
