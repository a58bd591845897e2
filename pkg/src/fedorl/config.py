"""Experiment configuration: JSON schema, validation and sweep axes."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .data import TIERS
from .envs import Gridworld, random_mdp
from .errors import ConfigError
from .federation import STRATEGIES, FederationConfig
from .local import LocalConfig
from .mdp import Mdp

# short sweep names -> dotted config keys
SWEEP_ALIASES = {
    "num_agents": "federation.num_agents",
    "num_rounds": "federation.num_rounds",
    "trajectories_per_agent": "dataset.trajectories_per_agent",
    "horizon": "dataset.horizon",
    "improve_alternations": "federation.local.improve_alternations",
    "lambda1": "federation.local.lambda1",
    "lambda2": "federation.local.lambda2",
    "beta": "federation.local.beta",
    "delta_floor": "federation.delta_floor",
    "strategy": "federation.strategy",
}


@dataclass(frozen=True)
class EnvSpec:
    """Either a gridworld or a seeded random MDP."""

    type: str = "gridworld"
    width: int = 8
    height: int = 8
    slip_prob: float = 0.1
    goal_reward: float = 1.0
    num_states: int = 10
    num_actions: int = 4
    branching: int | None = None
    seed: int = 0
    gamma: float = 0.99

    def __post_init__(self):
        if self.type not in ("gridworld", "random_mdp"):
            raise ConfigError(f"env.type must be gridworld or random_mdp, got {self.type!r}")

    def build(self) -> Mdp:
        try:
            if self.type == "gridworld":
                return Gridworld(self.width, self.height, self.slip_prob, self.goal_reward,
                                 self.gamma).to_mdp()
            return random_mdp(self.num_states, self.num_actions, self.branching, self.seed, self.gamma)
        except ValueError as exc:
            raise ConfigError(f"invalid env: {exc}") from exc

    def to_dict(self) -> dict:
        keys = (("width", "height", "slip_prob", "goal_reward") if self.type == "gridworld"
                else ("num_states", "num_actions", "branching", "seed"))
        out = {"type": self.type}
        out.update({k: getattr(self, k) for k in keys})
        out["gamma"] = self.gamma
        return out


@dataclass(frozen=True)
class TierSpec:
    tier: str
    epsilon: float | None = None

    def __post_init__(self):
        if self.tier not in TIERS:
            raise ConfigError(f"unknown tier {self.tier!r}; expected one of {TIERS}")

    def to_json(self):
        return self.tier if self.epsilon is None else {"tier": self.tier, "epsilon": self.epsilon}

    @classmethod
    def parse(cls, obj) -> "TierSpec":
        if isinstance(obj, str):
            return cls(obj)
        return cls(obj["tier"], obj.get("epsilon"))


@dataclass(frozen=True)
class DatasetSpec:
    trajectories_per_agent: int = 5
    horizon: int = 200
    reward_noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.trajectories_per_agent < 0 or self.horizon < 1 or self.reward_noise < 0:
            raise ConfigError("dataset: need trajectories_per_agent >= 0, horizon >= 1, reward_noise >= 0")


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple
    seeds: tuple = (0,)

    def __post_init__(self):
        if not self.values:
            raise ConfigError("sweep.values must be non-empty")

    @property
    def key(self) -> str:
        return SWEEP_ALIASES.get(self.parameter, self.parameter)

    def to_dict(self) -> dict:
        return {"parameter": self.parameter, "values": list(self.values), "seeds": list(self.seeds)}


@dataclass(frozen=True)
class TheorySpec:
    seed: int = 0
    delta: float = 1e-3
    gamma: float = 0.9
    lipschitz_trials: int = 1000
    lemma1_seeds: int = 500
    markov_pairs: int = 500
    markov_horizon: int = 50
    occupancy_trials: int = 1000
    theorem1_instances: int = 50
    theorem1_beta: float = 0.1
    theorem1_gamma: float = 0.9
    lambda2_multipliers: tuple = (1.0, 5.0, 20.0)
    grid_resolution: int = 201

    def to_dict(self) -> dict:
        out = asdict(self)
        out["lambda2_multipliers"] = list(self.lambda2_multipliers)
        return out


@dataclass(frozen=True)
class ExperimentConfig:
    env: EnvSpec = field(default_factory=EnvSpec)
    tiers: tuple = ()
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    federation: FederationConfig = field(default_factory=FederationConfig)
    output_dir: str = "runs"
    strategies: tuple = ()
    sweep: SweepSpec | None = None
    theory: TheorySpec = field(default_factory=TheorySpec)

    def __post_init__(self):
        bad = [s for s in self.strategies if s not in STRATEGIES]
        if bad:
            raise ConfigError(f"unknown strategies {bad}; expected a subset of {STRATEGIES}")
        if self.sweep is not None:
            self._check_key(self.sweep.key)
        sweeping_agents = self.sweep is not None and self.sweep.key == "federation.num_agents"
        if self.tiers and not sweeping_agents and len(self.tiers) != self.federation.num_agents:
            raise ConfigError(f"{len(self.tiers)} tiers listed for {self.federation.num_agents} agents")

    @staticmethod
    def _check_key(key: str):
        section, _, rest = key.partition(".")
        known = {
            "dataset": set(DatasetSpec.__dataclass_fields__),
            "federation": set(FederationConfig.__dataclass_fields__),
            "env": set(EnvSpec.__dataclass_fields__),
        }
        if section == "federation" and rest.startswith("local."):
            ok = rest[len("local."):] in LocalConfig.__dataclass_fields__
        else:
            ok = section in known and rest in known[section]
        if not ok:
            raise ConfigError(f"unknown sweep parameter {key!r}")

    @property
    def run_strategies(self) -> tuple:
        return self.strategies or (self.federation.strategy,)

    def agent_tiers(self, num_agents: int | None = None) -> list[TierSpec]:
        """Tier of every agent; the list is cycled when more agents are requested."""
        n = self.federation.num_agents if num_agents is None else num_agents
        tiers = self.tiers or (TierSpec("random"),)
        return [tiers[i % len(tiers)] for i in range(n)]

    def with_value(self, key: str, value) -> "ExperimentConfig":
        """Copy with one dotted key replaced (``federation.local.lambda2`` etc.)."""
        key = SWEEP_ALIASES.get(key, key)
        self._check_key(key)
        section, _, rest = key.partition(".")
        if section == "federation" and rest.startswith("local."):
            local = replace(self.federation.local, **{rest[len("local."):]: value})
            return replace(self, federation=replace(self.federation, local=local))
        sub = replace(getattr(self, section), **{rest: value})
        changes = {section: sub}
        if key == "federation.num_agents" and self.tiers:
            # keep the cycled tier list in step so validation passes
            changes["tiers"] = tuple(self.agent_tiers(value))
        return replace(self, **changes)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, dataset=replace(self.dataset, seed=seed),
                       federation=replace(self.federation, seed=seed))

    def to_dict(self) -> dict:
        out = {
            "env": self.env.to_dict(),
            "tiers": [t.to_json() for t in self.tiers],
            "dataset": asdict(self.dataset),
            "federation": self.federation.to_dict(),
            "output_dir": self.output_dir,
            "theory": self.theory.to_dict(),
        }
        if self.strategies:
            out["strategies"] = list(self.strategies)
        if self.sweep is not None:
            out["sweep"] = self.sweep.to_dict()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {"env", "tiers", "dataset", "federation", "output_dir", "strategies", "sweep", "theory"}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        try:
            sweep = data.get("sweep")
            theory = dict(data.get("theory", {}))
            if "lambda2_multipliers" in theory:
                theory["lambda2_multipliers"] = tuple(theory["lambda2_multipliers"])
            return cls(
                env=EnvSpec(**data.get("env", {})),
                tiers=tuple(TierSpec.parse(t) for t in data.get("tiers", [])),
                dataset=DatasetSpec(**data.get("dataset", {})),
                federation=FederationConfig.from_dict(data.get("federation", {})),
                output_dir=str(data.get("output_dir", "runs")),
                strategies=tuple(data.get("strategies", ())),
                sweep=None if sweep is None else SweepSpec(
                    sweep["parameter"], tuple(sweep["values"]), tuple(sweep.get("seeds", (0,)))),
                theory=TheorySpec(**theory),
            )
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return ExperimentConfig.from_dict(data)


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(cfg.to_json())
