"""Single-file JSON run configuration.

Every section is optional in the file; missing keys take their defaults.
Only the output root may be overridden from the environment
(``TOOLDESIGN_OUT``), so a config snapshot fully determines a run.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .design import GeometryConfig
from .errors import ConfigError
from .evaluation import PerturbationSpec, sample_goals
from .objective import ObjectiveConfig
from .optimizers import OPTIMIZERS, OptimizerConfig
from .sim import PlanSpec, WorldConfig, default_plan

OUT_ENV = "TOOLDESIGN_OUT"
DEFAULT_OUT = "runs"


@dataclass(frozen=True)
class StudyConfig:
    """Goal set for comparative studies; explicit ``goals`` win over sampling."""

    goals: tuple[tuple[float, float], ...] | None = None
    n_goals: int = 10
    goal_seed: int = 0

    def __post_init__(self):
        if self.goals is not None:
            object.__setattr__(self, "goals",
                               tuple((float(x), float(y)) for x, y in self.goals))
        if self.n_goals < 1:
            raise ValueError("n_goals must be >= 1")

    def resolved_goals(self) -> list[tuple[float, float]]:
        if self.goals is not None:
            return list(self.goals)
        return sample_goals(self.n_goals, self.goal_seed)

    def to_dict(self) -> dict:
        return {"goals": None if self.goals is None else [list(g) for g in self.goals],
                "n_goals": self.n_goals, "goal_seed": self.goal_seed}

    @classmethod
    def from_dict(cls, data: dict) -> "StudyConfig":
        unknown = set(data) - set(cls().to_dict())
        if unknown:
            raise ValueError(f"unknown study keys: {sorted(unknown)}")
        kw = dict(data)
        if kw.get("goals") is not None:
            kw["goals"] = tuple(tuple(g) for g in kw["goals"])
        return cls(**kw)


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs; ``seed`` is the optimizer's master seed."""

    world: WorldConfig = field(default_factory=WorldConfig)
    plan: PlanSpec = field(default_factory=default_plan)
    objective: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    perturbation: PerturbationSpec = field(default_factory=PerturbationSpec)
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    study: StudyConfig = field(default_factory=StudyConfig)
    method: str = "cmaes"
    seed: int = 0
    out: str = DEFAULT_OUT

    def __post_init__(self):
        if self.method not in OPTIMIZERS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {sorted(OPTIMIZERS)}")
        if tuple(self.world.goal) != tuple(self.objective.goal):
            raise ConfigError(f"world goal {self.world.goal} and objective goal "
                              f"{self.objective.goal} differ")
        if self.optimizer.seed != self.seed:
            object.__setattr__(self, "optimizer", replace(self.optimizer, seed=int(self.seed)))

    def to_dict(self) -> dict:
        return {
            "world": self.world.to_dict(),
            "plan": self.plan.to_dict(),
            "objective": self.objective.to_dict(),
            "optimizer": self.optimizer.to_dict(),
            "perturbation": self.perturbation.to_dict(),
            "geometry": self.geometry.to_dict(),
            "study": self.study.to_dict(),
            "method": self.method,
            "seed": self.seed,
            "out": self.out,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        unknown = set(data) - set(cls().to_dict())
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            opt = dict(data.get("optimizer", {}))
            top, inner = data.get("seed"), opt.get("seed")
            if top is not None and inner is not None and int(top) != int(inner):
                raise ConfigError("optimizer.seed disagrees with seed")
            seed = int(top if top is not None else inner if inner is not None else 0)
            opt["seed"] = seed
            world = dict(data.get("world", {}))
            objective = dict(data.get("objective", {}))
            # one goal, stated in either section
            if "goal" in world and "goal" not in objective:
                objective["goal"] = world["goal"]
            elif "goal" in objective and "goal" not in world:
                world["goal"] = objective["goal"]
            plan = PlanSpec.from_dict(data["plan"]) if "plan" in data else default_plan()
            return cls(
                world=WorldConfig.from_dict(world),
                plan=plan,
                objective=ObjectiveConfig.from_dict(objective),
                optimizer=OptimizerConfig.from_dict(opt),
                perturbation=PerturbationSpec.from_dict(data.get("perturbation", {})),
                geometry=GeometryConfig.from_dict(data.get("geometry", {})),
                study=StudyConfig.from_dict(data.get("study", {})),
                method=str(data.get("method", "cmaes")),
                seed=seed,
                out=str(data.get("out", DEFAULT_OUT)),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, seed=int(seed), optimizer=replace(self.optimizer, seed=int(seed)))


def load_config(path: str | Path | None) -> RunConfig:
    """Read a config file; ``None`` gives the defaults."""
    if path is None:
        return RunConfig()
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return RunConfig.from_dict(data)


def resolve_out(cfg: RunConfig, cli_out: str | None = None) -> Path:
    """Output root: ``--out`` flag, then ``$TOOLDESIGN_OUT``, then the config."""
    if cli_out:
        return Path(cli_out)
    env = os.environ.get(OUT_ENV)
    if env:
        return Path(env)
    return Path(cfg.out)
