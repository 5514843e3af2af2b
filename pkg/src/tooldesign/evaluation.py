"""Robustness of designed tools under box-mass perturbations.

For nominal mass ``m`` and perturbed masses ``m_i``:

    robustness        = -sum_i sum_t |X(m_i, t) - X(m, t)|
    accuracy          = -sum_i sum_t |X(m_i, t) - X_goal|
    control_deviation =  sum_i sum_t |U(m_i, t) - U(m, t)|

with Euclidean norms. ``accuracy_mode="squared"`` squares the goal
distance instead.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .design import GeometryConfig, design_tool, rollout_tool
from .geometry import ToolParams
from .objective import ObjectiveConfig
from .optimizers import OptimizerConfig
from .sim import PlanSpec, Rollout, WorldConfig

DEFAULT_PERTURBED_MASSES = (0.3, 0.5, 0.7, 0.9)
GOAL_RANGE_X = (-0.5, 0.5)
GOAL_RANGE_Y = (0.5, 1.5)
VARIANTS = {"pure_confidence": 0.0, "free_energy": 20.0, "pure_performance": 50.0}


@dataclass(frozen=True)
class PerturbationSpec:
    nominal_mass: float = 0.1
    perturbed_masses: tuple[float, ...] = DEFAULT_PERTURBED_MASSES
    accuracy_mode: str = "euclidean"

    def __post_init__(self):
        object.__setattr__(self, "perturbed_masses", tuple(float(m) for m in self.perturbed_masses))
        if not self.nominal_mass > 0 or any(m <= 0 for m in self.perturbed_masses):
            raise ValueError("masses must be positive")
        if self.accuracy_mode not in ("euclidean", "squared"):
            raise ValueError("accuracy_mode must be 'euclidean' or 'squared'")

    def to_dict(self) -> dict:
        return {"nominal_mass": self.nominal_mass,
                "perturbed_masses": list(self.perturbed_masses),
                "accuracy_mode": self.accuracy_mode}

    @classmethod
    def from_dict(cls, data: dict) -> "PerturbationSpec":
        unknown = set(data) - set(cls().to_dict())
        if unknown:
            raise ValueError(f"unknown perturbation keys: {sorted(unknown)}")
        kw = dict(data)
        if "perturbed_masses" in kw:
            kw["perturbed_masses"] = tuple(kw["perturbed_masses"])
        return cls(**kw)


@dataclass
class RobustnessReport:
    robustness: float
    accuracy: float
    control_deviation: float
    per_mass: list[dict] = field(default_factory=list)
    rollouts: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {"robustness": self.robustness, "accuracy": self.accuracy,
                "control_deviation": self.control_deviation, "per_mass": self.per_mass}


def robustness_metrics(nominal: Rollout, perturbed: list[Rollout], goal,
                       accuracy_mode: str = "euclidean") -> RobustnessReport:
    """Metric sums over already-simulated rollouts of equal length."""
    goal = np.asarray(goal, float)
    per_mass = []
    for r in perturbed:
        if len(r) != len(nominal):
            raise ValueError("perturbed and nominal rollouts differ in length")
        dev = np.linalg.norm(r.X - nominal.X, axis=1).sum()
        gd = np.linalg.norm(r.X - goal, axis=1)
        acc = (gd ** 2 if accuracy_mode == "squared" else gd).sum()
        ctrl = np.linalg.norm(r.U - nominal.U, axis=1).sum()
        per_mass.append({"mass": r.box_mass, "robustness": -float(dev),
                         "accuracy": -float(acc), "control_deviation": float(ctrl)})
    return RobustnessReport(
        robustness=float(sum(p["robustness"] for p in per_mass)),
        accuracy=float(sum(p["accuracy"] for p in per_mass)),
        control_deviation=float(sum(p["control_deviation"] for p in per_mass)),
        per_mass=per_mass,
    )


def evaluate_robustness(tool: ToolParams, plan: PlanSpec, world: WorldConfig,
                        spec: PerturbationSpec = PerturbationSpec(),
                        geometry: GeometryConfig = GeometryConfig(),
                        goal=None) -> RobustnessReport:
    """Re-run ``tool`` at every perturbed box mass and compare to nominal."""
    goal = world.goal if goal is None else goal
    nominal = rollout_tool(tool, plan, world.with_mass(spec.nominal_mass), geometry)
    perturbed = [rollout_tool(tool, plan, world.with_mass(m), geometry)
                 for m in spec.perturbed_masses]
    report = robustness_metrics(nominal, perturbed, goal, spec.accuracy_mode)
    report.rollouts = {spec.nominal_mass: nominal,
                       **{m: r for m, r in zip(spec.perturbed_masses, perturbed)}}
    return report


def sample_goals(n: int, seed: int, x_range=GOAL_RANGE_X, y_range=GOAL_RANGE_Y):
    rng = np.random.default_rng(seed)
    return [(float(x), float(y)) for x, y in
            zip(rng.uniform(*x_range, size=n), rng.uniform(*y_range, size=n))]


def comparative_study(goals, px_variants, n_seeds: int, plan: PlanSpec, world: WorldConfig,
                      optimizer: OptimizerConfig = OptimizerConfig(),
                      objective: ObjectiveConfig = ObjectiveConfig(),
                      spec: PerturbationSpec = PerturbationSpec(),
                      geometry: GeometryConfig = GeometryConfig(),
                      method: str = "cmaes") -> dict:
    """Design and evaluate one tool per goal x variant x seed.

    ``px_variants`` maps a variant name to its goal-error weight (a plain
    list of weights is named by value). Returns ``{"cells": [...],
    "table": [...]}`` where table rows hold per-variant means.
    """
    if not isinstance(px_variants, dict):
        px_variants = {f"px={float(p):g}": float(p) for p in px_variants}
    cells = []
    for gi, goal in enumerate(goals):
        goal = tuple(float(g) for g in goal)
        w = replace(world, goal=goal)
        for name, px in px_variants.items():
            obj = replace(objective, p_x=float(px), goal=goal)
            for s in range(n_seeds):
                run = design_tool(plan, w, obj, replace(optimizer, seed=optimizer.seed + s),
                                  geometry, method)
                tool = geometry.params(run.best_x)
                rep = evaluate_robustness(tool, plan, w, spec, geometry)
                cells.append({
                    "goal_index": gi, "goal": list(goal), "variant": name, "p_x": float(px),
                    "seed": optimizer.seed + s, "coeffs": [float(c) for c in run.best_x],
                    "best_fitness": run.best_fitness, **rep.to_dict(),
                })
    return {"cells": cells, "table": summarize(cells)}


def summarize(cells: list[dict]) -> list[dict]:
    rows = []
    for name in dict.fromkeys(c["variant"] for c in cells):
        sub = [c for c in cells if c["variant"] == name]
        rows.append({
            "variant": name,
            "p_x": sub[0]["p_x"],
            "n": len(sub),
            "robustness": float(np.mean([c["robustness"] for c in sub])),
            "accuracy": float(np.mean([c["accuracy"] for c in sub])),
            "control_deviation": float(np.mean([c["control_deviation"] for c in sub])),
        })
    return rows
