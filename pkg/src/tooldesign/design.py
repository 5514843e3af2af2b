"""Designer / user / evaluator loop: coefficients in, free energy out."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainSolveFailed
from .geometry import (
    DEFAULT_ARC_LENGTH, DEFAULT_DENSITY, DEFAULT_GRASP_LENGTH, DEFAULT_HEIGHT,
    DEFAULT_SPACING, DEFAULT_THICKNESS, ToolParams, build_shape,
)
from .objective import FitnessReport, ObjectiveConfig, free_energy
from .optimizers import OPTIMIZERS, FitnessGateway, OptimizerConfig, OptRun
from .sim import PlanSpec, Rollout, WorldConfig, simulate

PENALTY_FITNESS = 1e9


@dataclass(frozen=True)
class GeometryConfig:
    arc_length: float = DEFAULT_ARC_LENGTH
    grasp_length: float = DEFAULT_GRASP_LENGTH
    density: float = DEFAULT_DENSITY
    spacing: float = DEFAULT_SPACING
    thickness: float = DEFAULT_THICKNESS
    height: float = DEFAULT_HEIGHT

    def params(self, coeffs) -> ToolParams:
        return ToolParams(tuple(coeffs), self.arc_length, self.grasp_length)

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, data: dict) -> "GeometryConfig":
        unknown = set(data) - set(cls().to_dict())
        if unknown:
            raise ValueError(f"unknown geometry keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


def rollout_tool(params: ToolParams, plan: PlanSpec, world: WorldConfig,
                 geometry: GeometryConfig = GeometryConfig()) -> Rollout:
    shape = build_shape(params, geometry.density, geometry.spacing)
    return simulate(shape, plan, world)


def evaluate_tool(params: ToolParams, plan: PlanSpec, world: WorldConfig,
                  objective: ObjectiveConfig,
                  geometry: GeometryConfig = GeometryConfig(),
                  per_step: bool = False) -> FitnessReport:
    """Simulate one tool and score it."""
    return free_energy(rollout_tool(params, plan, world, geometry), objective, per_step=per_step)


class ToolFitness:
    """Picklable fitness callable over coefficient vectors.

    Invalid shapes score ``PENALTY_FITNESS`` so the search never aborts.
    """

    def __init__(self, plan: PlanSpec, world: WorldConfig, objective: ObjectiveConfig,
                 geometry: GeometryConfig = GeometryConfig()):
        self.plan = plan
        self.world = world
        self.objective = objective
        self.geometry = geometry

    def __call__(self, coeffs) -> float:
        try:
            params = self.geometry.params(np.asarray(coeffs, float))
            report = evaluate_tool(params, self.plan, self.world, self.objective, self.geometry)
        except DomainSolveFailed:
            return PENALTY_FITNESS
        f = report.free_energy
        return f if np.isfinite(f) else PENALTY_FITNESS


def design_tool(plan: PlanSpec, world: WorldConfig, objective: ObjectiveConfig,
                optimizer: OptimizerConfig, geometry: GeometryConfig = GeometryConfig(),
                method: str = "cmaes") -> OptRun:
    """Optimize tool coefficients for the fixed plan and return the run log."""
    if method not in OPTIMIZERS:
        raise ValueError(f"unknown optimizer {method!r}; choose from {sorted(OPTIMIZERS)}")
    gateway = FitnessGateway(ToolFitness(plan, world, objective, geometry))
    run = OPTIMIZERS[method](gateway, optimizer)
    run.evals = gateway.evals
    return run
