"""Tool-shape design by free-energy minimization in a planar push/pull task."""
from .design import GeometryConfig, ToolFitness, design_tool, evaluate_tool, rollout_tool
from .geometry import ToolParams, ToolShape, build_shape, turning_angle
from .objective import ObjectiveConfig, free_energy
from .optimizers import OptimizerConfig
from .sim import PlanSpec, WorldConfig, default_plan, simulate

__version__ = "0.1.0"

__all__ = [
    "GeometryConfig", "ObjectiveConfig", "OptimizerConfig", "PlanSpec", "ToolFitness",
    "ToolParams", "ToolShape", "WorldConfig", "build_shape", "default_plan", "design_tool",
    "evaluate_tool", "free_energy", "rollout_tool", "simulate", "turning_angle",
]
