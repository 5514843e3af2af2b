"""Gradient-free minimizers sharing one run-log format and budget rule."""
from .baselines import pso_minimize, random_search
from .bo import bo_minimize
from .cmaes import CMAES, cmaes_minimize
from .common import FitnessGateway, IterationRecord, OptimizerConfig, OptRun

OPTIMIZERS = {
    "cmaes": cmaes_minimize,
    "pso": pso_minimize,
    "rs": random_search,
    "bo": bo_minimize,
}

__all__ = [
    "CMAES", "FitnessGateway", "IterationRecord", "OPTIMIZERS", "OptRun",
    "OptimizerConfig", "bo_minimize", "cmaes_minimize", "pso_minimize",
    "random_search",
]
