from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..geometry import COEFF_BOUNDS

FitnessFn = Callable[[np.ndarray], float]


@dataclass(frozen=True)
class OptimizerConfig:
    """Budget and hyperparameters shared by all optimizers.

    The evaluation budget is ``population * iterations`` for every method.
    """

    population: int = 12
    iterations: int = 15
    seed: int = 0
    bounds: tuple[tuple[float, float], ...] = (COEFF_BOUNDS,) * 3
    sigma0: float = 0.5
    x0: tuple[float, ...] = (0.0, 0.0, 0.0)
    pso_inertia: float = 0.7
    pso_c1: float = 1.5
    pso_c2: float = 1.5
    bo_length_scale: float = 2.0
    bo_noise: float = 1e-2
    bo_pool: int = 1024

    def __post_init__(self):
        object.__setattr__(self, "bounds", tuple((float(lo), float(hi)) for lo, hi in self.bounds))
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        if self.population < 1 or self.iterations < 1:
            raise ValueError("population and iterations must be >= 1")
        for lo, hi in self.bounds:
            if not lo < hi:
                raise ValueError(f"empty bound interval ({lo}, {hi})")
        if len(self.x0) != len(self.bounds):
            raise ValueError("x0 and bounds dimensions differ")
        if self.sigma0 <= 0:
            raise ValueError("sigma0 must be positive")

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def lower(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds])

    @property
    def budget(self) -> int:
        return self.population * self.iterations

    def to_dict(self) -> dict:
        return {
            "population": self.population, "iterations": self.iterations,
            "seed": self.seed, "bounds": [list(b) for b in self.bounds],
            "sigma0": self.sigma0, "x0": list(self.x0),
            "pso_inertia": self.pso_inertia, "pso_c1": self.pso_c1, "pso_c2": self.pso_c2,
            "bo_length_scale": self.bo_length_scale, "bo_noise": self.bo_noise,
            "bo_pool": self.bo_pool,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OptimizerConfig":
        unknown = set(data) - set(cls().to_dict())
        if unknown:
            raise ValueError(f"unknown optimizer keys: {sorted(unknown)}")
        kw = dict(data)
        if "bounds" in kw:
            kw["bounds"] = tuple(tuple(b) for b in kw["bounds"])
        if "x0" in kw:
            kw["x0"] = tuple(kw["x0"])
        return cls(**kw)


class FitnessGateway:
    """Memoizing wrapper that counts real fitness evaluations.

    Identical candidates (bitwise) are served from the cache, so ``evals``
    is the number of times the wrapped function actually ran.
    """

    def __init__(self, fn: FitnessFn):
        self.fn = fn
        self.evals = 0
        self.requests = 0
        self._cache: dict[bytes, float] = {}

    def __call__(self, x) -> float:
        x = np.ascontiguousarray(x, dtype=float)
        key = x.tobytes()
        self.requests += 1
        if key not in self._cache:
            self.evals += 1
            self._cache[key] = float(self.fn(x.copy()))
        return self._cache[key]

    def batch(self, xs: Sequence) -> np.ndarray:
        # results are consumed strictly in candidate order
        return np.array([self(x) for x in xs])


@dataclass
class IterationRecord:
    iter: int
    best_fitness: float
    best_coeffs: list[float]
    pop_best: float
    pop_mean: float
    pop_std: float
    evals: int

    def to_json(self) -> str:
        return json.dumps({
            "iter": self.iter,
            "best_fitness": self.best_fitness,
            "best_coeffs": self.best_coeffs,
            "pop_mean": self.pop_mean,
            "pop_std": self.pop_std,
            "evals": self.evals,
        })


@dataclass
class OptRun:
    method: str
    history: list[IterationRecord] = field(default_factory=list)
    best_x: np.ndarray | None = None
    best_fitness: float = float("inf")
    evals: int = 0
    state: object = field(default=None, repr=False)

    @property
    def best_curve(self) -> np.ndarray:
        return np.array([r.best_fitness for r in self.history])

    def history_jsonl(self) -> str:
        return "".join(r.to_json() + "\n" for r in self.history)


class RunTracker:
    """Best-so-far bookkeeping shared by the optimizer loops."""

    def __init__(self, method: str, gateway: FitnessGateway):
        self.run = OptRun(method=method)
        self.gateway = gateway

    def record(self, iteration: int, xs: np.ndarray, fs: np.ndarray) -> None:
        i = int(np.argmin(fs))
        if self.run.best_x is None or fs[i] < self.run.best_fitness:
            self.run.best_fitness = float(fs[i])
            self.run.best_x = np.array(xs[i], dtype=float)
        self.run.evals = self.gateway.evals
        self.run.history.append(IterationRecord(
            iter=iteration,
            best_fitness=self.run.best_fitness,
            best_coeffs=[float(v) for v in self.run.best_x],
            pop_best=float(fs[i]),
            pop_mean=float(np.mean(fs)),
            pop_std=float(np.std(fs)),
            evals=self.gateway.evals,
        ))


def as_gateway(fn) -> FitnessGateway:
    return fn if isinstance(fn, FitnessGateway) else FitnessGateway(fn)
