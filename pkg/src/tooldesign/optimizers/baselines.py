"""Comparison optimizers: global-best PSO and uniform random search."""
from __future__ import annotations

import numpy as np

from .common import OptimizerConfig, RunTracker, as_gateway


def pso_minimize(fitness_fn, cfg: OptimizerConfig, inertia=None, c1=None, c2=None):
    """Global-best particle swarm with velocities clamped to the bound width."""
    gateway = as_gateway(fitness_fn)
    w = cfg.pso_inertia if inertia is None else inertia
    c1 = cfg.pso_c1 if c1 is None else c1
    c2 = cfg.pso_c2 if c2 is None else c2
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.lower, cfg.upper
    width = hi - lo
    n, d = cfg.population, cfg.dim

    x = rng.uniform(lo, hi, size=(n, d))
    v = rng.uniform(-width, width, size=(n, d)) * 0.1
    tracker = RunTracker("pso", gateway)
    pbest, pbest_f = x.copy(), np.full(n, np.inf)
    for it in range(cfg.iterations):
        if it > 0:
            r1 = rng.random((n, d))
            r2 = rng.random((n, d))
            g = tracker.run.best_x
            v = w * v + c1 * r1 * (pbest - x) + c2 * r2 * (g - x)
            v = np.clip(v, -width, width)
            x = np.clip(x + v, lo, hi)
        fs = gateway.batch(x)
        better = fs < pbest_f
        pbest[better], pbest_f[better] = x[better], fs[better]
        tracker.record(it, x, fs)
    return tracker.run


def random_search(fitness_fn, cfg: OptimizerConfig):
    """Uniform i.i.d. samples, ``population`` per iteration."""
    gateway = as_gateway(fitness_fn)
    rng = np.random.default_rng(cfg.seed)
    tracker = RunTracker("rs", gateway)
    for it in range(cfg.iterations):
        xs = rng.uniform(cfg.lower, cfg.upper, size=(cfg.population, cfg.dim))
        tracker.record(it, xs, gateway.batch(xs))
    return tracker.run
