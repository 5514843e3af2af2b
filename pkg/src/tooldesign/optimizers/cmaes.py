"""(mu/mu_w, lambda) CMA-ES with cumulative step-size adaptation.

Follows the standard parameter settings: log-rank recombination weights,
rank-one plus rank-mu covariance update and the ``h_sigma`` stall guard.
Out-of-bounds samples are redrawn and finally clipped.
"""
from __future__ import annotations

import math

import numpy as np

from .common import OptimizerConfig, RunTracker, as_gateway

MAX_RESAMPLE = 100
EIG_FLOOR = 1e-12


class CMAES:
    def __init__(self, cfg: OptimizerConfig):
        n = cfg.dim
        lam = cfg.population
        if lam < 2:
            raise ValueError("CMA-ES needs a population of at least 2")
        self.cfg = cfg
        self.n, self.lam = n, lam
        self.mu = lam // 2
        w = math.log((lam + 1) / 2) - np.log(np.arange(1, self.mu + 1))
        self.weights = w / w.sum()
        self.mueff = 1.0 / np.sum(self.weights ** 2)

        self.cc = (4 + self.mueff / n) / (n + 4 + 2 * self.mueff / n)
        self.cs = (self.mueff + 2) / (n + self.mueff + 5)
        self.c1 = 2 / ((n + 1.3) ** 2 + self.mueff)
        self.cmu = min(1 - self.c1,
                       2 * (self.mueff - 2 + 1 / self.mueff) / ((n + 2) ** 2 + self.mueff))
        self.damps = 1 + 2 * max(0.0, math.sqrt((self.mueff - 1) / (n + 1)) - 1) + self.cs
        self.chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n ** 2))

        self.mean = np.array(cfg.x0, dtype=float)
        self.sigma = float(cfg.sigma0)
        self.C = np.eye(n)
        self.B = np.eye(n)
        self.D = np.ones(n)
        self.pc = np.zeros(n)
        self.ps = np.zeros(n)
        self.generation = 0
        self.rng = np.random.default_rng(cfg.seed)

    def ask(self) -> np.ndarray:
        lo, hi = self.cfg.lower, self.cfg.upper
        xs = np.empty((self.lam, self.n))
        for k in range(self.lam):
            for _ in range(MAX_RESAMPLE):
                z = self.rng.standard_normal(self.n)
                x = self.mean + self.sigma * (self.B @ (self.D * z))
                if np.all(x >= lo) and np.all(x <= hi):
                    break
            xs[k] = np.clip(x, lo, hi)
        return xs

    def tell(self, xs: np.ndarray, fs: np.ndarray) -> None:
        order = np.argsort(fs, kind="stable")
        sel = xs[order[: self.mu]]
        old = self.mean
        self.mean = self.weights @ sel
        y = (sel - old) / self.sigma
        y_w = (self.mean - old) / self.sigma

        inv_sqrt = self.B @ np.diag(1.0 / self.D) @ self.B.T
        self.ps = (1 - self.cs) * self.ps + math.sqrt(self.cs * (2 - self.cs) * self.mueff) * (inv_sqrt @ y_w)
        self.generation += 1
        ps_norm = np.linalg.norm(self.ps)
        hsig = ps_norm / math.sqrt(1 - (1 - self.cs) ** (2 * self.generation)) / self.chi_n < 1.4 + 2 / (self.n + 1)
        self.pc = (1 - self.cc) * self.pc + hsig * math.sqrt(self.cc * (2 - self.cc) * self.mueff) * y_w

        rank_one = np.outer(self.pc, self.pc)
        rank_mu = (y.T * self.weights) @ y
        delta_h = (1 - hsig) * self.cc * (2 - self.cc)
        self.C = ((1 - self.c1 - self.cmu) * self.C
                  + self.c1 * (rank_one + delta_h * self.C)
                  + self.cmu * rank_mu)
        self.sigma *= math.exp((self.cs / self.damps) * (ps_norm / self.chi_n - 1))
        self._repair()

    def _repair(self) -> None:
        C = 0.5 * (self.C + self.C.T)
        vals, vecs = np.linalg.eigh(C)
        vals = np.maximum(vals, EIG_FLOOR)
        self.C = (vecs * vals) @ vecs.T
        self.C = 0.5 * (self.C + self.C.T)
        self.B, self.D = vecs, np.sqrt(vals)
        width = float(np.max(self.cfg.upper - self.cfg.lower))
        if not math.isfinite(self.sigma):
            self.sigma = width
        self.sigma = min(self.sigma, 10.0 * width)


def cmaes_minimize(fitness_fn, cfg: OptimizerConfig):
    """Run ``cfg.iterations`` generations of CMA-ES and return the run log."""
    gateway = as_gateway(fitness_fn)
    es = CMAES(cfg)
    tracker = RunTracker("cmaes", gateway)
    for it in range(cfg.iterations):
        xs = es.ask()
        fs = gateway.batch(xs)
        es.tell(xs, fs)
        tracker.record(it, xs, fs)
    tracker.run.state = es
    return tracker.run
