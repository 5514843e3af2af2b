"""Gaussian-process Bayesian optimization with expected improvement.

The GP uses a squared-exponential kernel with fixed length scale and noise
on standardized fitness values; there is no hyperparameter fitting. EI is
maximized over a seeded candidate pool: half uniform over the bounds, half
Gaussian perturbations of the incumbent at several scales.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError
from scipy.stats import norm

from ..errors import GPSolveFailed
from .common import OptimizerConfig, RunTracker, as_gateway

_JITTERS = (0.0, 1e-10, 1e-8, 1e-6, 1e-4)
_LOCAL_SCALES = (0.3, 0.1, 0.03, 0.01, 0.003)


def se_kernel(a, b, length_scale):
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    d2 = np.sum(a * a, 1)[:, None] + np.sum(b * b, 1)[None, :] - 2.0 * a @ b.T
    return np.exp(-0.5 * np.maximum(d2, 0.0) / length_scale ** 2)


class GaussianProcess:
    """Zero-mean GP posterior over standardized targets."""

    def __init__(self, X, y, length_scale=1.0, noise=1e-2):
        self.X = np.atleast_2d(np.asarray(X, float))
        y = np.asarray(y, float)
        self.y_mean = float(np.mean(y))
        self.y_std = float(np.std(y)) or 1.0
        self.z = (y - self.y_mean) / self.y_std
        self.length_scale = length_scale
        K = se_kernel(self.X, self.X, length_scale) + noise * np.eye(len(self.X))
        for jitter in _JITTERS:
            try:
                self._chol = cho_factor(K + jitter * np.eye(len(K)), lower=True)
                break
            except LinAlgError:
                continue
        else:
            raise GPSolveFailed("kernel matrix singular after jitter escalation")
        self._alpha = cho_solve(self._chol, self.z)

    def predict(self, Xs):
        """Posterior mean and standard deviation in standardized units."""
        Ks = se_kernel(Xs, self.X, self.length_scale)
        mu = Ks @ self._alpha
        v = cho_solve(self._chol, Ks.T)
        var = np.maximum(1.0 - np.einsum("ij,ji->i", Ks, v), 1e-18)
        return mu, np.sqrt(var)


def expected_improvement(mu, sd, best):
    """EI for minimization of a standardized target below ``best``."""
    imp = best - mu
    z = imp / sd
    return imp * norm.cdf(z) + sd * norm.pdf(z)


def _candidate_pool(rng, cfg, incumbent):
    n = cfg.bo_pool
    n_local = n // 2
    uniform = rng.uniform(cfg.lower, cfg.upper, size=(n - n_local, cfg.dim))
    width = cfg.upper - cfg.lower
    scales = np.repeat(_LOCAL_SCALES, -(-n_local // len(_LOCAL_SCALES)))[:n_local]
    local = incumbent + rng.standard_normal((n_local, cfg.dim)) * (scales[:, None] * width)
    return np.vstack([uniform, np.clip(local, cfg.lower, cfg.upper)])


def bo_minimize(fitness_fn, cfg: OptimizerConfig):
    """Sequential GP-EI; the first iteration is a uniform random design.

    Each later iteration makes ``population`` sequential proposals, refitting
    the GP after every evaluation. A singular kernel falls back to a uniform
    random proposal for that step.
    """
    gateway = as_gateway(fitness_fn)
    rng = np.random.default_rng(cfg.seed)
    tracker = RunTracker("bo", gateway)
    X_obs = rng.uniform(cfg.lower, cfg.upper, size=(cfg.population, cfg.dim))
    y_obs = gateway.batch(X_obs)
    tracker.record(0, X_obs, y_obs)
    X_obs, y_obs = list(X_obs), list(y_obs)
    for it in range(1, cfg.iterations):
        xs, fs = [], []
        for _ in range(cfg.population):
            x = propose(rng, cfg, np.array(X_obs), np.array(y_obs))
            f = gateway(x)
            X_obs.append(x)
            y_obs.append(f)
            xs.append(x)
            fs.append(f)
        tracker.record(it, np.array(xs), np.array(fs))
    return tracker.run


def propose(rng, cfg: OptimizerConfig, X_obs, y_obs):
    incumbent = X_obs[int(np.argmin(y_obs))]
    pool = _candidate_pool(rng, cfg, incumbent)
    try:
        gp = GaussianProcess(X_obs, y_obs, cfg.bo_length_scale, cfg.bo_noise)
    except GPSolveFailed:
        return rng.uniform(cfg.lower, cfg.upper)
    mu, sd = gp.predict(pool)
    # plug-in incumbent: the smoothed mean at observed inputs, not the raw minimum
    best = float(np.min(gp.predict(X_obs)[0]))
    ei = expected_improvement(mu, sd, best)
    return pool[int(np.argmax(ei))]
