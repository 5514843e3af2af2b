"""Goal error, control confidence and the free-energy fitness of a rollout.

Per step the fitness adds the precision-weighted goal error
``E(t) = 0.5 * p_x * |X(t) - X_goal|^2`` and ``-0.5 * log|Pi_t|`` where

    Pi_t = J_t^T J_t + sum_k w_k(t) * d2X_k/dU2,   w(t) = X(t) - X_goal,

with ``J_t = dX/dU`` and the second derivative estimated from the rollout
itself. The ``p_x`` factor inside ``Pi`` only adds a constant to the log
determinant and is dropped.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import RolloutTooShort
from .sim import Rollout

GRADIENT_MODES = ("trajectory", "perturbation")


@dataclass(frozen=True)
class ObjectiveConfig:
    p_x: float = 20.0
    goal: tuple[float, float] = (0.0, 1.5)
    eps_u: float = 1e-3
    lambda_reg: float = 1e-6
    gradient_mode: str = "trajectory"

    def __post_init__(self):
        object.__setattr__(self, "goal", tuple(float(g) for g in self.goal))
        if not self.p_x >= 0:
            raise ValueError("p_x must be non-negative")
        if not self.eps_u > 0:
            raise ValueError("eps_u must be positive")
        if not self.lambda_reg > 0:
            raise ValueError("lambda_reg must be positive")
        if self.gradient_mode not in GRADIENT_MODES:
            raise ValueError(f"gradient_mode must be one of {GRADIENT_MODES}")

    def to_dict(self) -> dict:
        return {"p_x": self.p_x, "goal": list(self.goal), "eps_u": self.eps_u,
                "lambda_reg": self.lambda_reg, "gradient_mode": self.gradient_mode}

    @classmethod
    def from_dict(cls, data: dict) -> "ObjectiveConfig":
        unknown = set(data) - set(cls().to_dict())
        if unknown:
            raise ValueError(f"unknown objective keys: {sorted(unknown)}")
        kw = dict(data)
        if "goal" in kw:
            kw["goal"] = tuple(kw["goal"])
        return cls(**kw)


@dataclass(frozen=True)
class FitnessReport:
    """Totals of one evaluated rollout.

    ``per_step`` columns are ``(t, E, logdet_pi)``; ``logdet_pi`` is NaN on
    the first two steps where no second difference exists.
    """

    goal_error_total: float
    confidence_total: float
    free_energy: float
    per_step: np.ndarray | None = None

    def decomposition_csv(self) -> str:
        if self.per_step is None:
            raise ValueError("report was built without per-step data")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "E", "logdetPi", "F_cum"])
        f_cum = 0.0
        for t, e, ld in self.per_step:
            f_cum += e - (0.5 * ld if np.isfinite(ld) else 0.0)
            w.writerow([repr(float(t)), repr(float(e)), repr(float(ld)), repr(float(f_cum))])
        return buf.getvalue()


def internal_energy(X, cfg: ObjectiveConfig):
    """``0.5 * p_x * |X - goal|^2``; vectorizes over leading axes of ``X``."""
    d = np.asarray(X, float) - np.asarray(cfg.goal)
    return 0.5 * cfg.p_x * np.sum(d * d, axis=-1)


def clamp_magnitude(u, eps):
    """``sign(u) * max(|u|, eps)`` with ``sign(0) = +1``."""
    u = np.asarray(u, float)
    return np.where(u >= 0.0, 1.0, -1.0) * np.maximum(np.abs(u), eps)


def trajectory_gradients(rollout: Rollout | tuple, cfg: ObjectiveConfig):
    """Along-trajectory quotient estimates of dX/dU and the weighted d2X/dU2.

    ``J_t[k, j] = dX_k(t) / clamp(dU_j(t))`` from consecutive samples and
    ``H_t[i, j] = sum_k w_k(t) (J_t[k, i] - J_{t-1}[k, i]) / clamp(dU_j(t))``.

    Returns ``(steps, J, H)`` for ``steps = 2..T`` with shapes ``(n,)``,
    ``(n, d_x, d_u)`` and ``(n, d_u, d_u)``.
    """
    X, U = _series(rollout)
    if len(X) < 3:
        raise RolloutTooShort(f"need >= 3 samples, got {len(X)}")
    dX = np.diff(X, axis=0)
    dU = clamp_magnitude(np.diff(U, axis=0), cfg.eps_u)
    J = dX[:, :, None] / dU[:, None, :]          # J[t-1] is J_t for t = 1..T
    w = X[2:] - np.asarray(cfg.goal)
    dJ = J[1:] - J[:-1]
    H = np.einsum("tk,tki->ti", w, dJ)[:, :, None] / dU[1:, None, :]
    steps = np.arange(2, len(X))
    return steps, J[1:], H


def perturbation_jacobian(
    plant: Callable[[np.ndarray], np.ndarray],
    U: np.ndarray,
    t: int,
    delta: float = 1e-4,
) -> np.ndarray:
    """Central-difference ``dX(t+1)/dU(t)`` by re-running ``plant``.

    ``plant`` maps a full control series ``(T+1, d_u)`` to the state series
    ``(T+1, d_x)``. Only usable where the controls are an input, so this
    serves as the validation route for the quotient estimator.
    """
    U = np.asarray(U, float)
    cols = []
    for j in range(U.shape[1]):
        up, dn = U.copy(), U.copy()
        up[t, j] += delta
        dn[t, j] -= delta
        cols.append((plant(up)[t + 1] - plant(dn)[t + 1]) / (2.0 * delta))
    return np.column_stack(cols)


def perturbation_gradients(plant, U, cfg: ObjectiveConfig, delta: float = 1e-4):
    """Perturbation-route counterpart of :func:`trajectory_gradients`.

    ``J_t`` is the sensitivity of ``X(t)`` to ``U(t-1)``; ``H_t`` contracts
    the goal-offset weights with a finite difference of ``J`` in each
    control direction.
    """
    U = np.asarray(U, float)
    X = plant(U)
    if len(X) < 3:
        raise RolloutTooShort(f"need >= 3 samples, got {len(X)}")
    steps = np.arange(2, len(X))
    Js, Hs = [], []
    d_u = U.shape[1]
    for t in steps:
        J = perturbation_jacobian(plant, U, t - 1, delta)
        w = X[t] - np.asarray(cfg.goal)
        H = np.zeros((d_u, d_u))
        for j in range(d_u):
            up, dn = U.copy(), U.copy()
            up[t - 1, j] += delta
            dn[t - 1, j] -= delta
            dJ = (perturbation_jacobian(plant, up, t - 1, delta)
                  - perturbation_jacobian(plant, dn, t - 1, delta)) / (2.0 * delta)
            H[:, j] = w @ dJ
        Js.append(J)
        Hs.append(H)
    return steps, np.array(Js), np.array(Hs)


def confidence_logdet(J, H, cfg: ObjectiveConfig):
    """Stabilized ``log|det(J^T J + H)|``; batched over leading axes.

    The matrix is symmetrized and each eigenvalue magnitude is floored at
    ``lambda_reg`` before taking logs, so an indefinite second-order term is
    kept instead of being projected away.
    """
    J = np.asarray(J, float)
    M = np.swapaxes(J, -1, -2) @ J + np.asarray(H, float)
    M = 0.5 * (M + np.swapaxes(M, -1, -2))
    lam = np.linalg.eigvalsh(M)
    return np.sum(np.log(np.maximum(np.abs(lam), cfg.lambda_reg)), axis=-1)


def free_energy(rollout: Rollout | tuple, cfg: ObjectiveConfig,
                per_step: bool = False, plant=None) -> FitnessReport:
    """Fitness of one rollout: summed goal error plus negative half log|Pi|."""
    X, U = _series(rollout)
    if cfg.gradient_mode == "perturbation":
        if plant is None:
            raise ValueError("perturbation mode needs a plant callable")
        steps, J, H = perturbation_gradients(plant, U, cfg)
    else:
        steps, J, H = trajectory_gradients((X, U), cfg)
    E = internal_energy(X, cfg)
    logdet = confidence_logdet(J, H, cfg)
    goal_total = float(np.sum(E))
    conf_total = float(-0.5 * np.sum(logdet))
    table = None
    if per_step:
        ld = np.full(len(X), np.nan)
        ld[steps] = logdet
        times = rollout.times if isinstance(rollout, Rollout) else np.arange(len(X))
        table = np.column_stack([times, E, ld])
    return FitnessReport(goal_total, conf_total, goal_total + conf_total, table)


def _series(rollout):
    if isinstance(rollout, Rollout):
        return rollout.X, rollout.U
    X, U = rollout
    return np.asarray(X, float), np.asarray(U, float)
