"""Planar push/pull rollouts of a kinematic tool against a sliding box.

The grasp point follows the piecewise-linear plan at constant speed with a
fixed yaw; the tool never deflects. Every tool sample inside the box
footprint pushes the box out along the shallower face with a penalty
force ``k * d * (1 + alpha * dd/dt)`` (depth ``d``, Hunt-Crossley damping
``alpha = contact_damping``; ``alpha = 0`` is a pure spring). Contacts
never pull. The damper is solved implicitly per axis, then Coulomb
friction is applied to the box velocity; both use ``substeps``
sub-intervals of ``dt``. The log keeps one sample per ``dt`` with
step-averaged forces.

``U`` is the wrench at the grasp point: tool inertia ``m_tool * a_ee`` (and
its moment about the grasp point) minus the contact force and moment the
tool applies to the box.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .geometry import ToolShape


@dataclass(frozen=True)
class PlanSpec:
    """Grasp-point waypoints (m), travel speed (m/s) and constant yaw (rad)."""

    waypoints: tuple[tuple[float, float], ...]
    speed: float = 0.5
    yaw: float = 0.0

    def __post_init__(self):
        wps = tuple((float(x), float(y)) for x, y in self.waypoints)
        object.__setattr__(self, "waypoints", wps)
        if len(wps) < 2:
            raise ValueError("a plan needs at least two waypoints")
        for a, b in zip(wps[:-1], wps[1:]):
            if a == b:
                raise ValueError(f"zero-length plan segment at {a}")
        if not self.speed > 0:
            raise ValueError("plan speed must be positive")

    @property
    def segment_lengths(self) -> np.ndarray:
        w = np.asarray(self.waypoints)
        d = np.diff(w, axis=0)
        return np.hypot(d[:, 0], d[:, 1])

    def to_dict(self) -> dict:
        return {"waypoints": [list(w) for w in self.waypoints],
                "speed": self.speed, "yaw": self.yaw}

    @classmethod
    def from_dict(cls, data: dict) -> "PlanSpec":
        unknown = set(data) - {"waypoints", "speed", "yaw"}
        if unknown:
            raise ValueError(f"unknown plan keys: {sorted(unknown)}")
        return cls(waypoints=tuple(tuple(w) for w in data["waypoints"]),
                   speed=float(data.get("speed", 0.5)),
                   yaw=float(data.get("yaw", 0.0)))


def default_plan(q_a: float = 0.9, q_b: float = 0.3, speed: float = 0.5,
                 yaw: float = 0.0) -> PlanSpec:
    """Lift-arrival (q_a, 0), sweep to (0, q_a), pull back to (0, q_b)."""
    return PlanSpec(waypoints=((q_a, 0.0), (0.0, q_a), (0.0, q_b)), speed=speed, yaw=yaw)


@dataclass(frozen=True)
class WorldConfig:
    box_half_extents: tuple[float, float] = (0.05, 0.05)
    box_mass: float = 0.1
    box_start: tuple[float, float] = (0.6, 0.6)
    goal: tuple[float, float] = (0.0, 1.5)
    friction: float = 0.5
    gravity: float = 9.81
    contact_stiffness: float = 5000.0
    contact_damping: float = 20.0
    dt: float = 0.01
    substeps: int = 50

    def __post_init__(self):
        for name in ("box_half_extents", "box_start", "goal"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if not self.box_mass > 0:
            raise ValueError("box_mass must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.contact_stiffness > 0:
            raise ValueError("contact_stiffness must be positive")
        if not self.contact_damping >= 0:
            raise ValueError("contact_damping must be non-negative")
        if not self.friction >= 0:
            raise ValueError("friction must be non-negative")
        if int(self.substeps) < 1:
            raise ValueError("substeps must be >= 1")
        if min(self.box_half_extents) <= 0:
            raise ValueError("box_half_extents must be positive")

    def with_mass(self, mass: float) -> "WorldConfig":
        return replace(self, box_mass=float(mass))

    def to_dict(self) -> dict:
        return {
            "box_half_extents": list(self.box_half_extents),
            "box_mass": self.box_mass,
            "box_start": list(self.box_start),
            "goal": list(self.goal),
            "friction": self.friction,
            "gravity": self.gravity,
            "contact_stiffness": self.contact_stiffness,
            "contact_damping": self.contact_damping,
            "dt": self.dt,
            "substeps": self.substeps,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WorldConfig":
        known = {k: data[k] for k in cls().to_dict() if k in data}
        unknown = set(data) - set(known)
        if unknown:
            raise ValueError(f"unknown world keys: {sorted(unknown)}")
        for k in ("box_half_extents", "box_start", "goal"):
            if k in known:
                known[k] = tuple(known[k])
        return cls(**known)


@dataclass(frozen=True)
class Rollout:
    """One simulated tool use, sampled every ``dt`` (length T + 1).

    ``U = inertial + reaction`` with columns (F_x, F_y, tau_z); ``reaction``
    is the negated contact force and moment. ``contact_force`` and
    ``friction_force`` are the step-averaged forces on the box, so
    ``m * (V[t] - V[t-1]) == (contact_force[t] + friction_force[t]) * dt``.
    """

    times: np.ndarray
    X: np.ndarray
    U: np.ndarray
    ee: np.ndarray
    contact_flags: np.ndarray
    V: np.ndarray = field(repr=False)
    contact_force: np.ndarray = field(repr=False)
    contact_torque: np.ndarray = field(repr=False)
    friction_force: np.ndarray = field(repr=False)
    inertial: np.ndarray = field(repr=False)
    reaction: np.ndarray = field(repr=False)
    box_mass: float = 0.0

    def __len__(self):
        return len(self.times)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "y", "ee_x", "ee_y", "u_fx", "u_fy", "u_tz", "contact"])
        for i in range(len(self.times)):
            w.writerow([
                repr(float(self.times[i])),
                repr(float(self.X[i, 0])), repr(float(self.X[i, 1])),
                repr(float(self.ee[i, 0])), repr(float(self.ee[i, 1])),
                repr(float(self.U[i, 0])), repr(float(self.U[i, 1])),
                repr(float(self.U[i, 2])),
                int(bool(self.contact_flags[i])),
            ])
        return buf.getvalue()


def required_duration(plan: PlanSpec) -> float:
    """Seconds needed to traverse the plan at its speed."""
    return float(plan.segment_lengths.sum()) / plan.speed


def n_steps(plan: PlanSpec, dt: float) -> int:
    return max(1, math.ceil(required_duration(plan) / dt - 1e-9))


def plan_position(plan: PlanSpec, times: np.ndarray) -> np.ndarray:
    """Grasp-point positions at ``times``, held at the last waypoint afterwards."""
    w = np.asarray(plan.waypoints)
    seg = plan.segment_lengths
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    s = np.clip(np.asarray(times, float) * plan.speed, 0.0, cum[-1])
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
    frac = (s - cum[idx]) / seg[idx]
    return w[idx] + frac[:, None] * (w[idx + 1] - w[idx])


@njit(cache=True)
def _axis_velocity(v, u, m, h, s_pos, c_pos, s_neg, c_neg):
    """Implicit velocity update along one axis with non-adhesive dampers.

    ``s_pos``/``c_pos`` are the spring force and damping of contacts pushing
    in +axis, ``s_neg``/``c_neg`` those pushing in -axis; ``u`` is the tool
    velocity. A group whose force would pull is dropped and the update redone.
    """
    use_pos = s_pos > 0.0
    use_neg = s_neg > 0.0
    if not (use_pos or use_neg):
        return v
    for _ in range(3):
        num = m * v
        den = m
        if use_pos:
            num += h * (s_pos + c_pos * u)
            den += h * c_pos
        if use_neg:
            num += h * (c_neg * u - s_neg)
            den += h * c_neg
        vn = num / den
        if use_pos and s_pos + c_pos * (u - vn) < 0.0:
            use_pos = False
        elif use_neg and s_neg - c_neg * (u - vn) < 0.0:
            use_neg = False
        else:
            return vn
    return v if not (use_pos or use_neg) else vn


@njit(cache=True)
def _box_kernel(q, ee_sub, n_sub, h, box0, half, mass, mu, g, k, c, reach):
    n_steps = (ee_sub.shape[0] - 1) // n_sub
    X = np.zeros((n_steps + 1, 2))
    V = np.zeros((n_steps + 1, 2))
    Fc = np.zeros((n_steps + 1, 2))
    Tc = np.zeros(n_steps + 1)
    Ff = np.zeros((n_steps + 1, 2))
    flags = np.zeros(n_steps + 1, dtype=np.bool_)
    cx, cy = box0[0], box0[1]
    vx, vy = 0.0, 0.0
    hx, hy = half[0], half[1]
    X[0, 0], X[0, 1] = cx, cy
    stick = mu * g * h
    n_pts = q.shape[0]
    for t in range(1, n_steps + 1):
        sfx, sfy, stz, sffx, sffy = 0.0, 0.0, 0.0, 0.0, 0.0
        touched = False
        for s in range(n_sub):
            i0 = (t - 1) * n_sub + s
            ex = ee_sub[i0 + 1, 0]
            ey = ee_sub[i0 + 1, 1]
            ux = (ee_sub[i0 + 1, 0] - ee_sub[i0, 0]) / h
            uy = (ee_sub[i0 + 1, 1] - ee_sub[i0, 1]) / h
            # per axis and push direction: spring force, damping, and their
            # moments about the grasp point (lever arm across the axis)
            sxp, cxp, sxn, cxn = 0.0, 0.0, 0.0, 0.0
            syp, cyp, syn, cyn = 0.0, 0.0, 0.0, 0.0
            mxp, dxp, mxn, dxn = 0.0, 0.0, 0.0, 0.0
            myp, dyp, myn, dyn = 0.0, 0.0, 0.0, 0.0
            if abs(ex - cx) <= reach and abs(ey - cy) <= reach:
                for j in range(n_pts):
                    dx = ex + q[j, 0] - cx
                    if dx >= hx or dx <= -hx:
                        continue
                    dy = ey + q[j, 1] - cy
                    if dy >= hy or dy <= -hy:
                        continue
                    px = hx - abs(dx)
                    py = hy - abs(dy)
                    touched = True
                    if px < py:
                        if dx >= 0.0:
                            sxn += k * px
                            cxn += c * k * px
                            mxn += q[j, 1] * k * px
                            dxn += q[j, 1] * c * k * px
                        else:
                            sxp += k * px
                            cxp += c * k * px
                            mxp += q[j, 1] * k * px
                            dxp += q[j, 1] * c * k * px
                    elif dy >= 0.0:
                        syn += k * py
                        cyn += c * k * py
                        myn += q[j, 0] * k * py
                        dyn += q[j, 0] * c * k * py
                    else:
                        syp += k * py
                        cyp += c * k * py
                        myp += q[j, 0] * k * py
                        dyp += q[j, 0] * c * k * py
            nvx = _axis_velocity(vx, ux, mass, h, sxp, cxp, sxn, cxn)
            nvy = _axis_velocity(vy, uy, mass, h, syp, cyp, syn, cyn)
            rx = ux - nvx
            ry = uy - nvy
            tz = 0.0
            if sxp + cxp * rx > 0.0:
                tz -= mxp + dxp * rx
            if sxn - cxn * rx > 0.0:
                tz -= -(mxn - dxn * rx)
            if syp + cyp * ry > 0.0:
                tz += myp + dyp * ry
            if syn - cyn * ry > 0.0:
                tz += -(myn - dyn * ry)
            sp = math.sqrt(nvx * nvx + nvy * nvy)
            if sp <= stick:
                fvx, fvy = 0.0, 0.0
            else:
                r = 1.0 - stick / sp
                fvx, fvy = nvx * r, nvy * r
            sffx += mass * (fvx - nvx) / h
            sffy += mass * (fvy - nvy) / h
            # the implicit solve defines the contact force exactly
            fx = mass * (nvx - vx) / h
            fy = mass * (nvy - vy) / h
            vx, vy = fvx, fvy
            cx += vx * h
            cy += vy * h
            sfx += fx
            sfy += fy
            stz += tz
        X[t, 0], X[t, 1] = cx, cy
        V[t, 0], V[t, 1] = vx, vy
        Fc[t, 0], Fc[t, 1] = sfx / n_sub, sfy / n_sub
        Tc[t] = stz / n_sub
        Ff[t, 0], Ff[t, 1] = sffx / n_sub, sffy / n_sub
        flags[t] = touched
    return X, V, Fc, Tc, Ff, flags


def _rotation(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s], [s, c]])


def simulate(shape: ToolShape, plan: PlanSpec, world: WorldConfig) -> Rollout:
    """Run the fixed plan with ``shape`` held at the grasp point."""
    dt = world.dt
    n_sub = int(world.substeps)
    T = n_steps(plan, dt)
    h = dt / n_sub
    rot = _rotation(plan.yaw)
    q = np.ascontiguousarray(shape.points @ rot.T)
    sub_times = np.arange(T * n_sub + 1) * h
    ee_sub = np.ascontiguousarray(plan_position(plan, sub_times))
    reach = float(np.hypot(q[:, 0], q[:, 1]).max() + max(world.box_half_extents))

    X, V, Fc, Tc, Ff, flags = _box_kernel(
        q, ee_sub, n_sub, h,
        np.asarray(world.box_start, float), np.asarray(world.box_half_extents, float),
        float(world.box_mass), float(world.friction), float(world.gravity),
        float(world.contact_stiffness), float(world.contact_damping), reach,
    )

    times = np.arange(T + 1) * dt
    ee = ee_sub[::n_sub].copy()
    vel = np.zeros_like(ee)
    vel[1:] = np.diff(ee, axis=0) / dt
    acc = np.zeros_like(ee)
    acc[1:] = np.diff(vel, axis=0) / dt
    com = rot @ shape.com
    inertial = np.zeros((T + 1, 3))
    inertial[:, :2] = shape.mass * acc
    inertial[:, 2] = shape.mass * (com[0] * acc[:, 1] - com[1] * acc[:, 0])
    reaction = np.column_stack([-Fc, -Tc])
    U = inertial + reaction
    return Rollout(
        times=times, X=X, U=U, ee=ee, contact_flags=flags, V=V,
        contact_force=Fc, contact_torque=Tc, friction_force=Ff,
        inertial=inertial, reaction=reaction, box_mass=float(world.box_mass),
    )
