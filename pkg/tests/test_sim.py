from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from tooldesign.geometry import ToolParams, build_shape
from tooldesign.sim import (
    _axis_velocity, PlanSpec, WorldConfig, default_plan, n_steps, plan_position, required_duration, simulate,
)

MASSES = (0.1, 0.3, 0.5, 0.7, 0.9)


@pytest.fixture(scope="module")
def straight():
    return build_shape(ToolParams((0.0, 0.0, 0.0)))


@pytest.fixture(scope="module")
def hooked():
    return build_shape(ToolParams((1.8, 3.0, 4.9)))


@pytest.fixture(scope="module")
def nominal(straight):
    return simulate(straight, default_plan(), WorldConfig())


def test_required_duration_single_segment():
    assert required_duration(PlanSpec(((0, 0), (1, 0)), speed=0.5)) == 2.0


def test_required_duration_default_plan():
    plan = default_plan()
    assert required_duration(plan) == pytest.approx((0.9 * math.sqrt(2) + 0.6) / 0.5, abs=1e-12)


def test_plan_validation():
    with pytest.raises(ValueError):
        PlanSpec(((0, 0), (1, 0), (1, 0)))
    with pytest.raises(ValueError):
        PlanSpec(((0, 0),))
    with pytest.raises(ValueError):
        PlanSpec(((0, 0), (1, 0)), speed=0.0)
    with pytest.raises(ValueError):
        PlanSpec.from_dict({"waypoints": [[0, 0], [1, 0]], "sped": 1.0})


def test_plan_position_endpoints():
    plan = default_plan()
    T = required_duration(plan)
    pos = plan_position(plan, np.array([0.0, 0.9 * math.sqrt(2) / 0.5, T, T + 1.0]))
    np.testing.assert_allclose(pos, [[0.9, 0.0], [0.0, 0.9], [0.0, 0.3], [0.0, 0.3]], atol=1e-12)


def test_world_validation_and_round_trip():
    for bad in ({"box_mass": 0.0}, {"dt": 0.0}, {"contact_stiffness": -1.0},
                {"friction": -0.1}, {"contact_damping": -1.0}, {"substeps": 0}):
        with pytest.raises(ValueError):
            WorldConfig(**bad)
    w = WorldConfig(box_mass=0.3, goal=(0.2, 1.0))
    assert WorldConfig.from_dict(w.to_dict()) == w
    with pytest.raises(ValueError):
        WorldConfig.from_dict({"box_mas": 0.3})


def test_rollout_shapes(nominal):
    T = n_steps(default_plan(), 0.01)
    for arr in (nominal.times, nominal.X, nominal.U, nominal.ee, nominal.contact_flags):
        assert len(arr) == T + 1
    assert tuple(nominal.X[0]) == WorldConfig().box_start
    assert np.all(np.isfinite(nominal.U))
    np.testing.assert_allclose(nominal.ee[-1], [0.0, 0.3], atol=1e-12)


def test_far_box_never_moves(straight):
    world = WorldConfig(box_start=(10.6, 10.6))
    r = simulate(straight, default_plan(), world)
    assert np.all(r.X == np.array(world.box_start))
    assert not r.contact_flags.any()
    assert np.all(r.contact_force == 0.0)
    assert np.array_equal(r.U, r.inertial)


def test_huge_friction_pins_box(straight):
    r = simulate(straight, default_plan(), WorldConfig(friction=1e6))
    assert r.contact_flags.any()
    assert np.all(r.X == np.array(WorldConfig().box_start))


def test_straight_tool_pushes_box(nominal):
    disp = nominal.X - nominal.X[0]
    assert np.linalg.norm(disp[-1]) > 0.3
    # pushed along +y by the bar; the y coordinate never goes back
    assert np.all(np.diff(nominal.X[:, 1]) >= 0.0)
    assert nominal.contact_flags.sum() > 50


def test_momentum_identity(nominal, hooked):
    for r in (nominal, simulate(hooked, default_plan(), WorldConfig())):
        lhs = r.box_mass * np.diff(r.V, axis=0)
        rhs = (r.contact_force[1:] + r.friction_force[1:]) * 0.01
        assert np.abs(lhs - rhs).max() < 1e-6


def test_third_law_log_identity_exact(nominal, hooked):
    for r in (nominal, simulate(hooked, default_plan(), WorldConfig())):
        assert np.array_equal(r.reaction[:, :2], -r.contact_force)
        assert np.array_equal(r.reaction[:, 2], -r.contact_torque)
        assert np.array_equal(r.U, r.inertial + r.reaction)


def test_moment_lever_arm(nominal):
    # straight bar along +x: the moment is F_y times a lever arm under the box
    arm = nominal.X[:, 0] - nominal.ee[:, 0]
    fy = nominal.contact_force[:, 1]
    excess = np.abs(nominal.contact_torque - fy * arm) - np.abs(fy) * 0.05
    assert excess.max() <= 1e-9


def test_speed_non_increasing_without_contact(nominal, hooked):
    for r in (nominal, simulate(hooked, default_plan(), WorldConfig())):
        speed = np.hypot(r.V[:, 0], r.V[:, 1])
        free = ~r.contact_flags[1:]
        assert np.all(np.diff(speed)[free] <= 0.0)


def test_mass_monotonicity(straight):
    disp = [np.linalg.norm(r.X[-1] - r.X[0]) for r in
            (simulate(straight, default_plan(), WorldConfig(box_mass=m)) for m in MASSES)]
    assert all(b <= a for a, b in zip(disp, disp[1:])), disp


@pytest.mark.parametrize("coeffs", [(0, 0, 0), (0.5, 1.0, -0.5), (1.8, 3.0, 4.9)])
def test_grid_refinement(coeffs):
    shape = build_shape(ToolParams(coeffs))
    coarse = simulate(shape, default_plan(), WorldConfig())
    fine = simulate(shape, default_plan(), WorldConfig(dt=0.005))
    assert np.linalg.norm(coarse.X[-1] - fine.X[-1]) < 5e-3


def test_deterministic(hooked):
    a = simulate(hooked, default_plan(), WorldConfig())
    b = simulate(hooked, default_plan(), WorldConfig())
    for name in ("X", "U", "V", "contact_force", "contact_torque", "friction_force"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()


def test_pure_spring_contact_still_conserves_momentum(straight):
    r = simulate(straight, default_plan(), WorldConfig(contact_damping=0.0))
    lhs = r.box_mass * np.diff(r.V, axis=0)
    rhs = (r.contact_force[1:] + r.friction_force[1:]) * 0.01
    assert np.abs(lhs - rhs).max() < 1e-6


def test_no_contact_force_without_contact(hooked):
    r = simulate(hooked, default_plan(), WorldConfig())
    assert np.all(r.contact_force[~r.contact_flags] == 0.0)
    assert np.all(r.contact_torque[~r.contact_flags] == 0.0)


def test_axis_solver_spring_and_damper():
    m, h, k_sum, c_sum = 0.1, 2e-4, 5.0, 3.0
    # pushing group only: implicit spring-damper step
    vn = _axis_velocity(0.0, 0.5, m, h, k_sum, c_sum, 0.0, 0.0)
    assert vn == pytest.approx(h * (k_sum + c_sum * 0.5) / (m + h * c_sum), rel=1e-12)
    assert _axis_velocity(0.2, 0.5, m, h, 0.0, 0.0, 0.0, 0.0) == 0.2


def test_axis_solver_never_pulls():
    # tool retreating fast: the damper would pull, so the group is dropped
    assert _axis_velocity(0.0, -10.0, 0.1, 2e-4, 1e-3, 50.0, 0.0, 0.0) == 0.0
    # opposing groups clamp the box between them
    vn = _axis_velocity(0.3, 0.0, 0.1, 2e-4, 1.0, 5.0, 1.0, 5.0)
    assert abs(vn) < 0.3


def test_yaw_rotates_tool(straight):
    # tool pointing +y sweeps the box sideways instead of lifting it
    plan = replace(default_plan(), yaw=math.pi / 2)
    r = simulate(straight, plan, WorldConfig(box_start=(0.4, 1.0)))
    assert r.X[-1, 0] < 0.4 - 0.2
    assert r.X[-1, 1] == pytest.approx(1.0, abs=1e-3)


def test_csv_export(nominal):
    lines = nominal.to_csv().splitlines()
    assert lines[0] == "t,x,y,ee_x,ee_y,u_fx,u_fy,u_tz,contact"
    assert len(lines) == len(nominal) + 1
    row = lines[5].split(",")
    assert float(row[1]) == nominal.X[4, 0]
    assert row[-1] in ("0", "1")
