from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tooldesign.errors import DegenerateGeometry, DomainSolveFailed
from tooldesign.geometry import (
    ToolParams, arc_length, build_shape, export_mesh, load_tool, parse_obj,
    polyline_length, ribbon_outline, save_tool, solve_curve_domain, turning_angle,
)

coeff = st.floats(-5.0, 5.0, allow_nan=False)
coeffs3 = st.tuples(coeff, coeff, coeff)


def trapezoid_domain(coeffs, L0, panels=2_000_000):
    """Dense trapezoid cumulative arc length, inverted by interpolation."""
    c1, c2, c3 = coeffs
    x = np.linspace(0.0, L0, panels + 1)
    ds = np.sqrt(1.0 + (3 * c1 * x**2 + 2 * c2 * x + c3) ** 2)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (ds[1:] + ds[:-1]) * np.diff(x))])
    return float(np.interp(L0, cum, x))


def test_straight_domain():
    assert solve_curve_domain(ToolParams((0, 0, 0), 0.8)) == pytest.approx(0.8, abs=1e-9)


def test_slope_one_domain():
    assert solve_curve_domain(ToolParams((0, 0, 1), 0.8)) == pytest.approx(0.8 / math.sqrt(2), abs=1e-9)


def test_cubic_domain_matches_trapezoid_oracle():
    x_max = solve_curve_domain(ToolParams((1, 0, 0), 0.8))
    assert x_max == pytest.approx(trapezoid_domain((1, 0, 0), 0.8), abs=1e-6)
    assert arc_length((1, 0, 0), x_max) == pytest.approx(0.8, abs=1e-9)


def test_non_finite_coeffs_fail():
    with pytest.raises(DomainSolveFailed):
        solve_curve_domain(ToolParams((float("nan"), 0, 0)))


def test_params_validation():
    with pytest.raises(ValueError):
        ToolParams((1, 2))
    with pytest.raises(ValueError):
        ToolParams((0, 0, 0), arc_length=0.0)
    with pytest.raises(ValueError):
        ToolParams((0, 0, 0), grasp_length=-0.1)


def test_straight_shape_mass_properties():
    shape = build_shape(ToolParams((0, 0, 0), 0.8, 0.2), density=1.0)
    assert shape.mass == 1.0
    np.testing.assert_allclose(shape.com, [0.5, 0.0], atol=1e-12)
    assert shape.inertia_z == pytest.approx(1.0 / 3.0, rel=1e-12)  # rod about one end
    assert turning_angle(shape) == 0.0


def test_mass_independent_of_coeffs():
    shape = build_shape(ToolParams((1, -1, 0.5), 0.8, 0.2), density=2.5)
    assert shape.mass == 2.5 * (0.8 + 0.2)


def test_shape_layout():
    shape = build_shape(ToolParams((0.5, 1.0, -2.0), 0.8, 0.2), spacing=0.005)
    pts = shape.points
    assert tuple(pts[0]) == (0.0, 0.0)
    grasp = pts[: shape.n_grasp + 1]
    np.testing.assert_array_equal(grasp[:, 1], 0.0)
    assert np.all(np.diff(grasp[:, 0]) > 0)
    np.testing.assert_allclose(pts[shape.n_grasp], [0.2, 0.0])
    steps = np.hypot(*np.diff(pts, axis=0).T)
    assert steps.max() <= 0.005 + 1e-12
    assert polyline_length(shape.curve_points) == pytest.approx(0.8, abs=1e-3)


def test_no_grasp_segment():
    shape = build_shape(ToolParams((0, 0, 1), 0.8, 0.0))
    assert shape.n_grasp == 0
    assert tuple(shape.points[0]) == (0.0, 0.0)


def test_build_is_deterministic():
    p = ToolParams((2.0, -3.0, 1.5))
    a, b = build_shape(p), build_shape(p)
    assert a.points.tobytes() == b.points.tobytes()


@settings(max_examples=60, deadline=None)
@given(coeffs3)
def test_curve_length_property(c):
    shape = build_shape(ToolParams(c))
    assert abs(polyline_length(shape.curve_points) - 0.8) <= 1e-3


@settings(max_examples=40, deadline=None)
@given(coeffs3, st.floats(0.1, 1.5), st.floats(0.01, 0.5))
def test_domain_monotone_in_length(c, L0, extra):
    assert solve_curve_domain(ToolParams(c, L0)) < solve_curve_domain(ToolParams(c, L0 + extra))


@settings(max_examples=25, deadline=None)
@given(coeffs3)
def test_mass_properties_refinement(c):
    coarse = build_shape(ToolParams(c), spacing=0.005)
    fine = build_shape(ToolParams(c), spacing=0.0025)
    assert fine.mass == coarse.mass
    assert fine.inertia_z == pytest.approx(coarse.inertia_z, rel=1e-4)


def test_turning_angle_quarter_circle():
    theta = np.linspace(0.0, math.pi / 2, 2001)
    arc = np.column_stack([np.cos(theta), np.sin(theta)])
    # 2000 chords turn 1999 times by (pi/2)/2000 each
    assert turning_angle(arc) == pytest.approx(1999 / 2000 * math.pi / 2, abs=1e-12)
    assert turning_angle(arc) == pytest.approx(math.pi / 2, abs=1e-3)


@settings(max_examples=30, deadline=None)
@given(coeffs3)
def test_turning_angle_non_negative(c):
    assert turning_angle(build_shape(ToolParams(c))) >= 0.0


def test_turning_angle_short_polyline():
    assert turning_angle(np.array([[0.0, 0.0], [1.0, 0.0]])) == 0.0


def test_tool_json_round_trip(tmp_path):
    p = ToolParams((0.1234567890123, -4.5, 3.0), 0.7, 0.15)
    save_tool(p, tmp_path / "t.json")
    assert load_tool(tmp_path / "t.json") == p


def test_straight_mesh_is_welded_box():
    shape = build_shape(ToolParams((0, 0, 0)))
    verts, faces = parse_obj(export_mesh(shape, 0.02, 0.02))
    assert len(verts) == 8
    assert len(faces) == 12
    np.testing.assert_allclose(verts.min(axis=0), [0.0, -0.01, -0.01])
    np.testing.assert_allclose(verts.max(axis=0), [1.0, 0.01, 0.01])


def _signed_volume(verts, faces):
    a, b, c = verts[faces[:, 0]], verts[faces[:, 1]], verts[faces[:, 2]]
    return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)


@pytest.mark.parametrize("c", [(0, 0, 0), (1, -1, 0.5), (3, 2, -4), (-5, 5, 5)])
def test_mesh_is_watertight_and_outward(c):
    shape = build_shape(ToolParams(c))
    text = export_mesh(shape, 0.02, 0.02)
    verts, faces = parse_obj(text)
    outline = ribbon_outline(shape.points, 0.02)
    assert len(verts) == 2 * len(outline)
    edges = {}
    for f in faces:
        for i in range(3):
            e = (f[i], f[(i + 1) % 3])
            edges[e] = edges.get(e, 0) + 1
    # every directed edge appears once and is matched by its reverse
    assert all(n == 1 for n in edges.values())
    assert all((b, a) in edges for a, b in edges)
    assert _signed_volume(verts, faces) > 0


def test_mesh_round_trip_bit_exact():
    shape = build_shape(ToolParams((1.3, -0.7, 2.2)))
    text = export_mesh(shape, 0.02, 0.03)
    verts, _ = parse_obj(text)
    outline = ribbon_outline(shape.points, 0.02)
    expected = np.vstack([np.column_stack([outline, np.full(len(outline), z)])
                          for z in (-0.015, 0.015)])
    assert verts.tobytes() == expected.tobytes()
    assert export_mesh(shape, 0.02, 0.03) == text


def test_mesh_degenerate_inputs():
    with pytest.raises(DegenerateGeometry):
        export_mesh(np.zeros((4, 2)))
    with pytest.raises(DegenerateGeometry):
        export_mesh(build_shape(ToolParams((0, 0, 0))), thickness=0.0)
