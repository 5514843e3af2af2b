"""Polynomial hook tools with a fixed curve length.

The working part of a tool is the cubic ``p(x) = c1 x^3 + c2 x^2 + c3 x``
(constant term pinned to zero) followed out along x until its arc length
reaches ``arc_length``. A straight grasp segment of ``grasp_length`` sits
in front of the curve, starting at the grasp point (the tool-frame origin)
and running along +x, so the curve starts at ``(grasp_length, 0)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateGeometry, DomainSolveFailed

DEFAULT_ARC_LENGTH = 0.8
DEFAULT_GRASP_LENGTH = 0.2
DEFAULT_DENSITY = 1.0
DEFAULT_SPACING = 0.005
DEFAULT_THICKNESS = 0.02
DEFAULT_HEIGHT = 0.02
COEFF_BOUNDS = (-5.0, 5.0)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_PANELS = 256
_BISECT_ITERS = 80


@dataclass(frozen=True)
class ToolParams:
    """Design variable: cubic coefficients plus the fixed shape constants."""

    coeffs: tuple[float, float, float]
    arc_length: float = DEFAULT_ARC_LENGTH
    grasp_length: float = DEFAULT_GRASP_LENGTH

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        if len(coeffs) != 3:
            raise ValueError(f"expected 3 coefficients, got {len(coeffs)}")
        object.__setattr__(self, "coeffs", coeffs)
        if not (self.arc_length > 0):
            raise ValueError("arc_length must be positive")
        if not (self.grasp_length >= 0):
            raise ValueError("grasp_length must be non-negative")

    @property
    def finite(self) -> bool:
        return all(math.isfinite(c) for c in self.coeffs)

    def to_dict(self) -> dict:
        return {
            "coeffs": list(self.coeffs),
            "arc_length": self.arc_length,
            "grasp_length": self.grasp_length,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ToolParams":
        return cls(
            coeffs=tuple(data["coeffs"]),
            arc_length=float(data.get("arc_length", DEFAULT_ARC_LENGTH)),
            grasp_length=float(data.get("grasp_length", DEFAULT_GRASP_LENGTH)),
        )


def save_tool(params: ToolParams, path: str | Path) -> None:
    Path(path).write_text(json.dumps(params.to_dict()) + "\n")


def load_tool(path: str | Path) -> ToolParams:
    return ToolParams.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class ToolShape:
    """Sampled tool polyline in the tool frame with its mass properties.

    ``points[0]`` is the grasp point at the origin. ``n_grasp`` is the index
    of the first curve sample, i.e. ``points[n_grasp:]`` is the curved part.
    ``inertia_z`` is taken about the grasp point.
    """

    points: np.ndarray = field(repr=False)
    n_grasp: int
    x_max: float
    mass: float
    com: np.ndarray
    inertia_z: float
    params: ToolParams

    @property
    def curve_points(self) -> np.ndarray:
        return self.points[self.n_grasp:]


def _slope(coeffs, x):
    c1, c2, c3 = coeffs
    return (3.0 * c1 * x + 2.0 * c2) * x + c3


def _poly(coeffs, x):
    c1, c2, c3 = coeffs
    return ((c1 * x + c2) * x + c3) * x


def _speed(coeffs, x):
    return np.sqrt(1.0 + _slope(coeffs, x) ** 2)


def _integrate(coeffs, a, b, panels=_PANELS):
    """Composite Gauss-Legendre arc length of p over [a, b] (scalar bounds)."""
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    return float(np.sum(half * (_speed(coeffs, x) @ _GL_WEIGHTS)))


def arc_length(coeffs, x_end: float) -> float:
    """Arc length of the cubic from 0 to ``x_end``."""
    if x_end <= 0.0:
        return 0.0
    return _integrate(coeffs, 0.0, x_end)


def solve_curve_domain(params: ToolParams) -> float:
    """Return ``x_max`` with curve arc length over ``[0, x_max]`` equal to L0.

    Bisection on the cumulative arc length, which is strictly increasing
    because its integrand is at least one.
    """
    if not params.finite:
        raise DomainSolveFailed(f"non-finite coefficients {params.coeffs}")
    target = params.arc_length
    cap = 10.0 * target
    lo, hi = 0.0, target  # arc length >= x, so x_max <= L0
    s_hi = arc_length(params.coeffs, hi)
    if not math.isfinite(s_hi):
        raise DomainSolveFailed(f"arc length not finite for {params.coeffs}")
    if s_hi < target:
        # only reachable through round-off; widen up to the hard cap
        while s_hi < target:
            hi *= 2.0
            if hi > cap:
                raise DomainSolveFailed(f"x_max exceeds {cap} for {params.coeffs}")
            s_hi = arc_length(params.coeffs, hi)
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if arc_length(params.coeffs, mid) < target:
            lo = mid
        else:
            hi = mid
    x_max = 0.5 * (lo + hi)
    if not (0.0 < x_max <= cap):
        raise DomainSolveFailed(f"x_max={x_max} out of range for {params.coeffs}")
    return x_max


def _invert_arc_length(coeffs, x_max, targets):
    """x positions whose cumulative arc length equals ``targets`` (vectorized)."""
    edges = np.linspace(0.0, x_max, _PANELS + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    panel_len = half * (_speed(coeffs, nodes) @ _GL_WEIGHTS)
    cum = np.concatenate([[0.0], np.cumsum(panel_len)])

    def partial(x):
        idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, _PANELS - 1)
        a = edges[idx]
        h = 0.5 * (x - a)
        pts = (a + h)[:, None] + h[:, None] * _GL_NODES[None, :]
        return cum[idx] + h * (_speed(coeffs, pts) @ _GL_WEIGHTS)

    idx = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, _PANELS - 1)
    frac = (targets - cum[idx]) / np.maximum(cum[idx + 1] - cum[idx], 1e-300)
    x = edges[idx] + frac * (edges[idx + 1] - edges[idx])
    for _ in range(6):
        x = x - (partial(x) - targets) / _speed(coeffs, x)
        x = np.clip(x, 0.0, x_max)
    return x


def build_shape(
    params: ToolParams,
    density: float = DEFAULT_DENSITY,
    spacing: float = DEFAULT_SPACING,
) -> ToolShape:
    """Sample the tool polyline and integrate its mass properties.

    The curve is sampled at equal arc-length steps no longer than ``spacing``
    so chords never exceed it. Mass is ``density * (L0 + Lg)``; the center
    of mass and inertia are integrated along the polyline segments and
    rescaled to that mass.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    x_max = solve_curve_domain(params)
    L0, Lg = params.arc_length, params.grasp_length

    parts = []
    if Lg > 0:
        n_g = max(1, math.ceil(Lg / spacing))
        gx = np.linspace(0.0, Lg, n_g + 1)[:-1]
        parts.append(np.column_stack([gx, np.zeros_like(gx)]))
    n_grasp = sum(len(p) for p in parts)

    n_c = max(1, math.ceil(L0 / spacing))
    s = np.linspace(0.0, L0, n_c + 1)
    xs = _invert_arc_length(params.coeffs, x_max, s)
    xs[0], xs[-1] = 0.0, x_max
    parts.append(np.column_stack([Lg + xs, _poly(params.coeffs, xs)]))
    points = np.ascontiguousarray(np.vstack(parts))

    mass, com, inertia = _mass_properties(points, density * (L0 + Lg))
    return ToolShape(
        points=points,
        n_grasp=n_grasp,
        x_max=x_max,
        mass=mass,
        com=com,
        inertia_z=inertia,
        params=params,
    )


def _mass_properties(points, mass):
    a, b = points[:-1], points[1:]
    d = b - a
    seg = np.hypot(d[:, 0], d[:, 1])
    total = seg.sum()
    com = ((a + b) * 0.5 * seg[:, None]).sum(axis=0) / total
    # exact integral of |r|^2 along each straight segment
    second = seg * (np.einsum("ij,ij->i", a, a) + np.einsum("ij,ij->i", a, d)
                    + np.einsum("ij,ij->i", d, d) / 3.0)
    inertia = mass * second.sum() / total
    return mass, com, float(inertia)


def polyline_length(points: np.ndarray) -> float:
    d = np.diff(points, axis=0)
    return float(np.hypot(d[:, 0], d[:, 1]).sum())


def turning_angle(shape: ToolShape | np.ndarray) -> float:
    """Total absolute turning (radians) along the polyline."""
    pts = shape.points if isinstance(shape, ToolShape) else np.asarray(shape, float)
    if len(pts) < 3:
        return 0.0
    d = np.diff(pts, axis=0)
    d = d[np.hypot(d[:, 0], d[:, 1]) > 0]
    cross = d[:-1, 0] * d[1:, 1] - d[:-1, 1] * d[1:, 0]
    dot = np.einsum("ij,ij->i", d[:-1], d[1:])
    return float(np.abs(np.arctan2(cross, dot)).sum())


def _simplify(points, tol=1e-12):
    """Drop repeated points and interior points collinear with their neighbours."""
    keep = [points[0]]
    for p in points[1:]:
        if np.hypot(*(p - keep[-1])) > tol:
            keep.append(p)
    if len(keep) < 2:
        raise DegenerateGeometry("polyline collapses to a single point")
    out = [keep[0]]
    for i in range(1, len(keep) - 1):
        u = keep[i] - out[-1]
        v = keep[i + 1] - keep[i]
        cross = u[0] * v[1] - u[1] * v[0]
        if abs(cross) > tol * np.hypot(*u) * np.hypot(*v) or np.dot(u, v) < 0:
            out.append(keep[i])
    out.append(keep[-1])
    return np.array(out)


def ribbon_outline(points: np.ndarray, thickness: float) -> np.ndarray:
    """Closed outline of the polyline thickened by ``thickness`` in-plane.

    Returns ``2n`` vertices: the left offsets front to back, then the right
    offsets back to front. Joints use a miter clamped to 4x the half width.
    """
    pts = _simplify(np.asarray(points, float))
    d = np.diff(pts, axis=0)
    seg = np.hypot(d[:, 0], d[:, 1])
    if np.any(seg <= 1e-12):
        raise DegenerateGeometry("consecutive points coincide")
    t = d / seg[:, None]
    n_seg = np.column_stack([-t[:, 1], t[:, 0]])
    normals = np.empty_like(pts)
    normals[0], normals[-1] = n_seg[0], n_seg[-1]
    scale = np.ones(len(pts))
    if len(pts) > 2:
        m = n_seg[:-1] + n_seg[1:]
        mlen = np.hypot(m[:, 0], m[:, 1])
        m = np.where(mlen[:, None] > 1e-9, m / np.maximum(mlen, 1e-300)[:, None], n_seg[:-1])
        cos_half = np.einsum("ij,ij->i", m, n_seg[:-1])
        normals[1:-1] = m
        scale[1:-1] = np.minimum(1.0 / np.maximum(cos_half, 1e-9), 4.0)
    off = normals * (0.5 * thickness * scale)[:, None]
    left, right = pts + off, pts - off
    return np.vstack([left, right[::-1]])


def export_mesh(
    shape: ToolShape | np.ndarray,
    thickness: float = DEFAULT_THICKNESS,
    height: float = DEFAULT_HEIGHT,
) -> str:
    """Extrude the ribbon outline into a closed triangle prism, as OBJ text."""
    if thickness <= 0 or height <= 0:
        raise DegenerateGeometry("thickness and height must be positive")
    pts = shape.points if isinstance(shape, ToolShape) else np.asarray(shape, float)
    outline = ribbon_outline(pts, thickness)
    m = len(outline)
    n = m // 2
    z0, z1 = -0.5 * height, 0.5 * height
    outline = [(float(x), float(y)) for x, y in outline]
    verts = [(x, y, z0) for x, y in outline] + [(x, y, z1) for x, y in outline]

    faces = []
    # caps: the ribbon is a strip of quads (left i, left i+1, right i+1, right i)
    for i in range(n - 1):
        li, lj = i, i + 1
        ri, rj = m - 1 - i, m - 2 - i
        faces.append((li, rj, lj))
        faces.append((li, ri, rj))
        faces.append((m + li, m + lj, m + rj))
        faces.append((m + li, m + rj, m + ri))
    # side walls around the closed outline
    for i in range(m):
        j = (i + 1) % m
        faces.append((i, j, m + j))
        faces.append((i, m + j, m + i))

    lines = ["# tool mesh", f"# vertices {len(verts)} faces {len(faces)}"]
    lines += [f"v {x!r} {y!r} {z!r}" for x, y, z in verts]
    lines += [f"f {a + 1} {c + 1} {b + 1}" for a, b, c in faces]  # outward normals
    return "\n".join(lines) + "\n"


def parse_obj(text: str) -> tuple[np.ndarray, np.ndarray]:
    """Read vertices and (0-based) triangle indices back from OBJ text."""
    verts, faces = [], []
    for line in text.splitlines():
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "v":
            verts.append([float(v) for v in parts[1:4]])
        elif parts[0] == "f":
            faces.append([int(p.split("/")[0]) - 1 for p in parts[1:4]])
    return np.array(verts, dtype=float), np.array(faces, dtype=int)
