"""
Rendering Descriptors
---------------------
Per-band reduction of a patch's cubic model to similarity-invariant features.
The model is recentred on the domain gravity center, expressed in the frame
of its tangent plane (constant and gradient cancelled), rotated into the
eigenframe of its quadric part and finally scaled by the major curvature.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .core.polynomial import (
    PolyModel,
    from_grid,
    grid_compose,
    grid_eval,
    grid_shift,
    linear_grid,
    truncate,
)
from .segmenter import cov_eigen

logger = logging.getLogger(__name__)

# Relative tolerance on a_u3 below which the u-axis sign is left as found
CUBIC_SIGN_TOL = 1e-12
REVERSION_STEPS = 6


@dataclass(frozen=True)
class TangentFrame:
    """
    Rotation taking a band surface to its tangent plane at the center.

    The matrix acts on (z, x, y) column vectors, as R_xz(theta_xz) @ R_yz(theta_yz).
    """
    center: Tuple[float, float]
    z_bar: float
    theta_xz: float
    theta_yz: float
    matrix: np.ndarray


@dataclass(frozen=True)
class ReducedQuadric:
    lambda_u: float
    lambda_v: float
    theta_xu: float
    cubic: Tuple[float, float, float, float]
    flat: bool = False
    uv_residual: float = 0.0


@dataclass(frozen=True)
class BandRendering:
    """Invariants (lambda_v/lambda_u and the four cubic terms over lambda_u) plus the pose."""
    invariants: Tuple[float, float, float, float, float]
    z_bar: float
    theta_xz: float
    theta_yz: float
    theta_xu: float
    lambda_u: float
    flat: bool = False

    def invariant_vector(self) -> np.ndarray:
        return np.array(self.invariants, dtype=float)


@dataclass(frozen=True)
class RenderingDescriptor:
    center: Tuple[float, float]
    bands: Tuple[BandRendering, ...]


def recentre_cubic(model: PolyModel, center: Tuple[float, float]) -> PolyModel:
    """Same polynomial in the variables (x - cx, y - cy)."""
    grids = [grid_shift(model.grid(b), center[0], center[1]) for b in range(model.bands)]
    out = PolyModel.from_grids(grids, order=model.order)
    out.degenerate = model.degenerate
    return out


def _angle_cos_sin(tangent: float) -> Tuple[float, float]:
    cos = math.sqrt(1.0 / (1.0 + tangent * tangent))
    return cos, tangent * cos


def frame_matrix(theta_xz: float, theta_yz: float) -> np.ndarray:
    c1, s1 = math.cos(theta_xz), math.sin(theta_xz)
    c2, s2 = math.cos(theta_yz), math.sin(theta_yz)
    r_xz = np.array([[c1, -s1, 0.0], [s1, c1, 0.0], [0.0, 0.0, 1.0]])
    r_yz = np.array([[c2, 0.0, -s2], [0.0, 1.0, 0.0], [s2, 0.0, c2]])
    return r_xz @ r_yz


def tangent_frame(a_x: float, a_y: float, center: Tuple[float, float], z_bar: float = 0.0) -> TangentFrame:
    """
    Frame whose Z axis is the surface normal at the center.

    tan(theta_yz) = a_y is applied first, then tan(theta_xz) = a_x / sqrt(1 + a_y^2),
    which is arctan(a_x) whenever a_y = 0.
    """
    tan_yz = a_y
    tan_xz = a_x / math.sqrt(1.0 + a_y * a_y)
    c1, s1 = _angle_cos_sin(tan_xz)
    c2, s2 = _angle_cos_sin(tan_yz)
    r_xz = np.array([[c1, -s1, 0.0], [s1, c1, 0.0], [0.0, 0.0, 1.0]])
    r_yz = np.array([[c2, 0.0, -s2], [0.0, 1.0, 0.0], [s2, 0.0, c2]])
    return TangentFrame(center, z_bar, math.atan(tan_xz), math.atan(tan_yz), r_xz @ r_yz)


def transport(grid: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """
    Re-express the graph w = p(s, t), p(0, 0) = 0, in the rotated frame
    (W, S, T) = matrix @ (w, s, t) as W = q(S, T), exact up to degree 3.

    q solves w(W, S, T) - p(s(W, S, T), t(W, S, T)) = 0 by a chord iteration
    on truncated series; each step fixes one more degree.
    """
    m = np.asarray(matrix, dtype=float)
    p = truncate(np.array(grid, dtype=float))
    p[0, 0] = 0.0
    slope = m[0, 0] - p[1, 0] * m[0, 1] - p[0, 1] * m[0, 2]
    if abs(slope) < 1e-12:
        raise ValueError("Frame is tangent to the surface normal; no graph form exists")
    q = np.zeros((4, 4))
    for _ in range(REVERSION_STEPS):
        w = linear_grid(m[1, 0], m[2, 0]) + m[0, 0] * q
        s = linear_grid(m[1, 1], m[2, 1]) + m[0, 1] * q
        t = linear_grid(m[1, 2], m[2, 2]) + m[0, 2] * q
        residual = w - grid_compose(p, s, t)
        q = truncate(q - residual / slope)
    return q


def reduce_to_tangent(model: PolyModel, frame: TangentFrame, band: int = 0) -> PolyModel:
    """
    Recentred band model expressed in the tangent frame: Z(X, Y) with zero
    constant and linear terms.
    """
    grid = model.grid(band)
    grid[0, 0] -= frame.z_bar
    reduced = transport(grid, frame.matrix)
    reduced[0, 0] = reduced[1, 0] = reduced[0, 1] = 0.0
    return PolyModel(from_grid(reduced)[np.newaxis], order=3)


def _rotation_grids(theta: float) -> Tuple[np.ndarray, np.ndarray]:
    """X and Y as functions of (u, v) for axes rotated by theta."""
    co, si = math.cos(theta), math.sin(theta)
    return linear_grid(co, -si), linear_grid(si, co)


def reduce_quadric(tangent_model: PolyModel, flat_tol: float = 1e-6 * 256) -> ReducedQuadric:
    """
    Rotate a tangent-frame model into the eigenframe of its quadric part.

    u is the eigen-direction of largest |lambda|; the sign of u makes a_u3 >= 0.
    """
    grid = tangent_model.grid(0)
    a_x2, a_xy, a_y2 = grid[2, 0], grid[1, 1], grid[0, 2]
    lam1, lam2, theta = cov_eigen(a_x2, a_xy / 2.0, a_y2)
    if abs(lam2) > abs(lam1):
        lam1, lam2 = lam2, lam1
        theta += math.pi / 2
    if abs(lam1) < flat_tol:
        return ReducedQuadric(0.0, 0.0, 0.0, (0.0, 0.0, 0.0, 0.0), flat=True)

    rotated = grid_compose(grid, *_rotation_grids(theta))
    cubic = (rotated[3, 0], rotated[2, 1], rotated[1, 2], rotated[0, 3])
    if cubic[0] < -CUBIC_SIGN_TOL * abs(lam1):
        theta += math.pi
        cubic = tuple(-c for c in cubic)
    return ReducedQuadric(
        lambda_u=float(lam1),
        lambda_v=float(lam2),
        theta_xu=theta % (2 * math.pi),
        cubic=tuple(float(c) for c in cubic),
        uv_residual=float(rotated[1, 1]),
    )


def band_rendering(model: PolyModel, center: Tuple[float, float], band: int, depth: int = 256) -> BandRendering:
    recentred = recentre_cubic(model, center)
    grid = recentred.grid(band)
    z_bar = float(grid[0, 0])
    frame = tangent_frame(grid[1, 0], grid[0, 1], center, z_bar)
    reduced = reduce_quadric(reduce_to_tangent(recentred, frame, band), flat_tol=1e-6 * depth)
    if reduced.flat:
        invariants = (0.0, 0.0, 0.0, 0.0, 0.0)
    else:
        lam = reduced.lambda_u
        invariants = (reduced.lambda_v / lam,) + tuple(c / lam for c in reduced.cubic)
    return BandRendering(
        invariants=invariants,
        z_bar=z_bar,
        theta_xz=frame.theta_xz,
        theta_yz=frame.theta_yz,
        theta_xu=reduced.theta_xu,
        lambda_u=reduced.lambda_u,
        flat=reduced.flat,
    )


def rendering_descriptor(model: PolyModel, center: Tuple[float, float], depth: int = 256) -> RenderingDescriptor:
    """
    Rendering invariants of every band of a node model.

    Args:
        model: Node model of order <= 3 in image coordinates
        center: Domain gravity center
        depth: Levels per band; sets the flatness tolerance 1e-6 * depth
    """
    bands = tuple(band_rendering(model, center, b, depth) for b in range(model.bands))
    return RenderingDescriptor(center, bands)


def reconstruct_band(band: BandRendering, invariants: np.ndarray = None) -> np.ndarray:
    """
    Inverse chain: reduced expression -> tangent frame -> recentred model.

    Returns:
        Grid polynomial in (x - cx, y - cy), constant term included
    """
    inv = band.invariant_vector() if invariants is None else np.asarray(invariants, dtype=float)
    reduced = np.zeros((4, 4))
    if not band.flat and band.lambda_u != 0.0:
        lam = band.lambda_u
        reduced[2, 0] = lam
        reduced[0, 2] = inv[0] * lam
        reduced[3, 0], reduced[2, 1], reduced[1, 2], reduced[0, 3] = (c * lam for c in inv[1:5])
        co, si = math.cos(band.theta_xu), math.sin(band.theta_xu)
        # u = X cos + Y sin, v = -X sin + Y cos
        reduced = grid_compose(reduced, linear_grid(co, si), linear_grid(-si, co))
    matrix = frame_matrix(band.theta_xz, band.theta_yz)
    recentred = transport(reduced, matrix.T)
    recentred[0, 0] += band.z_bar
    return recentred


def evaluate_band(band: BandRendering, center: Tuple[float, float], xs: np.ndarray, ys: np.ndarray,
                  invariants: np.ndarray = None) -> np.ndarray:
    grid = reconstruct_band(band, invariants)
    return grid_eval(grid, np.asarray(xs, dtype=float) - center[0], np.asarray(ys, dtype=float) - center[1])

