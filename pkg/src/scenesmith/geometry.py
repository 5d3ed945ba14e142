"""Shared 3D math: XYZ euler rotations, angle normalization, bounding boxes.

Euler convention used throughout: rotate about x, then y, then z
(column-vector form ``R = Rz @ Ry @ Rx``). The rotation matrix is written
out entry by entry so that scalar and vectorized callers produce
bit-identical results.
"""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def normalize_angle(theta: float) -> float:
    """Map an angle into (-pi, pi]."""
    r = theta % TWO_PI
    if r > math.pi:
        r -= TWO_PI
    return r


def euler_xyz_matrix(rx: float, ry: float, rz: float) -> np.ndarray:
    """Rotation matrix for XYZ euler angles (x applied first)."""
    ca, sa = math.cos(rx), math.sin(rx)
    cb, sb = math.cos(ry), math.sin(ry)
    cc, sc = math.cos(rz), math.sin(rz)
    return np.array(
        [
            [cb * cc, sa * sb * cc - ca * sc, ca * sb * cc + sa * sc],
            [cb * sc, sa * sb * sc + ca * cc, ca * sb * sc - sa * cc],
            [-sb, sa * cb, ca * cb],
        ],
        dtype=np.float64,
    )


def rotate_points(points: np.ndarray, rot: np.ndarray) -> np.ndarray:
    """Apply a rotation matrix to an (N, 3) array of points.

    Written as explicit column arithmetic (not matmul) so the float
    operation order matches a scalar re-implementation exactly.
    """
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    out = np.empty_like(points)
    out[:, 0] = rot[0, 0] * x + rot[0, 1] * y + rot[0, 2] * z
    out[:, 1] = rot[1, 0] * x + rot[1, 1] * y + rot[1, 2] * z
    out[:, 2] = rot[2, 0] * x + rot[2, 1] * y + rot[2, 2] * z
    return out


def aabb(vertices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Axis-aligned bounding box (mins, maxs) of an (N, 3) vertex array."""
    return vertices.min(axis=0), vertices.max(axis=0)


def aabb_center_extents(vertices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Center and per-axis extents of the vertex bounding box."""
    lo, hi = aabb(vertices)
    return (lo + hi) / 2.0, hi - lo
