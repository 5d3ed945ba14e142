"""Software rasterizer: z-buffered perspective rendering of assembled scenes.

The camera is a pinhole looking along its local -z axis with +y up
(XYZ euler rotation). Visibility is resolved per pixel by casting the ray
through the pixel center against each candidate triangle and keeping the
smallest camera-space depth; shading is single-light Lambertian plus a
constant ambient term on a flat gray albedo.

Pixel/ray convention (shared with the brute-force test oracle, which must
reproduce these values bit for bit):

* focal scale ``f = (resolution / 2) / tan_half_fov``, identical for x and y;
* the ray through pixel (row, col) has camera-space direction
  ``((col + 0.5 - W/2) / f, (H/2 - (row + 0.5)) / f, -1.0)`` (unnormalized,
  so the intersection parameter t IS the camera-space depth);
* intersection is Moller-Trumbore with the exact operation order coded
  below, |det| < 1e-12 counts as a miss, barycentric bounds are inclusive;
* triangles not entirely on the far side of the near plane are skipped, and
  hits beyond the far plane are discarded;
* the depth test is strictly ``<`` in triangle submission order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import math

import numpy as np

from .assemble import AssembledScene, CameraPose, ObjectTransform
from .geometry import euler_xyz_matrix
from .mesh import Mesh, load_obj

DET_EPS = 1e-12


@dataclass
class RenderSettings:
    resolution: int = 1024
    focal_length_mm: float = 50.0
    sensor_mm: float = 36.0
    near: float = 0.1
    far: float = 100.0
    background: float = 0.1
    ambient: float = 0.1

    def __post_init__(self) -> None:
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if not (0 < self.near < self.far):
            raise ValueError("need 0 < near < far")

    @property
    def tan_half_fov(self) -> float:
        return (self.sensor_mm / 2.0) / self.focal_length_mm

    @property
    def focal_px(self) -> float:
        return (self.resolution / 2.0) / self.tan_half_fov


@dataclass
class Framebuffer:
    color: np.ndarray  # (H, W) float64 in [0, 1]
    zbuf: np.ndarray  # (H, W) float64 camera-space depth, +inf where empty


def to_gray8(color: np.ndarray) -> np.ndarray:
    """Quantize a [0, 1] float image to 8-bit."""
    return np.round(np.clip(color, 0.0, 1.0) * 255.0).astype(np.uint8)


def world_to_camera(points: np.ndarray, camera: CameraPose) -> np.ndarray:
    """Transform world points to camera space (explicit column arithmetic)."""
    rot = euler_xyz_matrix(*camera.rotation_euler)
    loc = camera.location
    px = points[:, 0] - loc[0]
    py = points[:, 1] - loc[1]
    pz = points[:, 2] - loc[2]
    out = np.empty_like(points)
    # columns of R are the camera axes in world space; projecting onto them
    # is multiplication by R transpose
    out[:, 0] = px * rot[0, 0] + py * rot[1, 0] + pz * rot[2, 0]
    out[:, 1] = px * rot[0, 1] + py * rot[1, 1] + pz * rot[2, 1]
    out[:, 2] = px * rot[0, 2] + py * rot[1, 2] + pz * rot[2, 2]
    return out


def transform_mesh(mesh: Mesh, transform: ObjectTransform) -> np.ndarray:
    """World-space triangle array for a mesh under an object transform.

    Scale about the mesh bounding-box center along the mesh's own axes, then
    rotate about that center, then translate the center to delta_location.
    """
    verts = mesh.vertices
    lo = verts.min(axis=0)
    hi = verts.max(axis=0)
    center = (lo + hi) / 2.0
    extents = hi - lo
    if np.any(extents <= 0):
        raise ValueError("cannot transform a mesh with a zero extent")
    scale = np.asarray(transform.dimensions, dtype=np.float64) / extents
    local = (verts - center) * scale
    rot = euler_xyz_matrix(*transform.rotation_euler)
    x, y, z = local[:, 0], local[:, 1], local[:, 2]
    world = np.empty_like(local)
    world[:, 0] = rot[0, 0] * x + rot[0, 1] * y + rot[0, 2] * z + transform.delta_location[0]
    world[:, 1] = rot[1, 0] * x + rot[1, 1] * y + rot[1, 2] * z + transform.delta_location[1]
    world[:, 2] = rot[2, 0] * x + rot[2, 1] * y + rot[2, 2] * z + transform.delta_location[2]
    return world[mesh.triangles]


def render_triangles(
    camera: CameraPose,
    triangles_world: np.ndarray,
    settings: RenderSettings,
    light_location: tuple[float, float, float] = (0.0, -5.0, 10.0),
) -> Framebuffer:
    """Rasterize world-space triangles (T, 3, 3) into a framebuffer."""
    res = settings.resolution
    color = np.full((res, res), settings.background, dtype=np.float64)
    zbuf = np.full((res, res), np.inf, dtype=np.float64)
    tris = np.asarray(triangles_world, dtype=np.float64)
    if tris.size == 0:
        return Framebuffer(color=color, zbuf=zbuf)

    cam_tris = world_to_camera(tris.reshape(-1, 3), camera).reshape(-1, 3, 3)
    light_cam = world_to_camera(
        np.array([light_location], dtype=np.float64), camera
    )[0]

    f = settings.focal_px
    half = res / 2.0
    near, far = settings.near, settings.far
    ambient = settings.ambient

    cols = np.arange(res, dtype=np.float64)
    rows = np.arange(res, dtype=np.float64)
    dx_all = (cols + 0.5 - half) / f
    dy_all = (half - (rows + 0.5)) / f

    for tri in cam_tris:
        ax, ay, az = tri[0]
        bx, by, bz = tri[1]
        cx, cy, cz = tri[2]
        # skip triangles not entirely beyond the near plane
        if not (-az >= near and -bz >= near and -cz >= near):
            continue
        # projected pixel-space bounding box, padded one pixel for rounding
        us = (half + f * (ax / -az), half + f * (bx / -bz), half + f * (cx / -cz))
        vs = (half - f * (ay / -az), half - f * (by / -bz), half - f * (cy / -cz))
        col0 = max(int(math.floor(min(us))) - 1, 0)
        col1 = min(int(math.ceil(max(us))) + 1, res - 1)
        row0 = max(int(math.floor(min(vs))) - 1, 0)
        row1 = min(int(math.ceil(max(vs))) + 1, res - 1)
        if col0 > col1 or row0 > row1:
            continue

        dx = dx_all[col0 : col1 + 1][np.newaxis, :]
        dy = dy_all[row0 : row1 + 1][:, np.newaxis]
        dz = -1.0

        e1x, e1y, e1z = bx - ax, by - ay, bz - az
        e2x, e2y, e2z = cx - ax, cy - ay, cz - az
        # p = d x e2
        px = dy * e2z - dz * e2y
        py = dz * e2x - dx * e2z
        pz = dx * e2y - dy * e2x
        det = e1x * px + e1y * py + e1z * pz
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / det
            tx, ty, tz = -ax, -ay, -az  # ray origin is the camera origin
            u = (tx * px + ty * py + tz * pz) * inv
            qx = ty * e1z - tz * e1y
            qy = tz * e1x - tx * e1z
            qz = tx * e1y - ty * e1x
            v = (dx * qx + dy * qy + dz * qz) * inv
            t = (e2x * qx + e2y * qy + e2z * qz) * inv
        hit = (
            (np.abs(det) >= DET_EPS)
            & (u >= 0.0)
            & (u <= 1.0)
            & (v >= 0.0)
            & (u + v <= 1.0)
            & (t >= near)
            & (t <= far)
        )
        if not hit.any():
            continue
        zslice = zbuf[row0 : row1 + 1, col0 : col1 + 1]
        update = hit & (t < zslice)
        if not update.any():
            continue

        # flat shading: face normal flipped toward the camera (two-sided)
        nx = e1y * e2z - e1z * e2y
        ny = e1z * e2x - e1x * e2z
        nz = e1x * e2y - e1y * e2x
        ccx = (ax + bx + cx) / 3.0
        ccy = (ay + by + cy) / 3.0
        ccz = (az + bz + cz) / 3.0
        if nx * ccx + ny * ccy + nz * ccz > 0.0:
            nx, ny, nz = -nx, -ny, -nz
        nlen = math.sqrt(nx * nx + ny * ny + nz * nz)
        if nlen > 0.0:
            nx, ny, nz = nx / nlen, ny / nlen, nz / nlen

        hx = t * dx
        hy = t * dy
        hz = t * dz
        lx = light_cam[0] - hx
        ly = light_cam[1] - hy
        lz = light_cam[2] - hz
        llen = np.sqrt(lx * lx + ly * ly + lz * lz)
        with np.errstate(divide="ignore", invalid="ignore"):
            diffuse = (nx * lx + ny * ly + nz * lz) / llen
        shade = np.clip(ambient + np.maximum(diffuse, 0.0), 0.0, 1.0)

        zslice[update] = t[update]
        color[row0 : row1 + 1, col0 : col1 + 1][update] = shade[update]
    return Framebuffer(color=color, zbuf=zbuf)


_MESH_CACHE: dict[str, Mesh] = {}


def _cached_mesh(path: str) -> Mesh:
    resolved = str(Path(path).resolve())
    if resolved not in _MESH_CACHE:
        _MESH_CACHE[resolved] = load_obj(resolved)
    return _MESH_CACHE[resolved]


def render_scene(
    scene: AssembledScene,
    settings: RenderSettings | None = None,
    use_mesh_cache: bool = True,
) -> Framebuffer:
    """Render a full assembled scene (loads the referenced mesh files)."""
    settings = settings or RenderSettings()
    tri_blocks = []
    for path, transform in scene.objects:
        mesh = _cached_mesh(path) if use_mesh_cache else load_obj(path)
        tri_blocks.append(transform_mesh(mesh, transform))
    tris = np.concatenate(tri_blocks, axis=0) if tri_blocks else np.zeros((0, 3, 3))
    return render_triangles(
        scene.camera, tris, settings, light_location=scene.light_location
    )
