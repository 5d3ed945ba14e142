import math
import random

import numpy as np
import pytest
from raster_reference import brute_force_zbuffer

from scenesmith.assemble import AssembledScene, CameraPose, ObjectTransform, place_camera
from scenesmith.geometry import euler_xyz_matrix
from scenesmith.layout import CameraView
from scenesmith.mesh import box_mesh, dump_obj, marked_box_mesh
from scenesmith.render import (
    Framebuffer,
    RenderSettings,
    render_scene,
    render_triangles,
    to_gray8,
    transform_mesh,
)


def random_triangles(rng, count, spread=6.0):
    tris = []
    for _ in range(count):
        base = (rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-3, 5))
        tri = []
        for _ in range(3):
            tri.append(
                (
                    base[0] + rng.uniform(-spread, spread),
                    base[1] + rng.uniform(-spread, spread),
                    base[2] + rng.uniform(-spread, spread),
                )
            )
        tris.append(tuple(tri))
    return tris


def random_camera(rng):
    view = rng.choice([CameraView.FRONT, CameraView.LEFT, CameraView.RIGHT, CameraView.TOP])
    return place_camera(view, rng)


def test_empty_scene_is_background():
    settings = RenderSettings(resolution=16)
    fb = render_triangles(CameraPose((0, -15, 5), (1.249, 0, 0)), np.zeros((0, 3, 3)), settings)
    assert np.all(fb.color == settings.background)
    assert np.all(np.isinf(fb.zbuf))


def test_zbuffer_matches_brute_force_oracle():
    settings = RenderSettings(resolution=32)
    for scene_i in range(12):
        rng = random.Random(1000 + scene_i)
        camera = random_camera(rng)
        tris = random_triangles(rng, rng.randint(2, 10))
        fb = render_triangles(camera, np.array(tris), settings)
        oracle = brute_force_zbuffer(
            camera.location, camera.rotation_euler, tris, settings.resolution
        )
        got = fb.zbuf
        for r in range(settings.resolution):
            for c in range(settings.resolution):
                assert got[r, c] == oracle[r][c], (scene_i, r, c)


def test_overlapping_quads_take_nearer_depth():
    # two z-facing unit quads ahead of an identity-rotation camera at origin
    camera = CameraPose((0.0, 0.0, 0.0), (0.0, 0.0, 0.0))

    def quad(z, size=2.0):
        s = size / 2
        a, b, c, d = (-s, -s, z), (s, -s, z), (s, s, z), (-s, s, z)
        return [(a, b, c), (a, c, d)]

    tris = quad(-10.0) + quad(-12.0)
    settings = RenderSettings(resolution=64)
    fb = render_triangles(camera, np.array(tris), settings)
    center = fb.zbuf[32, 32]
    assert center == pytest.approx(10.0, abs=1e-9)


def test_unit_cube_projection_matches_pinhole():
    settings = RenderSettings(resolution=1024)
    camera = CameraPose(
        (0.0, -15.0, 5.0),
        (math.atan(15.0 / (5.0 + 1e-5)), 0.0, -math.atan(0.0 / (-15.0 + 1e-5))),
    )
    rot = euler_xyz_matrix(*camera.rotation_euler)
    view_dir = rot @ np.array([0.0, 0.0, -1.0])
    center = np.array(camera.location) + 15.0 * view_dir

    mesh = box_mesh(1.0, 1.0, 1.0, center=tuple(center))
    fb = render_triangles(camera, mesh.world_triangles(), settings)

    covered = np.isfinite(fb.zbuf)
    rows, cols = np.nonzero(covered)
    # analytic projection of the 8 corners
    f = settings.focal_px
    half = settings.resolution / 2.0
    us, vs = [], []
    for corner in mesh.vertices:
        p = np.array(corner) - np.array(camera.location)
        cam = rot.T @ p
        us.append(half + f * (cam[0] / -cam[2]))
        vs.append(half - f * (cam[1] / -cam[2]))
    # covered pixels are those whose centers (index + 0.5) fall inside the
    # projected silhouette, so compare center coordinates to the analytic box
    assert cols.min() + 0.5 == pytest.approx(min(us), abs=1.0)
    assert cols.max() + 0.5 == pytest.approx(max(us), abs=1.0)
    assert rows.min() + 0.5 == pytest.approx(min(vs), abs=1.0)
    assert rows.max() + 0.5 == pytest.approx(max(vs), abs=1.0)


def test_projection_halves_when_depth_doubles():
    settings = RenderSettings(resolution=512)
    camera = CameraPose((0.0, 0.0, 0.0), (0.0, 0.0, 0.0))

    def extent_at(distance):
        # flat unit quad facing the camera (no depth extent of its own)
        s = 0.5
        tris = [
            ((-s, -s, -distance), (s, -s, -distance), (s, s, -distance)),
            ((-s, -s, -distance), (s, s, -distance), (-s, s, -distance)),
        ]
        fb = render_triangles(camera, np.array(tris), settings)
        cols = np.nonzero(np.isfinite(fb.zbuf))[1]
        return cols.max() - cols.min() + 1

    near_extent = extent_at(10.0)
    far_extent = extent_at(20.0)
    assert far_extent == pytest.approx(near_extent / 2, rel=0.02)


def test_render_determinism():
    rng = random.Random(5)
    tris = np.array(random_triangles(rng, 8))
    camera = place_camera(CameraView.FRONT, random.Random(2))
    settings = RenderSettings(resolution=64)
    fb1 = render_triangles(camera, tris, settings)
    fb2 = render_triangles(camera, tris, settings)
    assert np.array_equal(fb1.color, fb2.color)
    assert np.array_equal(fb1.zbuf, fb2.zbuf)


def test_backward_orientation_hides_front_marker(tmp_path):
    # A nose-marked mesh rendered forward vs backward under a straight-on
    # camera. Forward, only the small nose cone sits in the near-depth band;
    # backward, the nose is occluded behind the box and the whole rear face
    # fills that band. The zbuf depth histogram separates the two poses.
    mesh = marked_box_mesh(1.0, 1.0, 1.0, nose=0.6)
    path = tmp_path / "marked.obj"
    path.write_text(dump_obj(mesh))
    # camera at (0, -15, 0) looking straight along +y
    camera = CameraPose((0.0, -15.0, 0.0), (math.pi / 2.0, 0.0, 0.0))

    def near_fraction(rz):
        transform = ObjectTransform(
            dimensions=(4.0, 6.4, 4.0),  # uniform x4 of the mesh extents
            delta_location=(0.0, 0.0, 0.0),
            rotation_euler=(0.0, 0.0, rz),
        )
        scene = AssembledScene(camera=camera, objects=[(str(path), transform)])
        fb = render_scene(scene, RenderSettings(resolution=96), use_mesh_cache=False)
        covered = np.isfinite(fb.zbuf)
        assert covered.any()
        return float((fb.zbuf[covered] < 12.5).mean())

    assert near_fraction(0.0) < 0.15  # forward: only the nose tip is near
    assert near_fraction(math.pi) > 0.5  # backward: the flipped face is near


def test_transform_mesh_scales_rotates_translates():
    mesh = box_mesh(2.0, 2.0, 2.0)
    transform = ObjectTransform(
        dimensions=(2.0, 4.0, 6.0),
        delta_location=(10.0, -3.0, 2.0),
        rotation_euler=(0.0, 0.0, math.pi / 2),
    )
    tris = transform_mesh(mesh, transform)
    pts = tris.reshape(-1, 3)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    # rotation by 90 degrees about z swaps the x/y extents
    assert hi[0] - lo[0] == pytest.approx(4.0, abs=1e-9)
    assert hi[1] - lo[1] == pytest.approx(2.0, abs=1e-9)
    assert hi[2] - lo[2] == pytest.approx(6.0, abs=1e-9)
    assert (lo + hi) / 2 == pytest.approx((10.0, -3.0, 2.0), abs=1e-9)


def test_gray8_quantization():
    color = np.array([[0.0, 0.1, 1.0, 2.0]])
    assert to_gray8(color).tolist() == [[0, 26, 255, 255]]
