"""Deterministic scene assembly: camera placement, object sizing and posing.

Converts a lifted 3D layout plus acquired, orientation-calibrated models into
a fully parameterized scene: one camera pose, a fixed light, and one
transform per object. Every formula here is a pure function of its
arguments; the only randomness is the camera x-jitter, drawn from a caller
supplied generator.

Transform semantics for an object's mesh: scale about the mesh bounding-box
center (per-axis, along the mesh's own axes), rotate about that center
(XYZ euler), then translate the center to ``delta_location``.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from .layout import CameraView, Layout3D, ObjectBox2D, Orientation

LIGHT_LOCATION = (0.0, -5.0, 10.0)
BACKGROUND_GRAY = 0.1

# Per-orientation euler rotation added to the model's calibration offset.
ROTATION_BY_ORIENTATION: dict[Orientation, tuple[float, float, float]] = {
    Orientation.FORWARD: (0.0, 0.0, 0.0),
    Orientation.BACKWARD: (0.0, 0.0, math.pi),
    Orientation.LEFT: (0.0, 0.0, -math.pi / 2.0),
    Orientation.RIGHT: (0.0, 0.0, math.pi / 2.0),
    Orientation.UPWARD: (-math.pi / 2.0, 0.0, 0.0),
    Orientation.DOWNWARD: (math.pi / 2.0, 0.0, 0.0),
}


class AssembleError(ValueError):
    """Raised when a layout object lacks a model or alignment, or a mesh is degenerate."""


@dataclass
class CameraPose:
    location: tuple[float, float, float]
    rotation_euler: tuple[float, float, float]  # radians, XYZ order

    def to_dict(self) -> dict:
        return {"location": list(self.location), "rotation_euler": list(self.rotation_euler)}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraPose":
        return cls(location=tuple(d["location"]), rotation_euler=tuple(d["rotation_euler"]))


@dataclass
class ObjectTransform:
    dimensions: tuple[float, float, float]  # target AABB extents, world units
    delta_location: tuple[float, float, float]
    rotation_euler: tuple[float, float, float]

    def to_dict(self) -> dict:
        return {
            "dimensions": list(self.dimensions),
            "delta_location": list(self.delta_location),
            "rotation_euler": list(self.rotation_euler),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectTransform":
        return cls(
            dimensions=tuple(d["dimensions"]),
            delta_location=tuple(d["delta_location"]),
            rotation_euler=tuple(d["rotation_euler"]),
        )


@dataclass
class AssembledScene:
    camera: CameraPose
    objects: list[tuple[str, ObjectTransform]]  # (model path, transform)
    light_location: tuple[float, float, float] = LIGHT_LOCATION
    background_gray: float = BACKGROUND_GRAY

    def to_dict(self) -> dict:
        return {
            "camera": self.camera.to_dict(),
            "light_location": list(self.light_location),
            "background_gray": self.background_gray,
            "objects": [
                {"model_path": path, **transform.to_dict()}
                for path, transform in self.objects
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AssembledScene":
        return cls(
            camera=CameraPose.from_dict(d["camera"]),
            light_location=tuple(d["light_location"]),
            background_gray=float(d["background_gray"]),
            objects=[
                (o["model_path"], ObjectTransform.from_dict(o)) for o in d["objects"]
            ],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "AssembledScene":
        return cls.from_dict(json.loads(Path(path).read_text()))


def place_camera(view: CameraView, rng: random.Random) -> CameraPose:
    """Camera location and euler rotation for a planned view.

    The x jitter is an inclusive integer draw: [-10, -5] for the left view,
    [5, 10] for the right view, [-1, 1] otherwise. Non-top cameras sit on the
    radius-15 circle at height 5; the top camera sits at (0, 1, 15). The
    rotation formula points the camera at the scene origin.
    """
    if view is CameraView.LEFT:
        random_x = rng.randint(-10, -5)
    elif view is CameraView.RIGHT:
        random_x = rng.randint(5, 10)
    else:
        random_x = rng.randint(-1, 1)
    if view is CameraView.TOP:
        location = (0.0, 1.0, 15.0)
    else:
        location = (float(random_x), -math.sqrt(225.0 - random_x**2), 5.0)
    x, y, z = location
    rotation = (
        math.atan(math.sqrt(x * x + y * y) / (z + 1e-5)),
        0.0,
        -math.atan(x / (y + 1e-5)),
    )
    return CameraPose(location=location, rotation_euler=rotation)


def standard_front_camera() -> CameraPose:
    """The calibration camera: front view with the x jitter forced to 0."""

    class _Zero:
        @staticmethod
        def randint(a: int, b: int) -> int:
            return 0

    return place_camera(CameraView.FRONT, _Zero())


def size_object(
    mesh_dims: tuple[float, float, float],
    box: ObjectBox2D,
    depth: float,
) -> tuple[float, float, float]:
    """Target world dimensions for an object.

    The target size mixes the 2D footprint with depth:
    ``M = max(width, height) * 10 + depth``. The mesh keeps its aspect
    ratios; whichever of its x/z extents is larger becomes M. Near objects
    (depth < 0.5) are shrunk by repeated division by 1.5 until the dimension
    sum is at most 25.
    """
    x, y, z = mesh_dims
    if x <= 0 or y <= 0 or z <= 0:
        raise AssembleError(f"degenerate mesh dimensions {mesh_dims}")
    m = max(box.width, box.height) * 10 + depth
    if max(x, z) == x:
        dims = (m, m * y / x, m * z / x)
    else:
        dims = (m * x / z, m * y / z, m)
    if depth < 0.5:
        while sum(dims) > 25:
            dims = (dims[0] / 1.5, dims[1] / 1.5, dims[2] / 1.5)
    return dims


def place_object(
    box: ObjectBox2D, depth: float, scaled_dy: float
) -> tuple[float, float, float]:
    """World translation of an object's bounding-box center.

    x follows the box center horizontally, z vertically (image top maps to
    +z), both magnified with depth; y pushes the object away from the camera
    proportionally to its own (already scaled) y extent.
    """
    tx = (box.left + box.width / 2 - 0.5) * 10 * (0.9 + depth)
    ty = (depth - 0.1) * (10 + scaled_dy)
    tz = -(box.top + box.height / 2 - 0.5) * 10 * (0.9 + depth) - 3 * depth
    return (tx, ty, tz)


def orient_object(
    orientation: Orientation, align_offset: tuple[float, float, float]
) -> tuple[float, float, float]:
    """Final euler rotation: calibration offset plus the orientation rotation."""
    base = ROTATION_BY_ORIENTATION[orientation]
    return (
        align_offset[0] + base[0],
        align_offset[1] + base[1],
        align_offset[2] + base[2],
    )


def assemble(
    layout3d: Layout3D,
    records: dict,
    alignments: dict,
    seed: int,
    mesh_dims: dict[str, tuple[float, float, float]] | None = None,
) -> AssembledScene:
    """Build the full scene for a lifted layout.

    ``records`` maps object name -> ModelRecord and ``alignments`` maps
    object name -> AlignmentResult; both must cover every layout object.
    ``mesh_dims`` optionally pre-supplies mesh AABB extents (otherwise each
    record's mesh file is loaded to measure them). The camera draw is the
    single use of the seeded generator.
    """
    from .mesh import load_obj  # local import to keep module deps one-way

    rng = random.Random(seed)
    camera = place_camera(layout3d.camera_view, rng)
    placed: list[tuple[str, ObjectTransform]] = []
    for pose in layout3d.objects:
        name = pose.box.name
        if name not in records:
            raise AssembleError(f"no model record for object {name!r}")
        if name not in alignments:
            raise AssembleError(f"no alignment for object {name!r}")
        record = records[name]
        if mesh_dims is not None and name in mesh_dims:
            dims_in = mesh_dims[name]
        else:
            dims_in = load_obj(record.path).extents
        dims = size_object(dims_in, pose.box, pose.depth)
        delta = place_object(pose.box, pose.depth, dims[1])
        rotation = orient_object(pose.orientation, alignments[name].rotation_offset)
        placed.append(
            (
                str(record.path),
                ObjectTransform(
                    dimensions=dims, delta_location=delta, rotation_euler=rotation
                ),
            )
        )
    return AssembledScene(camera=camera, objects=placed)
