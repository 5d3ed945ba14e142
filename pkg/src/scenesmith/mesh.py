"""Wavefront OBJ parsing and small procedural meshes.

Supported OBJ records: ``v``, ``vn``, ``f``. Faces with more than three
vertices are fan-triangulated from their first vertex. Group/object/material
records are skipped, so multi-part files collapse into a single mesh.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    """Raised for unparseable or structurally invalid mesh data."""


@dataclass
class Mesh:
    vertices: np.ndarray  # (V, 3) float64
    triangles: np.ndarray  # (T, 3) int32, zero-based
    normals: np.ndarray | None = field(default=None)

    def __post_init__(self) -> None:
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int32).reshape(-1, 3)
        if len(self.triangles) == 0:
            raise MeshError("mesh has no triangles")
        if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
            raise MeshError("triangle index out of range")

    @property
    def extents(self) -> tuple[float, float, float]:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        d = hi - lo
        return float(d[0]), float(d[1]), float(d[2])

    def world_triangles(self) -> np.ndarray:
        """Triangles as a (T, 3, 3) coordinate array."""
        return self.vertices[self.triangles]


def parse_obj(data: bytes | str) -> Mesh:
    """Parse OBJ text into a Mesh.

    Vertex indices are validated against the final vertex count; an index of
    0 or beyond the vertex count is reported with its line number.
    """
    if isinstance(data, bytes):
        text = data.decode("utf-8", errors="replace")
    else:
        text = data
    vertices: list[tuple[float, float, float]] = []
    normals: list[tuple[float, float, float]] = []
    faces: list[tuple[int, list[int]]] = []  # (line_no, vertex indices)
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise MeshError(f"line {line_no}: vertex needs 3 coordinates")
            vertices.append((float(parts[1]), float(parts[2]), float(parts[3])))
        elif tag == "vn":
            if len(parts) < 4:
                raise MeshError(f"line {line_no}: normal needs 3 coordinates")
            normals.append((float(parts[1]), float(parts[2]), float(parts[3])))
        elif tag == "f":
            if len(parts) < 4:
                raise MeshError(f"line {line_no}: face needs at least 3 vertices")
            idx = []
            for token in parts[1:]:
                head = token.split("/")[0]
                try:
                    idx.append(int(head))
                except ValueError as exc:
                    raise MeshError(f"line {line_no}: bad face index {head!r}") from exc
            faces.append((line_no, idx))
        # other records (vt, g, o, s, usemtl, mtllib, ...) are skipped

    if not faces:
        raise MeshError("no faces")
    n_verts = len(vertices)
    tris: list[tuple[int, int, int]] = []
    for line_no, idx in faces:
        for i in idx:
            if i < 1 or i > n_verts:
                raise MeshError(
                    f"line {line_no}: vertex index {i} out of range (1..{n_verts})"
                )
        zero_based = [i - 1 for i in idx]
        for k in range(1, len(zero_based) - 1):
            tris.append((zero_based[0], zero_based[k], zero_based[k + 1]))

    return Mesh(
        vertices=np.array(vertices, dtype=np.float64),
        triangles=np.array(tris, dtype=np.int32),
        normals=np.array(normals, dtype=np.float64) if normals else None,
    )


def load_obj(path: str | Path) -> Mesh:
    return parse_obj(Path(path).read_bytes())


def dump_obj(mesh: Mesh) -> str:
    """Serialize a Mesh back to OBJ text (v and f records only)."""
    lines = []
    for v in mesh.vertices:
        lines.append(f"v {v[0]:.6f} {v[1]:.6f} {v[2]:.6f}")
    for t in mesh.triangles:
        lines.append(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}")
    return "\n".join(lines) + "\n"


def save_obj(mesh: Mesh, path: str | Path) -> None:
    Path(path).write_text(dump_obj(mesh))


_BOX_FACES = [
    (0, 1, 3, 2),  # -y
    (4, 6, 7, 5),  # +y
    (0, 4, 5, 1),  # -z
    (2, 3, 7, 6),  # +z
    (0, 2, 6, 4),  # -x
    (1, 5, 7, 3),  # +x
]


def box_mesh(sx: float = 1.0, sy: float = 1.0, sz: float = 1.0,
             center: tuple[float, float, float] = (0.0, 0.0, 0.0)) -> Mesh:
    """Axis-aligned box with the given edge lengths (8 verts, 12 triangles)."""
    cx, cy, cz = center
    hx, hy, hz = sx / 2.0, sy / 2.0, sz / 2.0
    corners = []
    for dy in (-hy, hy):
        for dx in (-hx, hx):
            for dz in (-hz, hz):
                corners.append((cx + dx, cy + dy, cz + dz))
    tris = []
    for quad in _BOX_FACES:
        a, b, c, d = quad
        tris.append((a, b, c))
        tris.append((a, c, d))
    return Mesh(vertices=np.array(corners), triangles=np.array(tris))


def marked_box_mesh(sx: float = 1.0, sy: float = 1.0, sz: float = 1.0,
                    nose: float = 0.4) -> Mesh:
    """A box with a pyramidal nose on its -y side.

    The nose breaks front/back symmetry, which makes orientation visible in
    renders: the "faces camera" pose is the one where the nose points at the
    default front camera.
    """
    base = box_mesh(sx, sy, sz)
    hy = sy / 2.0
    s = min(sx, sz) / 4.0
    apex_i = len(base.vertices)
    ring = [
        (-s, -hy, -s),
        (s, -hy, -s),
        (s, -hy, s),
        (-s, -hy, s),
    ]
    verts = np.vstack([base.vertices, np.array(ring), [(0.0, -hy - nose, 0.0)]])
    ring_i = [apex_i, apex_i + 1, apex_i + 2, apex_i + 3]
    apex = apex_i + 4
    extra = [
        (ring_i[0], ring_i[1], apex),
        (ring_i[1], ring_i[2], apex),
        (ring_i[2], ring_i[3], apex),
        (ring_i[3], ring_i[0], apex),
    ]
    tris = np.vstack([base.triangles, np.array(extra, dtype=np.int32)])
    return Mesh(vertices=verts, triangles=tris)


def procedural_mesh(key: int) -> Mesh:
    """Deterministic small mesh derived from an integer key.

    Used by the mock asset providers: proportions vary with the key so that
    different object names get visibly different models.
    """
    sx = 0.6 + (key % 97) / 97.0
    sy = 0.6 + ((key // 97) % 89) / 89.0
    sz = 0.6 + ((key // 8633) % 83) / 83.0
    nose = 0.25 + ((key // 716539) % 7) / 20.0
    return marked_box_mesh(sx, sy, sz, nose=nose)
