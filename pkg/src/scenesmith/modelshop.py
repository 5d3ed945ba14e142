"""3D model acquisition and face-camera orientation calibration.

Acquisition walks a three-tier fallback: the local model shop, then online
search (best candidate by name/title embedding similarity), then text-to-3D
generation. Anything found outside the shop is inserted into it, so the shop
only ever grows. Calibration renders a fixed view set of a model and asks
the classifier backend which view "faces camera"; the winning view's
rotation becomes the model's alignment offset.
"""

from __future__ import annotations

import json
import logging
import math
import os
import random
import re
import tempfile
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

import numpy as np

from .assemble import standard_front_camera
from .geometry import euler_xyz_matrix, normalize_angle
from .imaging import encode_png
from .mesh import Mesh, MeshError, dump_obj, parse_obj
from .render import RenderSettings, render_triangles, to_gray8

logger = logging.getLogger(__name__)

VIEW_COUNT = 10  # 8 azimuth steps plus the two pitch poles
CALIBRATION_RESOLUTION = 96
CALIBRATION_OBJECT_SIZE = 6.0  # world units the normalized mesh spans


class AcquisitionError(RuntimeError):
    """All acquisition tiers failed for an object."""


class ShopError(RuntimeError):
    """Model shop structural problem (bad index, insufficient entries, ...)."""


class ModelSource(str, Enum):
    SHOP = "shop"
    ONLINE = "online"
    GENERATED = "generated"


@dataclass
class ModelRecord:
    category: str
    path: str
    source: ModelSource
    added_at: str
    face_view: int | None = None

    def to_dict(self) -> dict:
        d = {
            "category": self.category,
            "path": self.path,
            "source": self.source.value,
            "added_at": self.added_at,
        }
        if self.face_view is not None:
            d["face_view"] = self.face_view
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelRecord":
        return cls(
            category=d["category"],
            path=d["path"],
            source=ModelSource(d["source"]),
            added_at=d["added_at"],
            face_view=d.get("face_view"),
        )


def normalize_name(name: str) -> str:
    """Canonical category key: lowercase, trimmed, collapsed whitespace,
    trailing plural "s" stripped for words longer than three characters."""
    out = re.sub(r"\s+", " ", name.strip().lower())
    if len(out) > 3 and out.endswith("s"):
        out = out[:-1]
    if not out:
        raise ValueError(f"object name {name!r} normalizes to nothing")
    return out


def _slug(category: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", category).strip("_")


class ModelShopIndex:
    """On-disk catalog of meshes keyed by normalized category.

    Layout: ``<dir>/index.json`` plus ``<dir>/models/<category>.obj``.
    Readers share the in-memory map; insertion holds an exclusive lock and
    rewrites the index atomically. Existing entries are never replaced.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.models_dir = self.directory / "models"
        self.index_path = self.directory / "index.json"
        self._lock = threading.Lock()
        self._records: dict[str, ModelRecord] = {}
        self.models_dir.mkdir(parents=True, exist_ok=True)
        if self.index_path.exists():
            self._load()
        else:
            self._write_index()

    def _load(self) -> None:
        try:
            raw = json.loads(self.index_path.read_text())
        except json.JSONDecodeError as exc:
            raise ShopError(f"shop index {self.index_path}: invalid JSON: {exc}") from exc
        self._records = {
            r["category"]: ModelRecord.from_dict(r) for r in raw.get("records", [])
        }

    def _write_index(self) -> None:
        data = {
            "records": [
                self._records[c].to_dict() for c in sorted(self._records)
            ]
        }
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w") as fh:
                json.dump(data, fh, indent=2, sort_keys=True)
            os.replace(tmp, self.index_path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def __len__(self) -> int:
        return len(self._records)

    def categories(self) -> list[str]:
        return sorted(self._records)

    def lookup(self, category: str) -> ModelRecord | None:
        return self._records.get(category)

    def mesh_path(self, category: str) -> Path:
        return self.models_dir / f"{_slug(category)}.obj"

    def relative_path(self, record: ModelRecord) -> str:
        """Record path relative to the shop directory (manifest form)."""
        return os.path.relpath(record.path, self.directory)

    def add_mesh(self, category: str, obj_bytes: bytes, source: ModelSource,
                 face_view: int | None = None) -> ModelRecord:
        """Validate and insert a mesh; a no-op returning the existing record
        when the category is already present."""
        parse_obj(obj_bytes)  # validation: must be a loadable mesh
        with self._lock:
            existing = self._records.get(category)
            if existing is not None:
                return existing
            path = self.mesh_path(category)
            fd, tmp = tempfile.mkstemp(dir=self.models_dir, suffix=".tmp")
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(obj_bytes)
                os.replace(tmp, path)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
            record = ModelRecord(
                category=category,
                path=str(path),
                source=source,
                added_at=datetime.now(timezone.utc).isoformat(),
                face_view=face_view,
            )
            self._records[category] = record
            self._write_index()
            return record

    def annotate_face_view(self, category: str, view: int) -> None:
        with self._lock:
            record = self._records.get(category)
            if record is None:
                raise ShopError(f"no shop entry for {category!r}")
            self._records[category] = replace(record, face_view=view)
            self._write_index()


def acquire(name: str, shop: ModelShopIndex, hub, switches) -> ModelRecord:
    """Acquire a model for an object name via the three-tier fallback.

    With the decision tree ablated, acquisition always goes straight to
    text-to-3D generation (the result still lands in the shop if absent).
    """
    category = normalize_name(name)
    if not getattr(switches, "decision_tree", True):
        data = hub.text_to_3d(category)
        record = shop.add_mesh(category, data, ModelSource.GENERATED)
        return replace(record, source=ModelSource.GENERATED)

    record = shop.lookup(category)
    if record is not None:
        return replace(record, source=ModelSource.SHOP)

    try:
        candidates = hub.online_search(category)
    except Exception as exc:
        logger.warning("acquire %r: online search failed (%s), falling through", name, exc)
        candidates = []
    if candidates:
        vectors = hub.embed([category] + [c.title for c in candidates])
        query = vectors[0]

        def cosine(vec):
            dot = sum(a * b for a, b in zip(query, vec))
            nq = sum(a * a for a in query) ** 0.5
            nv = sum(b * b for b in vec) ** 0.5
            return dot / (nq * nv) if nq > 0 and nv > 0 else 0.0

        sims = [cosine(v) for v in vectors[1:]]
        best = max(range(len(candidates)), key=lambda i: (sims[i], -i))
        try:
            data = hub.fetch_asset(candidates[best].url)
            parse_obj(data)
            record = shop.add_mesh(category, data, ModelSource.ONLINE)
            return replace(record, source=ModelSource.ONLINE)
        except Exception as exc:  # unusable download: fall through to generation
            logger.warning("acquire %r: online candidate unusable (%s)", name, exc)

    try:
        data = hub.text_to_3d(category)
        parse_obj(data)
    except Exception as exc:
        raise AcquisitionError(f"all acquisition tiers failed for {name!r}") from exc
    record = shop.add_mesh(category, data, ModelSource.GENERATED)
    return replace(record, source=ModelSource.GENERATED)


def view_rotations(n_views: int = VIEW_COUNT) -> list[tuple[float, float, float]]:
    """The calibration view set: (n_views - 2) azimuth steps plus pitch poles."""
    if n_views < 3:
        raise ValueError("need at least 3 views (one azimuth step plus the poles)")
    steps = n_views - 2
    rotations = [(0.0, 0.0, k * (2.0 * math.pi / steps)) for k in range(steps)]
    rotations.append((math.pi / 2.0, 0.0, 0.0))
    rotations.append((-math.pi / 2.0, 0.0, 0.0))
    return rotations


def render_views(
    mesh: Mesh,
    n_views: int = VIEW_COUNT,
    resolution: int = CALIBRATION_RESOLUTION,
) -> list[tuple[np.ndarray, tuple[float, float, float]]]:
    """Render a mesh under the calibration view set.

    The mesh is centered at the origin and uniformly scaled to a fixed size,
    then rotated about its center for each view; the camera is the standard
    front camera with zero x-jitter. Returns (8-bit image, applied rotation)
    pairs in view order.
    """
    camera = standard_front_camera()
    settings = RenderSettings(resolution=resolution)
    verts = mesh.vertices
    lo, hi = verts.min(axis=0), verts.max(axis=0)
    extents = hi - lo
    max_extent = float(extents.max())
    if max_extent <= 0:
        raise MeshError("cannot render a degenerate mesh")
    centered = (verts - (lo + hi) / 2.0) * (CALIBRATION_OBJECT_SIZE / max_extent)
    out = []
    for rotation in view_rotations(n_views):
        rot = euler_xyz_matrix(*rotation)
        x, y, z = centered[:, 0], centered[:, 1], centered[:, 2]
        world = np.empty_like(centered)
        world[:, 0] = rot[0, 0] * x + rot[0, 1] * y + rot[0, 2] * z
        world[:, 1] = rot[1, 0] * x + rot[1, 1] * y + rot[1, 2] * z
        world[:, 2] = rot[2, 0] * x + rot[2, 1] * y + rot[2, 2] * z
        fb = render_triangles(camera, world[mesh.triangles], settings)
        out.append((to_gray8(fb.color), rotation))
    return out


@dataclass
class AlignmentResult:
    rotation_offset: tuple[float, float, float]  # euler radians, each in (-pi, pi]
    chosen_view: int
    similarity: float


def calibrate_face_camera(name: str, views, hub) -> AlignmentResult:
    """Pick the view whose render best matches "<name> faces camera".

    Ties go to the lowest view index. The returned offset is the chosen
    view's rotation with each component normalized into (-pi, pi].
    """
    if not views:
        raise ValueError("calibrate_face_camera needs at least one view")
    sims = [
        hub.classify_face(encode_png(image), name) for image, _rotation in views
    ]
    best = max(range(len(sims)), key=lambda i: (sims[i], -i))
    rotation = views[best][1]
    offset = tuple(normalize_angle(c) for c in rotation)
    return AlignmentResult(rotation_offset=offset, chosen_view=best, similarity=sims[best])


def build_finetune_dataset(
    shop: ModelShopIndex,
    n_models: int,
    out_dir: str | Path,
    seed: int = 0,
    n_views: int = VIEW_COUNT,
    resolution: int = CALIBRATION_RESOLUTION,
) -> dict:
    """Write the face-camera classifier dataset: per model, the annotated
    face view duplicated five times (positives) plus five sampled non-face
    views (negatives), with captions "<name> faces camera" / "<name> not
    face camera". Returns a summary with the manifest path and pair counts.
    """
    if n_models < 1:
        raise ValueError("n_models must be >= 1")
    if len(shop) < n_models:
        raise ShopError(f"shop has {len(shop)} models, need {n_models}")
    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    categories = rng.sample(shop.categories(), n_models)
    records = []
    from .mesh import load_obj

    for category in categories:
        record = shop.lookup(category)
        views = render_views(load_obj(record.path), n_views=n_views, resolution=resolution)
        face = record.face_view if record.face_view is not None else 0
        slug = _slug(category)
        face_png = encode_png(views[face][0])
        for copy in range(5):
            path = images_dir / f"{slug}_pos_{copy}.png"
            path.write_bytes(face_png)
            records.append(
                {"path": str(path.relative_to(out_dir)), "caption": f"{category} faces camera", "label": 1}
            )
        negatives = rng.sample([k for k in range(len(views)) if k != face], 5)
        for j, k in enumerate(negatives):
            path = images_dir / f"{slug}_neg_{j}.png"
            path.write_bytes(encode_png(views[k][0]))
            records.append(
                {"path": str(path.relative_to(out_dir)), "caption": f"{category} not face camera", "label": 0}
            )
    manifest_path = out_dir / "captions.jsonl"
    with manifest_path.open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    positives = sum(1 for r in records if r["label"] == 1)
    return {
        "pairs": len(records),
        "positives": positives,
        "negatives": len(records) - positives,
        "manifest": str(manifest_path),
        "models": categories,
    }


def seed_shop_from(source_dir: str | Path, dest_dir: str | Path) -> ModelShopIndex:
    """Copy a packaged starter shop into a writable location (no-op when the
    destination already has an index)."""
    import shutil

    dest = Path(dest_dir)
    if (dest / "index.json").exists():
        return ModelShopIndex(dest)
    source = Path(source_dir)
    dest.mkdir(parents=True, exist_ok=True)
    (dest / "models").mkdir(exist_ok=True)
    records = json.loads((source / "index.json").read_text())["records"]
    for rec in records:
        name = Path(rec["path"]).name
        shutil.copy(source / "models" / name, dest / "models" / name)
    rewritten = []
    for rec in records:
        rec = dict(rec)
        rec["path"] = str(dest / "models" / Path(rec["path"]).name)
        rewritten.append(rec)
    (dest / "index.json").write_text(
        json.dumps({"records": rewritten}, indent=2, sort_keys=True)
    )
    return ModelShopIndex(dest)


def starter_shop_dir() -> Path:
    """Location of the small bundled starter shop."""
    from importlib import resources

    return Path(str(resources.files("scenesmith.data").joinpath("starter_shop")))
