"""2D layout planning and 2D-to-3D lifting.

The planner works in two phases: a 2D layout is requested from the language
backend with retrieved in-context examples, then three follow-up exchanges
lift it to 3D (per-object depth, per-object orientation, one scene camera
view). All parsing here is tolerant: out-of-range box values are clamped
with a logged warning rather than rejected, because language-model output is
noisy.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

logger = logging.getLogger(__name__)

MIN_EXTENT = 1e-6  # smallest legal box width/height after clamping


class LayoutError(ValueError):
    """Raised for unusable planner output or a malformed layout shop."""


class Orientation(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"
    LEFT = "left"
    RIGHT = "right"
    UPWARD = "upward"
    DOWNWARD = "downward"


class CameraView(str, Enum):
    FRONT = "front"
    LEFT = "left"
    RIGHT = "right"
    TOP = "top"


@dataclass
class ObjectBox2D:
    """One object's normalized bounding box; all fields are image fractions."""

    name: str
    left: float
    top: float
    width: float
    height: float

    def validate(self) -> None:
        if not self.name:
            raise LayoutError("box name is empty")
        for fname in ("left", "top", "width", "height"):
            v = getattr(self, fname)
            if not (0.0 <= v <= 1.0):
                raise LayoutError(f"box {self.name!r}: {fname}={v} outside [0, 1]")
        if self.width <= 0 or self.height <= 0:
            raise LayoutError(f"box {self.name!r}: zero-size box")
        if self.left + self.width > 1.0 + 1e-12:
            raise LayoutError(f"box {self.name!r}: left + width > 1")
        if self.top + self.height > 1.0 + 1e-12:
            raise LayoutError(f"box {self.name!r}: top + height > 1")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "left": self.left,
            "top": self.top,
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectBox2D":
        box = cls(
            name=str(d["name"]),
            left=float(d["left"]),
            top=float(d["top"]),
            width=float(d["width"]),
            height=float(d["height"]),
        )
        box.validate()
        return box


@dataclass
class Layout2D:
    objects: list[ObjectBox2D]

    def validate(self) -> None:
        if not self.objects:
            raise LayoutError("layout has no objects")
        for box in self.objects:
            box.validate()

    def to_dict(self) -> dict:
        return {"objects": [b.to_dict() for b in self.objects]}

    @classmethod
    def from_dict(cls, d: dict) -> "Layout2D":
        layout = cls(objects=[ObjectBox2D.from_dict(b) for b in d["objects"]])
        layout.validate()
        return layout


@dataclass
class ObjectPose:
    box: ObjectBox2D
    depth: float  # 0 = nearest, 1 = farthest
    orientation: Orientation

    def to_dict(self) -> dict:
        d = self.box.to_dict()
        d["depth"] = self.depth
        d["orientation"] = self.orientation.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectPose":
        return cls(
            box=ObjectBox2D.from_dict(d),
            depth=float(d["depth"]),
            orientation=Orientation(d["orientation"]),
        )


@dataclass
class Layout3D:
    objects: list[ObjectPose]
    camera_view: CameraView

    def validate(self) -> None:
        if not self.objects:
            raise LayoutError("3D layout has no objects")
        for pose in self.objects:
            pose.box.validate()
            if not (0.0 <= pose.depth <= 1.0):
                raise LayoutError(f"object {pose.box.name!r}: depth outside [0, 1]")

    def to_dict(self) -> dict:
        return {
            "objects": [p.to_dict() for p in self.objects],
            "camera_view": self.camera_view.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Layout3D":
        layout = cls(
            objects=[ObjectPose.from_dict(p) for p in d["objects"]],
            camera_view=CameraView(d["camera_view"]),
        )
        layout.validate()
        return layout

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "Layout3D":
        return cls.from_dict(json.loads(Path(path).read_text()))


class ShopCategory(str, Enum):
    BASE = "base"
    EXPANDED_3D = "expanded_3d"
    EXPANDED_COMPLEX = "expanded_complex"


@dataclass
class LayoutShopEntry:
    id: int
    prompt: str
    object_list: list[ObjectBox2D]
    category_tag: ShopCategory = ShopCategory.BASE


def load_layout_shop(path: str | Path) -> list[LayoutShopEntry]:
    """Load layout exemplars from a JSON file.

    Entries whose boxes violate the box invariants are skipped with a logged
    warning naming their id; duplicate ids are a hard error.
    """
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise LayoutError(f"layout shop {path}: invalid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise LayoutError(f"layout shop {path}: expected a JSON array of entries")
    entries: list[LayoutShopEntry] = []
    seen: set[int] = set()
    for item in raw:
        entry_id = int(item["id"])
        if entry_id in seen:
            raise LayoutError(f"layout shop {path}: duplicate id {entry_id}")
        seen.add(entry_id)
        try:
            boxes = [ObjectBox2D.from_dict(b) for b in item["object_list"]]
            if not boxes:
                raise LayoutError("empty object_list")
        except (LayoutError, KeyError, TypeError, ValueError) as exc:
            logger.warning("layout shop: rejected entry id=%s: %s", entry_id, exc)
            continue
        entries.append(
            LayoutShopEntry(
                id=entry_id,
                prompt=str(item["prompt"]),
                object_list=boxes,
                category_tag=ShopCategory(item.get("category_tag", "base")),
            )
        )
    return entries


def _cosine(a: list[float], b: list[float]) -> float:
    dot = sum(x * y for x, y in zip(a, b))
    na = sum(x * x for x in a) ** 0.5
    nb = sum(y * y for y in b) ** 0.5
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)


def retrieve_examples(user_prompt: str, shop, hub, k: int = 5) -> list[LayoutShopEntry]:
    """Top-k shop entries by embedding cosine similarity to the user prompt.

    Ties are broken by ascending entry id so retrieval is deterministic.
    """
    entries = list(shop)
    if not entries or k <= 0:
        return []
    vectors = hub.embed([user_prompt] + [e.prompt for e in entries])
    query = vectors[0]
    scored = [
        (_cosine(query, vec), entry)
        for vec, entry in zip(vectors[1:], entries)
    ]
    scored.sort(key=lambda pair: (-pair[0], pair[1].id))
    return [entry for _, entry in scored[: min(k, len(entries))]]


_TEMPLATE_CACHE: dict[str, str] = {}


def load_template(name: str) -> str:
    if name not in _TEMPLATE_CACHE:
        ref = resources.files("scenesmith.prompts").joinpath(f"{name}.txt")
        _TEMPLATE_CACHE[name] = ref.read_text()
    return _TEMPLATE_CACHE[name]


def build_icl_prompt(user_prompt: str, examples: list[LayoutShopEntry]) -> str:
    """Render the 2D planning instruction with in-context example blocks."""
    blocks = []
    for entry in examples:
        layout_json = json.dumps(
            [b.to_dict() for b in entry.object_list], separators=(", ", ": ")
        )
        blocks.append(f"Prompt: {entry.prompt}\nLayout: {layout_json}\n")
    return load_template("layout2d_icl").format(
        examples="\n".join(blocks), prompt=user_prompt
    )


def _iter_json_arrays(text: str):
    """Yield every JSON array parseable from the text, left to right."""
    decoder = json.JSONDecoder()
    i = 0
    while True:
        start = text.find("[", i)
        if start < 0:
            return
        try:
            value, end = decoder.raw_decode(text, start)
        except json.JSONDecodeError:
            i = start + 1
            continue
        if isinstance(value, list):
            yield value
            i = start + end if end <= start else end
        else:
            i = start + 1


def _clamp_box(name: str, left: float, top: float, width: float, height: float) -> ObjectBox2D:
    def _warn(fname, old, new):
        if old != new:
            logger.warning("layout parse: clamped %s.%s from %s to %s", name, fname, old, new)

    l2 = min(max(left, 0.0), 1.0 - MIN_EXTENT)
    t2 = min(max(top, 0.0), 1.0 - MIN_EXTENT)
    w2 = min(max(width, MIN_EXTENT), 1.0 - l2)
    h2 = min(max(height, MIN_EXTENT), 1.0 - t2)
    _warn("left", left, l2)
    _warn("top", top, t2)
    _warn("width", width, w2)
    _warn("height", height, h2)
    return ObjectBox2D(name=name, left=l2, top=t2, width=w2, height=h2)


_BOX_KEYS = ("name", "left", "top", "width", "height")


def parse_layout_2d(llm_output: str) -> Layout2D:
    """Extract the first well-formed object array from planner output.

    Surrounding prose is ignored. Box values outside the legal range are
    clamped (with a warning); an output with no parseable array or zero
    usable objects raises LayoutError.
    """
    for candidate in _iter_json_arrays(llm_output):
        boxes: list[ObjectBox2D] = []
        shape_ok = bool(candidate)
        for item in candidate:
            if not isinstance(item, dict) or not all(key in item for key in _BOX_KEYS):
                shape_ok = False
                break
            name = str(item["name"]).strip()
            if not name:
                logger.warning("layout parse: dropped object with empty name")
                continue
            try:
                boxes.append(
                    _clamp_box(
                        name,
                        float(item["left"]),
                        float(item["top"]),
                        float(item["width"]),
                        float(item["height"]),
                    )
                )
            except (TypeError, ValueError):
                shape_ok = False
                break
        if not shape_ok:
            continue
        if not boxes:
            raise LayoutError("planner output contained zero usable objects")
        layout = Layout2D(objects=boxes)
        layout.validate()
        return layout
    raise LayoutError("no object-list structure found in planner output")


def _first_number_array(text: str) -> list[float] | None:
    for candidate in _iter_json_arrays(text):
        if candidate and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in candidate):
            return [float(v) for v in candidate]
    return None


def _first_string_array(text: str) -> list[str] | None:
    for candidate in _iter_json_arrays(text):
        if candidate and all(isinstance(v, str) for v in candidate):
            return candidate
    return None


_CAMERA_TOKEN = re.compile(r"\b(front|left|right|top)\b", re.IGNORECASE)


def parse_camera_view(text: str) -> CameraView:
    match = _CAMERA_TOKEN.search(text)
    if match is None:
        logger.warning("camera parse: no view token in %r, using front", text[:60])
        return CameraView.FRONT
    return CameraView(match.group(1).lower())


def _objects_json(layout2d: Layout2D) -> str:
    return json.dumps([b.name for b in layout2d.objects])


def lift_to_3d(user_prompt: str, layout2d: Layout2D, hub, switches, llm_params) -> Layout3D:
    """Lift a 2D layout to 3D via three reasoning exchanges.

    Ablation switches replace individual exchanges with their neutral
    defaults (depth 0.5, orientation forward, front view). A depth reply
    whose count disagrees with the object count is an error; unknown
    orientation strings fall back to forward with a warning.
    """
    layout2d.validate()
    names_json = _objects_json(layout2d)
    n = len(layout2d.objects)

    if getattr(switches, "depth_planning", True):
        prompt = load_template("depth_cot").format(prompt=user_prompt, objects=names_json)
        reply = hub.llm(prompt, llm_params.top_p, llm_params.temperature)
        depths = _first_number_array(reply)
        if depths is None:
            raise LayoutError(f"no depth list in reply: {reply[:120]!r}")
        if len(depths) != n:
            raise LayoutError(f"depth list has {len(depths)} values for {n} objects")
        clamped = []
        for name, d in zip((b.name for b in layout2d.objects), depths):
            c = min(max(d, 0.0), 1.0)
            if c != d:
                logger.warning("lift: clamped depth of %s from %s to %s", name, d, c)
            clamped.append(c)
        depths = clamped
    else:
        depths = [0.5] * n

    if getattr(switches, "orientation_planning", True):
        prompt = load_template("orientation_cot").format(prompt=user_prompt, objects=names_json)
        reply = hub.llm(prompt, llm_params.top_p, llm_params.temperature)
        words = _first_string_array(reply) or []
        orientations = []
        for i in range(n):
            word = words[i].strip().lower() if i < len(words) else ""
            try:
                orientations.append(Orientation(word))
            except ValueError:
                if word:
                    logger.warning("lift: unknown orientation %r, using forward", word)
                else:
                    logger.warning("lift: missing orientation for object %d, using forward", i)
                orientations.append(Orientation.FORWARD)
    else:
        orientations = [Orientation.FORWARD] * n

    if getattr(switches, "camera_planning", True):
        prompt = load_template("camera_cot").format(prompt=user_prompt)
        reply = hub.llm(prompt, llm_params.top_p, llm_params.temperature)
        camera_view = parse_camera_view(reply)
    else:
        camera_view = CameraView.FRONT

    layout = Layout3D(
        objects=[
            ObjectPose(box=box, depth=depth, orientation=orientation)
            for box, depth, orientation in zip(layout2d.objects, depths, orientations)
        ],
        camera_view=camera_view,
    )
    layout.validate()
    return layout
