"""Run manifest: the lossless record of one pipeline run.

The manifest serializes to JSON with sorted keys and fixed separators, so a
deterministic run yields deterministic bytes. Wall-clock timings are the one
nondeterministic section; ``core_bytes`` serializes everything except
timings and is the unit of byte-level comparison between runs. All artifact
paths are stored relative to the run's output directory (model paths
relative to the shop directory), which keeps manifests location-independent.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .assemble import CameraPose
from .layout import Layout2D, Layout3D


class ManifestError(ValueError):
    """Raised when a manifest fails its structural invariants."""


@dataclass
class Acquisition:
    object: str
    source: str
    path: str

    def to_dict(self) -> dict:
        return {"object": self.object, "source": self.source, "path": self.path}


@dataclass
class AlignmentEntry:
    object: str
    rotation_offset: tuple[float, float, float]
    chosen_view: int
    similarity: float

    def to_dict(self) -> dict:
        return {
            "object": self.object,
            "rotation_offset": list(self.rotation_offset),
            "chosen_view": self.chosen_view,
            "similarity": self.similarity,
        }


@dataclass
class RunManifest:
    prompt: str
    seed: int
    layout2d: Layout2D | None = None
    layout3d: Layout3D | None = None
    acquisitions: list[Acquisition] = field(default_factory=list)
    alignments: list[AlignmentEntry] = field(default_factory=list)
    camera: CameraPose | None = None
    condition_images: dict[str, str] = field(default_factory=dict)
    candidates: list[dict] = field(default_factory=list)  # {path, control_scale}
    scores: list[float] = field(default_factory=list)
    selected_index: int | None = None
    backend_calls: dict[str, int] = field(default_factory=dict)
    artifacts: dict[str, str] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)
    error: dict | None = None

    def validate(self) -> None:
        if self.selected_index is not None:
            if not self.scores:
                raise ManifestError("selected_index set without scores")
            best = max(range(len(self.scores)), key=lambda i: (self.scores[i], -i))
            if self.scores[self.selected_index] != self.scores[best]:
                raise ManifestError("selected_index is not an argmax of scores")
        if self.candidates and self.scores and len(self.candidates) != len(self.scores):
            raise ManifestError("candidates and scores length mismatch")

    def _core_dict(self) -> dict:
        return {
            "prompt": self.prompt,
            "seed": self.seed,
            "layout2d": self.layout2d.to_dict() if self.layout2d else None,
            "layout3d": self.layout3d.to_dict() if self.layout3d else None,
            "acquisitions": [a.to_dict() for a in self.acquisitions],
            "alignments": [a.to_dict() for a in self.alignments],
            "camera": self.camera.to_dict() if self.camera else None,
            "condition_images": self.condition_images,
            "candidates": self.candidates,
            "scores": self.scores,
            "selected_index": self.selected_index,
            "backend_calls": self.backend_calls,
            "artifacts": self.artifacts,
            "error": self.error,
        }

    def to_dict(self) -> dict:
        d = self._core_dict()
        d["timings"] = self.timings
        return d

    def core_bytes(self) -> bytes:
        """Canonical serialization excluding wall-clock timings."""
        return json.dumps(self._core_dict(), sort_keys=True, separators=(",", ":")).encode()

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        m = cls(
            prompt=d["prompt"],
            seed=d["seed"],
            layout2d=Layout2D.from_dict(d["layout2d"]) if d.get("layout2d") else None,
            layout3d=Layout3D.from_dict(d["layout3d"]) if d.get("layout3d") else None,
            acquisitions=[Acquisition(**a) for a in d.get("acquisitions", [])],
            alignments=[
                AlignmentEntry(
                    object=a["object"],
                    rotation_offset=tuple(a["rotation_offset"]),
                    chosen_view=a["chosen_view"],
                    similarity=a["similarity"],
                )
                for a in d.get("alignments", [])
            ],
            camera=CameraPose.from_dict(d["camera"]) if d.get("camera") else None,
            condition_images=d.get("condition_images", {}),
            candidates=d.get("candidates", []),
            scores=d.get("scores", []),
            selected_index=d.get("selected_index"),
            backend_calls=d.get("backend_calls", {}),
            artifacts=d.get("artifacts", {}),
            timings=d.get("timings", {}),
            error=d.get("error"),
        )
        m.validate()
        return m

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls.from_dict(json.loads(text))

    def save(self, path: str | Path) -> None:
        """Atomic write (temp file + rename)."""
        path = Path(path)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w") as fh:
                fh.write(self.to_json())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        return cls.from_json(Path(path).read_text())
