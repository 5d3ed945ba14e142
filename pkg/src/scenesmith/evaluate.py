"""Benchmark harness: prompt files, VQA-style scoring, aggregate reports.

Scoring asks a vision-language backend to rate text-image alignment and
parses the ``("score", X.XXXX)`` tuple out of its reply. The combined
instruction lists all four criteria; per-dimension mode sends one variant
per criterion (the variant keeps the template and lists only that
criterion, preserving its original number).
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .layout import Layout2D, load_template

logger = logging.getLogger(__name__)

CRITERIA = {
    "count": "(1) object count",
    "orientation": "(2) object orientation",
    "spatial_3d": "(3) 3D spatial relationship between objects",
    "camera_view": "(4) camera view",
}
DIMENSIONS = tuple(CRITERIA)
COMBINED_CRITERIA = (
    "(1) object count, (2) object orientation, "
    "(3) 3D spatial relationship between objects, and (4) camera view"
)


class ScoreParseError(ValueError):
    """No score tuple found in a scorer reply."""


class PromptFileError(ValueError):
    """Malformed benchmark prompt file."""


@dataclass
class BenchmarkPrompt:
    id: int
    text: str
    dimensions: tuple[str, ...] = ()

    def validate(self) -> None:
        if not self.text:
            raise PromptFileError(f"prompt {self.id}: empty text")
        for d in self.dimensions:
            if d not in DIMENSIONS:
                raise PromptFileError(f"prompt {self.id}: unknown dimension tag {d!r}")


@dataclass
class ScoreRecord:
    prompt_id: int
    score: float | None
    dimension_scores: dict[str, float] | None = None

    def to_dict(self) -> dict:
        return {
            "prompt_id": self.prompt_id,
            "score": self.score,
            "dimension_scores": self.dimension_scores,
        }


@dataclass
class EvalReport:
    mode: str
    records: list[ScoreRecord] = field(default_factory=list)
    mean: float | None = None
    dimension_means: dict[str, float] | None = None

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "records": [r.to_dict() for r in self.records],
            "mean": self.mean,
            "dimension_means": self.dimension_means,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))


def load_prompts(path: str | Path) -> list[BenchmarkPrompt]:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise PromptFileError(f"prompt file {path}: invalid JSON: {exc}") from exc
    prompts = []
    seen: set[int] = set()
    for item in raw:
        p = BenchmarkPrompt(
            id=int(item["id"]),
            text=str(item["text"]),
            dimensions=tuple(item.get("dimensions", ())),
        )
        p.validate()
        if p.id in seen:
            raise PromptFileError(f"duplicate prompt id {p.id}")
        seen.add(p.id)
        prompts.append(p)
    return prompts


def build_vqa_instruction(prompt_text: str, dimension: str | None = None) -> str:
    """The scoring instruction for a prompt (combined or one-dimension)."""
    criteria = COMBINED_CRITERIA if dimension is None else CRITERIA[dimension]
    return load_template("vqa_instruction").format(prompt=prompt_text, criteria=criteria)


_SCORE_PATTERN = re.compile(
    r'\(\s*"score"\s*,\s*([-+]?\d*\.?\d+(?:[eE][-+]?\d+)?)\s*\)'
)


def parse_score(vqa_output: str) -> float:
    """First ("score", <float>) tuple in the reply, clamped to [0, 1]."""
    match = _SCORE_PATTERN.search(vqa_output)
    if match is None:
        raise ScoreParseError(f"no score tuple in {vqa_output[:120]!r}")
    return min(max(float(match.group(1)), 0.0), 1.0)


def format_score(score: float) -> str:
    return f'("score", {score:.4f})'


def vqa_score(hub, image_png: bytes, prompt_text: str, dimension: str | None = None) -> float:
    reply = hub.vqa(image_png, build_vqa_instruction(prompt_text, dimension))
    return parse_score(reply)


def make_vqa_scorer(hub):
    """Scorer callable (image bytes, prompt) -> [0, 1] backed by the VQA service."""

    def scorer(image_png: bytes, prompt_text: str) -> float:
        return vqa_score(hub, image_png, prompt_text)

    return scorer


def make_iou_scorer(layout2d: Layout2D, background_gray: float = 0.1, tolerance: int = 26):
    """Deterministic geometric scorer: IoU between the planned boxes and the
    thresholded (non-background) pixels of the candidate image.

    Ships for closed-loop testing of best-of-N selection; no model involved.
    """
    from .imaging import decode_png

    def scorer(image_png: bytes, prompt_text: str) -> float:
        img = decode_png(image_png)
        if img.dtype == np.uint16:
            img = (img // 257).astype(np.uint8)
        h, w = img.shape
        seg = np.abs(img.astype(np.int32) - round(background_gray * 255)) > tolerance
        boxes = np.zeros((h, w), dtype=bool)
        for box in layout2d.objects:
            r0 = int(box.top * h)
            r1 = int((box.top + box.height) * h)
            c0 = int(box.left * w)
            c1 = int((box.left + box.width) * w)
            boxes[r0:r1, c0:c1] = True
        union = np.logical_or(seg, boxes).sum()
        if union == 0:
            return 0.0
        return float(np.logical_and(seg, boxes).sum() / union)

    return scorer


def evaluate_run(prompts, images: dict[int, bytes], hub, mode: str = "combined") -> EvalReport:
    """Score one image per prompt; failures record a null score and continue.

    ``images`` maps prompt id -> PNG bytes. In per-dimension mode the
    combined score of a prompt is the mean of its four dimension scores.
    """
    if mode not in ("combined", "per_dimension"):
        raise ValueError(f"unknown mode {mode!r}")
    records: list[ScoreRecord] = []
    for prompt in sorted(prompts, key=lambda p: p.id):
        if prompt.id not in images:
            raise KeyError(f"no image for prompt {prompt.id}")
        image = images[prompt.id]
        try:
            if mode == "combined":
                records.append(
                    ScoreRecord(prompt_id=prompt.id, score=vqa_score(hub, image, prompt.text))
                )
            else:
                dims = {
                    d: vqa_score(hub, image, prompt.text, dimension=d) for d in DIMENSIONS
                }
                records.append(
                    ScoreRecord(
                        prompt_id=prompt.id,
                        score=sum(dims.values()) / len(dims),
                        dimension_scores=dims,
                    )
                )
        except Exception as exc:
            logger.warning("evaluation failed for prompt %s: %s", prompt.id, exc)
            records.append(ScoreRecord(prompt_id=prompt.id, score=None))
    valid = [r.score for r in records if r.score is not None]
    mean = sum(valid) / len(valid) if valid else None
    dimension_means = None
    if mode == "per_dimension":
        dimension_means = {}
        for d in DIMENSIONS:
            vals = [
                r.dimension_scores[d]
                for r in records
                if r.dimension_scores is not None and d in r.dimension_scores
            ]
            if vals:
                dimension_means[d] = sum(vals) / len(vals)
    return EvalReport(mode=mode, records=records, mean=mean, dimension_means=dimension_means)


def format_report(report: EvalReport) -> str:
    """Human-readable score table."""
    lines = [f"{'prompt':>8}  {'score':>8}", "-" * 18]
    for record in report.records:
        score = "null" if record.score is None else f"{record.score:.4f}"
        lines.append(f"{record.prompt_id:>8}  {score:>8}")
    lines.append("-" * 18)
    mean = "n/a" if report.mean is None else f"{report.mean:.4f}"
    lines.append(f"{'mean':>8}  {mean:>8}")
    if report.dimension_means:
        for d, v in report.dimension_means.items():
            lines.append(f"{d:>12}: {v:.4f}")
    return "\n".join(lines)
