"""Control-scale sweep over the conditioned generator and best-of-N selection."""

from __future__ import annotations

from dataclasses import dataclass

from .backends import BackendError
from .imaging import ConditionSet


@dataclass
class GenerationRequest:
    prompt: str
    conditions: ConditionSet
    control_scale: float
    steps: int
    seed: int

    def validate(self) -> None:
        if not (0.0 < self.control_scale <= 1.0):
            raise ValueError(f"control_scale {self.control_scale} outside (0, 1]")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")


@dataclass
class CandidateImage:
    image: bytes
    control_scale: float
    score: float | None = None


class SweepError(RuntimeError):
    """A sweep request failed; candidates completed so far ride along."""

    def __init__(self, message: str, partial: list[CandidateImage]):
        super().__init__(message)
        self.partial = partial


def sweep_generate(prompt: str, conditions: ConditionSet, config, hub) -> list[CandidateImage]:
    """One generation request per configured control scale, shared seed.

    Candidates come back in ascending scale order regardless of backend
    timing. A failed request aborts the sweep, carrying the partial results.
    """
    conditions.validate()
    depth_png = conditions.depth_png
    canny_png = conditions.canny_png
    candidates: list[CandidateImage] = []
    for scale in sorted(config.sweep.scales):
        request = GenerationRequest(
            prompt=prompt,
            conditions=conditions,
            control_scale=scale,
            steps=config.sweep.steps,
            seed=config.seed,
        )
        request.validate()
        try:
            image = hub.generate_image(
                prompt, depth_png, canny_png, scale, config.sweep.steps, config.seed
            )
        except BackendError as exc:
            raise SweepError(
                f"generation failed at control scale {scale}: {exc}", candidates
            ) from exc
        candidates.append(CandidateImage(image=image, control_scale=scale))
    return candidates


def select_best(candidates: list[CandidateImage], scorer, prompt: str = "") -> tuple[int, CandidateImage]:
    """Score all candidates and return the argmax (ties: lowest scale).

    ``scorer`` is any callable (image bytes, prompt) -> score in [0, 1]; the
    candidates get their ``score`` fields filled in as a side effect.
    """
    if not candidates:
        raise ValueError("select_best needs at least one candidate")
    best_i = 0
    for i, cand in enumerate(candidates):
        score = float(scorer(cand.image, prompt))
        if not (0.0 <= score <= 1.0):
            raise ValueError(f"scorer returned {score} outside [0, 1]")
        cand.score = score
        if i > 0:
            best = candidates[best_i]
            if score > best.score or (
                score == best.score and cand.control_scale < best.control_scale
            ):
                best_i = i
    return best_i, candidates[best_i]
