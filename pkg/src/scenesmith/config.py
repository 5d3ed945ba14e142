"""Run configuration: defaults, JSON config loading, validation.

The config file is a JSON tree with the sections below; an empty (or
whitespace-only) file means "all defaults". Validation errors name the
offending field path, e.g. ``sweep.steps``. Backend endpoint fields may be
overridden with environment variables ``SCENESMITH_BACKEND_<SERVICE>``
(e.g. ``SCENESMITH_BACKEND_LLM=http://host:8080/llm``).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

DEFAULT_SCALES = (0.5, 0.6, 0.7, 0.8, 0.9)
DEFAULT_STEPS = 20
DEFAULT_TOP_P = 0.1
DEFAULT_TEMPERATURE = 0.2

ENV_PREFIX = "SCENESMITH_BACKEND_"


class ConfigError(ValueError):
    """Raised for unreadable, malformed, or invalid configuration."""


@dataclass
class LlmParams:
    top_p: float = DEFAULT_TOP_P
    temperature: float = DEFAULT_TEMPERATURE


@dataclass
class SweepParams:
    scales: tuple[float, ...] = DEFAULT_SCALES
    steps: int = DEFAULT_STEPS


@dataclass
class AblationSwitches:
    """Feature toggles; all on reproduces the full pipeline.

    Each off-switch substitutes a neutral default: depth 0.5, orientation
    forward, front camera, generation-only acquisition, zero alignment
    offset, single control scale 0.7, retrieval restricted to base layout
    entries.
    """

    depth_planning: bool = True
    orientation_planning: bool = True
    camera_planning: bool = True
    decision_tree: bool = True
    face_calibration: bool = True
    multi_scale: bool = True
    shop_expansion: bool = True

    @classmethod
    def switch_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def with_off(self, name: str) -> "AblationSwitches":
        if name not in self.switch_names():
            raise ConfigError(f"ablation: unknown switch {name!r}")
        return replace(self, **{name: False})


@dataclass
class BackendEndpoints:
    """Per-service endpoint: a URL or the literal token "mock"."""

    llm: str = "mock"
    embed: str = "mock"
    classify_face: str = "mock"
    generate_image: str = "mock"
    vqa: str = "mock"
    text_to_3d: str = "mock"
    online_search: str = "mock"

    @classmethod
    def service_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


@dataclass
class PathsConfig:
    shop_dir: str = "shop"
    layout_shop_file: str | None = None  # None -> bundled layout shop
    output_dir: str = "out"
    cache_dir: str | None = None  # None -> caching disabled


@dataclass
class RunConfig:
    seed: int = 0
    llm_params: LlmParams = field(default_factory=LlmParams)
    sweep: SweepParams = field(default_factory=SweepParams)
    ablation: AblationSwitches = field(default_factory=AblationSwitches)
    paths: PathsConfig = field(default_factory=PathsConfig)
    backends: BackendEndpoints = field(default_factory=BackendEndpoints)

    def validate(self) -> None:
        if not self.sweep.scales:
            raise ConfigError("sweep.scales: must be nonempty")
        for i, s in enumerate(self.sweep.scales):
            if not (0.0 < s <= 1.0):
                raise ConfigError(f"sweep.scales[{i}]: {s} outside (0, 1]")
        if self.sweep.steps < 1:
            raise ConfigError(f"sweep.steps: {self.sweep.steps} must be >= 1")
        for fname in ("top_p", "temperature"):
            v = getattr(self.llm_params, fname)
            if not (0.0 < v <= 1.0):
                raise ConfigError(f"llm_params.{fname}: {v} outside (0, 1]")
        if self.seed < 0:
            raise ConfigError(f"seed: {self.seed} must be a non-negative integer")


def _build_section(cls, data: dict, path: str):
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"{path}.{key}: unknown key")
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    kwargs = {}
    for key, value in data.items():
        if key == "seed":
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"seed: expected an integer, got {value!r}")
            kwargs["seed"] = value
        elif key == "llm_params":
            kwargs["llm_params"] = _build_section(LlmParams, value, "llm_params")
        elif key == "sweep":
            section = dict(value)
            if "scales" in section:
                section["scales"] = tuple(section["scales"])
            kwargs["sweep"] = _build_section(SweepParams, section, "sweep")
        elif key == "ablation":
            kwargs["ablation"] = _build_section(AblationSwitches, value, "ablation")
        elif key == "paths":
            kwargs["paths"] = _build_section(PathsConfig, value, "paths")
        elif key == "backends":
            kwargs["backends"] = _build_section(BackendEndpoints, value, "backends")
        else:
            raise ConfigError(f"{key}: unknown key")
    config = RunConfig(**kwargs)
    config.backends = apply_env_overrides(config.backends)
    config.validate()
    return config


def apply_env_overrides(endpoints: BackendEndpoints) -> BackendEndpoints:
    overrides = {}
    for service in BackendEndpoints.service_names():
        value = os.environ.get(ENV_PREFIX + service.upper())
        if value:
            overrides[service] = value
    return replace(endpoints, **overrides) if overrides else endpoints


def load_config(path: str | Path) -> RunConfig:
    """Load and validate a config file; blank file = all defaults."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    text = p.read_text()
    if not text.strip():
        data: dict = {}
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {p}: invalid JSON: {exc}") from exc
    return config_from_dict(data)
