"""End-to-end run orchestration.

Stages run in a fixed order, each persisting its artifact under the run's
output directory before the next stage starts: plan 2D -> lift 3D ->
acquire models -> align -> assemble -> render -> condition images -> sweep
generate -> select best. A stage failure persists the partial manifest and
aborts with the stage name. Orchestration is sequential per prompt; distinct
prompts may run concurrently against shared backends and a shared shop.
"""

from __future__ import annotations

import json
import logging
import time
from importlib import resources
from pathlib import Path

from . import imaging, layout, modelshop, render
from .assemble import assemble as assemble_scene
from .generate import SweepError, select_best, sweep_generate
from .backends import Backends, make_backends
from .cache import Cache
from .config import RunConfig
from .evaluate import make_vqa_scorer
from .manifest import Acquisition, AlignmentEntry, RunManifest

logger = logging.getLogger(__name__)

ARTIFACTS = {
    "icl_prompt": "icl_prompt.txt",
    "layout2d": "layout2d.json",
    "layout3d": "layout3d.json",
    "acquisitions": "acquisitions.json",
    "alignments": "alignments.json",
    "scene": "scene.json",
    "rendering": "rendering.png",
    "depth": "depth.png",
    "canny": "canny.png",
}


class StageError(RuntimeError):
    """A pipeline stage failed; the stage name rides in ``stage``."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def bundled_layout_shop_path() -> Path:
    return Path(str(resources.files("scenesmith.data").joinpath("layout_shop.json")))


def load_shop_entries(config: RunConfig) -> list[layout.LayoutShopEntry]:
    path = config.paths.layout_shop_file or bundled_layout_shop_path()
    return layout.load_layout_shop(path)


def ensure_model_shop(config: RunConfig) -> modelshop.ModelShopIndex:
    """Open the configured model shop, seeding it from the bundled starter
    assets when it does not exist yet."""
    return modelshop.seed_shop_from(modelshop.starter_shop_dir(), config.paths.shop_dir)


def make_run_backends(config: RunConfig) -> Backends:
    cache = Cache(config.paths.cache_dir) if config.paths.cache_dir else None
    return make_backends(config.backends, config.seed, cache=cache)


def plan_2d(prompt: str, shop_entries, hub, switches, llm_params):
    """ICL retrieval plus the 2D planning exchange."""
    entries = shop_entries
    if not getattr(switches, "shop_expansion", True):
        entries = [e for e in entries if e.category_tag is layout.ShopCategory.BASE]
    examples = layout.retrieve_examples(prompt, entries, hub, k=5)
    icl_prompt = layout.build_icl_prompt(prompt, examples)
    reply = hub.llm(icl_prompt, llm_params.top_p, llm_params.temperature)
    layout2d = layout.parse_layout_2d(reply)
    return layout2d, icl_prompt, [e.id for e in examples]


def acquire_models(layout3d: layout.Layout3D, shop, hub, switches):
    records = {}
    for pose in layout3d.objects:
        name = pose.box.name
        if name not in records:
            records[name] = modelshop.acquire(name, shop, hub, switches)
    return records


def align_models(records, hub, switches):
    alignments = {}
    for name, record in records.items():
        if getattr(switches, "face_calibration", True):
            mesh = render.load_obj(record.path)
            views = modelshop.render_views(mesh)
            alignments[name] = modelshop.calibrate_face_camera(name, views, hub)
        else:
            alignments[name] = modelshop.AlignmentResult(
                rotation_offset=(0.0, 0.0, 0.0), chosen_view=0, similarity=0.0
            )
    return alignments


def effective_config(config: RunConfig) -> RunConfig:
    """Apply ablation substitutions that live at the config level."""
    from dataclasses import replace

    if not config.ablation.multi_scale:
        return replace(config, sweep=replace(config.sweep, scales=(0.7,)))
    return config


def run_pipeline(
    prompt: str,
    config: RunConfig,
    scorer=None,
    hub: Backends | None = None,
    shop: modelshop.ModelShopIndex | None = None,
    shop_entries=None,
    settings: render.RenderSettings | None = None,
) -> RunManifest:
    """Execute the full pipeline for one prompt and write its manifest.

    ``scorer`` defaults to VQA scoring through the configured backend; any
    (image bytes, prompt) -> [0, 1] callable may be injected instead (for
    example the geometric IoU scorer).
    """
    config.validate()
    config = effective_config(config)
    out_dir = Path(config.paths.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    hub = hub or make_run_backends(config)
    shop = shop or ensure_model_shop(config)
    entries = shop_entries if shop_entries is not None else load_shop_entries(config)
    scorer = scorer or make_vqa_scorer(hub)
    switches = config.ablation
    settings = settings or render.RenderSettings()

    manifest = RunManifest(prompt=prompt, seed=config.seed)
    timings = manifest.timings

    def persist_partial(stage: str, exc: BaseException) -> None:
        manifest.error = {"stage": stage, "message": str(exc)}
        manifest.backend_calls = hub.call_counts()
        manifest.save(out_dir / "manifest.json")

    def run_stage(stage: str, fn):
        start = time.perf_counter()
        try:
            result = fn()
        except Exception as exc:
            logger.error("stage %s failed: %s", stage, exc)
            persist_partial(stage, exc)
            raise StageError(stage, exc) from exc
        timings[stage] = time.perf_counter() - start
        return result

    # plan 2D
    def _plan():
        layout2d, icl_prompt, example_ids = plan_2d(
            prompt, entries, hub, switches, config.llm_params
        )
        (out_dir / ARTIFACTS["icl_prompt"]).write_text(icl_prompt)
        (out_dir / ARTIFACTS["layout2d"]).write_text(
            json.dumps(layout2d.to_dict(), indent=2, sort_keys=True)
        )
        return layout2d, example_ids

    layout2d, _example_ids = run_stage("plan_2d", _plan)
    manifest.layout2d = layout2d
    manifest.artifacts["icl_prompt"] = ARTIFACTS["icl_prompt"]
    manifest.artifacts["layout2d"] = ARTIFACTS["layout2d"]

    # lift 3D
    def _lift():
        layout3d = layout.lift_to_3d(prompt, layout2d, hub, switches, config.llm_params)
        layout3d.save(out_dir / ARTIFACTS["layout3d"])
        return layout3d

    layout3d = run_stage("lift_3d", _lift)
    manifest.layout3d = layout3d
    manifest.artifacts["layout3d"] = ARTIFACTS["layout3d"]

    # acquire models
    def _acquire():
        records = acquire_models(layout3d, shop, hub, switches)
        doc = [
            {
                "object": name,
                "source": rec.source.value,
                "path": shop.relative_path(rec),
            }
            for name, rec in sorted(records.items())
        ]
        (out_dir / ARTIFACTS["acquisitions"]).write_text(
            json.dumps(doc, indent=2, sort_keys=True)
        )
        return records

    records = run_stage("acquire", _acquire)
    manifest.acquisitions = [
        Acquisition(object=name, source=rec.source.value, path=shop.relative_path(rec))
        for name, rec in sorted(records.items())
    ]
    manifest.artifacts["acquisitions"] = ARTIFACTS["acquisitions"]

    # align
    def _align():
        alignments = align_models(records, hub, switches)
        doc = {
            name: {
                "rotation_offset": list(a.rotation_offset),
                "chosen_view": a.chosen_view,
                "similarity": a.similarity,
            }
            for name, a in sorted(alignments.items())
        }
        (out_dir / ARTIFACTS["alignments"]).write_text(
            json.dumps(doc, indent=2, sort_keys=True)
        )
        return alignments

    alignments = run_stage("align", _align)
    manifest.alignments = [
        AlignmentEntry(
            object=name,
            rotation_offset=a.rotation_offset,
            chosen_view=a.chosen_view,
            similarity=a.similarity,
        )
        for name, a in sorted(alignments.items())
    ]
    manifest.artifacts["alignments"] = ARTIFACTS["alignments"]

    # assemble
    def _assemble():
        scene = assemble_scene(layout3d, records, alignments, config.seed)
        scene.save(out_dir / ARTIFACTS["scene"])
        return scene

    scene = run_stage("assemble", _assemble)
    manifest.camera = scene.camera
    manifest.artifacts["scene"] = ARTIFACTS["scene"]

    # render
    def _render():
        fb = render.render_scene(scene, settings)
        (out_dir / ARTIFACTS["rendering"]).write_bytes(
            imaging.encode_png(render.to_gray8(fb.color))
        )
        return fb

    framebuffer = run_stage("render", _render)
    manifest.artifacts["rendering"] = ARTIFACTS["rendering"]

    # condition images
    def _conditions():
        cset = imaging.conditions_from_render(framebuffer.color, framebuffer.zbuf)
        (out_dir / ARTIFACTS["depth"]).write_bytes(cset.depth_png)
        (out_dir / ARTIFACTS["canny"]).write_bytes(cset.canny_png)
        return cset

    conditions = run_stage("conditions", _conditions)
    manifest.condition_images = {
        "depth": ARTIFACTS["depth"],
        "canny": ARTIFACTS["canny"],
    }
    manifest.artifacts["depth"] = ARTIFACTS["depth"]
    manifest.artifacts["canny"] = ARTIFACTS["canny"]

    # generation sweep
    def _generate():
        candidates_dir = out_dir / "candidates"
        candidates_dir.mkdir(exist_ok=True)
        try:
            candidates = sweep_generate(prompt, conditions, config, hub)
        except SweepError as exc:
            for cand in exc.partial:
                rel = f"candidates/candidate_{cand.control_scale:g}.png"
                (out_dir / rel).write_bytes(cand.image)
                manifest.candidates.append(
                    {"path": rel, "control_scale": cand.control_scale}
                )
            raise
        for cand in candidates:
            rel = f"candidates/candidate_{cand.control_scale:g}.png"
            (out_dir / rel).write_bytes(cand.image)
            manifest.candidates.append({"path": rel, "control_scale": cand.control_scale})
        return candidates

    candidates = run_stage("generate", _generate)

    # selection
    def _select():
        index, _best = select_best(candidates, scorer, prompt)
        return index

    selected = run_stage("select", _select)
    manifest.scores = [c.score for c in candidates]
    manifest.selected_index = selected
    manifest.backend_calls = hub.call_counts()
    manifest.validate()
    manifest.save(out_dir / "manifest.json")
    return manifest
