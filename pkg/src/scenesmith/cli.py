"""Command-line interface.

Subcommands mirror the pipeline stages: ``plan``, ``acquire``, ``assemble``,
``render``, ``generate``, ``evaluate``, and the end-to-end ``run``. Stage
commands exchange artifacts through the output directory (``--out``), the
same files a full run persists.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import imaging, layout, modelshop, pipeline, render
from .assemble import AssembledScene
from .assemble import assemble as assemble_scene
from .generate import select_best, sweep_generate
from .config import RunConfig, load_config
from .evaluate import evaluate_run, format_report, load_prompts, make_vqa_scorer
from .manifest import RunManifest


def _load_run_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        config.seed = args.seed
    if args.out is not None:
        config.paths.output_dir = args.out
    for switch in args.ablate or []:
        config.ablation = config.ablation.with_off(switch)
    config.validate()
    return config


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.paths.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_plan(args) -> int:
    config = _load_run_config(args)
    out = _out_dir(config)
    hub = pipeline.make_run_backends(config)
    entries = pipeline.load_shop_entries(config)
    layout2d, icl_prompt, _ids = pipeline.plan_2d(
        args.prompt, entries, hub, config.ablation, config.llm_params
    )
    (out / pipeline.ARTIFACTS["icl_prompt"]).write_text(icl_prompt)
    (out / pipeline.ARTIFACTS["layout2d"]).write_text(
        json.dumps(layout2d.to_dict(), indent=2, sort_keys=True)
    )
    layout3d = layout.lift_to_3d(args.prompt, layout2d, hub, config.ablation, config.llm_params)
    layout3d.save(out / pipeline.ARTIFACTS["layout3d"])
    print(f"planned {len(layout3d.objects)} objects, camera view: {layout3d.camera_view.value}")
    print(f"wrote {out / pipeline.ARTIFACTS['layout3d']}")
    return 0


def cmd_acquire(args) -> int:
    config = _load_run_config(args)
    out = _out_dir(config)
    hub = pipeline.make_run_backends(config)
    shop = pipeline.ensure_model_shop(config)
    layout3d = layout.Layout3D.load(out / pipeline.ARTIFACTS["layout3d"])
    records = pipeline.acquire_models(layout3d, shop, hub, config.ablation)
    doc = [
        {"object": n, "source": r.source.value, "path": shop.relative_path(r)}
        for n, r in sorted(records.items())
    ]
    (out / pipeline.ARTIFACTS["acquisitions"]).write_text(json.dumps(doc, indent=2, sort_keys=True))
    alignments = pipeline.align_models(records, hub, config.ablation)
    adoc = {
        n: {
            "rotation_offset": list(a.rotation_offset),
            "chosen_view": a.chosen_view,
            "similarity": a.similarity,
        }
        for n, a in sorted(alignments.items())
    }
    (out / pipeline.ARTIFACTS["alignments"]).write_text(json.dumps(adoc, indent=2, sort_keys=True))
    for entry in doc:
        print(f"{entry['object']}: {entry['source']} ({entry['path']})")
    return 0


def cmd_assemble(args) -> int:
    config = _load_run_config(args)
    out = _out_dir(config)
    shop = pipeline.ensure_model_shop(config)
    layout3d = layout.Layout3D.load(out / pipeline.ARTIFACTS["layout3d"])
    acquisitions = json.loads((out / pipeline.ARTIFACTS["acquisitions"]).read_text())
    alignments_doc = json.loads((out / pipeline.ARTIFACTS["alignments"]).read_text())
    records = {}
    for entry in acquisitions:
        rec = shop.lookup(modelshop.normalize_name(entry["object"]))
        if rec is None:
            raise SystemExit(f"model for {entry['object']!r} missing from shop")
        records[entry["object"]] = rec
    alignments = {
        name: modelshop.AlignmentResult(
            rotation_offset=tuple(a["rotation_offset"]),
            chosen_view=a["chosen_view"],
            similarity=a["similarity"],
        )
        for name, a in alignments_doc.items()
    }
    scene = assemble_scene(layout3d, records, alignments, config.seed)
    scene.save(out / pipeline.ARTIFACTS["scene"])
    print(f"assembled {len(scene.objects)} objects at {out / pipeline.ARTIFACTS['scene']}")
    return 0


def cmd_render(args) -> int:
    config = _load_run_config(args)
    out = _out_dir(config)
    scene = AssembledScene.load(out / pipeline.ARTIFACTS["scene"])
    fb = render.render_scene(scene)
    (out / pipeline.ARTIFACTS["rendering"]).write_bytes(
        imaging.encode_png(render.to_gray8(fb.color))
    )
    cset = imaging.conditions_from_render(fb.color, fb.zbuf)
    (out / pipeline.ARTIFACTS["depth"]).write_bytes(cset.depth_png)
    (out / pipeline.ARTIFACTS["canny"]).write_bytes(cset.canny_png)
    print(f"wrote rendering.png, depth.png, canny.png under {out}")
    return 0


def cmd_generate(args) -> int:
    config = _load_run_config(args)
    config = pipeline.effective_config(config)
    out = _out_dir(config)
    hub = pipeline.make_run_backends(config)
    depth = imaging.decode_png((out / pipeline.ARTIFACTS["depth"]).read_bytes())
    edges = imaging.decode_png((out / pipeline.ARTIFACTS["canny"]).read_bytes())
    conditions = imaging.ConditionSet(depth=depth, canny=edges)
    candidates = sweep_generate(args.prompt, conditions, config, hub)
    (out / "candidates").mkdir(exist_ok=True)
    for cand in candidates:
        (out / "candidates" / f"candidate_{cand.control_scale:g}.png").write_bytes(cand.image)
    index, best = select_best(candidates, make_vqa_scorer(hub), args.prompt)
    print(f"generated {len(candidates)} candidates; best scale {best.control_scale:g} "
          f"(score {best.score:.4f})")
    return 0


def cmd_evaluate(args) -> int:
    config = _load_run_config(args)
    hub = pipeline.make_run_backends(config)
    prompts = load_prompts(args.prompts)
    images = {}
    image_dir = Path(args.images)
    for prompt in prompts:
        path = image_dir / f"{prompt.id}.png"
        if not path.exists():
            raise SystemExit(f"missing image for prompt {prompt.id}: {path}")
        images[prompt.id] = path.read_bytes()
    report = evaluate_run(prompts, images, hub, mode=args.mode)
    out = Path(args.out or "report.json")
    if out.is_dir():
        out = out / "report.json"
    report.save(out)
    print(format_report(report))
    print(f"report written to {out}")
    return 0


def cmd_run(args) -> int:
    config = _load_run_config(args)
    manifest = pipeline.run_pipeline(args.prompt, config)
    out = Path(config.paths.output_dir)
    best = manifest.candidates[manifest.selected_index]["path"]
    print(f"run complete: {out / 'manifest.json'}")
    print(f"selected candidate: {out / best} (score {manifest.scores[manifest.selected_index]:.4f})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scenesmith",
        description="Compile a text prompt into a 3D-controlled image via a "
        "planned 3D scene and conditioned generation.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, prompt=False):
        p.add_argument("--config", help="path to a JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument(
            "--ablate",
            action="append",
            metavar="SWITCH",
            help="turn an ablation switch off (repeatable)",
        )
        if prompt:
            p.add_argument("--prompt", required=True, help="user text prompt")

    p = sub.add_parser("plan", help="plan the 2D layout and lift it to 3D")
    common(p, prompt=True)
    p.set_defaults(fn=cmd_plan)

    p = sub.add_parser("acquire", help="acquire and calibrate models for a planned layout")
    common(p)
    p.set_defaults(fn=cmd_acquire)

    p = sub.add_parser("assemble", help="assemble the planned scene")
    common(p)
    p.set_defaults(fn=cmd_assemble)

    p = sub.add_parser("render", help="render the scene and its condition images")
    common(p)
    p.set_defaults(fn=cmd_render)

    p = sub.add_parser("generate", help="sweep the generator over control scales")
    common(p, prompt=True)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("evaluate", help="score images against benchmark prompts")
    common(p)
    p.add_argument("--prompts", required=True, help="benchmark prompt file (JSON)")
    p.add_argument("--images", required=True, help="directory of <prompt id>.png images")
    p.add_argument("--mode", choices=("combined", "per_dimension"), default="combined")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("run", help="full pipeline: plan, acquire, render, generate, select")
    common(p, prompt=True)
    p.set_defaults(fn=cmd_run)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.fn(args)
    except Exception as exc:  # surface a clean error line, not a traceback
        logging.getLogger("scenesmith").error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
