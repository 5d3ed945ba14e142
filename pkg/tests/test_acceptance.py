"""Acceptance suite: one test per pipeline-level criterion.

Each test prints a PASS line on success (run with ``pytest -s`` to see
them); tolerances and counts are pinned in the assertions themselves.
"""

import json
import math
import random
import shutil
import time
from pathlib import Path

import numpy as np
import pytest
from canny_reference import reference_canny
from conftest import make_hub, populate_shop
from raster_reference import brute_force_zbuffer

from scenesmith.assemble import place_camera, place_object, size_object
from scenesmith.backends import MockTransport, RecordingTransport
from scenesmith.config import AblationSwitches, RunConfig
from scenesmith.evaluate import build_vqa_instruction, evaluate_run, format_score, parse_score
from scenesmith.generate import CandidateImage, select_best, sweep_generate
from scenesmith.imaging import ConditionSet, EdgeParams, canny, depth_map
from scenesmith.layout import (
    CameraView,
    LayoutShopEntry,
    ObjectBox2D,
    Orientation,
    ShopCategory,
    retrieve_examples,
)
from scenesmith.manifest import RunManifest
from scenesmith.mesh import box_mesh, marked_box_mesh
from scenesmith.modelshop import (
    ModelShopIndex,
    ModelSource,
    acquire,
    build_finetune_dataset,
    calibrate_face_camera,
    render_views,
)
from scenesmith.pipeline import run_pipeline
from scenesmith.render import RenderSettings, render_triangles

ON = AblationSwitches()


def ok(name):
    print(f"\nPASS {name}")


class FixedRng:
    def __init__(self, value):
        self.value = value

    def randint(self, a, b):
        assert a <= self.value <= b
        return self.value


def test_placement_formula_oracle():
    start = time.perf_counter()
    top = place_camera(CameraView.TOP, random.Random(0))
    assert top.location == (0.0, 1.0, 15.0)
    assert abs(top.rotation_euler[0] - math.atan(1.0 / 15.00001)) <= 1e-9
    assert abs(top.rotation_euler[0] - 0.0665681) <= 1e-6
    assert top.rotation_euler[1] == 0.0 and abs(top.rotation_euler[2]) <= 1e-12

    front = place_camera(CameraView.FRONT, FixedRng(0))
    assert front.location == (0.0, -15.0, 5.0)
    assert abs(front.rotation_euler[0] - math.atan(15.0 / 5.00001)) <= 1e-9
    assert abs(front.rotation_euler[0] - 1.2490452) <= 1e-6

    dims = size_object((2.0, 1.0, 4.0), ObjectBox2D("x", 0.0, 0.0, 0.3, 0.2), 0.5)
    for got, want in zip(dims, (1.75, 0.875, 3.5)):
        assert abs(got - want) <= 1e-9

    delta = place_object(ObjectBox2D("x", 0.4, 0.4, 0.2, 0.2), 0.5, 1.0)
    for got, want in zip(delta, (0.0, 4.4, -1.5)):
        assert abs(got - want) <= 1e-9
    assert time.perf_counter() - start < 1.0
    ok("placement formulas match hand-derived values (1e-9)")


def test_camera_circle_property():
    start = time.perf_counter()
    ranges = {CameraView.LEFT: (-10, -5), CameraView.RIGHT: (5, 10), CameraView.FRONT: (-1, 1)}
    for view, (lo, hi) in ranges.items():
        for seed in range(1000):
            pose = place_camera(view, random.Random(seed))
            x, y, z = pose.location
            assert z == 5.0
            assert abs(x * x + y * y - 225.0) <= 1e-9
            assert x == int(x) and lo <= x <= hi
    assert time.perf_counter() - start < 1.0
    ok("camera circle x^2+y^2=225 and inclusive jitter ranges (1000 seeds/view)")


def test_shrink_loop_property():
    start = time.perf_counter()
    rng = random.Random(7)
    for _ in range(2000):
        mesh = (rng.uniform(0.05, 9), rng.uniform(0.05, 9), rng.uniform(0.05, 9))
        box = ObjectBox2D("x", 0.0, 0.0, rng.uniform(0.05, 1.0), rng.uniform(0.05, 1.0))
        depth = rng.random()
        dims = size_object(mesh, box, depth)
        m = max(box.width, box.height) * 10 + depth
        if depth < 0.5:
            assert sum(dims) <= 25.0 + 1e-12
        else:
            assert max(dims[0], dims[2]) == m  # untouched by the shrink loop
        assert abs(dims[1] / dims[0] - mesh[1] / mesh[0]) <= 1e-9 * max(1.0, mesh[1] / mesh[0])
        assert abs(dims[2] / dims[0] - mesh[2] / mesh[0]) <= 1e-9 * max(1.0, mesh[2] / mesh[0])
    assert time.perf_counter() - start < 1.0
    ok("shrink loop: sum<=25 for near objects, aspect ratios preserved (1e-9)")


def test_renderer_zbuffer_oracle():
    start = time.perf_counter()
    settings = RenderSettings(resolution=32)
    views = [CameraView.FRONT, CameraView.LEFT, CameraView.RIGHT, CameraView.TOP]
    for scene_i in range(50):
        rng = random.Random(scene_i)
        camera = place_camera(views[scene_i % 4], rng)
        tris = []
        for _ in range(rng.randint(2, 8)):
            base = (rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-3, 5))
            tris.append(
                tuple(
                    (
                        base[0] + rng.uniform(-5, 5),
                        base[1] + rng.uniform(-5, 5),
                        base[2] + rng.uniform(-5, 5),
                    )
                    for _ in range(3)
                )
            )
        fb = render_triangles(camera, np.array(tris), settings)
        oracle = brute_force_zbuffer(camera.location, camera.rotation_euler, tris, 32)
        for r in range(32):
            for c in range(32):
                assert fb.zbuf[r, c] == oracle[r][c], (scene_i, r, c)

    # unit cube projected extent vs analytic pinhole projection at 1024^2
    from scenesmith.geometry import euler_xyz_matrix

    settings_full = RenderSettings(resolution=1024)
    camera = place_camera(CameraView.FRONT, FixedRng(0))
    rot = euler_xyz_matrix(*camera.rotation_euler)
    center = np.array(camera.location) + 15.0 * (rot @ np.array([0.0, 0.0, -1.0]))
    mesh = box_mesh(1.0, 1.0, 1.0, center=tuple(center))
    fb = render_triangles(camera, mesh.world_triangles(), settings_full)
    rows, cols = np.nonzero(np.isfinite(fb.zbuf))
    f, half = settings_full.focal_px, 512.0
    us, vs = [], []
    for corner in mesh.vertices:
        cam = rot.T @ (np.array(corner) - np.array(camera.location))
        us.append(half + f * (cam[0] / -cam[2]))
        vs.append(half - f * (cam[1] / -cam[2]))
    assert abs(cols.min() + 0.5 - min(us)) <= 1.0
    assert abs(cols.max() + 0.5 - max(us)) <= 1.0
    assert abs(rows.min() + 0.5 - min(vs)) <= 1.0
    assert abs(rows.max() + 0.5 - max(vs)) <= 1.0
    assert time.perf_counter() - start < 120.0
    ok("z-buffer equals brute-force ray casting on 50 scenes; cube projection within 1 px")


def test_depth_map_constants():
    start = time.perf_counter()
    out = depth_map(np.array([[20.0, 25.0, 30.0]]))
    assert out[0, 0] == 65535
    assert abs(int(out[0, 1]) - 32768) <= 1
    assert out[0, 2] == 0
    rng = np.random.default_rng(0)
    z = rng.uniform(20.0, 30.0, size=2000)
    px = depth_map(z.reshape(1, -1))[0].astype(np.int64)
    order = np.argsort(z)
    assert np.all(np.diff(px[order]) <= 0)
    assert time.perf_counter() - start < 1.0
    ok("depth mapping: z {20,25,30} -> {65535, 32768+-1, 0}; monotone over random z")


def test_canny_reference_equality():
    start = time.perf_counter()
    rng = np.random.default_rng(42)
    for i in range(100):
        if i % 3 == 0:  # pure noise
            img = rng.integers(0, 256, size=(64, 64), dtype=np.uint8)
        elif i % 3 == 1:  # smooth blocks with soft noise: coherent edges
            coarse = rng.uniform(0, 255, size=(8, 8))
            img = np.kron(coarse, np.ones((8, 8)))
            img = (img + rng.uniform(-6, 6, size=img.shape)).clip(0, 255).astype(np.uint8)
        else:  # geometric shapes
            img = np.full((64, 64), int(rng.integers(0, 80)), dtype=np.uint8)
            r0, c0 = rng.integers(4, 30, size=2)
            img[r0 : r0 + 25, c0 : c0 + 25] = int(rng.integers(150, 256))
        expected = np.array(reference_canny(img.tolist()), dtype=np.uint8)
        assert np.array_equal(canny(img), expected), f"image {i}"

    for _ in range(10):
        img = rng.integers(0, 256, size=(48, 48), dtype=np.uint8)
        loose = canny(img, EdgeParams(100, 200)) > 0
        tight = canny(img, EdgeParams(150, 250)) > 0
        assert not np.any(tight & ~loose)

    assert not canny(np.full((64, 64), 77, dtype=np.uint8)).any()
    assert time.perf_counter() - start < 60.0
    ok("canny equals brute-force reference on 100 images; thresholds monotone; flat image clean")


def test_decision_tree_criterion(tmp_path):
    start = time.perf_counter()
    shop = populate_shop(tmp_path / "shop", ["cat"])
    hub = make_hub()
    record = acquire("cat", shop, hub, ON)
    assert record.source is ModelSource.SHOP
    assert hub.call_counts().get("online_search", 0) == 0
    assert hub.call_counts().get("text_to_3d", 0) == 0

    record = acquire("batman", shop, hub, ON)
    assert record.source is ModelSource.ONLINE and len(shop) == 2

    record = acquire("comet halley", shop, hub, ON)
    assert record.source is ModelSource.GENERATED and len(shop) == 3

    again = acquire("batman", shop, hub, ON)
    assert again.source is ModelSource.SHOP
    assert again.path == record.path or len(shop) == 3  # no growth on re-acquire
    assert time.perf_counter() - start < 1.0
    ok("decision tree: shop hit is offline; online/generated grow the shop by one; idempotent")


def test_aligner_dataset_criterion(tmp_path):
    start = time.perf_counter()
    shop = populate_shop(tmp_path / "shop", [f"model{i:03d}" for i in range(150)])
    summary = build_finetune_dataset(shop, 150, tmp_path / "data", seed=5, resolution=48)
    assert summary["pairs"] == 1500
    assert summary["positives"] == 750
    assert summary["negatives"] == 750
    records = [json.loads(line) for line in open(summary["manifest"])]
    assert len(records) == 1500

    views = render_views(marked_box_mesh(), resolution=32)
    base = [0.13, 0.25, 0.91, 0.47, 0.08, 0.66, 0.52, 0.71, 0.39, 0.2]

    class Scripted:
        def __init__(self, sims):
            self.sims = list(sims)
            self.i = 0

        def classify_face(self, image, name):
            value = self.sims[self.i % len(self.sims)]
            self.i += 1
            return value

    chosen = calibrate_face_camera("m", views, Scripted(base)).chosen_view
    for factor in (0.01, 0.5, 7.0, 1e6):
        scaled = [s * factor for s in base]
        assert calibrate_face_camera("m", views, Scripted(scaled)).chosen_view == chosen
    assert time.perf_counter() - start < 30.0
    ok("aligner dataset: 150 models -> 1500 pairs (750/750); argmax scale-invariant")


def test_retrieval_criterion():
    start = time.perf_counter()
    rng = random.Random(123)
    nouns = ["cat", "dog", "frog", "rabbit", "car", "tree", "house", "boat", "bird",
             "lamp", "vase", "candle", "whale", "eagle", "robot", "chair"]
    relations = ["behind", "in front of", "next to", "above", "under", "beside"]
    entries = []
    for i in range(500):
        prompt = (
            f"a {rng.choice(nouns)} {rng.choice(relations)} a {rng.choice(nouns)}"
            f" in scene {i}"
        )
        entries.append(
            LayoutShopEntry(
                id=i,
                prompt=prompt,
                object_list=[ObjectBox2D("x", 0.1, 0.1, 0.2, 0.2)],
                category_tag=ShopCategory.BASE,
            )
        )

    def brute_force(user_prompt, hub, k=5):
        # exhaustive scan; cosine accumulated left to right, the documented
        # definition, so near-ties order identically to the library
        vectors = hub.embed([user_prompt] + [e.prompt for e in entries])
        q = vectors[0]
        qn = sum(a * a for a in q) ** 0.5

        def cosine(v):
            nv = sum(b * b for b in v) ** 0.5
            if qn == 0.0 or nv == 0.0:
                return 0.0
            return sum(a * b for a, b in zip(q, v)) / (qn * nv)

        sims = [cosine(v) for v in vectors[1:]]
        order = sorted(range(len(entries)), key=lambda i: (-sims[i], entries[i].id))
        return [entries[i].id for i in order[:k]]

    for seed in range(100):
        hub = make_hub(seed=seed)
        query = f"a {nouns[seed % len(nouns)]} behind a {nouns[(seed * 3 + 1) % len(nouns)]}"
        got = [e.id for e in retrieve_examples(query, entries, hub, k=5)]
        assert got == brute_force(query, hub), seed

    hub = make_hub(seed=0)
    top = retrieve_examples(entries[321].prompt, entries, hub, k=5)
    assert top[0].id == 321
    assert time.perf_counter() - start < 5.0
    ok("retrieval: top-5 equals brute-force cosine scan (500 entries x 100 seeds); verbatim first")


def test_sweep_and_selection_criterion():
    start = time.perf_counter()
    recorder = RecordingTransport(MockTransport(0))
    from scenesmith.backends import Backends, MockSearchProvider

    hub = Backends(recorder, MockSearchProvider(0), recorder=recorder)
    rng = np.random.default_rng(1)
    conditions = ConditionSet(
        depth=rng.integers(0, 65536, size=(32, 32), dtype=np.uint16),
        canny=(rng.integers(0, 2, size=(32, 32), dtype=np.uint8) * 255),
    )
    config = RunConfig(seed=11)
    candidates = sweep_generate("a scene", conditions, config, hub)
    requests = [env for svc, env in recorder.requests if svc == "generate_image"]
    assert len(requests) == 5
    assert [r["control_scale"] for r in requests] == [0.5, 0.6, 0.7, 0.8, 0.9]
    assert all(r["steps"] == 20 and r["seed"] == 11 for r in requests)

    scores = {c.control_scale: s for c, s in zip(candidates, (0.2, 0.9, 0.5, 0.9, 0.1))}
    index, best = select_best(candidates, lambda img, p: scores[
        next(c.control_scale for c in candidates if c.image == img)
    ])
    assert best.control_scale == 0.6  # tie at 0.9 and 0.9: lowest scale wins
    assert index == 1

    for transform in (lambda s: s**2, lambda s: 0.1 + 0.8 * s, lambda s: s / (2 - s)):
        fresh = [CandidateImage(c.image, c.control_scale) for c in candidates]
        idx2, _ = select_best(fresh, lambda img, p: transform(scores[
            next(c.control_scale for c in fresh if c.image == img)
        ]))
        assert idx2 == index
    assert time.perf_counter() - start < 1.0
    ok("sweep issues 5 requests at scales 0.5-0.9/steps 20; argmax selection, monotone-invariant")


FIXTURE_PROMPTS = [
    "a frog is behind a rabbit, top view",
    "a cat facing left in front of a dog, left view",
    "two birds above a tree",
    "a batman beside a house, right view",
    "a zonkey facing backward on a table",
]


def _run_fixtures(tmp_path, tag, seed=7):
    manifests = []
    for i, prompt in enumerate(FIXTURE_PROMPTS):
        config = RunConfig(seed=seed)
        config.paths.shop_dir = str(tmp_path / f"{tag}_shop_{i}")
        config.paths.output_dir = str(tmp_path / f"{tag}_out_{i}")
        manifests.append(run_pipeline(prompt, config))
    return manifests


def test_end_to_end_determinism_and_ablations(tmp_path):
    start = time.perf_counter()
    first = _run_fixtures(tmp_path, "a")
    second = _run_fixtures(tmp_path, "b")
    for i in range(len(FIXTURE_PROMPTS)):
        assert first[i].core_bytes() == second[i].core_bytes(), FIXTURE_PROMPTS[i]
        for image in ("depth.png", "canny.png"):
            a = (tmp_path / f"a_out_{i}" / image).read_bytes()
            b = (tmp_path / f"b_out_{i}" / image).read_bytes()
            assert a == b, (FIXTURE_PROMPTS[i], image)

    def ablated(switch, prompt, name):
        config = RunConfig(seed=7)
        config.paths.shop_dir = str(tmp_path / f"{name}_shop")
        config.paths.output_dir = str(tmp_path / f"{name}_out")
        config.ablation = config.ablation.with_off(switch)
        return config, run_pipeline(prompt, config)

    _cfg, m = ablated("depth_planning", FIXTURE_PROMPTS[0], "abl_depth")
    assert all(p.depth == 0.5 for p in m.layout3d.objects)
    _cfg, m = ablated("orientation_planning", FIXTURE_PROMPTS[1], "abl_orient")
    assert all(p.orientation is Orientation.FORWARD for p in m.layout3d.objects)
    _cfg, m = ablated("camera_planning", FIXTURE_PROMPTS[0], "abl_cam")
    assert m.layout3d.camera_view is CameraView.FRONT
    _cfg, m = ablated("decision_tree", FIXTURE_PROMPTS[0], "abl_tree")
    assert all(a.source == "generated" for a in m.acquisitions)
    _cfg, m = ablated("face_calibration", FIXTURE_PROMPTS[0], "abl_face")
    assert all(a.rotation_offset == (0.0, 0.0, 0.0) for a in m.alignments)
    _cfg, m = ablated("multi_scale", FIXTURE_PROMPTS[0], "abl_scale")
    assert len(m.candidates) == 1 and m.candidates[0]["control_scale"] == 0.7
    cfg, m = ablated("shop_expansion", FIXTURE_PROMPTS[0], "abl_shop")
    icl = (Path(cfg.paths.output_dir) / "icl_prompt.txt").read_text()
    assert "frog facing right is behind a rabbit" not in icl
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0, f"took {elapsed:.1f}s"
    ok("end-to-end: 5 fixture prompts byte-identical across runs; all 7 ablation substitutes hold")


def test_evaluator_criterion():
    start = time.perf_counter()
    text = build_vqa_instruction("two cats, top view")
    assert "You need to consider (1) object count, (2) object orientation, " \
           "(3) 3D spatial relationship between objects, and (4) camera view." in text
    assert 'Return a tuple ("score", X.XXXX), with the float number between 0 and 1, ' \
           "and higher scores representing higher text-image alignment." in text
    assert text.startswith("Text: two cats, top view.")

    for k in range(0, 10001, 7):
        value = round(k / 10000.0, 4)
        assert abs(parse_score(format_score(value)) - value) <= 1e-12

    class FixedHub:
        def vqa(self, image, instruction):
            return f'("score", 0.{int(image):04d})'

    from scenesmith.evaluate import BenchmarkPrompt

    prompts = [BenchmarkPrompt(id=i, text=f"p{i}") for i in range(1, 8)]
    images = {p.id: str(p.id * 1234 % 10000).zfill(4).encode() for p in prompts}

    class Hub2:
        def vqa(self, image, instruction):
            return f'("score", 0.{image.decode()})'

    report = evaluate_run(prompts, images, Hub2())
    recomputed = sum(r.score for r in report.records) / len(report.records)
    assert abs(report.mean - recomputed) <= 1e-9
    assert time.perf_counter() - start < 1.0
    ok("evaluator: verbatim instruction substrings; 4-decimal score round-trip; exact means")
