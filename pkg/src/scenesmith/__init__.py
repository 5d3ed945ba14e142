"""scenesmith: compile text prompts into 3D-controllable images.

The pipeline plans a 2D object layout, lifts it to 3D (depth, orientation,
camera view), acquires and orientation-calibrates 3D models, assembles and
renders the scene with a deterministic software rasterizer, derives depth
and edge condition images, sweeps a conditioned image generator over control
scales, and keeps the best-scoring candidate. All model backends sit behind
one wire contract with deterministic in-process mocks.
"""

__version__ = "0.1.0"

from .assemble import (
    AssembledScene,
    CameraPose,
    ObjectTransform,
    assemble,
    orient_object,
    place_camera,
    place_object,
    size_object,
)
from .backends import Backends, MockTransport, make_backends
from .config import AblationSwitches, BackendEndpoints, RunConfig, load_config
from .evaluate import build_vqa_instruction, evaluate_run, parse_score
from .generate import CandidateImage, select_best, sweep_generate
from .imaging import ConditionSet, DepthMapping, EdgeParams, canny, decode_png, depth_map, encode_png
from .layout import (
    CameraView,
    Layout2D,
    Layout3D,
    ObjectBox2D,
    ObjectPose,
    Orientation,
    build_icl_prompt,
    lift_to_3d,
    load_layout_shop,
    parse_layout_2d,
    retrieve_examples,
)
from .manifest import RunManifest
from .mesh import Mesh, load_obj, parse_obj
from .modelshop import (
    AlignmentResult,
    ModelRecord,
    ModelShopIndex,
    ModelSource,
    acquire,
    build_finetune_dataset,
    calibrate_face_camera,
    normalize_name,
    render_views,
)
from .pipeline import run_pipeline
from .render import Framebuffer, RenderSettings, render_scene, render_triangles

__all__ = [
    "AblationSwitches",
    "AlignmentResult",
    "AssembledScene",
    "BackendEndpoints",
    "Backends",
    "CameraPose",
    "CameraView",
    "CandidateImage",
    "ConditionSet",
    "DepthMapping",
    "EdgeParams",
    "Framebuffer",
    "Layout2D",
    "Layout3D",
    "Mesh",
    "MockTransport",
    "ModelRecord",
    "ModelShopIndex",
    "ModelSource",
    "ObjectBox2D",
    "ObjectPose",
    "ObjectTransform",
    "Orientation",
    "RenderSettings",
    "RunConfig",
    "RunManifest",
    "acquire",
    "assemble",
    "build_finetune_dataset",
    "build_icl_prompt",
    "build_vqa_instruction",
    "calibrate_face_camera",
    "canny",
    "decode_png",
    "depth_map",
    "encode_png",
    "evaluate_run",
    "lift_to_3d",
    "load_config",
    "load_layout_shop",
    "load_obj",
    "make_backends",
    "normalize_name",
    "orient_object",
    "parse_layout_2d",
    "parse_obj",
    "parse_score",
    "place_camera",
    "place_object",
    "render_scene",
    "render_triangles",
    "render_views",
    "retrieve_examples",
    "run_pipeline",
    "select_best",
    "size_object",
    "sweep_generate",
]
