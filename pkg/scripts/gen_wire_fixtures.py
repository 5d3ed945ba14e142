#!/usr/bin/env python3
"""Regenerate the golden wire-contract fixtures (committed package data).

The fixtures freeze one request/response pair per service, produced by the
reference mock transport at seed 0. Both the in-process mocks and the
inference sidecar in --mock mode must reproduce these responses exactly.
"""

import json
import sys
from pathlib import Path

import numpy as np

from scenesmith import wire
from scenesmith.backends import MockTransport
from scenesmith.imaging import encode_png

FIXTURE_SEED = 0


def build_requests():
    tiny = encode_png(np.arange(64, dtype=np.uint8).reshape(8, 8))
    depth = encode_png((np.arange(256, dtype=np.uint16) * 257).reshape(16, 16))
    edges = encode_png((np.eye(16, dtype=np.uint8) * 255))
    return [
        ("embed", {"texts": ["a cat", "a cat", "two dogs"]}),
        ("llm", {
            "prompt": "You are planning the camera view for a 3D scene.\n"
                      "Prompt: a boat, top view\n",
            "top_p": 0.1,
            "temperature": 0.2,
        }),
        ("classify_face", {"image_b64": wire.b64encode(tiny), "object_name": "cat"}),
        ("generate_image", {
            "prompt": "a cat on a table",
            "depth_b64": wire.b64encode(depth),
            "canny_b64": wire.b64encode(edges),
            "control_scale": 0.7,
            "steps": 20,
            "seed": 7,
        }),
        ("vqa", {
            "image_b64": wire.b64encode(tiny),
            "instruction": "How well does the image match the text?",
        }),
        ("text_to_3d", {"prompt": "comet halley"}),
    ]


def main() -> int:
    transport = MockTransport(seed=FIXTURE_SEED)
    fixtures = []
    for service, payload in build_requests():
        request = wire.build_request(service, payload)
        response = transport.handle(service, request)
        fixtures.append({"service": service, "request": request, "response": response})
    out = Path(__file__).resolve().parents[1] / "src" / "scenesmith" / "data" / "wire_fixtures.json"
    out.write_text(json.dumps({"seed": FIXTURE_SEED, "fixtures": fixtures}, indent=2))
    print(f"wrote {len(fixtures)} fixtures to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
