#!/usr/bin/env python3
"""Regenerate the bundled starter model shop (committed package data).

Each category gets a small procedural mesh whose canonical pose faces the
front camera (nose toward -y), so every starter model is annotated with
face_view = 0.
"""

import json
import sys
from pathlib import Path

from scenesmith.mesh import dump_obj, marked_box_mesh
from scenesmith.wire import digest_int

CATEGORIES = [
    "cat", "dog", "rabbit", "frog", "car", "tree", "house",
    "boy", "girl", "vase", "candle", "table",
]

FIXED_TIMESTAMP = "2025-01-01T00:00:00+00:00"


def main() -> int:
    out = Path(__file__).resolve().parents[1] / "src" / "scenesmith" / "data" / "starter_shop"
    models = out / "models"
    models.mkdir(parents=True, exist_ok=True)
    records = []
    for name in CATEGORIES:
        key = digest_int("starter", name)
        mesh = marked_box_mesh(
            sx=0.8 + (key % 13) / 13.0,
            sy=0.8 + ((key // 13) % 11) / 11.0,
            sz=0.8 + ((key // 143) % 7) / 7.0,
            nose=0.3 + ((key // 1001) % 5) / 25.0,
        )
        path = models / f"{name}.obj"
        path.write_text(dump_obj(mesh))
        records.append(
            {
                "category": name,
                "path": f"models/{name}.obj",
                "source": "shop",
                "added_at": FIXED_TIMESTAMP,
                "face_view": 0,
            }
        )
    (out / "index.json").write_text(json.dumps({"records": records}, indent=2, sort_keys=True))
    print(f"wrote {len(records)} starter models under {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
