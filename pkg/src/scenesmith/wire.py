"""Backend wire contract: envelope shapes shared with the inference sidecar.

Every request is a flat JSON object with a ``request_id`` plus the service
payload; every response echoes the ``request_id`` and adds a ``model_id``.
Images travel as base64 PNG, meshes as base64 OBJ text. The request id is a
digest of the payload, so identical requests are identical on the wire.

Service payloads (request -> response):

* ``embed``:          {texts: [str]} -> {vectors: [[float]]}
* ``llm``:            {prompt, top_p, temperature} -> {text}
* ``classify_face``:  {image_b64, object_name} -> {similarity}
* ``generate_image``: {prompt, depth_b64, canny_b64, control_scale, steps,
                       seed} -> {image_b64}
* ``vqa``:            {image_b64, instruction} -> {text}
* ``text_to_3d``:     {prompt} -> {obj_b64}
"""

from __future__ import annotations

import base64
import hashlib
import json

SERVICES = (
    "embed",
    "llm",
    "classify_face",
    "generate_image",
    "vqa",
    "text_to_3d",
)

REQUIRED_FIELDS = {
    "embed": ("texts",),
    "llm": ("prompt", "top_p", "temperature"),
    "classify_face": ("image_b64", "object_name"),
    "generate_image": ("prompt", "depth_b64", "canny_b64", "control_scale", "steps", "seed"),
    "vqa": ("image_b64", "instruction"),
    "text_to_3d": ("prompt",),
}


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def digest(*parts) -> bytes:
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, bytes):
            h.update(part)
        else:
            h.update(canonical_json(part))
        h.update(b"\x1f")
    return h.digest()


def digest_int(*parts) -> int:
    return int.from_bytes(digest(*parts)[:8], "big")


def b64encode(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def b64decode(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"))


def request_id(payload: dict) -> str:
    return digest(payload).hex()[:16]


def build_request(service: str, payload: dict) -> dict:
    if service not in SERVICES:
        raise ValueError(f"unknown service {service!r}")
    env = {"request_id": request_id(payload)}
    env.update(payload)
    return env


def build_response(request_env: dict, model_id: str, payload: dict) -> dict:
    env = {"request_id": request_env.get("request_id", ""), "model_id": model_id}
    env.update(payload)
    return env


def validate_request(service: str, env: dict) -> str | None:
    """Return an error message for a malformed envelope, else None."""
    if service not in SERVICES:
        return f"unknown service {service!r}"
    if not isinstance(env, dict):
        return "request body must be a JSON object"
    if "request_id" not in env:
        return "missing request_id"
    for fname in REQUIRED_FIELDS[service]:
        if fname not in env:
            return f"missing field {fname!r}"
    return None
