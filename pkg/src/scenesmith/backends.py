"""Backend transports: deterministic in-process mocks and HTTP clients.

``Backends`` is the typed facade the pipeline calls. It delegates to a
transport implementing ``handle(service, request_envelope) -> response
envelope`` (the wire contract in :mod:`scenesmith.wire`). ``MockTransport``
is the reference mock: every response is a pure function of (seed, request
payload), so runs are reproducible and transports are safe to share between
threads. ``HttpTransport`` posts envelopes to configured URLs.

The online model-asset search is not part of the sidecar wire contract; it
is a provider interface (`search`/`fetch`) with the same mock/HTTP split.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass

import numpy as np

from . import wire
from .imaging import decode_png, encode_png
from .mesh import dump_obj, procedural_mesh

logger = logging.getLogger(__name__)


class BackendError(RuntimeError):
    """A backend call failed (transport error or malformed reply)."""


# ---------------------------------------------------------------------------
# mock language model: rule-based planning


_STOPWORDS = {
    "a", "an", "the", "is", "are", "am", "was", "were", "be", "being", "been",
    "and", "or", "of", "on", "in", "at", "to", "with", "by", "into", "onto",
    "from", "for", "as", "it", "its", "their", "his", "her", "there", "that",
    "this", "these", "those", "each", "respectively", "while", "which",
    "front", "behind", "back", "view", "facing", "faces", "face", "looking",
    "pointing", "turned", "swimming", "flying", "standing", "stands", "stand",
    "sitting", "sits", "sit", "placed", "arranged", "left", "right", "top",
    "bottom", "forward", "backward", "backwards", "upward", "upwards",
    "downward", "downwards", "up", "down", "above", "below", "under",
    "underneath", "over", "next", "near", "beside", "between", "center",
    "middle", "side", "scene", "style", "photorealistic", "beautiful",
    "colorful", "huge", "big", "small", "tiny", "little", "blue", "red",
    "green", "white", "black", "yellow", "brown", "orange", "gray", "grey",
    "tall", "elegant", "warm", "quiet", "complex", "detailed", "anime",
    "surrounded", "around", "them", "other", "seen",
}

_NUMBER_WORDS = {"one": 1, "two": 2, "three": 3, "four": 4, "five": 5}

_ORIENTATION_CUE = re.compile(
    r"(?:facing|faces|face|looking|pointing|turned|swimming|flying)\s+"
    r"(?:to\s+the\s+)?(forward|forwards|backward|backwards|left|right|"
    r"up|upward|upwards|down|downward|downwards)",
    re.IGNORECASE,
)

_ORIENTATION_MAP = {
    "forward": "forward", "forwards": "forward",
    "backward": "backward", "backwards": "backward",
    "left": "left", "right": "right",
    "up": "upward", "upward": "upward", "upwards": "upward",
    "down": "downward", "downward": "downward", "downwards": "downward",
}


def _singular(word: str) -> str:
    if len(word) > 3 and word.endswith("s"):
        return word[:-1]
    return word


def extract_objects(prompt: str, max_count: int = 5) -> list[str]:
    """Heuristic object-noun extraction used by the mock planner."""
    tokens = re.findall(r"[a-zA-Z]+", prompt.lower())
    names: list[str] = []
    count = 1
    for token in tokens:
        if token in _NUMBER_WORDS:
            count = min(_NUMBER_WORDS[token], max_count)
            continue
        if token in _STOPWORDS or len(token) < 2:
            continue
        name = _singular(token)
        if name in names:
            count = 1
            continue
        names.extend([name] * count)
        count = 1
    if not names:
        names = ["object"]
    return names[: max_count * 2]


def _find_mention(prompt_lower: str, name: str) -> int:
    match = re.search(rf"\b{re.escape(name)}s?\b", prompt_lower)
    return match.start() if match else -1


def _mock_depths(prompt: str, names: list[str]) -> list[float]:
    prompt_lower = prompt.lower()
    depths = {name: 0.5 for name in names}
    for phrase, before, after in (("in front of", 0.1, 0.9), ("behind", 0.9, 0.1)):
        for match in re.finditer(phrase, prompt_lower):
            pre, post = None, None
            best_pre, best_post = -1, len(prompt_lower) + 1
            for name in names:
                pos = _find_mention(prompt_lower, name)
                if pos < 0:
                    continue
                if pos < match.start() and pos > best_pre:
                    best_pre, pre = pos, name
                if pos > match.start() and pos < best_post:
                    best_post, post = pos, name
            if pre is not None:
                depths[pre] = before
            if post is not None:
                depths[post] = after
    return [depths[name] for name in names]


def _mock_orientations(prompt: str, names: list[str]) -> list[str]:
    prompt_lower = prompt.lower()
    spans: list[tuple[str, int]] = []
    for name in names:
        pos = _find_mention(prompt_lower, name)
        spans.append((name, pos))
    out = []
    for i, (name, pos) in enumerate(spans):
        if pos < 0:
            out.append("forward")
            continue
        later = [p for _, p in spans[i + 1 :] if p > pos]
        end = min(later) if later else len(prompt_lower)
        window = prompt_lower[pos:end]
        match = _ORIENTATION_CUE.search(window)
        out.append(_ORIENTATION_MAP[match.group(1).lower()] if match else "forward")
    return out


def _mock_camera(prompt: str) -> str:
    match = re.search(r"\b(top|left|right|front)\s*[- ]?\s*view\b", prompt.lower())
    if match:
        return f"{match.group(1)} view"
    return "front view"


def _mock_layout2d(prompt: str, seed: int) -> list[dict]:
    names = extract_objects(prompt)
    n = len(names)
    width = min(0.8 / n, 0.3)
    boxes = []
    for i, name in enumerate(names):
        jitter = (wire.digest_int(seed, prompt, i, "jit") % 1000) / 1000.0
        height = min(width * (0.9 + 0.4 * jitter), 0.3)
        left = (i + 0.5) / n - width / 2
        top = 0.5 - height / 2 + (jitter - 0.5) * 0.1
        boxes.append(
            {
                "name": name,
                "left": round(left, 4),
                "top": round(max(min(top, 1.0 - height), 0.0), 4),
                "width": round(width, 4),
                "height": round(height, 4),
            }
        )
    return boxes


def _extract_field(prompt: str, label: str) -> str:
    matches = re.findall(rf"^{label}: (.*)$", prompt, flags=re.MULTILINE)
    return matches[-1] if matches else ""


def mock_llm_reply(prompt: str, seed: int) -> str:
    """Deterministic rule-based reply for the four planning templates."""
    user = _extract_field(prompt, "Prompt")
    if "2D layout planner" in prompt:
        return json.dumps(_mock_layout2d(user, seed))
    if "planning object depths" in prompt:
        names = json.loads(_extract_field(prompt, "Objects") or "[]")
        return json.dumps(_mock_depths(user, names))
    if "planning object orientations" in prompt:
        names = json.loads(_extract_field(prompt, "Objects") or "[]")
        return json.dumps(_mock_orientations(user, names))
    if "planning the camera view" in prompt:
        return _mock_camera(user)
    # unknown instruction: echo something parseable as nothing useful
    return '{"note": "unrecognized instruction"}'


# ---------------------------------------------------------------------------
# mock embedding: hashed bag of word n-grams (stable across processes)

EMBED_DIM = 64


def mock_embedding(text: str, seed: int) -> list[float]:
    import hashlib

    vec = [0.0] * EMBED_DIM
    words = re.findall(r"[a-z0-9]+", text.lower())
    grams = words + [f"{a} {b}" for a, b in zip(words, words[1:])]
    for gram in grams:
        h = hashlib.sha256(f"embed|{seed}|{gram}".encode()).digest()
        d = int.from_bytes(h[:8], "big")
        vec[d % EMBED_DIM] += 1.0 if (d >> 32) % 2 == 0 else -1.0
        vec[(d >> 16) % EMBED_DIM] += 0.5
    norm = sum(v * v for v in vec) ** 0.5
    if norm > 0:
        vec = [v / norm for v in vec]
    return vec


# ---------------------------------------------------------------------------
# mock generation: composite of the conditions plus a prompt watermark


def mock_generated_image(prompt: str, depth_png: bytes, canny_png: bytes,
                         control_scale: float, steps: int, seed: int) -> bytes:
    depth = decode_png(depth_png).astype(np.float64)
    if depth.max() > 255:
        depth /= 257.0  # 16-bit to 8-bit range
    edges = decode_png(canny_png).astype(np.float64)
    rng = np.random.default_rng(wire.digest_int("gen", seed, prompt, steps))
    noise = rng.integers(0, 256, size=depth.shape).astype(np.float64)
    img = control_scale * (0.5 * depth + 0.5 * edges) + (1.0 - control_scale) * noise
    return encode_png(np.clip(np.round(img), 0, 255).astype(np.uint8))


_SEARCH_CATALOG = {
    "cat", "dog", "rabbit", "frog", "car", "tree", "house", "boy", "girl",
    "vase", "candle", "airplane", "eagle", "whale", "bowl", "bread", "table",
    "chair", "bird", "horse", "boat", "lamp", "robot", "batman",
}


class MockTransport:
    """In-process deterministic backend; implements the wire contract."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    # -- wire-level entry point -------------------------------------------

    def handle(self, service: str, env: dict) -> dict:
        error = wire.validate_request(service, env)
        if error:
            raise BackendError(f"{service}: malformed request: {error}")
        payload = {k: v for k, v in env.items() if k != "request_id"}
        handler = getattr(self, f"_do_{service}")
        return wire.build_response(env, f"mock-{service}-v1", handler(payload))

    # -- per-service handlers ----------------------------------------------

    def _do_embed(self, p: dict) -> dict:
        return {"vectors": [mock_embedding(t, self.seed) for t in p["texts"]]}

    def _do_llm(self, p: dict) -> dict:
        return {"text": mock_llm_reply(p["prompt"], self.seed)}

    def _do_classify_face(self, p: dict) -> dict:
        caption = f"{p['object_name']} faces camera"
        image = wire.b64decode(p["image_b64"])
        sim = (wire.digest_int("clf", self.seed, caption, image) % 10**9) / 10**9
        return {"similarity": sim}

    def _do_generate_image(self, p: dict) -> dict:
        image = mock_generated_image(
            p["prompt"],
            wire.b64decode(p["depth_b64"]),
            wire.b64decode(p["canny_b64"]),
            float(p["control_scale"]),
            int(p["steps"]),
            int(p["seed"]),
        )
        return {"image_b64": wire.b64encode(image)}

    def _do_vqa(self, p: dict) -> dict:
        image = wire.b64decode(p["image_b64"])
        score = (wire.digest_int("vqa", self.seed, p["instruction"], image) % 10**4) / 10**4
        return {"text": f'The image partially matches the text. ("score", {score:.4f})'}

    def _do_text_to_3d(self, p: dict) -> dict:
        mesh = procedural_mesh(wire.digest_int("t23d", self.seed, p["prompt"]))
        return {"obj_b64": wire.b64encode(dump_obj(mesh).encode())}


class HttpTransport:
    """Posts wire envelopes to per-service URLs using ``requests``."""

    def __init__(self, urls: dict[str, str], timeout: float = 60.0):
        self.urls = urls
        self.timeout = timeout

    def handle(self, service: str, env: dict) -> dict:
        import requests

        url = self.urls.get(service)
        if not url:
            raise BackendError(f"no URL configured for service {service!r}")
        try:
            resp = requests.post(url, json=env, timeout=self.timeout)
        except requests.RequestException as exc:
            raise BackendError(f"{service}: transport failure: {exc}") from exc
        if resp.status_code != 200:
            raise BackendError(f"{service}: HTTP {resp.status_code}: {resp.text[:200]}")
        return resp.json()


class RecordingTransport:
    """Wraps a transport and counts calls per service (thread-safe enough
    for CPython's atomic dict operations given the per-run usage)."""

    def __init__(self, inner):
        self.inner = inner
        self.calls: dict[str, int] = {}
        self.requests: list[tuple[str, dict]] = []

    def handle(self, service: str, env: dict) -> dict:
        self.calls[service] = self.calls.get(service, 0) + 1
        self.requests.append((service, env))
        return self.inner.handle(service, env)

    def count(self, service: str) -> int:
        return self.calls.get(service, 0)


class CachedTransport:
    """Caches responses keyed by (service, payload, seed) via a Cache."""

    def __init__(self, inner, cache, seed: int):
        self.inner = inner
        self.cache = cache
        self.seed = seed

    def handle(self, service: str, env: dict) -> dict:
        payload = {k: v for k, v in env.items() if k != "request_id"}
        blob = self.cache.get_or_compute(
            service,
            payload,
            self.seed,
            lambda: wire.canonical_json(self.inner.handle(service, env)),
        )
        return json.loads(blob)


@dataclass
class SearchCandidate:
    title: str
    url: str

    def __post_init__(self) -> None:
        if not self.title:
            raise ValueError("search candidate needs a nonempty title")


class MockSearchProvider:
    """Deterministic stand-in for an online 3D-asset marketplace."""

    def __init__(self, seed: int = 0, catalog: set[str] | None = None):
        self.seed = seed
        self.catalog = _SEARCH_CATALOG if catalog is None else catalog

    def search(self, query: str) -> list[SearchCandidate]:
        if query not in self.catalog:
            return []
        n = 1 + wire.digest_int("nres", self.seed, query) % 3
        out = []
        for i in range(n):
            variants = [f"{query} 3d model", f"low poly {query}", f"{query} figurine pack"]
            out.append(
                SearchCandidate(
                    title=variants[i % len(variants)],
                    url=f"mock://assets/{query.replace(' ', '-')}/{i}",
                )
            )
        return out

    def fetch(self, url: str) -> bytes:
        return dump_obj(procedural_mesh(wire.digest_int("fetch", self.seed, url))).encode()


class HttpSearchProvider:
    """Online search over a simple JSON provider endpoint."""

    def __init__(self, url: str, timeout: float = 60.0):
        self.url = url
        self.timeout = timeout

    def search(self, query: str) -> list[SearchCandidate]:
        import requests

        try:
            resp = requests.post(self.url, json={"query": query}, timeout=self.timeout)
            resp.raise_for_status()
            return [SearchCandidate(**c) for c in resp.json()["candidates"]]
        except Exception as exc:
            raise BackendError(f"online_search failed: {exc}") from exc

    def fetch(self, url: str) -> bytes:
        import requests

        try:
            resp = requests.get(url, timeout=self.timeout)
            resp.raise_for_status()
            return resp.content
        except Exception as exc:
            raise BackendError(f"asset download failed: {exc}") from exc


class Backends:
    """Typed facade over a wire transport plus the search provider."""

    def __init__(self, transport, search_provider, recorder: RecordingTransport | None = None):
        self.transport = transport
        self.search_provider = search_provider
        self.recorder = recorder

    # -- wire-backed services ----------------------------------------------

    def _call(self, service: str, payload: dict) -> dict:
        env = wire.build_request(service, payload)
        resp = self.transport.handle(service, env)
        if not isinstance(resp, dict) or "model_id" not in resp:
            raise BackendError(f"{service}: malformed response envelope")
        return resp

    def embed(self, texts: list[str]) -> list[list[float]]:
        return self._call("embed", {"texts": list(texts)})["vectors"]

    def llm(self, prompt: str, top_p: float, temperature: float) -> str:
        return self._call(
            "llm", {"prompt": prompt, "top_p": top_p, "temperature": temperature}
        )["text"]

    def classify_face(self, image_png: bytes, object_name: str) -> float:
        return float(
            self._call(
                "classify_face",
                {"image_b64": wire.b64encode(image_png), "object_name": object_name},
            )["similarity"]
        )

    def generate_image(self, prompt: str, depth_png: bytes, canny_png: bytes,
                       control_scale: float, steps: int, seed: int) -> bytes:
        resp = self._call(
            "generate_image",
            {
                "prompt": prompt,
                "depth_b64": wire.b64encode(depth_png),
                "canny_b64": wire.b64encode(canny_png),
                "control_scale": control_scale,
                "steps": steps,
                "seed": seed,
            },
        )
        return wire.b64decode(resp["image_b64"])

    def vqa(self, image_png: bytes, instruction: str) -> str:
        return self._call(
            "vqa", {"image_b64": wire.b64encode(image_png), "instruction": instruction}
        )["text"]

    def text_to_3d(self, prompt: str) -> bytes:
        return wire.b64decode(self._call("text_to_3d", {"prompt": prompt})["obj_b64"])

    # -- search provider -----------------------------------------------------

    def online_search(self, query: str) -> list[SearchCandidate]:
        if self.recorder is not None:
            self.recorder.calls["online_search"] = self.recorder.calls.get("online_search", 0) + 1
        return self.search_provider.search(query)

    def fetch_asset(self, url: str) -> bytes:
        return self.search_provider.fetch(url)

    def call_counts(self) -> dict[str, int]:
        return dict(self.recorder.calls) if self.recorder is not None else {}


def make_backends(endpoints, seed: int, cache=None, record: bool = True) -> Backends:
    """Build the backend facade for a BackendEndpoints config.

    All-mock endpoints share one MockTransport; any URL endpoint routes that
    service over HTTP. The optional cache wraps the transport; the recorder
    (on by default) feeds the manifest's per-service call counts.
    """
    urls = {s: getattr(endpoints, s) for s in wire.SERVICES}
    http_urls = {s: u for s, u in urls.items() if u != "mock"}
    mock = MockTransport(seed)
    if http_urls:
        http = HttpTransport(http_urls)

        class _Mixed:
            def handle(self, service, env):
                if service in http_urls:
                    return http.handle(service, env)
                return mock.handle(service, env)

        transport = _Mixed()
    else:
        transport = mock
    if cache is not None:
        transport = CachedTransport(transport, cache, seed)
    recorder = RecordingTransport(transport) if record else None
    if endpoints.online_search == "mock":
        provider = MockSearchProvider(seed)
    else:
        provider = HttpSearchProvider(endpoints.online_search)
    return Backends(recorder or transport, provider, recorder=recorder)
