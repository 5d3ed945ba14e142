"""Content-addressed artifact cache.

Keys are ``sha256(stage name, canonicalized inputs, seed)``; values are raw
bytes stored one file per key. Writes go through a temp file and an atomic
rename, so concurrent writers of the same key are safe (last writer wins
with identical bytes) and readers never observe partial files.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

from .wire import digest


class Cache:
    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def key(self, stage: str, inputs, seed: int) -> str:
        return digest(stage, inputs, seed).hex()

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.bin"

    def get(self, stage: str, inputs, seed: int) -> bytes | None:
        path = self._path(self.key(stage, inputs, seed))
        if path.exists():
            return path.read_bytes()
        return None

    def put(self, stage: str, inputs, seed: int, data: bytes) -> None:
        path = self._path(self.key(stage, inputs, seed))
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def get_or_compute(self, stage: str, inputs, seed: int, producer) -> bytes:
        cached = self.get(stage, inputs, seed)
        if cached is not None:
            return cached
        data = producer()
        if not isinstance(data, bytes):
            raise TypeError("cache producer must return bytes")
        self.put(stage, inputs, seed, data)
        return data
