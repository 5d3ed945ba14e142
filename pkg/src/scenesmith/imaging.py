"""Condition-image synthesis: depth-map remapping, Canny edges, PNG I/O.

The Canny implementation is fully specified so an independent brute-force
reference can reproduce it exactly:

* gradients: 3x3 Sobel (correlation) on interior pixels; border gradients
  are zero;
* magnitude: L1, |gx| + |gy|;
* direction: theta = atan2(gy, gx) folded into [0, pi), quantized into four
  sectors with inclusive lower bounds at pi/8, 3pi/8, 5pi/8, 7pi/8; sector
  neighbor offsets (drow, dcol): 0 -> (0, 1), 1 -> (1, 1), 2 -> (1, 0),
  3 -> (1, -1);
* non-maximum suppression keeps a pixel when its magnitude is strictly
  greater than the neighbor at -offset and greater-or-equal to the neighbor
  at +offset;
* hysteresis: kept pixels with magnitude >= high are strong; kept pixels
  with magnitude in [low, high) survive only if 8-connected to a strong
  pixel through kept pixels with magnitude >= low;
* image border pixels are never edges.
"""

from __future__ import annotations

import io
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError


@dataclass(frozen=True)
class DepthMapping:
    """Z-depth to 16-bit pixel mapping: clamp((z + offset) * scale), inverted."""

    offset: float = -20.0
    scale: float = 0.1
    invert: bool = True
    no_hit_value: int = 0


@dataclass(frozen=True)
class EdgeParams:
    low: float = 100.0
    high: float = 200.0

    def __post_init__(self) -> None:
        if not (0 < self.low < self.high):
            raise ValueError("need 0 < low < high")


@dataclass
class ConditionSet:
    """The two condition images fed to the generator."""

    depth: np.ndarray  # (H, W) uint16
    canny: np.ndarray  # (H, W) uint8, values 0/255

    def validate(self) -> None:
        if self.depth.shape != self.canny.shape:
            raise ValueError("condition images must share dimensions")
        h, w = self.depth.shape
        if h != w:
            raise ValueError("condition images must be square")
        if self.depth.dtype != np.uint16 or self.canny.dtype != np.uint8:
            raise ValueError("depth must be uint16 and canny uint8")

    @property
    def depth_png(self) -> bytes:
        return encode_png(self.depth)

    @property
    def canny_png(self) -> bytes:
        return encode_png(self.canny)


def depth_map(zbuf: np.ndarray, mapping: DepthMapping = DepthMapping()) -> np.ndarray:
    """Remap a camera-space z-buffer to the 16-bit condition depth image."""
    z = np.asarray(zbuf, dtype=np.float64)
    hit = np.isfinite(z)
    v = np.clip((np.where(hit, z, 0.0) + mapping.offset) * mapping.scale, 0.0, 1.0)
    out = 1.0 - v if mapping.invert else v
    pixels = np.round(out * 65535.0).astype(np.uint16)
    pixels[~hit] = mapping.no_hit_value
    return pixels


def _sobel(gray: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # separable form; exact for 8-bit input since every partial sum is a
    # small integer, so this matches the naive 3x3 correlation bit for bit
    img = gray.astype(np.float64)
    h, w = img.shape
    gx = np.zeros_like(img)
    gy = np.zeros_like(img)
    vsmooth = img[0 : h - 2, :] + 2.0 * img[1 : h - 1, :] + img[2:h, :]
    gx[1 : h - 1, 1 : w - 1] = vsmooth[:, 2:w] - vsmooth[:, 0 : w - 2]
    hsmooth = img[:, 0 : w - 2] + 2.0 * img[:, 1 : w - 1] + img[:, 2:w]
    gy[1 : h - 1, 1 : w - 1] = hsmooth[2:h, :] - hsmooth[0 : h - 2, :]
    return gx, gy


_SECTOR_OFFSETS = ((0, 1), (1, 1), (1, 0), (1, -1))


def canny(gray: np.ndarray, params: EdgeParams = EdgeParams()) -> np.ndarray:
    """Binary edge image (0/255) of a single-channel 8-bit input."""
    if gray.ndim != 2:
        raise ValueError("canny input must be single-channel")
    h, w = gray.shape
    if h < 3 or w < 3:
        raise ValueError("canny input must be at least 3x3")

    gx, gy = _sobel(gray)
    mag = np.abs(gx) + np.abs(gy)

    # only pixels with mag >= low can ever become edges, so suppression is
    # evaluated sparsely at those candidates (borders excluded outright)
    cand = mag >= params.low
    cand[0, :] = cand[-1, :] = False
    cand[:, 0] = cand[:, -1] = False
    rows, cols = np.nonzero(cand)
    if rows.size == 0:
        return np.zeros(gray.shape, dtype=np.uint8)

    theta = np.arctan2(gy[rows, cols], gx[rows, cols])
    theta = np.where(theta < 0.0, theta + np.pi, theta)
    theta = np.where(theta >= np.pi, theta - np.pi, theta)
    pi8 = np.pi / 8.0
    sector = np.zeros(rows.shape, dtype=np.int8)
    sector[(theta >= pi8) & (theta < 3 * pi8)] = 1
    sector[(theta >= 3 * pi8) & (theta < 5 * pi8)] = 2
    sector[(theta >= 5 * pi8) & (theta < 7 * pi8)] = 3

    m = mag[rows, cols]
    offsets = np.array(_SECTOR_OFFSETS)
    dr = offsets[sector, 0]
    dc = offsets[sector, 1]
    prev = mag[rows - dr, cols - dc]
    nxt = mag[rows + dr, cols + dc]
    kept = (m > prev) & (m >= nxt) & (m > 0.0)

    weak = np.zeros(gray.shape, dtype=bool)
    strong = np.zeros(gray.shape, dtype=bool)
    weak[rows[kept], cols[kept]] = True
    strong[rows[kept], cols[kept]] = mag[rows[kept], cols[kept]] >= params.high

    edges = np.zeros(gray.shape, dtype=bool)
    queue = deque(zip(*np.nonzero(strong)))
    for r, c in queue:
        edges[r, c] = True
    while queue:
        r, c = queue.popleft()
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr == 0 and dc == 0:
                    continue
                rr, cc = r + dr, c + dc
                if 0 <= rr < h and 0 <= cc < w and weak[rr, cc] and not edges[rr, cc]:
                    edges[rr, cc] = True
                    queue.append((rr, cc))
    return np.where(edges, 255, 0).astype(np.uint8)


def encode_png(image: np.ndarray) -> bytes:
    """Lossless PNG bytes for an 8- or 16-bit single-channel image."""
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise ValueError("expected a single-channel image")
    if arr.dtype not in (np.uint8, np.uint16):
        raise ValueError(f"unsupported dtype {arr.dtype}")
    img = Image.fromarray(arr)  # uint8 -> L, uint16 -> I;16
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    """Decode PNG bytes back to a uint8 or uint16 array."""
    try:
        with Image.open(io.BytesIO(data)) as img:
            arr = np.array(img)
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise ValueError(f"could not decode PNG: {exc}") from exc
    if arr.ndim == 3:  # collapse accidental RGB with equal channels
        arr = arr[..., 0]
    if arr.dtype == np.uint8:
        return arr
    return arr.astype(np.uint16)


def conditions_from_render(color: np.ndarray, zbuf: np.ndarray,
                           mapping: DepthMapping = DepthMapping(),
                           params: EdgeParams = EdgeParams()) -> ConditionSet:
    """Build both condition images from a framebuffer."""
    from .render import to_gray8

    cset = ConditionSet(depth=depth_map(zbuf, mapping), canny=canny(to_gray8(color), params))
    cset.validate()
    return cset
