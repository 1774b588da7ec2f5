"""Image containers, 2x pyramid resampling and file I/O.

Images are numpy arrays of shape ``(channels, height, width)`` holding
finite floats with nominal range [0, 1]. Plane stacks (coefficient maps,
defocus maps, kernel dumps) are arrays of shape ``(K, height, width)``.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np
import png

GKMF_MAGIC = b"GKMF"
GKMF_VERSION = 1
_GKMF_HEADER = struct.Struct("<4sIIII")


class FormatError(ValueError):
    """A file could not be decoded (bad magic, version, truncation, color type)."""


def as_image(data, dtype=np.float64) -> np.ndarray:
    """Coerce ``data`` to a ``(C, H, W)`` float array and check finiteness.

    A 2-D array is treated as a single-channel image.
    """
    arr = np.asarray(data, dtype=dtype)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ValueError(f"expected a (C, H, W) array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite samples")
    return arr


def downsample2(img: np.ndarray) -> np.ndarray:
    """Halve height and width by averaging 2x2 blocks.

    Odd dimensions are padded by replicating the last row/column, so the
    output is ``ceil(H/2) x ceil(W/2)``.
    """
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[-2:]
    if h < 2 or w < 2:
        raise ValueError(f"cannot downsample a {h}x{w} image")
    pad = [(0, 0)] * (img.ndim - 2) + [(0, h % 2), (0, w % 2)]
    p = np.pad(img, pad, mode="edge")
    return 0.25 * (p[..., 0::2, 0::2] + p[..., 1::2, 0::2] + p[..., 0::2, 1::2] + p[..., 1::2, 1::2])


def _interp_axis(a: np.ndarray, n_out: int, axis: int) -> np.ndarray:
    # align-endpoints grid: output i samples input position i*(n_in-1)/(n_out-1)
    n_in = a.shape[axis]
    if n_in == 1 or n_out == 1:
        idx = np.zeros(n_out, dtype=np.intp)
        return np.take(a, idx, axis=axis)
    pos = np.arange(n_out) * ((n_in - 1) / (n_out - 1))
    lo = np.minimum(np.floor(pos).astype(np.intp), n_in - 2)
    frac = pos - lo
    shape = [1] * a.ndim
    shape[axis] = n_out
    frac = frac.reshape(shape)
    a_lo = np.take(a, lo, axis=axis)
    a_hi = np.take(a, lo + 1, axis=axis)
    return a_lo + frac * (a_hi - a_lo)


def upsample2(img: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Bilinear 2x upsampling to exactly ``target_h x target_w``.

    The grid aligns endpoints: the first and last output samples coincide
    with the first and last input samples. ``target_h`` must be ``2H - 1`` or
    ``2H`` (likewise for width) so that odd pyramid levels round-trip.
    """
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[-2:]
    if target_h not in (2 * h - 1, 2 * h) or target_w not in (2 * w - 1, 2 * w):
        raise ValueError(f"target {target_h}x{target_w} is not a 2x upsampling of {h}x{w}")
    out = _interp_axis(img, target_h, img.ndim - 2)
    return _interp_axis(out, target_w, img.ndim - 1)


def pyramid_shapes(h: int, w: int, scales: int) -> list[tuple[int, int]]:
    """Level dimensions of a ``scales``-level pyramid, coarsest first."""
    return [(math.ceil(h / 2 ** (scales - t)), math.ceil(w / 2 ** (scales - t))) for t in range(1, scales + 1)]


def build_pyramid(img: np.ndarray, scales: int) -> list[np.ndarray]:
    """Return ``[y_1, ..., y_T]``, coarsest first; ``y_T`` is ``img`` itself."""
    img = np.asarray(img, dtype=np.float64)
    if scales < 1:
        raise ValueError("scales must be >= 1")
    h, w = img.shape[-2:]
    ch, cw = pyramid_shapes(h, w, scales)[0]
    if scales > 1 and (ch < 2 or cw < 2):
        raise ValueError(f"{h}x{w} image is too small for {scales} scales")
    levels = [img]
    for _ in range(scales - 1):
        levels.append(downsample2(levels[-1]))
    return levels[::-1]


# --------------------------------------------------------------------- PNG


def read_image(path) -> np.ndarray:
    """Read an 8- or 16-bit grayscale/RGB PNG into a ``(C, H, W)`` float array."""
    try:
        width, height, rows, info = png.Reader(filename=str(path)).asDirect()
        if info.get("alpha") or info.get("palette"):
            raise FormatError(f"{path}: alpha and palette PNGs are not supported")
        bits = info["bitdepth"]
        planes = info["planes"]
        data = np.vstack([np.asarray(r, dtype=np.uint32) for r in rows])
    except png.Error as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if planes not in (1, 3) or bits not in (8, 16):
        raise FormatError(f"{path}: unsupported PNG ({planes} planes, {bits} bits)")
    data = data.reshape(height, width, planes).transpose(2, 0, 1)
    return data / float(2**bits - 1)


def quantize(img: np.ndarray, bits: int = 16) -> np.ndarray:
    """Clip to [0, 1] and map to integers with round-half-up."""
    maxval = 2**bits - 1
    return np.floor(np.clip(img, 0.0, 1.0) * maxval + 0.5).astype(np.uint16 if bits == 16 else np.uint8)


def write_image(img: np.ndarray, path, bits: int = 16) -> None:
    """Write a ``(C, H, W)`` image with C in {1, 3} as an 8- or 16-bit PNG."""
    img = as_image(img)
    c, h, w = img.shape
    if c not in (1, 3):
        raise ValueError(f"cannot write a {c}-channel image as PNG")
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    q = quantize(img, bits).transpose(1, 2, 0).reshape(h, w * c)
    writer = png.Writer(width=w, height=h, greyscale=(c == 1), bitdepth=bits)
    with open(path, "wb") as fh:
        writer.write(fh, q.tolist())


# -------------------------------------------------------------------- GKMF


def write_planes(stack: np.ndarray, path) -> None:
    """Write a ``(K, H, W)`` stack as float32 planes in the GKMF container."""
    stack = np.asarray(stack)
    if stack.ndim == 2:
        stack = stack[None]
    if stack.ndim != 3:
        raise ValueError(f"expected a (K, H, W) stack, got shape {stack.shape}")
    k, h, w = stack.shape
    payload = np.ascontiguousarray(stack, dtype="<f4").tobytes()
    Path(path).write_bytes(_GKMF_HEADER.pack(GKMF_MAGIC, GKMF_VERSION, k, h, w) + payload)


def read_planes(path) -> np.ndarray:
    """Read a GKMF stack; returns a float32 ``(K, H, W)`` array."""
    raw = Path(path).read_bytes()
    if len(raw) < _GKMF_HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, k, h, w = _GKMF_HEADER.unpack_from(raw)
    if magic != GKMF_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != GKMF_VERSION:
        raise FormatError(f"{path}: unsupported GKMF version {version}")
    n = k * h * w
    body = raw[_GKMF_HEADER.size :]
    if len(body) != 4 * n:
        raise FormatError(f"{path}: payload has {len(body)} bytes, expected {4 * n}")
    return np.frombuffer(body, dtype="<f4").reshape(k, h, w).astype(np.float32)
