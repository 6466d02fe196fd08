"""Binary PGM (P5, 8-bit) and ``orient.bin`` readers/writers.

``orient.bin`` layout: two little-endian uint32 (rows, cols) followed by
rows*cols little-endian float32 angles, row-major.
"""
import struct
from pathlib import Path

import numpy as np


class FormatError(ValueError):
    pass


def to_u8(img) -> np.ndarray:
    """[0, 1] float image -> uint8 with round-half-to-even."""
    return np.clip(np.rint(np.asarray(img, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def quantize(img) -> np.ndarray:
    """Snap a [0, 1] image onto the 8-bit grid so it survives a PGM round trip exactly."""
    return to_u8(img).astype(np.float64) / 255.0


def write_pgm(path, img) -> None:
    """Write a [0, 1] float image (or a uint8 array) as P5."""
    arr = np.asarray(img)
    u8 = arr if arr.dtype == np.uint8 else to_u8(arr)
    if u8.ndim != 2:
        raise FormatError(f"PGM images are 2-D, got shape {u8.shape}")
    h, w = u8.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(np.ascontiguousarray(u8).tobytes())


def _tokens(buf: bytes, count: int):
    """First ``count`` whitespace-separated header tokens and the offset after them."""
    out, i, n = [], 0, len(buf)
    while len(out) < count:
        while i < n and buf[i:i + 1].isspace():
            i += 1
        if i < n and buf[i:i + 1] == b"#":
            while i < n and buf[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < n and not buf[i:i + 1].isspace() and buf[i:i + 1] != b"#":
            i += 1
        if start == i:
            raise FormatError("truncated PGM header")
        out.append(buf[start:i])
    return out, i + 1  # exactly one whitespace byte precedes the raster


def read_pgm_u8(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    if buf[:2] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (P5) file")
    try:
        (magic, w, h, maxval), off = _tokens(buf, 4)
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError as e:
        raise FormatError(f"{path}: malformed PGM header") from e
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit PGM (maxval 255) is supported, got {maxval}")
    data = buf[off:off + w * h]
    if len(data) != w * h:
        raise FormatError(f"{path}: raster truncated ({len(data)} of {w * h} bytes)")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w).copy()


def read_pgm(path) -> np.ndarray:
    """P5 image -> float64 in [0, 1]."""
    return read_pgm_u8(path).astype(np.float64) / 255.0


def write_orient(path, theta) -> None:
    t = np.asarray(theta, dtype="<f4")
    if t.ndim != 2:
        raise FormatError(f"orientation raster must be 2-D, got {t.shape}")
    with open(path, "wb") as f:
        f.write(struct.pack("<II", *t.shape))
        f.write(t.tobytes())


def read_orient(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    if len(buf) < 8:
        raise FormatError(f"{path}: truncated orientation header")
    h, w = struct.unpack("<II", buf[:8])
    if len(buf) != 8 + 4 * h * w:
        raise FormatError(f"{path}: expected {h}x{w} float32 values, file has {len(buf) - 8} bytes")
    return np.frombuffer(buf[8:], dtype="<f4").reshape(h, w).astype(np.float64)
