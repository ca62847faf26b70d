"""Minimal PNG writer: 8-bit grayscale (color type 0) or RGB (color type 2),
no interlacing, filter 0 on every scanline. Kept dependency-free so the test
suite can round-trip the output through an independent decoder.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return (struct.pack(">I", len(payload)) + tag + payload
            + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF))


def encode_png(pixels: np.ndarray) -> bytes:
    """Encode (H, W) or (H, W, 3) uint8 pixels as a PNG byte string."""
    pixels = np.asarray(pixels)
    if pixels.dtype != np.uint8:
        raise ValueError(f"encode_png expects uint8 pixels, got {pixels.dtype}")
    if pixels.ndim == 2:
        color_type = 0
    elif pixels.ndim == 3 and pixels.shape[2] == 3:
        color_type = 2
    else:
        raise ValueError(f"encode_png expects (H, W) or (H, W, 3), got {pixels.shape}")

    height, width = pixels.shape[:2]
    ihdr = struct.pack(">IIBBBBB", width, height, 8, color_type, 0, 0, 0)
    raw = bytearray()
    flat = pixels.reshape(height, -1)
    for row in flat:
        raw.append(0)  # filter type 0 (None)
        raw.extend(row.tobytes())
    return (_SIGNATURE
            + _chunk(b"IHDR", ihdr)
            + _chunk(b"IDAT", zlib.compress(bytes(raw), 9))
            + _chunk(b"IEND", b""))
