"""PGM / PNG export for eyeballing pairs and contact sheets."""

from __future__ import annotations

import struct
import zlib

import numpy as np


def to_u8(plane: np.ndarray, lo: float = -1.0, hi: float = 1.0) -> np.ndarray:
    arr = np.clip((np.asarray(plane, dtype=np.float64) - lo) / (hi - lo), 0.0, 1.0)
    return np.round(arr * 255.0).astype(np.uint8)


def save_pgm(path, plane: np.ndarray, lo: float = -1.0, hi: float = 1.0) -> None:
    u8 = to_u8(plane, lo, hi)
    h, w = u8.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(u8.tobytes())


def save_png(path, plane: np.ndarray, lo: float = -1.0, hi: float = 1.0) -> None:
    u8 = to_u8(plane, lo, hi)
    h, w = u8.shape
    raw = b"".join(b"\x00" + u8[r].tobytes() for r in range(h))

    def chunk(tag: bytes, payload: bytes) -> bytes:
        return (struct.pack(">I", len(payload)) + tag + payload
                + struct.pack(">I", zlib.crc32(tag + payload)))

    header = struct.pack(">IIBBBBB", w, h, 8, 0, 0, 0, 0)  # 8-bit grayscale
    with open(path, "wb") as f:
        f.write(b"\x89PNG\r\n\x1a\n")
        f.write(chunk(b"IHDR", header))
        f.write(chunk(b"IDAT", zlib.compress(raw, 9)))
        f.write(chunk(b"IEND", b""))


def contact_sheet(path, pairs, cols: int = 8) -> None:
    """PNG grid of image|mask tiles for a list of SamplePairs."""
    if not pairs:
        raise ValueError("no pairs to render")
    h, w = pairs[0].image.shape[1:]
    rows = (len(pairs) + cols - 1) // cols
    sheet = np.full((rows * h, cols * 2 * w), -1.0)
    for i, p in enumerate(pairs):
        r, c = divmod(i, cols)
        sheet[r * h:(r + 1) * h, c * 2 * w:c * 2 * w + w] = p.image[0]
        sheet[r * h:(r + 1) * h, c * 2 * w + w:(c + 1) * 2 * w] = p.mask[0] * 2.0 - 1.0
    save_png(path, sheet)
