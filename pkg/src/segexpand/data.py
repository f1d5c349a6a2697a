"""Procedural image-mask corpus and its container format.

Pairs are grayscale images in [-1, 1] with binary masks, generated as unions
of 1-3 random ellipses / star-shaped blobs over a structured background:
brightness tilt, low-frequency waves, a foreground intensity shift with a
feathered edge, fine Gaussian noise, and an occasional bright "annotation"
glyph burned in outside the mask. The distribution is deliberately wide so a
small subsample underdetermines it.

Image planes are quantized to float32 on creation, which makes the DXP1
container round-trip bit-exact.

DXP1 layout (little endian):
  magic  b"DXP1"
  u32    pair count, H, W
  u8     split tag (0 train, 1 test, 2 other)
  per pair:
    u32  provenance JSON byte length, then that many bytes
    f32  image plane (H*W), f32 mask plane (H*W)
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod

_SPLIT_TAGS = {"train": 0, "test": 1, "other": 2}
_SPLIT_NAMES = {v: k for k, v in _SPLIT_TAGS.items()}

FG_MIN, FG_MAX = 0.02, 0.6


@dataclass
class SamplePair:
    image: np.ndarray  # [1, H, W], values in [-1, 1]
    mask: np.ndarray   # [1, H, W], values in {0, 1}
    provenance: dict = field(default_factory=lambda: {"kind": "original"})

    def validate(self) -> "SamplePair":
        if self.image.shape != self.mask.shape or self.image.ndim != 3 or self.image.shape[0] != 1:
            raise ValueError(f"bad pair shapes: image {self.image.shape}, mask {self.mask.shape}")
        if self.image.min() < -1.0 or self.image.max() > 1.0:
            raise ValueError("image values outside [-1, 1]")
        if not np.isin(self.mask, (0.0, 1.0)).all():
            raise ValueError("mask is not binary")
        return self


@dataclass
class Dataset:
    pairs: list[SamplePair]
    split: str
    h: int
    w: int

    def __len__(self) -> int:
        return len(self.pairs)


def _coords(h: int, w: int):
    ys = np.linspace(-1.0, 1.0, h)
    xs = np.linspace(-1.0, 1.0, w)
    return np.meshgrid(ys, xs, indexing="ij")


def _shape_field(g: np.random.Generator, yy: np.ndarray, xx: np.ndarray) -> np.ndarray:
    """Implicit field of one random shape, positive inside, ~1 at center."""
    cy, cx = g.uniform(-0.55, 0.55, size=2)
    theta = g.uniform(0.0, np.pi)
    ry = yy - cy
    rx = xx - cx
    u = np.cos(theta) * rx + np.sin(theta) * ry
    v = -np.sin(theta) * rx + np.cos(theta) * ry
    if g.random() < 0.5:  # ellipse
        a = g.uniform(0.12, 0.5)
        b = g.uniform(0.12, 0.5)
        return 1.0 - (u / a) ** 2 - (v / b) ** 2
    # star-convex blob: radius modulated by low-order harmonics
    r0 = g.uniform(0.15, 0.45)
    r = np.sqrt(u ** 2 + v ** 2) + 1e-12
    ang = np.arctan2(v, u)
    wobble = np.zeros_like(ang)
    for k in (2, 3, 4):
        wobble += g.uniform(0.0, 0.22) * np.cos(k * ang + g.uniform(0.0, 2 * np.pi))
    boundary = r0 * (1.0 + wobble)
    return (boundary - r) / r0


def _glyph(g: np.random.Generator, img: np.ndarray, mask: np.ndarray) -> None:
    """Burn a few bright strokes into a corner, clear of the mask."""
    h, w = img.shape
    corner_y = 0 if g.random() < 0.5 else h - max(3, h // 8)
    corner_x = 0 if g.random() < 0.5 else w - max(6, w // 4)
    for _ in range(g.integers(2, 5)):
        y = corner_y + int(g.integers(0, max(1, h // 8)))
        x = corner_x + int(g.integers(0, max(1, w // 8)))
        length = int(g.integers(2, max(3, w // 8)))
        if g.random() < 0.7:
            img[y, x:x + length] = 0.9
        else:
            img[y:y + length, x] = 0.9
    img[mask > 0] = np.minimum(img[mask > 0], 0.9)  # keep strokes outside the mask visually dominant


def generate_pair(master_seed: int, index: int, h: int, w: int) -> SamplePair:
    """Deterministic pair `index` of the corpus seeded by `master_seed`."""
    g = rngmod.stream(master_seed, "data", index)
    yy, xx = _coords(h, w)

    fg = None
    for _ in range(100):
        n_shapes = int(g.integers(1, 4))
        fields = [_shape_field(g, yy, xx) for _ in range(n_shapes)]
        combined = np.max(fields, axis=0)
        cand = combined > 0.0
        frac = cand.mean()
        if FG_MIN <= frac <= FG_MAX:
            fg = combined
            break
    if fg is None:
        raise RuntimeError(f"degenerate mask geometry after 100 attempts (seed {master_seed}, index {index})")

    mask = (fg > 0.0).astype(np.float64)
    soft = np.clip(fg / 0.12, 0.0, 1.0)  # feathered edge for the intensity shift

    img = np.full((h, w), g.uniform(-0.45, 0.05))
    img += g.uniform(-0.25, 0.25) * xx + g.uniform(-0.25, 0.25) * yy
    for _ in range(3):
        fy, fx = g.uniform(0.4, 2.4, size=2)
        phase = g.uniform(0.0, 2 * np.pi)
        img += g.uniform(0.03, 0.16) * np.sin(2 * np.pi * (fy * yy + fx * xx) + phase)
    img += g.uniform(0.3, 0.65) * soft
    img += g.normal(0.0, g.uniform(0.02, 0.07), size=(h, w))
    if g.random() < 0.35:
        _glyph(g, img, mask)
    img = np.clip(img, -1.0, 1.0).astype(np.float32).astype(np.float64)

    return SamplePair(image=img[None], mask=mask[None],
                      provenance={"kind": "original", "seed": master_seed, "index": index}).validate()


def generate(seed: int, count: int, h: int, w: int,
             train_fraction: float = 0.9) -> tuple[Dataset, Dataset]:
    """Corpus of `count` pairs split 9:1 (train, test), deterministic in seed."""
    if count < 10:
        raise ValueError(f"count must be >= 10, got {count}")
    if h not in (32, 64) or w not in (32, 64):
        raise ValueError(f"H, W must be 32 or 64, got {h}x{w}")
    pairs = [generate_pair(seed, i, h, w) for i in range(count)]
    n_train = round(count * train_fraction)
    train = Dataset(pairs[:n_train], "train", h, w)
    test = Dataset(pairs[n_train:], "test", h, w)
    return train, test


# ---------------------------------------------------------------- container


def save(dataset: Dataset, path) -> None:
    with open(path, "wb") as f:
        f.write(b"DXP1")
        f.write(struct.pack("<IIIB", len(dataset.pairs), dataset.h, dataset.w,
                            _SPLIT_TAGS.get(dataset.split, 2)))
        for p in dataset.pairs:
            blob = json.dumps(p.provenance, sort_keys=True).encode("utf-8")
            f.write(struct.pack("<I", len(blob)))
            f.write(blob)
            f.write(p.image.astype("<f4").tobytes())
            f.write(p.mask.astype("<f4").tobytes())


class DatasetFormatError(ValueError):
    pass


def _read_exact(f, n: int, offset: int, what: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise DatasetFormatError(
            f"truncated dataset file: wanted {n} bytes for {what} at offset {offset}, got {len(buf)}")
    return buf


def load(path) -> Dataset:
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, 0, "magic")
        if magic[:3] != b"DXP":
            raise DatasetFormatError(f"bad magic {magic!r} at offset 0, expected b'DXP1'")
        if magic != b"DXP1":
            raise DatasetFormatError(f"unsupported dataset version {magic[3:]!r} at offset 3")
        offset = 4
        head = _read_exact(f, 13, offset, "header")
        count, h, w, split_tag = struct.unpack("<IIIB", head)
        offset += 13
        if split_tag not in _SPLIT_NAMES:
            raise DatasetFormatError(f"bad split tag {split_tag} at offset {offset - 1}")
        plane = h * w * 4
        pairs = []
        for i in range(count):
            (blob_len,) = struct.unpack("<I", _read_exact(f, 4, offset, f"pair {i} provenance length"))
            offset += 4
            prov = json.loads(_read_exact(f, blob_len, offset, f"pair {i} provenance"))
            offset += blob_len
            img = np.frombuffer(_read_exact(f, plane, offset, f"pair {i} image"), dtype="<f4")
            offset += plane
            msk = np.frombuffer(_read_exact(f, plane, offset, f"pair {i} mask"), dtype="<f4")
            offset += plane
            pairs.append(SamplePair(
                image=img.astype(np.float64).reshape(1, h, w),
                mask=msk.astype(np.float64).reshape(1, h, w),
                provenance=prov))
        trailing = f.read(1)
        if trailing:
            raise DatasetFormatError(f"unexpected trailing bytes at offset {offset}")
    return Dataset(pairs, _SPLIT_NAMES[split_tag], h, w)


def datasets_equal(a: Dataset, b: Dataset) -> bool:
    if (a.split, a.h, a.w, len(a.pairs)) != (b.split, b.h, b.w, len(b.pairs)):
        return False
    return all(np.array_equal(pa.image, pb.image) and np.array_equal(pa.mask, pb.mask)
               and pa.provenance == pb.provenance
               for pa, pb in zip(a.pairs, b.pairs))
