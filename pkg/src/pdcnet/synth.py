"""Procedural PRI-like segmentation data.

Each image holds one to three non-overlapping structures: rings, axis-aligned
strips or diagonal strips. Every structure is independently labelled negative
(1, smooth interior) or positive (2, interior carries a high-frequency
checker texture). Background is dark with low-amplitude Gaussian noise.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigError, DataError, GenerationError, MissingFileError
from .tensorio import read_tensor, write_tensor

MANIFEST_HEADER = ["id", "image_path", "mask_path"]
_SPLIT_CODES = {"train": 0, "test": 1}


@dataclass
class SynthConfig:
    size: int = 64
    n_images: int = 200
    seed: int = 7
    p_ring: float = 0.4
    p_axis: float = 0.3
    p_diagonal: float = 0.3
    texture_amplitude: float = 0.25
    noise: float = 0.03
    diagonal_only: bool = False
    max_structures: int = 3
    max_retries: int = 200

    def validate(self) -> None:
        probs = (self.p_ring, self.p_axis, self.p_diagonal)
        if min(probs) < 0 or abs(sum(probs) - 1.0) > 1e-9:
            raise ConfigError(f"structure probabilities {probs} must be non-negative and sum to 1")
        if self.size % 32 or self.size <= 0:
            raise ConfigError(f"image size {self.size} must be a positive multiple of 32")
        if self.max_structures < 1:
            raise ConfigError("max_structures must be >= 1")

    def mix(self) -> tuple:
        if self.diagonal_only:
            return (self.p_ring, 0.0, self.p_axis + self.p_diagonal)
        return (self.p_ring, self.p_axis, self.p_diagonal)


@dataclass
class SegSample:
    image: np.ndarray  # f32 (1,H,W) in [0,1]
    mask: np.ndarray  # u8 (H,W) in {0,1,2}
    id: str


@dataclass
class Structure:
    kind: str  # ring | axis | diagonal
    label: int
    mask: np.ndarray
    angle: float | None = None
    geometry: dict | None = None  # ring: center, r_in, r_out; strip: center, length, width


def ring_mask(size: int, center: tuple, r_in: float, r_out: float) -> np.ndarray:
    """Pixels whose centre lies in r_in <= distance <= r_out."""
    yy, xx = np.mgrid[0:size, 0:size]
    d2 = (yy - center[0]) ** 2 + (xx - center[1]) ** 2
    return (d2 >= r_in**2) & (d2 <= r_out**2)


def strip_mask(size: int, center: tuple, length: float, width: float, angle_deg: float) -> np.ndarray:
    """Oriented rectangle; angle measured from the +x axis toward -y (image up)."""
    yy, xx = np.mgrid[0:size, 0:size]
    th = np.deg2rad(angle_deg)
    ux, uy = np.cos(th), -np.sin(th)
    dx, dy = xx - center[1], yy - center[0]
    along = dx * ux + dy * uy
    across = -dx * uy + dy * ux
    # small tolerance so 45-degree strips rasterise symmetrically
    return (np.abs(along) <= length / 2 + 1e-9) & (np.abs(across) <= width / 2 + 1e-9)


def _draw_structure(rng: np.random.Generator, size: int, kind: str) -> tuple:
    scale = size / 64.0
    if kind == "ring":
        r_out = rng.uniform(7, 13) * scale
        r_in = r_out - rng.uniform(3.5, 5.5) * scale
        m = r_out + 1
        c = (rng.uniform(m, size - 1 - m), rng.uniform(m, size - 1 - m))
        return ring_mask(size, c, r_in, r_out), None, {"center": c, "r_in": r_in, "r_out": r_out}
    length = rng.uniform(22, 40) * scale
    width = rng.uniform(4.5, 7.0) * scale
    angle = float(rng.choice([0.0, 90.0])) if kind == "axis" else float(rng.choice([45.0, 135.0]))
    th = np.deg2rad(angle)
    hx = abs(length / 2 * np.cos(th)) + abs(width / 2 * np.sin(th)) + 1
    hy = abs(length / 2 * np.sin(th)) + abs(width / 2 * np.cos(th)) + 1
    c = (rng.uniform(hy, max(size - 1 - hy, hy)), rng.uniform(hx, max(size - 1 - hx, hx)))
    geom = {"center": c, "length": length, "width": width}
    return strip_mask(size, c, length, width, angle), angle, geom


def _sample_rng(seed: int, split: str, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), _SPLIT_CODES.get(split, 2), int(index)])


def generate_one(cfg: SynthConfig, index: int, split: str = "train") -> tuple:
    """Returns (SegSample, list of Structure)."""
    rng = _sample_rng(cfg.seed, split, index)
    size = cfg.size
    kinds = ("ring", "axis", "diagonal")
    n = int(rng.integers(1, cfg.max_structures + 1))
    occupied = np.zeros((size, size), dtype=bool)
    guard = np.ones((5, 5), dtype=bool)
    structures: list = []
    for _ in range(n):
        kind = kinds[int(rng.choice(3, p=cfg.mix()))]
        for _attempt in range(cfg.max_retries):
            m, angle, geom = _draw_structure(rng, size, kind)
            if m.any() and not (ndimage.binary_dilation(m, guard) & occupied).any():
                break
        else:
            raise GenerationError(
                f"could not place a non-overlapping {kind} after {cfg.max_retries} tries "
                f"(seed={cfg.seed}, split={split}, index={index})"
            )
        occupied |= m
        structures.append(Structure(kind, int(rng.integers(1, 3)), m, angle, geom))

    image = 0.12 + cfg.noise * rng.standard_normal((size, size))
    mask = np.zeros((size, size), dtype=np.uint8)
    yy, xx = np.mgrid[0:size, 0:size]
    checker = np.where((yy + xx) % 2 == 0, 1.0, -1.0)
    for s in structures:
        base = rng.uniform(0.45, 0.7)
        image[s.mask] += base
        if s.label == 2:
            image[s.mask] += cfg.texture_amplitude * checker[s.mask]
        mask[s.mask] = s.label
    image = np.clip(image, 0.0, 1.0).astype(np.float32)[None]
    return SegSample(image, mask, f"{split}_{index:05d}"), structures


def generate(cfg: SynthConfig, split: str = "train", n: int | None = None) -> list:
    cfg.validate()
    n = cfg.n_images if n is None else n
    return [generate_one(cfg, i, split)[0] for i in range(n)]


# -- on-disk layout ------------------------------------------------------------

def validate_sample(s: SegSample) -> None:
    if s.mask.dtype != np.uint8 or s.mask.ndim != 2:
        raise DataError(f"{s.id}: mask must be a 2-D u8 tensor")
    if s.mask.size and s.mask.max() > 2:
        raise DataError(f"{s.id}: mask value {int(s.mask.max())} outside {{0,1,2}}")
    if s.image.ndim != 3 or s.image.shape[1:] != s.mask.shape:
        raise DataError(f"{s.id}: image shape {s.image.shape} does not match mask {s.mask.shape}")
    if s.image.size and (s.image.min() < 0 or s.image.max() > 1):
        raise DataError(f"{s.id}: image values outside [0, 1]")


def write_manifest(root, samples) -> None:
    os.makedirs(os.path.join(root, "images"), exist_ok=True)
    os.makedirs(os.path.join(root, "masks"), exist_ok=True)
    with open(os.path.join(root, "manifest.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_HEADER)
        for s in samples:
            img, msk = f"images/{s.id}.t", f"masks/{s.id}.t"
            write_tensor(os.path.join(root, img), s.image)
            write_tensor(os.path.join(root, msk), s.mask)
            w.writerow([s.id, img, msk])


def load_dataset(root) -> list:
    path = os.path.join(root, "manifest.csv")
    if not os.path.exists(path):
        raise MissingFileError(f"no manifest.csv in {root}")
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != MANIFEST_HEADER:
            raise DataError(f"manifest header {reader.fieldnames} != {MANIFEST_HEADER}")
        for row in reader:
            sid = row["id"]
            files = {}
            for key in ("image_path", "mask_path"):
                p = os.path.join(root, row[key])
                if not os.path.exists(p):
                    raise MissingFileError(f"{sid}: listed file {row[key]} is missing")
                files[key] = read_tensor(p)
            s = SegSample(files["image_path"], files["mask_path"], sid)
            validate_sample(s)
            out.append(s)
    return out


def write_dataset(root, cfg: SynthConfig, n_test: int | None = None) -> tuple:
    """Writes ``root/train`` and ``root/test`` splits; returns the two sample lists."""
    cfg.validate()
    n_test = max(cfg.n_images // 4, 1) if n_test is None else n_test
    train = generate(cfg, "train")
    test = generate(cfg, "test", n_test)
    write_manifest(os.path.join(root, "train"), train)
    write_manifest(os.path.join(root, "test"), test)
    return train, test


def resolve_split(root, split: str) -> str:
    """``root/split`` when the directory holds splits, else ``root`` itself."""
    sub = os.path.join(root, split)
    return sub if os.path.exists(os.path.join(sub, "manifest.csv")) else root
