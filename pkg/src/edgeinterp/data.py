"""Dataset ingestion for triplet (single-frame task) and clip (multi-frame
task) layouts, plus training augmentation.

Triplet layout: each sequence is a directory containing im1.png, im2.png and
im3.png (first, middle/target, last frame). Clip layout: each clip is a
directory of consecutively numbered frames; non-overlapping windows of `group`
frames become samples whose first and last frames are the inputs.

A plain-text split file (one sequence path per line, relative to the dataset
root) selects a subset of the scan.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .imaging import load_image

log = logging.getLogger(__name__)

TRIPLET_NAMES = ("im1.png", "im2.png", "im3.png")

FRAME_SUFFIXES = (".png", ".ppm")


@dataclass(frozen=True)
class TripletSample:
    id: str
    paths: tuple[Path, Path, Path]


@dataclass(frozen=True)
class ClipSample:
    id: str
    paths: tuple[Path, ...]

    @property
    def target_times(self) -> tuple[float, ...]:
        n = len(self.paths)
        return tuple(i / (n - 1) for i in range(1, n - 1))


@dataclass(frozen=True)
class LoadedSample:
    """Decoded frames of one sample; ts holds the time of each interior frame."""

    id: str
    frames: tuple[np.ndarray, ...]
    ts: tuple[float, ...]


def _read_split(split: str | os.PathLike) -> set[str]:
    with open(split, "r", encoding="utf-8") as f:
        return {line.strip().strip("/") for line in f if line.strip()}


def scan_triplets(root: str | os.PathLike, split: str | os.PathLike | None = None) -> list[TripletSample]:
    """Find all triplet sequence directories under `root`, lexicographically ordered.

    Sequences missing any of the three frames are skipped (counted in a warning).
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root not found: {root}")
    selected = _read_split(split) if split else None
    samples = []
    skipped = 0
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        present = [name for name in TRIPLET_NAMES if name in filenames]
        if not present:
            continue
        rel = os.path.relpath(dirpath, root).replace(os.sep, "/")
        if len(present) < len(TRIPLET_NAMES):
            skipped += 1
            continue
        if selected is not None and rel not in selected:
            continue
        base = Path(dirpath)
        samples.append(TripletSample(rel, tuple(base / name for name in TRIPLET_NAMES)))
    if skipped:
        log.warning("skipped %d sequence(s) with missing frames under %s", skipped, root)
    samples.sort(key=lambda s: s.id)
    if not samples:
        raise ValueError(f"zero usable samples under {root}")
    return samples


def _numbered_frames(dirpath: Path) -> list[Path]:
    frames = [p for p in dirpath.iterdir() if p.is_file() and p.suffix.lower() in FRAME_SUFFIXES]
    if frames and all(p.stem.isdigit() for p in frames):
        frames.sort(key=lambda p: (int(p.stem), p.name))
    else:
        frames.sort(key=lambda p: p.name)
    return frames


def scan_clips(root: str | os.PathLike, group: int = 9, stride: int = 9) -> list[ClipSample]:
    """Cut every clip directory under `root` into windows of `group` frames.

    Windows shorter than `group` are dropped. A root that directly contains
    numbered frames is treated as a single clip.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root not found: {root}")
    if group < 3:
        raise ValueError(f"group must be at least 3, got {group}")
    if stride < 1:
        raise ValueError(f"stride must be positive, got {stride}")
    clip_dirs = sorted((p for p in root.iterdir() if p.is_dir()), key=lambda p: p.name)
    clip_dirs = [d for d in clip_dirs if _numbered_frames(d)]
    if not clip_dirs and _numbered_frames(root):
        clip_dirs = [root]
    samples = []
    for clip in clip_dirs:
        frames = _numbered_frames(clip)
        rel = os.path.relpath(clip, root).replace(os.sep, "/")
        for start in range(0, len(frames) - group + 1, stride):
            window = tuple(frames[start : start + group])
            samples.append(ClipSample(f"{rel}/{start:06d}", window))
    return samples


def _load_frames(paths, sample_id: str) -> tuple[np.ndarray, ...]:
    frames = tuple(load_image(p) for p in paths)
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise ValueError(f"frames of sample {sample_id} differ in resolution: {sorted(shapes)}")
    return frames


def load_triplet(sample: TripletSample) -> LoadedSample:
    return LoadedSample(sample.id, _load_frames(sample.paths, sample.id), (0.5,))


def load_clip(sample: ClipSample) -> LoadedSample:
    return LoadedSample(sample.id, _load_frames(sample.paths, sample.id), sample.target_times)


def triplet_from_clip(sample: ClipSample, target_index: int) -> LoadedSample:
    """A pseudo-triplet (first, target, last) from a clip; t = index / (n - 1)."""
    n = len(sample.paths)
    if not 1 <= target_index <= n - 2:
        raise ValueError(f"target index {target_index} outside 1..{n - 2}")
    paths = (sample.paths[0], sample.paths[target_index], sample.paths[-1])
    frames = _load_frames(paths, sample.id)
    return LoadedSample(sample.id, frames, (target_index / (n - 1),))


def center_crop_divisible(sample: LoadedSample, divisor: int = 32) -> LoadedSample:
    """Center-crop every frame to the largest size divisible by `divisor`."""
    h, w = sample.frames[0].shape[:2]
    th, tw = (h // divisor) * divisor, (w // divisor) * divisor
    if th == 0 or tw == 0:
        raise ValueError(f"frames of sample {sample.id} are smaller than {divisor} pixels")
    if (th, tw) == (h, w):
        return sample
    y0, x0 = (h - th) // 2, (w - tw) // 2
    frames = tuple(np.ascontiguousarray(f[y0 : y0 + th, x0 : x0 + tw]) for f in sample.frames)
    return replace(sample, frames=frames)


def augment(sample: LoadedSample, rng: np.random.Generator, crop: int = 256) -> LoadedSample:
    """Shared random crop, horizontal/vertical flips and temporal reversal.

    All frames of the sample receive identical geometric transforms; temporal
    reversal remaps every target time t to 1 - t. Frames smaller than the crop
    are center-cropped to the largest 32-divisible size instead. Deterministic
    for a given generator state.
    """
    h, w = sample.frames[0].shape[:2]
    frames = list(sample.frames)
    if h >= crop and w >= crop:
        y0 = int(rng.integers(0, h - crop + 1))
        x0 = int(rng.integers(0, w - crop + 1))
        frames = [f[y0 : y0 + crop, x0 : x0 + crop] for f in frames]
    else:
        cropped = center_crop_divisible(replace(sample, frames=tuple(frames)))
        frames = list(cropped.frames)
    if rng.random() < 0.5:
        frames = [f[:, ::-1] for f in frames]
    if rng.random() < 0.5:
        frames = [f[::-1] for f in frames]
    ts = sample.ts
    if rng.random() < 0.5:
        frames = frames[::-1]
        ts = tuple(1.0 - t for t in reversed(ts))
    return LoadedSample(sample.id, tuple(np.ascontiguousarray(f) for f in frames), ts)
