"""Synthetic translating-rectangle scenes for smoke tests and desk-scale runs.

Rectangles move with constant velocity across a constant background and are
rendered with exact box coverage, so sub-pixel positions produce smooth,
learnable frames.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imaging import save_image


@dataclass(frozen=True)
class MovingRect:
    x: float  # top-left corner at time 0
    y: float
    width: float
    height: float
    color: tuple[float, float, float]
    vx: float  # displacement over the full unit time interval
    vy: float


@dataclass(frozen=True)
class Scene:
    height: int
    width: int
    background: tuple[float, float, float]
    rects: tuple[MovingRect, ...]


def _coverage(start: float, extent: float, n: int) -> np.ndarray:
    cells = np.arange(n, dtype=np.float64)
    return np.clip(np.minimum(start + extent, cells + 1.0) - np.maximum(start, cells), 0.0, 1.0)


def render(scene: Scene, time: float) -> np.ndarray:
    """Render the scene at a time in [0, 1] as an (H, W, 3) float frame."""
    frame = np.empty((scene.height, scene.width, 3), dtype=np.float64)
    frame[:] = scene.background
    for rect in scene.rects:
        cov_x = _coverage(rect.x + rect.vx * time, rect.width, scene.width)
        cov_y = _coverage(rect.y + rect.vy * time, rect.height, scene.height)
        alpha = np.outer(cov_y, cov_x)[:, :, None]
        frame = frame * (1.0 - alpha) + np.asarray(rect.color) * alpha
    return frame.astype(np.float32)


def random_scene(rng: np.random.Generator, size: tuple[int, int] = (64, 64),
                 max_speed: float = 4.0) -> Scene:
    """A dark background with 1-2 bright rectangles; high contrast keeps edges detectable."""
    h, w = size
    background = tuple(rng.uniform(0.0, 0.1, size=3))
    rects = []
    for _ in range(int(rng.integers(1, 3))):
        rw = float(rng.uniform(w * 0.15, w * 0.35))
        rh = float(rng.uniform(h * 0.15, h * 0.35))
        margin = max_speed + 2.0
        x = float(rng.uniform(margin, w - rw - margin))
        y = float(rng.uniform(margin, h - rh - margin))
        color = tuple(rng.uniform(0.85, 1.0, size=3))
        vx = float(rng.uniform(-max_speed, max_speed))
        vy = float(rng.uniform(-max_speed, max_speed))
        rects.append(MovingRect(x, y, rw, rh, color, vx, vy))
    return Scene(h, w, background, tuple(rects))


def write_triplet_dataset(
    root: str | Path,
    count: int = 4,
    size: tuple[int, int] = (64, 64),
    seed: int = 0,
    max_speed: float = 4.0,
    scenes: list[Scene] | None = None,
) -> Path:
    """Write `count` triplet sequences (im1/im2/im3 at times 0, 0.5, 1) under `root`."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    if scenes is None:
        scenes = [random_scene(rng, size, max_speed) for _ in range(count)]
    for i, scene in enumerate(scenes):
        seq = root / f"{i:04d}"
        seq.mkdir(parents=True, exist_ok=True)
        for name, time in zip(("im1.png", "im2.png", "im3.png"), (0.0, 0.5, 1.0)):
            save_image(render(scene, time), seq / name)
    return root


def write_clip_dataset(
    root: str | Path,
    count: int = 2,
    size: tuple[int, int] = (64, 64),
    seed: int = 0,
    frames: int = 9,
    max_speed: float = 6.0,
    scenes: list[Scene] | None = None,
) -> Path:
    """Write `count` clips of `frames` consecutive frames each under `root`."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    if scenes is None:
        scenes = [random_scene(rng, size, max_speed) for _ in range(count)]
    for i, scene in enumerate(scenes):
        clip = root / f"clip_{i:03d}"
        clip.mkdir(parents=True, exist_ok=True)
        for j in range(frames):
            save_image(render(scene, j / (frames - 1)), clip / f"{j:02d}.png")
    return root
