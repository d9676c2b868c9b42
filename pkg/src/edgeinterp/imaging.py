"""Image loading/saving, grayscale conversion and edge extraction.

Frames are float32 numpy arrays of shape (H, W, 3) with values in [0, 1].
Edge maps are float32 arrays of shape (H, W) in [0, 1]; the Canny detector
produces strictly binary {0, 1} maps, the Sobel soft detector produces a
differentiable response normalized to a per-image maximum of 1.
"""

from __future__ import annotations

import os

import cv2
import numpy as np
import torch
import torch.nn.functional as F
from scipy import ndimage

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64) / 8.0
_SOBEL_Y = _SOBEL_X.T

# Gradient magnitudes are rounded to this many decimals before suppression and
# thresholding so symmetric plateaus break ties identically no matter how the
# convolutions were accumulated.
_MAG_DECIMALS = 9


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Load an 8- or 16-bit PNG or PPM file as a (H, W, 3) float32 frame in [0, 1].

    Grayscale sources are replicated to 3 channels; an alpha channel is dropped.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(f"image file not found: {path}")
    ext = os.path.splitext(path)[1].lower()
    if ext not in (".png", ".ppm"):
        raise ValueError(f"unsupported image format {ext!r}: {path} (expected .png or .ppm)")
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ValueError(f"corrupt or unreadable image file: {path}")
    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype == np.uint16:
        scale = 65535.0
    else:
        raise ValueError(f"unsupported sample depth {raw.dtype} in {path}")
    frame = raw.astype(np.float32) / scale
    if frame.ndim == 2:
        frame = np.repeat(frame[:, :, None], 3, axis=2)
    elif frame.shape[2] == 4:
        frame = frame[:, :, :3]
    if frame.shape[2] != 3:
        raise ValueError(f"unsupported channel count {frame.shape[2]} in {path}")
    # cv2 delivers BGR order
    frame = frame[:, :, ::-1]
    return np.ascontiguousarray(frame)


def save_image(frame: np.ndarray, path: str | os.PathLike) -> None:
    """Write a frame as an 8-bit RGB PNG.

    Values are quantized as round-half-up(v * 255) and clamped to [0, 255];
    a save/load round trip therefore stays within 1/510 per channel.
    """
    path = os.fspath(path)
    if not path.lower().endswith(".png"):
        raise ValueError(f"output path must end in .png: {path}")
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 3 or frame.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) frame, got shape {frame.shape}")
    data = np.clip(np.floor(frame * 255.0 + 0.5), 0, 255).astype(np.uint8)
    if not cv2.imwrite(path, data[:, :, ::-1]):
        raise OSError(f"failed to write image: {path}")


def save_gray(values: np.ndarray, path: str | os.PathLike) -> None:
    """Write a (H, W) map in [0, 1] as an 8-bit grayscale PNG."""
    path = os.fspath(path)
    if not path.lower().endswith(".png"):
        raise ValueError(f"output path must end in .png: {path}")
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"expected (H, W) map, got shape {values.shape}")
    data = np.clip(np.floor(values * 255.0 + 0.5), 0, 255).astype(np.uint8)
    if not cv2.imwrite(path, data):
        raise OSError(f"failed to write image: {path}")


def luma(frame: np.ndarray) -> np.ndarray:
    """Rec.601 luma (0.299, 0.587, 0.114) of an (H, W, 3) frame."""
    frame = np.asarray(frame, dtype=np.float64)
    r, g, b = LUMA_WEIGHTS
    return r * frame[:, :, 0] + g * frame[:, :, 1] + b * frame[:, :, 2]


def _gaussian_kernel(sigma: float) -> np.ndarray:
    radius = max(1, int(np.ceil(3.0 * sigma)))
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(k * k) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def _filter2_replicate(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Correlate a 2-D image with a 2-D kernel under edge-replicate padding."""
    kh, kw = kernel.shape
    ry, rx = kh // 2, kw // 2
    padded = np.pad(image, ((ry, ry), (rx, rx)), mode="edge")
    out = np.zeros_like(image, dtype=np.float64)
    for dy in range(kh):
        for dx in range(kw):
            w = kernel[dy, dx]
            if w != 0.0:
                out += w * padded[dy : dy + image.shape[0], dx : dx + image.shape[1]]
    return out


def gaussian_blur(image: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur, kernel radius ceil(3*sigma), edge-replicate padding."""
    kernel = _gaussian_kernel(sigma)
    blurred = _filter2_replicate(image, kernel[None, :])
    return _filter2_replicate(blurred, kernel[:, None])


def canny_edges(
    frame: np.ndarray,
    low: float = 0.1,
    high: float = 0.2,
    sigma: float = 1.4,
) -> np.ndarray:
    """Classic Canny detector on the luma image; returns a binary (H, W) map.

    Pipeline: Gaussian smoothing, Sobel gradients (kernels normalized by 1/8 so
    magnitudes are in intensity units per pixel), non-maximum suppression over
    the 4 quantized directions, then double-threshold hysteresis with
    8-connectivity. Thresholds are absolute magnitudes on the [0, 1] luma scale.

    Determinism pins: the 1-pixel image border is suppressed; within an
    equal-magnitude plateau the pixel with the smaller row index (smaller
    column index for horizontal gradients) is kept, so a symmetric step edge
    yields a single-pixel line.
    """
    if not low < high:
        raise ValueError(f"canny thresholds must satisfy low < high, got low={low} high={high}")
    if sigma <= 0:
        raise ValueError(f"canny sigma must be positive, got {sigma}")

    gray = gaussian_blur(luma(frame), sigma)
    gx = _filter2_replicate(gray, _SOBEL_X)
    gy = _filter2_replicate(gray, _SOBEL_Y)
    mag = np.round(np.hypot(gx, gy), _MAG_DECIMALS)

    angle = np.degrees(np.arctan2(gy, gx)) % 180.0
    dir_bin = np.zeros(mag.shape, dtype=np.uint8)
    dir_bin[(angle >= 22.5) & (angle < 67.5)] = 1
    dir_bin[(angle >= 67.5) & (angle < 112.5)] = 2
    dir_bin[(angle >= 112.5) & (angle < 157.5)] = 3

    # Neighbor offsets per direction bin; n1 is the tie-priority neighbor.
    offsets = {
        0: ((0, -1), (0, 1)),
        1: ((-1, 1), (1, -1)),
        2: ((-1, 0), (1, 0)),
        3: ((-1, -1), (1, 1)),
    }
    h, w = mag.shape
    nms = np.zeros_like(mag)
    core = np.s_[1 : h - 1, 1 : w - 1]
    for b, ((dy1, dx1), (dy2, dx2)) in offsets.items():
        n1 = mag[1 + dy1 : h - 1 + dy1, 1 + dx1 : w - 1 + dx1]
        n2 = mag[1 + dy2 : h - 1 + dy2, 1 + dx2 : w - 1 + dx2]
        m = mag[core]
        keep = (dir_bin[core] == b) & (m > n1) & (m >= n2)
        nms[core][keep] = m[keep]

    candidate = nms >= low
    strong = nms >= high
    labels, count = ndimage.label(candidate, structure=np.ones((3, 3), dtype=int))
    if count == 0:
        return np.zeros(mag.shape, dtype=np.float32)
    keep_label = np.zeros(count + 1, dtype=bool)
    keep_label[np.unique(labels[strong])] = True
    keep_label[0] = False
    return keep_label[labels].astype(np.float32)


_SOBEL_X_T = torch.tensor(_SOBEL_X, dtype=torch.float64)
_SOBEL_Y_T = torch.tensor(_SOBEL_Y, dtype=torch.float64)


def soft_edges(frames: torch.Tensor, eps: float = 1e-12) -> torch.Tensor:
    """Differentiable Sobel edge response of a batch of frames.

    Takes (N, 3, H, W), returns (N, 1, H, W): per-pixel gradient magnitude of
    the luma image normalized by its per-sample maximum (left zero for constant
    frames). Differentiable w.r.t. the input wherever the maximum is unique.
    """
    if frames.dim() != 4 or frames.shape[1] != 3:
        raise ValueError(f"expected (N, 3, H, W) tensor, got shape {tuple(frames.shape)}")
    r, g, b = LUMA_WEIGHTS
    gray = (r * frames[:, 0] + g * frames[:, 1] + b * frames[:, 2]).unsqueeze(1)
    padded = F.pad(gray, (1, 1, 1, 1), mode="replicate")
    kx = _SOBEL_X_T.to(frames.dtype).view(1, 1, 3, 3)
    ky = _SOBEL_Y_T.to(frames.dtype).view(1, 1, 3, 3)
    gx = F.conv2d(padded, kx)
    gy = F.conv2d(padded, ky)
    m2 = gx * gx + gy * gy
    peak = m2.amax(dim=(2, 3), keepdim=True)
    out = torch.sqrt(m2 + eps) / torch.sqrt(peak + eps)
    return torch.where(peak > 0, out, torch.zeros_like(out))


def to_tensor(array: np.ndarray, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Convert an (H, W, 3) frame to a (3, H, W) tensor, or an (H, W) map to (1, H, W)."""
    array = np.asarray(array)
    if array.ndim == 3:
        return torch.from_numpy(np.ascontiguousarray(array.transpose(2, 0, 1))).to(dtype)
    if array.ndim == 2:
        return torch.from_numpy(np.ascontiguousarray(array)).to(dtype).unsqueeze(0)
    raise ValueError(f"expected (H, W, 3) or (H, W) array, got shape {array.shape}")


def from_tensor(tensor: torch.Tensor) -> np.ndarray:
    """Inverse of to_tensor; accepts (C, H, W) or a singleton batch (1, C, H, W)."""
    if tensor.dim() == 4:
        if tensor.shape[0] != 1:
            raise ValueError(f"expected singleton batch, got {tensor.shape[0]}")
        tensor = tensor[0]
    array = tensor.detach().cpu().numpy()
    if array.shape[0] == 1:
        return array[0]
    return np.ascontiguousarray(array.transpose(1, 2, 0))
