"""Closed-form flow math: differentiable backward warping, linear intermediate
flow interpolation, naive single-side synthesis, .flo file I/O and color-wheel
visualization.

Tensor conventions: frames are (N, C, H, W), flow maps are (N, 2, H, W) with
channel 0 the horizontal displacement u (positive right) and channel 1 the
vertical displacement v (positive down), both in pixel units. Flow arrays on
disk and in visualizations are (H, W, 2) numpy arrays.
"""

from __future__ import annotations

import os

import numpy as np
import torch

FLO_MAGIC = 202021.25

INTERP_MODES = ("symmetric", "forward", "backward")

SYNTH_SIDES = ("from0", "from1", "mean")


def _check_flow_pair(a: torch.Tensor, b: torch.Tensor) -> None:
    if a.shape != b.shape:
        raise ValueError(f"flow shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")
    if a.dim() != 4 or a.shape[1] != 2:
        raise ValueError(f"expected (N, 2, H, W) flow, got shape {tuple(a.shape)}")


def _time_factor(t, device, dtype):
    """Validate a time point in [0, 1] and shape it for broadcasting."""
    if isinstance(t, torch.Tensor):
        if not torch.all((t >= 0) & (t <= 1)):
            raise ValueError("time points must lie in [0, 1]")
        return t.to(device=device, dtype=dtype).reshape(-1, 1, 1, 1)
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"time point must lie in [0, 1], got {t}")
    return t


def backward_warp(source: torch.Tensor, flow: torch.Tensor) -> torch.Tensor:
    """Sample `source` at (x + u, y + v) with bilinear interpolation.

    Sample coordinates are clamped to the image border (border replication).
    Differentiable with respect to both the source values and the flow; exact
    (no floating-point drift) on integer sample coordinates, so a zero flow is
    a bit-exact identity.
    """
    if source.dim() != 4 or flow.dim() != 4 or flow.shape[1] != 2:
        raise ValueError(
            f"expected (N, C, H, W) source and (N, 2, H, W) flow, got "
            f"{tuple(source.shape)} and {tuple(flow.shape)}"
        )
    if source.shape[0] != flow.shape[0] or source.shape[2:] != flow.shape[2:]:
        raise ValueError(
            f"source/flow shape mismatch: {tuple(source.shape)} vs {tuple(flow.shape)}"
        )
    n, c, h, w = source.shape
    ys = torch.arange(h, device=source.device, dtype=source.dtype)
    xs = torch.arange(w, device=source.device, dtype=source.dtype)
    grid_y, grid_x = torch.meshgrid(ys, xs, indexing="ij")
    x = (grid_x.unsqueeze(0) + flow[:, 0].to(source.dtype)).clamp(0, w - 1)
    y = (grid_y.unsqueeze(0) + flow[:, 1].to(source.dtype)).clamp(0, h - 1)

    x0 = x.floor()
    y0 = y.floor()
    wx = (x - x0).unsqueeze(1)
    wy = (y - y0).unsqueeze(1)
    x0i = x0.long()
    y0i = y0.long()
    x1i = (x0i + 1).clamp(max=w - 1)
    y1i = (y0i + 1).clamp(max=h - 1)

    flat = source.reshape(n, c, h * w)

    def tap(yi, xi):
        idx = (yi * w + xi).reshape(n, 1, h * w).expand(n, c, h * w)
        return flat.gather(2, idx).reshape(n, c, h, w)

    top = (1 - wx) * tap(y0i, x0i) + wx * tap(y0i, x1i)
    bottom = (1 - wx) * tap(y1i, x0i) + wx * tap(y1i, x1i)
    return (1 - wy) * top + wy * bottom


def intermediate_flows(
    f01: torch.Tensor,
    f10: torch.Tensor,
    t,
    mode: str = "symmetric",
) -> tuple[torch.Tensor, torch.Tensor]:
    """Linearly interpolated flows from the time-t frame to each input frame.

    Under uniform motion the flows scale linearly with t. `forward` uses only
    the 0->1 flow (F_t0 = -t*F01, F_t1 = (1-t)*F01), `backward` only the 1->0
    flow, and `symmetric` (the default) averages both forms, which coincide
    exactly when F10 == -F01.
    """
    _check_flow_pair(f01, f10)
    if mode not in INTERP_MODES:
        raise ValueError(f"unknown interpolation mode {mode!r}, expected one of {INTERP_MODES}")
    t = _time_factor(t, f01.device, f01.dtype)
    if mode == "forward":
        return -t * f01, (1 - t) * f01
    if mode == "backward":
        return t * f10, -(1 - t) * f10
    ft0 = 0.5 * (t * f10 - t * f01)
    ft1 = 0.5 * ((1 - t) * f01 - (1 - t) * f10)
    return ft0, ft1


def naive_synthesize(
    i0: torch.Tensor,
    i1: torch.Tensor,
    f01: torch.Tensor,
    f10: torch.Tensor,
    t,
    side: str = "mean",
    interp_mode: str = "symmetric",
) -> torch.Tensor:
    """Un-refined frame synthesis: warp one (or both) inputs by the linear flows."""
    if side not in SYNTH_SIDES:
        raise ValueError(f"unknown side {side!r}, expected one of {SYNTH_SIDES}")
    ft0, ft1 = intermediate_flows(f01, f10, t, interp_mode)
    if side == "from0":
        return backward_warp(i0, ft0)
    if side == "from1":
        return backward_warp(i1, ft1)
    return 0.5 * (backward_warp(i0, ft0) + backward_warp(i1, ft1))


def write_flo(flow: np.ndarray, path: str | os.PathLike) -> None:
    """Write a flow array as a Middlebury .flo file (bit-exact for float32)."""
    flow = np.asarray(flow)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ValueError(f"expected (H, W, 2) flow array, got shape {flow.shape}")
    h, w = flow.shape[:2]
    with open(path, "wb") as f:
        f.write(np.array([FLO_MAGIC], dtype="<f4").tobytes())
        f.write(np.array([w, h], dtype="<i4").tobytes())
        f.write(np.ascontiguousarray(flow, dtype="<f4").tobytes())


def read_flo(path: str | os.PathLike) -> np.ndarray:
    """Read a Middlebury .flo file into a (H, W, 2) float32 array."""
    with open(path, "rb") as f:
        buf = f.read()
    if len(buf) < 12:
        raise ValueError(f"truncated .flo header in {os.fspath(path)}")
    magic = np.frombuffer(buf, dtype="<f4", count=1)[0]
    if magic != np.float32(FLO_MAGIC):
        raise ValueError(f"bad .flo magic {magic!r} in {os.fspath(path)}")
    w, h = (int(v) for v in np.frombuffer(buf, dtype="<i4", count=2, offset=4))
    if w <= 0 or h <= 0:
        raise ValueError(f"invalid .flo dimensions {w}x{h} in {os.fspath(path)}")
    expected = 12 + 8 * w * h
    if len(buf) != expected:
        raise ValueError(
            f"truncated .flo payload in {os.fspath(path)}: expected {expected} bytes, got {len(buf)}"
        )
    data = np.frombuffer(buf, dtype="<f4", offset=12)
    return data.reshape(h, w, 2).copy()


def color_wheel() -> np.ndarray:
    """The 55-color optical flow wheel (hue encodes direction)."""
    transitions = (15, 6, 4, 11, 13, 6)  # RY, YG, GC, CB, BM, MR
    wheel = np.zeros((sum(transitions), 3))
    ramps = [
        (0, 1, +1),  # red to yellow: green ramps up
        (1, 0, -1),  # yellow to green: red ramps down
        (1, 2, +1),  # green to cyan: blue ramps up
        (2, 1, -1),  # cyan to blue: green ramps down
        (2, 0, +1),  # blue to magenta: red ramps up
        (0, 2, -1),  # magenta to red: blue ramps down
    ]
    start = 0
    for count, (hold, ramp, sign) in zip(transitions, ramps):
        seg = slice(start, start + count)
        wheel[seg, hold] = 1.0
        frac = np.arange(count) / count
        wheel[seg, ramp] = frac if sign > 0 else 1.0 - frac
        start += count
    return wheel


_WHEEL = color_wheel()


def flow_to_color(flow: np.ndarray, max_magnitude: float | None = None) -> np.ndarray:
    """Render a flow array as an RGB frame: hue = direction, saturation = magnitude.

    Zero flow maps to white. Magnitudes are normalized by `max_magnitude`
    (default: the map's own maximum, or 1 for an all-zero map) and clamped at 1.
    """
    flow = np.asarray(flow, dtype=np.float64)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ValueError(f"expected (H, W, 2) flow array, got shape {flow.shape}")
    u, v = flow[:, :, 0], flow[:, :, 1]
    radius = np.hypot(u, v)
    if max_magnitude is None:
        max_magnitude = float(radius.max())
    if max_magnitude <= 0:
        max_magnitude = 1.0
    radius = np.clip(radius / max_magnitude, 0.0, 1.0)

    n = _WHEEL.shape[0]
    angle = np.arctan2(-v, -u) / np.pi  # in [-1, 1]
    idx = (angle + 1.0) / 2.0 * (n - 1)
    i0 = np.floor(idx).astype(int)
    i1 = (i0 + 1) % n
    frac = (idx - i0)[:, :, None]
    color = (1.0 - frac) * _WHEEL[i0] + frac * _WHEEL[i1]
    return 1.0 - radius[:, :, None] * (1.0 - color)


def flow_to_array(flow: torch.Tensor) -> np.ndarray:
    """Convert a (2, H, W) or singleton-batch (1, 2, H, W) flow tensor to (H, W, 2)."""
    if flow.dim() == 4:
        if flow.shape[0] != 1:
            raise ValueError(f"expected singleton batch, got {flow.shape[0]}")
        flow = flow[0]
    if flow.dim() != 3 or flow.shape[0] != 2:
        raise ValueError(f"expected (2, H, W) flow tensor, got shape {tuple(flow.shape)}")
    return np.ascontiguousarray(flow.detach().cpu().numpy().transpose(1, 2, 0))


def flow_from_array(flow: np.ndarray, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Convert a (H, W, 2) flow array to a (1, 2, H, W) tensor."""
    flow = np.asarray(flow)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ValueError(f"expected (H, W, 2) flow array, got shape {flow.shape}")
    return torch.from_numpy(np.ascontiguousarray(flow.transpose(2, 0, 1))).to(dtype).unsqueeze(0)
