"""Training losses and evaluation metrics (PSNR, SSIM).

Loss terms use mean (not sum) reduction so magnitudes are resolution
independent. Metrics operate on numpy frames in [0, 1]; losses operate on
torch batches and stay differentiable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import torch
from scipy.ndimage import correlate1d

from .flow_algebra import backward_warp
from .imaging import soft_edges
from .models import Discriminator

PSNR_CAP_DB = 100.0
PSNR_MSE_FLOOR = 1e-10

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

ADV_MODES = ("difference", "bce")


def synthesis_loss(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference between a synthesized frame and the ground truth."""
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(gt.shape)}")
    return (pred - gt).abs().mean()


def flow_loss(
    i0: torch.Tensor,
    i1: torch.Tensor,
    f01: torch.Tensor,
    f10: torch.Tensor,
) -> torch.Tensor:
    """Photometric consistency of the estimated bidirectional flows.

    mean |I0 - warp(I1, F01)| + mean |I1 - warp(I0, F10)|; no flow annotations
    are needed.
    """
    if i0.shape != i1.shape:
        raise ValueError(f"frame shapes differ: {tuple(i0.shape)} vs {tuple(i1.shape)}")
    return (i0 - backward_warp(i1, f01)).abs().mean() + (i1 - backward_warp(i0, f10)).abs().mean()


class AdversarialTerms(NamedTuple):
    """Optimization terms plus the logged score differences D(real) - D(fake)."""

    gen: Optional[torch.Tensor]
    disc_frame: Optional[torch.Tensor]
    disc_edge: Optional[torch.Tensor]
    report_frame: float
    report_edge: float


def _disc_terms(d, real: torch.Tensor, fake: torch.Tensor, mode: str):
    """Scores and objectives for one discriminator; fake is still attached to the generator."""
    s_real = d(real).mean()
    s_fake_gen = d(fake).mean()
    s_fake_disc = d(fake.detach()).mean()
    report = float(s_real.detach() - s_fake_disc.detach())
    if mode == "bce":
        eps = 1e-7
        gen = -torch.log(s_fake_gen.clamp(eps, 1 - eps))
        disc = -torch.log(s_real.clamp(eps, 1 - eps)) - torch.log((1 - s_fake_disc).clamp(eps, 1 - eps))
    else:
        gen = -s_fake_gen
        disc = -(s_real - s_fake_disc)
    return gen, disc, report


def adversarial_losses(
    d_frame: Optional[Discriminator],
    d_edge: Optional[Discriminator],
    pred: torch.Tensor,
    gt: torch.Tensor,
    mode: str = "difference",
) -> AdversarialTerms:
    """Generator and discriminator objectives for the frame and edge critics.

    The edge critic sees differentiable Sobel edge maps of both the prediction
    and the ground truth. Each discriminator maximizes D(real) - D(fake)
    (minimizes its negation); the generator minimizes -D(fake), the score
    difference with its generator-independent real term dropped. `mode="bce"`
    swaps both objectives for the binary cross-entropy form; the reported
    values stay the raw score differences either way.
    """
    if mode not in ADV_MODES:
        raise ValueError(f"unknown adversarial mode {mode!r}, expected one of {ADV_MODES}")
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(gt.shape)}")
    gen_terms = []
    disc_frame = disc_edge = None
    report_frame = report_edge = 0.0
    if d_frame is not None:
        gen_f, disc_frame, report_frame = _disc_terms(d_frame, gt, pred, mode)
        gen_terms.append(gen_f)
    if d_edge is not None:
        edges_pred = soft_edges(pred)
        edges_gt = soft_edges(gt)
        gen_e, disc_edge, report_edge = _disc_terms(d_edge, edges_gt, edges_pred, mode)
        gen_terms.append(gen_e)
    gen = sum(gen_terms) if gen_terms else None
    return AdversarialTerms(gen, disc_frame, disc_edge, report_frame, report_edge)


@dataclass(frozen=True)
class LossWeights:
    w_syn: float = 1.0
    w_flow: float = 1.0
    w_adv: float = 1.0

    def __post_init__(self):
        for name in ("w_syn", "w_flow", "w_adv"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")


@dataclass(frozen=True)
class LossReport:
    l_syn: float
    l_flow: float
    l_adv_frame: float
    l_adv_edge: float
    total: float
    weights: LossWeights


def total_loss(
    l_syn: float,
    l_flow: float,
    l_adv_frame: float = 0.0,
    l_adv_edge: float = 0.0,
    weights: LossWeights = LossWeights(),
) -> LossReport:
    """Weighted sum of the loss terms; unit weights reproduce the plain sum."""
    total = (
        weights.w_syn * l_syn
        + weights.w_flow * l_flow
        + weights.w_adv * (l_adv_frame + l_adv_edge)
    )
    return LossReport(float(l_syn), float(l_flow), float(l_adv_frame),
                      float(l_adv_edge), float(total), weights)


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for frames in [0, 1]; capped at 100 for near-exact matches."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse < PSNR_MSE_FLOOR:
        return PSNR_CAP_DB
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_window(sigma: float, size: int) -> np.ndarray:
    half = size // 2
    k = np.arange(-half, half + 1, dtype=np.float64)
    w = np.exp(-(k * k) / (2.0 * sigma * sigma))
    return w / w.sum()


def _windowed_mean(image: np.ndarray, window: np.ndarray) -> np.ndarray:
    """Separable Gaussian-weighted local mean, restricted to fully valid positions."""
    half = len(window) // 2
    out = correlate1d(image, window, axis=0, mode="constant")
    out = correlate1d(out, window, axis=1, mode="constant")
    return out[half:-half, half:-half]


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Structural similarity with an 11x11 Gaussian window (sigma 1.5), K1=0.01,
    K2=0.03, dynamic range 1; computed per channel over fully valid window
    positions, then averaged."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a = a[:, :, None]
        b = b[:, :, None]
    if a.shape[0] < SSIM_WINDOW or a.shape[1] < SSIM_WINDOW:
        raise ValueError(f"image {a.shape[0]}x{a.shape[1]} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    window = _gaussian_window(SSIM_SIGMA, SSIM_WINDOW)
    c1 = (SSIM_K1 * 1.0) ** 2
    c2 = (SSIM_K2 * 1.0) ** 2
    values = []
    for ch in range(a.shape[2]):
        x, y = a[:, :, ch], b[:, :, ch]
        mu_x = _windowed_mean(x, window)
        mu_y = _windowed_mean(y, window)
        var_x = _windowed_mean(x * x, window) - mu_x * mu_x
        var_y = _windowed_mean(y * y, window) - mu_y * mu_y
        cov = _windowed_mean(x * y, window) - mu_x * mu_y
        num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
        den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
        values.append(np.mean(num / den))
    return float(np.mean(values))
