"""The learned networks: flow-estimation U-Net (with the edge-aware input
modes), refinement/attention U-Net, and the frame/edge discriminators, plus
attention-blended synthesis.

Both U-Nets share the same backbone: a 6-block encoder (two convolutions per
block, 7x7 and 5x5 kernels in the first two blocks, 3x3 elsewhere, leaky
activations, 2x2 max-pooling after blocks 1-5) and a mirrored 5-block decoder
with nearest-neighbor upsampling and skip concatenation. Spatial resolution is
preserved end to end for inputs divisible by 32.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from .edge_fusion import edge_augment, edge_concat, two_stream_merge
from .flow_algebra import backward_warp, intermediate_flows

INPUT_MODES = ("plain", "augment", "concat", "two_stream")

ENCODER_KERNELS = (7, 5, 3, 3, 3, 3)

DEFAULT_WIDTHS = (32, 64, 128, 256, 512, 512)


@dataclass(frozen=True)
class FlowUNetConfig:
    input_mode: str = "augment"
    encoder_channels: tuple[int, ...] = DEFAULT_WIDTHS
    leaky_slope: float = 0.1

    def __post_init__(self):
        if self.input_mode not in INPUT_MODES:
            raise ValueError(f"unknown input mode {self.input_mode!r}, expected one of {INPUT_MODES}")
        if len(self.encoder_channels) != 6 or any(c <= 0 for c in self.encoder_channels):
            raise ValueError(f"encoder_channels must be 6 positive ints, got {self.encoder_channels}")

    @property
    def input_channels(self):
        """Channel count(s) fed to the U-Net(s): one int, or (frame, edge) for two_stream."""
        if self.input_mode == "concat":
            return 12
        if self.input_mode == "two_stream":
            return (6, 2)
        return 6


def seeded_init_(module: nn.Module, seed: int, leaky_slope: float = 0.1) -> None:
    """Deterministic He-style fan-in uniform init of every convolution under `seed`."""
    gen = torch.Generator().manual_seed(seed)
    gain = math.sqrt(2.0 / (1.0 + leaky_slope**2))
    for m in module.modules():
        if isinstance(m, nn.Conv2d):
            fan_in = m.in_channels * m.kernel_size[0] * m.kernel_size[1]
            bound = gain * math.sqrt(3.0 / fan_in)
            with torch.no_grad():
                m.weight.uniform_(-bound, bound, generator=gen)
                if m.bias is not None:
                    m.bias.zero_()


def _conv_block(cin: int, cout: int, kernel: int, slope: float) -> nn.Sequential:
    pad = kernel // 2
    return nn.Sequential(
        nn.Conv2d(cin, cout, kernel, padding=pad),
        nn.LeakyReLU(slope, inplace=True),
        nn.Conv2d(cout, cout, kernel, padding=pad),
        nn.LeakyReLU(slope, inplace=True),
    )


class UNet(nn.Module):
    """Encoder-decoder backbone; maps (N, Cin, H, W) to (N, Cout, H, W), H and W divisible by 32."""

    def __init__(self, in_channels: int, out_channels: int,
                 widths: tuple[int, ...] = DEFAULT_WIDTHS, leaky_slope: float = 0.1):
        super().__init__()
        if len(widths) != 6:
            raise ValueError(f"expected 6 encoder widths, got {len(widths)}")
        self.encoders = nn.ModuleList()
        prev = in_channels
        for width, kernel in zip(widths, ENCODER_KERNELS):
            self.encoders.append(_conv_block(prev, width, kernel, leaky_slope))
            prev = width
        self.decoders = nn.ModuleList()
        for j in range(4, -1, -1):  # decoder blocks mirror encoder blocks 5..1
            cin = widths[j + 1] + widths[j]
            self.decoders.append(_conv_block(cin, widths[j], ENCODER_KERNELS[j], leaky_slope))
        self.head = nn.Conv2d(widths[0], out_channels, 3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h, w = x.shape[2:]
        if h % 32 or w % 32:
            raise ValueError(f"input resolution {h}x{w} must be divisible by 32")
        skips = []
        for i, block in enumerate(self.encoders):
            x = block(x)
            if i < 5:
                skips.append(x)
                x = F.max_pool2d(x, 2)
        for block, skip in zip(self.decoders, reversed(skips)):
            x = F.interpolate(x, scale_factor=2, mode="nearest")
            x = block(torch.cat((x, skip), dim=1))
        return self.head(x)


class FlowEstimator(nn.Module):
    """Bidirectional flow estimation from a frame pair under one of the edge-aware input modes."""

    def __init__(self, config: FlowUNetConfig, seed: int = 0):
        super().__init__()
        self.config = config
        widths = config.encoder_channels
        if config.input_mode == "two_stream":
            self.frame_net = UNet(6, 4, widths, config.leaky_slope)
            self.edge_net = UNet(2, 4, widths, config.leaky_slope)
            seeded_init_(self.frame_net, seed, config.leaky_slope)
            seeded_init_(self.edge_net, seed + 1, config.leaky_slope)
        else:
            self.net = UNet(config.input_channels, 4, widths, config.leaky_slope)
            seeded_init_(self.net, seed, config.leaky_slope)

    def forward(
        self,
        i0: torch.Tensor,
        i1: torch.Tensor,
        e0: Optional[torch.Tensor] = None,
        e1: Optional[torch.Tensor] = None,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        mode = self.config.input_mode
        if mode != "plain" and (e0 is None or e1 is None):
            raise ValueError(f"input mode {mode!r} requires edge maps for both frames")
        if i0.shape != i1.shape:
            raise ValueError(f"frame shapes differ: {tuple(i0.shape)} vs {tuple(i1.shape)}")
        if mode == "plain":
            out = self.net(torch.cat((i0, i1), dim=1))
        elif mode == "augment":
            out = self.net(torch.cat((edge_augment(i0, e0), edge_augment(i1, e1)), dim=1))
        elif mode == "concat":
            out = self.net(torch.cat((edge_concat(i0, e0), edge_concat(i1, e1)), dim=1))
        else:
            flow_frames = self.frame_net(torch.cat((i0, i1), dim=1))
            flow_edges = self.edge_net(torch.cat((e0, e1), dim=1))
            out = two_stream_merge(flow_frames, flow_edges)
        return out[:, 0:2], out[:, 2:4]


def build_flow_estimator(config: FlowUNetConfig, seed: int = 0) -> FlowEstimator:
    return FlowEstimator(config, seed)


def estimate_flow(est: FlowEstimator, i0, i1, e0=None, e1=None):
    """Bidirectional flows (F_0->1, F_1->0) for a frame pair."""
    return est(i0, i1, e0, e1)


class AttentionPair(NamedTuple):
    """Pointwise blending weights over the two warped candidates; a0 + a1 == 1."""

    a0: torch.Tensor
    a1: torch.Tensor


REFINER_IN_CHANNELS = 20  # i0, i1, f01, f10, ft0, ft1, warp(i0, ft0), warp(i1, ft1)
REFINER_OUT_CHANNELS = 5  # 4 flow (residual) channels + 1 attention logit


@dataclass(frozen=True)
class RefinerConfig:
    encoder_channels: tuple[int, ...] = DEFAULT_WIDTHS
    leaky_slope: float = 0.1
    residual: bool = True  # predict corrections on top of the linear flows
    interp_mode: str = "symmetric"


class Refiner(nn.Module):
    """Flow refinement and attention prediction over the warped-candidate stack."""

    def __init__(self, config: RefinerConfig = RefinerConfig(), seed: int = 0):
        super().__init__()
        self.config = config
        self.net = UNet(REFINER_IN_CHANNELS, REFINER_OUT_CHANNELS,
                        config.encoder_channels, config.leaky_slope)
        seeded_init_(self.net, seed, config.leaky_slope)


def build_refiner(config: RefinerConfig = RefinerConfig(), seed: int = 0) -> Refiner:
    return Refiner(config, seed)


def refine_and_attend(
    ref: Refiner,
    i0: torch.Tensor,
    i1: torch.Tensor,
    f01: torch.Tensor,
    f10: torch.Tensor,
    t,
) -> tuple[torch.Tensor, torch.Tensor, AttentionPair]:
    """Refined intermediate flows plus the attention pair for blending.

    Builds the 20-channel stack (frames, estimated flows, interpolated flows,
    warped candidates), runs the refiner, and adds the predicted residuals to
    the linear flows (or takes the prediction as absolute flows when the
    refiner was configured with residual=False). The attention logit channel
    becomes a0 = sigmoid(logit), a1 = 1 - a0, so a0 + a1 == 1 by construction.
    """
    ft0, ft1 = intermediate_flows(f01, f10, t, ref.config.interp_mode)
    w0 = backward_warp(i0, ft0)
    w1 = backward_warp(i1, ft1)
    out = ref.net(torch.cat((i0, i1, f01, f10, ft0, ft1, w0, w1), dim=1))
    res0, res1, logit = out[:, 0:2], out[:, 2:4], out[:, 4:5]
    if ref.config.residual:
        fr_t0, fr_t1 = ft0 + res0, ft1 + res1
    else:
        fr_t0, fr_t1 = res0, res1
    a0 = torch.sigmoid(logit)
    return fr_t0, fr_t1, AttentionPair(a0, 1.0 - a0)


def synthesize(
    i0: torch.Tensor,
    i1: torch.Tensor,
    fr_t0: torch.Tensor,
    fr_t1: torch.Tensor,
    att: AttentionPair,
) -> torch.Tensor:
    """Attention-blended synthesis: a0 * warp(i0, f_t0) + a1 * warp(i1, f_t1), clamped to [0, 1]."""
    blended = att.a0 * backward_warp(i0, fr_t0) + att.a1 * backward_warp(i1, fr_t1)
    return blended.clamp(0.0, 1.0)


def uniform_attention(i0: torch.Tensor) -> AttentionPair:
    """The attention-off blend: a0 = a1 = 0.5 everywhere."""
    half = torch.full_like(i0[:, :1], 0.5)
    return AttentionPair(half, 1.0 - half)


DISC_MODES = {"frame": 3, "edge": 1}

DISC_CHANNELS = (64, 128, 256, 512)


class Discriminator(nn.Module):
    """Four strided convolutions (kernel 4, stride 2), each with batch norm and
    a leaky activation, then a 1x1 sigmoid projection averaged to one score.

    `mode` selects the input: 'frame' (3 channels) or 'edge' (1 channel).
    Inputs must be at least 64x64; a 64x64 input yields a 4x4 score map.
    """

    def __init__(self, mode: str, seed: int = 0, leaky_slope: float = 0.1):
        super().__init__()
        if mode not in DISC_MODES:
            raise ValueError(f"unknown discriminator mode {mode!r}, expected one of {tuple(DISC_MODES)}")
        self.mode = mode
        layers = []
        prev = DISC_MODES[mode]
        for width in DISC_CHANNELS:
            layers += [
                nn.Conv2d(prev, width, 4, stride=2, padding=1),
                nn.BatchNorm2d(width),
                nn.LeakyReLU(leaky_slope, inplace=True),
            ]
            prev = width
        self.features = nn.Sequential(*layers)
        self.head = nn.Conv2d(prev, 1, 1)
        seeded_init_(self, seed, leaky_slope)
        self.forward_calls = 0

    def score_map(self, x: torch.Tensor) -> torch.Tensor:
        """The spatial sigmoid map before score reduction."""
        if x.dim() == 3:
            x = x.unsqueeze(0)
        n, c, h, w = x.shape
        if c != DISC_MODES[self.mode]:
            raise ValueError(f"{self.mode} discriminator expects {DISC_MODES[self.mode]} channels, got {c}")
        if h < 64 or w < 64:
            raise ValueError(f"discriminator input must be at least 64x64, got {h}x{w}")
        self.forward_calls += 1
        return torch.sigmoid(self.head(self.features(x)))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        squeeze = x.dim() == 3
        scores = self.score_map(x).mean(dim=(1, 2, 3))
        return scores[0] if squeeze else scores


def build_discriminator(mode: str, seed: int = 0, leaky_slope: float = 0.1) -> Discriminator:
    return Discriminator(mode, seed, leaky_slope)


def discriminate(d: Discriminator, image: torch.Tensor) -> torch.Tensor:
    """Scalar realness score in (0, 1); per sample when given a batch."""
    return d(image)


def parameter_count(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())
