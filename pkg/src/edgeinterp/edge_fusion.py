"""The three edge-aware input mechanisms for flow estimation.

All operations are pure elementwise tensor math on (N, C, H, W) batches; edge
maps are single-channel (N, 1, H, W) and broadcast across color channels.
"""

from __future__ import annotations

import torch


def _check_frame_edges(frame: torch.Tensor, edges: torch.Tensor) -> None:
    if frame.dim() != 4 or edges.dim() != 4 or edges.shape[1] != 1:
        raise ValueError(
            f"expected (N, C, H, W) frame and (N, 1, H, W) edges, got "
            f"{tuple(frame.shape)} and {tuple(edges.shape)}"
        )
    if frame.shape[0] != edges.shape[0] or frame.shape[2:] != edges.shape[2:]:
        raise ValueError(
            f"frame/edge shape mismatch: {tuple(frame.shape)} vs {tuple(edges.shape)}"
        )


def edge_augment(frame: torch.Tensor, edges: torch.Tensor) -> torch.Tensor:
    """Depress non-edge pixels: (frame + frame * edges) / 2."""
    _check_frame_edges(frame, edges)
    return 0.5 * (frame + frame * edges)


def edge_concat(frame: torch.Tensor, edges: torch.Tensor) -> torch.Tensor:
    """Stack the frame with its edge-masked copy along channels: [frame ; frame * edges]."""
    _check_frame_edges(frame, edges)
    return torch.cat((frame, frame * edges), dim=1)


def two_stream_merge(flow_from_frames: torch.Tensor, flow_from_edges: torch.Tensor) -> torch.Tensor:
    """Average the flow predicted from frames with the flow predicted from edge maps."""
    if flow_from_frames.shape != flow_from_edges.shape:
        raise ValueError(
            f"flow shapes differ: {tuple(flow_from_frames.shape)} vs "
            f"{tuple(flow_from_edges.shape)}"
        )
    return 0.5 * (flow_from_frames + flow_from_edges)
