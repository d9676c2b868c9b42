"""Edge-aware video frame interpolation.

A trainable pipeline with three stages: edge-guided bidirectional flow
estimation, flow refinement with attention-blended synthesis, and adversarial
training with frame and edge discriminators.
"""

from .edge_fusion import edge_augment, edge_concat, two_stream_merge
from .flow_algebra import (
    backward_warp,
    flow_to_color,
    intermediate_flows,
    naive_synthesize,
    read_flo,
    write_flo,
)
from .imaging import canny_edges, load_image, save_image, soft_edges
from .models import (
    AttentionPair,
    Discriminator,
    FlowEstimator,
    FlowUNetConfig,
    Refiner,
    RefinerConfig,
    build_discriminator,
    build_flow_estimator,
    build_refiner,
    discriminate,
    estimate_flow,
    refine_and_attend,
    synthesize,
)
from .objective import (
    LossReport,
    LossWeights,
    adversarial_losses,
    flow_loss,
    psnr,
    ssim,
    synthesis_loss,
    total_loss,
)
from .trainer import TrainConfig, evaluate, run_ablation, train

__version__ = "0.1.0"

__all__ = [
    "AttentionPair",
    "Discriminator",
    "FlowEstimator",
    "FlowUNetConfig",
    "LossReport",
    "LossWeights",
    "Refiner",
    "RefinerConfig",
    "TrainConfig",
    "adversarial_losses",
    "backward_warp",
    "build_discriminator",
    "build_flow_estimator",
    "build_refiner",
    "canny_edges",
    "discriminate",
    "edge_augment",
    "edge_concat",
    "estimate_flow",
    "evaluate",
    "flow_loss",
    "flow_to_color",
    "intermediate_flows",
    "load_image",
    "naive_synthesize",
    "psnr",
    "read_flo",
    "refine_and_attend",
    "run_ablation",
    "save_image",
    "soft_edges",
    "ssim",
    "synthesis_loss",
    "synthesize",
    "total_loss",
    "train",
    "two_stream_merge",
    "write_flo",
]
