"""End-to-end optimization: alternating generator/discriminator updates,
learning-rate schedule, checkpointing, evaluation and the ablation harness.

Training is fully deterministic for a fixed seed in single-threaded mode: all
data-order and augmentation randomness is derived from (seed, epoch), never
from ambient RNG state, so a resumed run replays exactly like an uninterrupted
one.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from . import report
from .data import (
    ClipSample,
    LoadedSample,
    augment,
    center_crop_divisible,
    load_clip,
    load_triplet,
    scan_clips,
    scan_triplets,
    triplet_from_clip,
)
from .flow_algebra import INTERP_MODES, intermediate_flows, naive_synthesize
from .imaging import canny_edges, from_tensor, to_tensor
from .models import (
    INPUT_MODES,
    Discriminator,
    FlowEstimator,
    FlowUNetConfig,
    Refiner,
    RefinerConfig,
    refine_and_attend,
    synthesize,
    uniform_attention,
)
from .objective import (
    ADV_MODES,
    LossWeights,
    adversarial_losses,
    flow_loss,
    psnr,
    ssim,
    synthesis_loss,
    total_loss,
)

log = logging.getLogger(__name__)

TRAIN_MODES = ("single_frame", "multi_frame")

METRICS_HEADER = ("epoch", "l_syn", "l_flow", "l_adv_frame", "l_adv_edge", "total", "val_psnr", "val_ssim")

ADAM_BETAS = (0.9, 0.999)


class ConfigError(ValueError):
    """Invalid or inconsistent training configuration."""


class CheckpointError(RuntimeError):
    """Missing, corrupt or incompatible checkpoint."""


@dataclass
class TrainConfig:
    mode: str = "single_frame"
    data_root: str = ""
    split: str = ""
    val_root: str = ""
    val_split: str = ""
    run_dir: str = "run"
    edge_mode: str = "augment"
    refinement: bool = True
    attention: bool = True
    disc_frame: bool = True
    disc_edge: bool = True
    lr: float = 1e-4
    lr_decay: float = 0.1
    lr_milestone: int = 100
    epochs: int = 500
    batch_size: int = 8
    seed: int = 0
    w_syn: float = 1.0
    w_flow: float = 1.0
    w_adv: float = 1.0
    crop: int = 256
    widths: tuple[int, ...] = (32, 64, 128, 256, 512, 512)
    leaky_slope: float = 0.1
    residual_flows: bool = True
    flow_interp: str = "symmetric"
    adv_loss: str = "difference"
    canny_low: float = 0.1
    canny_high: float = 0.2
    canny_sigma: float = 1.4
    group: int = 9
    stride: int = 9
    val_interval: int = 5
    checkpoint_interval: int = 1
    max_steps: int = 0
    threads: int = 1
    augment_data: bool = True
    early_stop_psnr: float = 0.0

    @property
    def weights(self) -> LossWeights:
        return LossWeights(self.w_syn, self.w_flow, self.w_adv)


# Fields that determine the network architecture; checkpoints refuse to load
# into a model built from a config whose hash over these fields differs.
ARCH_FIELDS = ("edge_mode", "widths", "leaky_slope", "refinement",
               "residual_flows", "flow_interp", "disc_frame", "disc_edge")


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def _parse_value(text: str, target_type) -> object:
    text = text.strip()
    if target_type is bool:
        lowered = text.lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {text!r}")
    if target_type is int:
        return int(text)
    if target_type is float:
        return float(text)
    if target_type is str:
        return text
    # the only remaining field type is tuple[int, ...]
    return tuple(int(part) for part in text.split(",") if part.strip())


def serialize_config(config: TrainConfig) -> str:
    lines = [f"{f.name} = {_format_value(getattr(config, f.name))}" for f in fields(config)]
    return "\n".join(lines) + "\n"


def _field_types() -> dict[str, type]:
    hints = {}
    for f in fields(TrainConfig):
        hints[f.name] = type(f.default) if not isinstance(f.default, tuple) else tuple
    return hints


def parse_config_text(text: str, base: Optional[TrainConfig] = None) -> TrainConfig:
    config = replace(base) if base is not None else TrainConfig()
    types = _field_types()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        try:
            setattr(config, key, _parse_value(value, types[key]))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    return config


def parse_config(path: str | Path, base: Optional[TrainConfig] = None) -> TrainConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), base)


def apply_overrides(config: TrainConfig, overrides: dict[str, str]) -> TrainConfig:
    """Apply string-valued overrides (e.g. CLI flags); flags win over file values."""
    config = replace(config)
    types = _field_types()
    for key, value in overrides.items():
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(config, key, _parse_value(value, types[key]))
    return config


def validate_config(config: TrainConfig) -> None:
    if config.mode not in TRAIN_MODES:
        raise ConfigError(f"unknown mode {config.mode!r}, expected one of {TRAIN_MODES}")
    if config.edge_mode not in INPUT_MODES:
        raise ConfigError(f"unknown edge_mode {config.edge_mode!r}, expected one of {INPUT_MODES}")
    if config.flow_interp not in INTERP_MODES:
        raise ConfigError(f"unknown flow_interp {config.flow_interp!r}, expected one of {INTERP_MODES}")
    if config.adv_loss not in ADV_MODES:
        raise ConfigError(f"unknown adv_loss {config.adv_loss!r}, expected one of {ADV_MODES}")
    for name in ("lr", "lr_decay"):
        if getattr(config, name) <= 0:
            raise ConfigError(f"{name} must be positive, got {getattr(config, name)}")
    for name in ("epochs", "batch_size", "lr_milestone", "val_interval", "checkpoint_interval", "stride"):
        if getattr(config, name) <= 0:
            raise ConfigError(f"{name} must be positive, got {getattr(config, name)}")
    for name in ("w_syn", "w_flow", "w_adv"):
        if getattr(config, name) < 0:
            raise ConfigError(f"{name} must be non-negative, got {getattr(config, name)}")
    if config.group < 3:
        raise ConfigError(f"group must be at least 3, got {config.group}")
    if config.crop < 32 or config.crop % 32:
        raise ConfigError(f"crop must be a positive multiple of 32, got {config.crop}")
    if len(config.widths) != 6 or any(wd <= 0 for wd in config.widths):
        raise ConfigError(f"widths must be 6 positive ints, got {config.widths}")
    if not config.canny_low < config.canny_high:
        raise ConfigError(
            f"canny thresholds must satisfy low < high, got {config.canny_low} >= {config.canny_high}"
        )
    if not config.data_root:
        raise ConfigError("data_root is required")


def model_hash(config: TrainConfig) -> str:
    text = "\n".join(f"{name} = {_format_value(getattr(config, name))}" for name in ARCH_FIELDS)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class Models:
    estimator: FlowEstimator
    refiner: Optional[Refiner]
    d_frame: Optional[Discriminator]
    d_edge: Optional[Discriminator]

    def generator_parameters(self):
        params = list(self.estimator.parameters())
        if self.refiner is not None:
            params += list(self.refiner.parameters())
        return params

    def all_modules(self) -> dict[str, torch.nn.Module]:
        mods = {"estimator": self.estimator}
        if self.refiner is not None:
            mods["refiner"] = self.refiner
        if self.d_frame is not None:
            mods["d_frame"] = self.d_frame
        if self.d_edge is not None:
            mods["d_edge"] = self.d_edge
        return mods


def build_models(config: TrainConfig) -> Models:
    base = config.seed * 1000
    estimator = FlowEstimator(
        FlowUNetConfig(config.edge_mode, tuple(config.widths), config.leaky_slope), seed=base
    )
    refiner = None
    if config.refinement:
        refiner = Refiner(
            RefinerConfig(tuple(config.widths), config.leaky_slope,
                          config.residual_flows, config.flow_interp),
            seed=base + 10,
        )
    d_frame = Discriminator("frame", seed=base + 20, leaky_slope=config.leaky_slope) if config.disc_frame else None
    d_edge = Discriminator("edge", seed=base + 30, leaky_slope=config.leaky_slope) if config.disc_edge else None
    return Models(estimator, refiner, d_frame, d_edge)


def forward_synthesis(models: Models, config: TrainConfig, i0, i1, e0, e1, t):
    """One generator forward pass honoring the ablation switches.

    Returns (pred, f01, f10, fr_t0, fr_t1, att); att is None when refinement is
    off (the naive mean blend is used, equivalent to a fixed 0.5/0.5 split).
    """
    f01, f10 = models.estimator(i0, i1, e0, e1)
    if models.refiner is not None:
        fr_t0, fr_t1, att = refine_and_attend(models.refiner, i0, i1, f01, f10, t)
        if not config.attention:
            att = uniform_attention(i0)
        pred = synthesize(i0, i1, fr_t0, fr_t1, att)
        return pred, f01, f10, fr_t0, fr_t1, att
    fr_t0, fr_t1 = intermediate_flows(f01, f10, t, config.flow_interp)
    pred = naive_synthesize(i0, i1, f01, f10, t, "mean", config.flow_interp)
    return pred, f01, f10, fr_t0, fr_t1, None


# ---------------------------------------------------------------------------
# checkpointing


@dataclass
class CheckpointState:
    config: TrainConfig
    epoch: int
    step: int
    hash: str
    nets: dict
    optims: dict


def _manifest_path(path: Path) -> Path:
    return path.with_name(path.name + ".manifest")


def save_checkpoint(
    path: str | Path,
    models: Models,
    optimizers: dict[str, torch.optim.Optimizer],
    config: TrainConfig,
    epoch: int,
    step: int,
) -> None:
    """Serialize model parameters and optimizer moments, with a plain-text manifest."""
    path = Path(path)
    payload = {
        "nets": {name: module.state_dict() for name, module in models.all_modules().items()},
        "optims": {name: opt.state_dict() for name, opt in optimizers.items()},
        "epoch": epoch,
        "step": step,
    }
    torch.save(payload, path)
    manifest = (
        f"epoch = {epoch}\n"
        f"step = {step}\n"
        f"model_hash = {model_hash(config)}\n"
        "[config]\n" + serialize_config(config)
    )
    _manifest_path(path).write_text(manifest, encoding="utf-8")


def load_checkpoint(
    path: str | Path,
    expect_config: Optional[TrainConfig] = None,
    force: bool = False,
) -> CheckpointState:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    manifest_path = _manifest_path(path)
    if not manifest_path.is_file():
        raise CheckpointError(f"checkpoint manifest not found: {manifest_path}")
    head, _, config_text = manifest_path.read_text(encoding="utf-8").partition("[config]")
    meta = {}
    for line in head.splitlines():
        if "=" in line:
            key, value = (part.strip() for part in line.split("=", 1))
            meta[key] = value
    try:
        config = parse_config_text(config_text)
        epoch = int(meta["epoch"])
        step = int(meta["step"])
        stored_hash = meta["model_hash"]
    except (ConfigError, KeyError, ValueError) as exc:
        raise CheckpointError(f"corrupt checkpoint manifest {manifest_path}: {exc}") from exc
    if expect_config is not None and not force and model_hash(expect_config) != stored_hash:
        diffs = [
            name
            for name in ARCH_FIELDS
            if getattr(expect_config, name) != getattr(config, name)
        ]
        raise CheckpointError(
            f"checkpoint {path} was trained with a different architecture "
            f"(differing fields: {', '.join(diffs) or 'hash only'}); pass force to override"
        )
    try:
        payload = torch.load(path, weights_only=True)
    except Exception as exc:
        raise CheckpointError(f"corrupt checkpoint payload {path}: {exc}") from exc
    return CheckpointState(config, epoch, step, stored_hash, payload["nets"], payload["optims"])


def restore_models(state: CheckpointState) -> Models:
    """Build models from the checkpoint's own config and load the saved parameters."""
    models = build_models(state.config)
    for name, module in models.all_modules().items():
        if name not in state.nets:
            raise CheckpointError(f"checkpoint missing parameters for {name!r}")
        module.load_state_dict(state.nets[name])
    return models


# ---------------------------------------------------------------------------
# batching


def _edge_map(config: TrainConfig, frame: np.ndarray) -> np.ndarray:
    return canny_edges(frame, config.canny_low, config.canny_high, config.canny_sigma)


@dataclass
class Batch:
    ids: list[str]
    i0: torch.Tensor
    gt: torch.Tensor
    i1: torch.Tensor
    e0: Optional[torch.Tensor]
    e1: Optional[torch.Tensor]
    t: torch.Tensor


def _assemble_batch(config: TrainConfig, samples: list[LoadedSample]) -> Batch:
    shapes = {s.frames[0].shape for s in samples}
    if len(shapes) != 1:
        raise ValueError(
            f"frames within one batch differ in resolution ({sorted(shapes)}); "
            "use a uniform-resolution dataset or enable cropping"
        )
    i0 = torch.stack([to_tensor(s.frames[0]) for s in samples])
    gt = torch.stack([to_tensor(s.frames[1]) for s in samples])
    i1 = torch.stack([to_tensor(s.frames[2]) for s in samples])
    e0 = e1 = None
    if config.edge_mode != "plain":
        e0 = torch.stack([to_tensor(_edge_map(config, s.frames[0])) for s in samples])
        e1 = torch.stack([to_tensor(_edge_map(config, s.frames[2])) for s in samples])
    t = torch.tensor([s.ts[0] for s in samples], dtype=torch.float32)
    return Batch([s.id for s in samples], i0, gt, i1, e0, e1, t)


def _load_training_sample(config: TrainConfig, sample, rng: np.random.Generator) -> LoadedSample:
    # draw order per sample is pinned: target index (clips only), then crop,
    # flips and reversal inside augment()
    if isinstance(sample, ClipSample):
        target = int(rng.integers(1, config.group - 1))
        loaded = triplet_from_clip(sample, target)
    else:
        loaded = load_triplet(sample)
    if config.augment_data:
        return augment(loaded, rng, config.crop)
    return center_crop_divisible(loaded)


def _scan_dataset(config: TrainConfig, root: str, split: str):
    if config.mode == "single_frame":
        return scan_triplets(root, split or None)
    samples = scan_clips(root, config.group, config.stride)
    if not samples:
        raise ValueError(f"zero usable samples under {root}")
    return samples


# ---------------------------------------------------------------------------
# inference helpers (shared by evaluation and the CLI)


def pad_to_multiple(frame: np.ndarray, divisor: int = 32) -> tuple[np.ndarray, tuple[int, int]]:
    """Reflect-pad an (H, W, C) frame on the bottom/right to a divisible size."""
    h, w = frame.shape[:2]
    ph, pw = (-h) % divisor, (-w) % divisor
    if ph == 0 and pw == 0:
        return frame, (h, w)
    padded = np.pad(frame, ((0, ph), (0, pw), (0, 0)), mode="reflect")
    return padded, (h, w)


def quantize_frame(frame: np.ndarray) -> np.ndarray:
    """Snap a frame to the 8-bit grid used by save_image (metrics are computed
    on the storable image)."""
    data = np.clip(np.floor(np.asarray(frame, dtype=np.float64) * 255.0 + 0.5), 0, 255)
    return data.astype(np.float32) / 255.0


@dataclass
class Prediction:
    """One synthesized frame with its intermediate flows and attention maps."""

    time: float
    frame: np.ndarray
    flow_t0: np.ndarray
    flow_t1: np.ndarray
    att0: Optional[np.ndarray]
    att1: Optional[np.ndarray]


@torch.no_grad()
def predict_details(
    models: Models,
    config: TrainConfig,
    i0: np.ndarray,
    i1: np.ndarray,
    times: list[float],
) -> list[Prediction]:
    """Synthesize frames at the given times; arbitrary resolutions are
    reflect-padded to a multiple of 32 and cropped back."""
    padded0, (h, w) = pad_to_multiple(i0)
    padded1, _ = pad_to_multiple(i1)
    e0 = e1 = None
    if config.edge_mode != "plain":
        e0 = to_tensor(_edge_map(config, padded0)).unsqueeze(0)
        e1 = to_tensor(_edge_map(config, padded1)).unsqueeze(0)
    t0 = to_tensor(padded0).unsqueeze(0)
    t1 = to_tensor(padded1).unsqueeze(0)
    crop_flow = lambda f: f[0].cpu().numpy().transpose(1, 2, 0)[:h, :w]
    outputs = []
    for t in times:
        pred, _, _, fr_t0, fr_t1, att = forward_synthesis(models, config, t0, t1, e0, e1, float(t))
        outputs.append(
            Prediction(
                float(t),
                from_tensor(pred)[:h, :w],
                crop_flow(fr_t0),
                crop_flow(fr_t1),
                att.a0[0, 0].cpu().numpy()[:h, :w] if att is not None else None,
                att.a1[0, 0].cpu().numpy()[:h, :w] if att is not None else None,
            )
        )
    return outputs


def predict_frames(
    models: Models,
    config: TrainConfig,
    i0: np.ndarray,
    i1: np.ndarray,
    times: list[float],
) -> list[np.ndarray]:
    return [p.frame for p in predict_details(models, config, i0, i1, times)]


@torch.no_grad()
def predict_flows(
    models: Models,
    config: TrainConfig,
    i0: np.ndarray,
    i1: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Bidirectional flows between two frames as (H, W, 2) arrays."""
    padded0, (h, w) = pad_to_multiple(i0)
    padded1, _ = pad_to_multiple(i1)
    e0 = e1 = None
    if config.edge_mode != "plain":
        e0 = to_tensor(_edge_map(config, padded0)).unsqueeze(0)
        e1 = to_tensor(_edge_map(config, padded1)).unsqueeze(0)
    f01, f10 = models.estimator(to_tensor(padded0).unsqueeze(0), to_tensor(padded1).unsqueeze(0), e0, e1)
    to_array = lambda f: f[0].cpu().numpy().transpose(1, 2, 0)[:h, :w]
    return to_array(f01), to_array(f10)


@dataclass
class EvalRow:
    id: str
    psnr: float
    ssim: float


@dataclass
class EvalResult:
    rows: list[EvalRow]
    mean_psnr: float
    mean_ssim: float


def _evaluate_models(models: Models, config: TrainConfig, samples, mode: str) -> EvalResult:
    for module in models.all_modules().values():
        module.eval()
    rows = []
    for sample in samples:
        if mode == "single_frame":
            loaded = load_triplet(sample)
        else:
            loaded = load_clip(sample)
        i0, i1 = loaded.frames[0], loaded.frames[-1]
        targets = loaded.frames[1:-1]
        preds = predict_frames(models, config, i0, i1, list(loaded.ts))
        p_vals, s_vals = [], []
        for pred, gt in zip(preds, targets):
            pred_q = quantize_frame(pred)
            p_vals.append(psnr(pred_q, gt))
            s_vals.append(ssim(pred_q, gt))
        rows.append(EvalRow(loaded.id, float(np.mean(p_vals)), float(np.mean(s_vals))))
    for module in models.all_modules().values():
        module.train()
    mean_psnr = float(np.mean([r.psnr for r in rows]))
    mean_ssim = float(np.mean([r.ssim for r in rows]))
    return EvalResult(rows, mean_psnr, mean_ssim)


def evaluate(
    checkpoint: str | Path,
    samples,
    mode: str,
    report_path: str | Path | None = None,
) -> EvalResult:
    """Evaluate a checkpoint on a scanned dataset: per-sample PSNR/SSIM rows and
    dataset means; multi-frame metrics are averaged over the intermediate
    targets of each clip. Writes a CSV report (plus a rendered figure) when a
    report path is given."""
    if mode not in TRAIN_MODES:
        raise ConfigError(f"unknown mode {mode!r}, expected one of {TRAIN_MODES}")
    if not samples:
        raise ValueError("empty dataset")
    state = load_checkpoint(checkpoint)
    if state.config.mode != mode:
        raise ConfigError(
            f"checkpoint was trained in {state.config.mode!r} mode, requested {mode!r}"
        )
    models = restore_models(state)
    result = _evaluate_models(models, state.config, samples, mode)
    if report_path is not None:
        report_path = Path(report_path)
        rows = [(r.id, r.psnr, r.ssim) for r in result.rows]
        rows.append(("mean", result.mean_psnr, result.mean_ssim))
        report.write_csv(report_path, ("id", "psnr", "ssim"), rows)
        report.render_eval_report(result, report_path.with_suffix(".png"))
    return result


# ---------------------------------------------------------------------------
# training


def _learning_rate(config: TrainConfig, epoch: int) -> float:
    return config.lr * (config.lr_decay if epoch >= config.lr_milestone else 1.0)


def _chunked(order: np.ndarray, size: int):
    for start in range(0, len(order), size):
        yield order[start : start + size]


def train(config: TrainConfig, resume_from: str | Path | None = None) -> Path:
    """Run the full optimization; returns the run directory.

    Per step: forward synthesis under the configured ablation switches, the
    weighted loss of the synthesis/flow/adversarial terms, one Adam generator
    step, then one Adam step per enabled discriminator on the same batch. The
    learning rate is multiplied by lr_decay once at the milestone epoch. Each
    epoch appends a metrics CSV row and writes a checkpoint.
    """
    validate_config(config)
    if config.threads > 0:
        torch.set_num_threads(config.threads)
    try:
        samples = _scan_dataset(config, config.data_root, config.split)
        val_samples = None
        if config.val_root:
            val_samples = _scan_dataset(config, config.val_root, config.val_split)
    except (FileNotFoundError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    run_dir = Path(config.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.txt").write_text(serialize_config(config), encoding="utf-8")

    models = build_models(config)
    optimizers: dict[str, torch.optim.Optimizer] = {
        "gen": torch.optim.Adam(models.generator_parameters(), lr=config.lr, betas=ADAM_BETAS)
    }
    if models.d_frame is not None:
        optimizers["d_frame"] = torch.optim.Adam(models.d_frame.parameters(), lr=config.lr, betas=ADAM_BETAS)
    if models.d_edge is not None:
        optimizers["d_edge"] = torch.optim.Adam(models.d_edge.parameters(), lr=config.lr, betas=ADAM_BETAS)

    metrics_path = run_dir / "metrics.csv"
    start_epoch = 0
    global_step = 0
    if resume_from is not None:
        state = load_checkpoint(resume_from, expect_config=config)
        for name, module in models.all_modules().items():
            module.load_state_dict(state.nets[name])
        for name, opt in optimizers.items():
            opt.load_state_dict(state.optims[name])
        start_epoch = state.epoch + 1
        global_step = state.step
        if not metrics_path.is_file():
            report.write_csv(metrics_path, METRICS_HEADER, [])
    else:
        report.write_csv(metrics_path, METRICS_HEADER, [])

    stop = False
    for epoch in range(start_epoch, config.epochs):
        lr = _learning_rate(config, epoch)
        for opt in optimizers.values():
            for group in opt.param_groups:
                group["lr"] = lr
        rng = np.random.default_rng((config.seed, epoch))
        order = rng.permutation(len(samples))
        sums = {"l_syn": 0.0, "l_flow": 0.0, "l_adv_frame": 0.0, "l_adv_edge": 0.0, "total": 0.0}
        steps_in_epoch = 0
        for chunk in _chunked(order, config.batch_size):
            loaded = [_load_training_sample(config, samples[i], rng) for i in chunk]
            batch = _assemble_batch(config, loaded)

            pred, f01, f10, _, _, _ = forward_synthesis(
                models, config, batch.i0, batch.i1, batch.e0, batch.e1, batch.t
            )
            l_syn = synthesis_loss(pred, batch.gt)
            l_flow = flow_loss(batch.i0, batch.i1, f01, f10)
            adv = adversarial_losses(models.d_frame, models.d_edge, pred, batch.gt, config.adv_loss)

            gen_objective = config.w_syn * l_syn + config.w_flow * l_flow
            if adv.gen is not None:
                gen_objective = gen_objective + config.w_adv * adv.gen

            check = [gen_objective]
            if adv.disc_frame is not None:
                check.append(adv.disc_frame)
            if adv.disc_edge is not None:
                check.append(adv.disc_edge)
            if not all(torch.isfinite(v) for v in check):
                raise RuntimeError(
                    f"non-finite loss at step {global_step} (epoch {epoch}); "
                    f"offending batch: {batch.ids}"
                )

            optimizers["gen"].zero_grad(set_to_none=True)
            gen_objective.backward()
            optimizers["gen"].step()

            if adv.disc_frame is not None:
                optimizers["d_frame"].zero_grad(set_to_none=True)
                adv.disc_frame.backward()
                optimizers["d_frame"].step()
            if adv.disc_edge is not None:
                optimizers["d_edge"].zero_grad(set_to_none=True)
                adv.disc_edge.backward()
                optimizers["d_edge"].step()

            rep = total_loss(float(l_syn), float(l_flow), adv.report_frame, adv.report_edge, config.weights)
            sums["l_syn"] += rep.l_syn
            sums["l_flow"] += rep.l_flow
            sums["l_adv_frame"] += rep.l_adv_frame
            sums["l_adv_edge"] += rep.l_adv_edge
            sums["total"] += rep.total
            global_step += 1
            steps_in_epoch += 1
            if config.max_steps and global_step >= config.max_steps:
                stop = True
                break

        means = {k: v / steps_in_epoch for k, v in sums.items()}
        val_psnr = val_ssim = None
        if val_samples is not None and (epoch + 1) % config.val_interval == 0:
            val = _evaluate_models(models, config, val_samples, config.mode)
            val_psnr, val_ssim = val.mean_psnr, val.mean_ssim
        report.append_csv_row(
            metrics_path,
            (epoch, means["l_syn"], means["l_flow"], means["l_adv_frame"],
             means["l_adv_edge"], means["total"], val_psnr, val_ssim),
        )
        if config.early_stop_psnr and val_psnr is not None and val_psnr >= config.early_stop_psnr:
            stop = True
        if (epoch + 1) % config.checkpoint_interval == 0 or stop or epoch == config.epochs - 1:
            save_checkpoint(run_dir / f"{epoch:04d}.ckpt", models, optimizers, config, epoch, global_step)
        if stop:
            break

    report.render_training_curves(metrics_path, run_dir / "metrics.png")
    return run_dir


def latest_checkpoint(run_dir: str | Path) -> Path:
    """The highest-epoch checkpoint in a run directory."""
    candidates = sorted(Path(run_dir).glob("*.ckpt"))
    if not candidates:
        raise CheckpointError(f"no checkpoints under {run_dir}")
    return candidates[-1]


# ---------------------------------------------------------------------------
# ablation harness


ABLATION_VARIANTS = (
    ("edge_mechanism", "augment", {"edge_mode": "augment"}),
    ("edge_mechanism", "concat", {"edge_mode": "concat"}),
    ("edge_mechanism", "two_stream", {"edge_mode": "two_stream"}),
    ("edge_mechanism", "plain", {"edge_mode": "plain"}),
    ("attention", "with", {"attention": True}),
    ("attention", "without", {"attention": False}),
    ("discriminator", "frame_only", {"disc_frame": True, "disc_edge": False}),
    ("discriminator", "edge_only", {"disc_frame": False, "disc_edge": True}),
    ("discriminator", "none", {"disc_frame": False, "disc_edge": False}),
)


def run_ablation(
    base_config: TrainConfig,
    steps: int = 200,
    out_csv: str | Path | None = None,
    out_png: str | Path | None = None,
) -> list[dict]:
    """Train every ablation variant (with and without the refinement module)
    for a fixed step budget and tabulate train-set PSNR/SSIM.

    Desk-scale counterpart of the published ablation tables; emits a CSV with
    columns group,variant,refinement,psnr,ssim (plus a bar chart) when output
    paths are given.
    """
    rows = []
    base_dir = Path(base_config.run_dir)
    for refinement in (True, False):
        for group, variant, mods in ABLATION_VARIANTS:
            tag = "with_refinement" if refinement else "without_refinement"
            cfg = replace(
                base_config,
                refinement=refinement,
                run_dir=str(base_dir / "ablation" / tag / f"{group}__{variant}"),
                max_steps=steps,
                epochs=max(base_config.epochs, steps),
                checkpoint_interval=10**9,  # final checkpoint only
                **mods,
            )
            run_dir = train(cfg)
            state = load_checkpoint(latest_checkpoint(run_dir))
            models = restore_models(state)
            samples = _scan_dataset(cfg, cfg.data_root, cfg.split)
            result = _evaluate_models(models, cfg, samples, cfg.mode)
            rows.append(
                {
                    "group": group,
                    "variant": variant,
                    "refinement": tag,
                    "psnr": result.mean_psnr,
                    "ssim": result.mean_ssim,
                }
            )
    if out_csv is not None:
        report.write_csv(
            out_csv,
            ("group", "variant", "refinement", "psnr", "ssim"),
            [(r["group"], r["variant"], r["refinement"], r["psnr"], r["ssim"]) for r in rows],
        )
    if out_png is not None:
        report.render_ablation_chart(rows, out_png)
    return rows
