"""Delimited report output and the matplotlib figures rendered alongside it.

Every report path gets two artifacts: the CSV with the numbers and a PNG
figure next to it. Floats are written with repr-quality precision so two
identical runs produce byte-identical CSVs.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def write_csv(path: str | Path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(v) for v in row])


def append_csv_row(path: str | Path, row) -> None:
    with open(path, "a", newline="", encoding="utf-8") as f:
        csv.writer(f, lineterminator="\n").writerow([_format_cell(v) for v in row])


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, "r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        return header, [row for row in reader]


def _maybe_float(text: str):
    return float(text) if text else None


def render_training_curves(metrics_csv: str | Path, out_png: str | Path) -> None:
    """Loss curves (log scale) with validation PSNR overlaid where present."""
    header, rows = read_csv(metrics_csv)
    if not rows:
        return
    col = {name: i for i, name in enumerate(header)}
    epochs = [int(r[col["epoch"]]) for r in rows]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for name in ("l_syn", "l_flow", "total"):
        ax.plot(epochs, [float(r[col[name]]) for r in rows], label=name)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend(loc="upper left")
    val = [(e, _maybe_float(r[col["val_psnr"]])) for e, r in zip(epochs, rows)]
    val = [(e, v) for e, v in val if v is not None]
    if val:
        ax2 = ax.twinx()
        ax2.plot(*zip(*val), "k--", marker="o", markersize=3, label="val PSNR")
        ax2.set_ylabel("validation PSNR (dB)")
        ax2.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(out_png, dpi=110)
    plt.close(fig)


def render_eval_report(result, out_png: str | Path) -> None:
    """Per-sample PSNR bars with SSIM markers on a twin axis."""
    rows = result.rows
    idx = range(len(rows))
    fig, ax = plt.subplots(figsize=(max(6, 0.35 * len(rows) + 2), 4))
    ax.bar(idx, [r.psnr for r in rows], color="tab:blue", label="PSNR")
    ax.axhline(result.mean_psnr, color="tab:blue", linestyle=":", linewidth=1)
    ax.set_xlabel("sample")
    ax.set_ylabel("PSNR (dB)")
    ax2 = ax.twinx()
    ax2.plot(idx, [r.ssim for r in rows], "r.", label="SSIM")
    ax2.set_ylabel("SSIM")
    ax2.set_ylim(0, 1.05)
    fig.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(out_png, dpi=110)
    plt.close(fig)


def render_ablation_chart(rows: list[dict], out_png: str | Path) -> None:
    """Grouped PSNR bars per variant, split by refinement setting."""
    variants = []
    for r in rows:
        label = f"{r['group']}\n{r['variant']}"
        if label not in variants:
            variants.append(label)
    settings = []
    for r in rows:
        if r["refinement"] not in settings:
            settings.append(r["refinement"])
    width = 0.8 / max(1, len(settings))
    fig, ax = plt.subplots(figsize=(max(7, 1.1 * len(variants)), 4.5))
    for si, setting in enumerate(settings):
        xs, ys = [], []
        for vi, label in enumerate(variants):
            match = [
                r for r in rows
                if f"{r['group']}\n{r['variant']}" == label and r["refinement"] == setting
            ]
            if match:
                xs.append(vi + (si - (len(settings) - 1) / 2) * width)
                ys.append(match[0]["psnr"])
        ax.bar(xs, ys, width=width, label=setting)
    ax.set_xticks(range(len(variants)))
    ax.set_xticklabels(variants, fontsize=8)
    ax.set_ylabel("train PSNR (dB)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_png, dpi=110)
    plt.close(fig)
