"""Report figures written next to the CSV outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .objectives import CLASS_NAMES  # noqa: E402

_STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
}

# background, PRI-Neg (red), PRI-Pos (green)
LABEL_COLORS = np.array([[0, 0, 0], [0.85, 0.15, 0.15], [0.2, 0.75, 0.25]])


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def plot_training_log(rows, path):
    epochs = [r[0] for r in rows]
    with plt.rc_context(_STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7.5, 3))
        ax1.plot(epochs, [r[2] for r in rows], marker="o", ms=3)
        ax1.set_xlabel("epoch")
        ax1.set_ylabel("train loss (CE + Dice)")
        ax1b = ax1.twinx()
        ax1b.plot(epochs, [r[1] for r in rows], color="0.6", ls="--", lw=1)
        ax1b.set_ylabel("learning rate", color="0.4")
        ax2.plot(epochs, [r[3] for r in rows], label=CLASS_NAMES[1], color=LABEL_COLORS[1])
        ax2.plot(epochs, [r[4] for r in rows], label=CLASS_NAMES[2], color=LABEL_COLORS[2])
        ax2.set_xlabel("epoch")
        ax2.set_ylabel("validation DSC")
        ax2.set_ylim(0, 1)
        ax2.legend(frameon=False)
        _save(fig, path)


def plot_metrics(report, path):
    names = ["DSC", "MCC", "ACC"]
    with plt.rc_context(_STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7, 3), gridspec_kw={"width_ratios": [3, 2]})
        x = np.arange(len(names))
        for k, (cid, cname) in enumerate(CLASS_NAMES.items()):
            m = report.per_class[cid]
            ax1.bar(x + (k - 0.5) * 0.38, [m.dsc, m.mcc, m.acc], 0.38, label=cname, color=LABEL_COLORS[cid])
            ax2.bar(np.arange(2) + (k - 0.5) * 0.38, [m.hd, m.hd95], 0.38, color=LABEL_COLORS[cid])
        ax1.set_xticks(x, names)
        ax1.set_ylim(min(0, ax1.get_ylim()[0]), 1.05)
        ax1.legend(frameon=False)
        ax2.set_xticks(np.arange(2), ["HD", "HD95"])
        ax2.set_ylabel("pixels")
        _save(fig, path)


def plot_ablation(rows, path):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4, 3))
        x = np.arange(len(rows))
        ax.bar(x - 0.2, [r[1] for r in rows], 0.4, label=CLASS_NAMES[1], color=LABEL_COLORS[1])
        ax.bar(x + 0.2, [r[2] for r in rows], 0.4, label=CLASS_NAMES[2], color=LABEL_COLORS[2])
        ax.set_xticks(x, [r[0] for r in rows])
        ax.set_ylabel("test DSC")
        ax.set_ylim(0, 1)
        ax.legend(frameon=False)
        _save(fig, path)


def overlay(image: np.ndarray, labels: np.ndarray, alpha: float = 0.45) -> np.ndarray:
    gray = np.repeat(np.clip(image, 0, 1)[..., None], 3, axis=-1)
    color = LABEL_COLORS[labels]
    fg = (labels > 0)[..., None]
    return np.where(fg, (1 - alpha) * gray + alpha * color, gray)


def plot_predictions(samples, preds, path, limit: int = 6):
    n = min(limit, len(samples))
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(3, n, figsize=(1.6 * n, 5), squeeze=False)
        for i in range(n):
            s = samples[i]
            panels = (s.image[0], overlay(s.image[0], s.mask), overlay(s.image[0], preds[i]))
            for row, img in enumerate(panels):
                ax = axes[row, i]
                ax.imshow(img, cmap="gray" if img.ndim == 2 else None, vmin=0, vmax=1)
                ax.set_xticks([])
                ax.set_yticks([])
            axes[0, i].set_title(s.id, fontsize=7)
        for row, label in enumerate(("image", "target", "prediction")):
            axes[row, 0].set_ylabel(label)
        _save(fig, path)
