"""Training loss and evaluation metrics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .autodiff import functional as F
from .autodiff.tensor import Tensor, no_grad
from .errors import DataError, DimensionError

CLASS_NAMES = {1: "PRI-Neg", 2: "PRI-Pos"}
METRICS_HEADER = ["class", "dsc", "mcc", "acc", "hd", "hd95", "n_images", "n_hd_skipped"]
PER_IMAGE_HEADER = ["image_id", "class", "dsc", "mcc", "acc", "hd", "hd95"]


@dataclass
class LossConfig:
    ce_weight: float = 1.0
    dice_weight: float = 1.0
    dice_smooth: float = 1.0

    def __post_init__(self):
        if self.ce_weight < 0 or self.dice_weight < 0:
            raise ValueError("loss weights must be non-negative")


def _check_target(target: np.ndarray, num_classes: int) -> None:
    bad = np.flatnonzero(target >= num_classes)
    if bad.size:
        idx = np.unravel_index(bad[0], target.shape)
        raise DataError(f"target value {target[idx]} at pixel {tuple(int(i) for i in idx)} outside [0, {num_classes - 1}]")


def one_hot(target: np.ndarray, num_classes: int, dtype) -> np.ndarray:
    """(B,H,W) labels -> (B,C,H,W) indicator."""
    return (target[:, None] == np.arange(num_classes)[None, :, None, None]).astype(dtype)


def ce_dice_loss(logits: Tensor, target, cfg: LossConfig | None = None) -> Tensor:
    """Pixel-mean cross-entropy plus (1 - class-mean soft Dice)."""
    cfg = cfg or LossConfig()
    target = np.asarray(getattr(target, "data", target))
    B, C, H, W = logits.shape
    if target.shape != (B, H, W):
        raise DimensionError(f"target shape {target.shape} does not match logits {logits.shape}")
    _check_target(target, C)
    t = one_hot(target, C, logits.data.dtype)
    ce = -(F.log_softmax(logits, axis=1) * t).sum() * (1.0 / (B * H * W))
    p = F.softmax(logits, axis=1)
    inter = (p * t).sum(axis=(0, 2, 3))
    denom = p.sum(axis=(0, 2, 3)) + t.sum(axis=(0, 2, 3))
    dice = 1.0 - ((inter * 2.0 + cfg.dice_smooth) / (denom + cfg.dice_smooth)).mean()
    return ce * cfg.ce_weight + dice * cfg.dice_weight


# -- confusion-based metrics -----------------------------------------------

@dataclass(frozen=True)
class ConfusionStats:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(pred, target, class_id: int) -> ConfusionStats:
    pred, target = np.asarray(pred), np.asarray(target)
    if pred.shape != target.shape:
        raise DimensionError(f"prediction shape {pred.shape} != target shape {target.shape}")
    p, t = pred == class_id, target == class_id
    tp = int(np.count_nonzero(p & t))
    fp = int(np.count_nonzero(p & ~t))
    fn = int(np.count_nonzero(~p & t))
    return ConfusionStats(tp, fp, p.size - tp - fp - fn, fn)


def dsc(s: ConfusionStats) -> float:
    d = 2 * s.tp + s.fp + s.fn
    return 1.0 if d == 0 else 2 * s.tp / d


def mcc(s: ConfusionStats) -> float:
    d = float(s.tp + s.fp) * (s.tp + s.fn) * (s.tn + s.fp) * (s.tn + s.fn)
    if d == 0:
        return 0.0
    return (float(s.tp) * s.tn - float(s.fp) * s.fn) / math.sqrt(d)


def acc(s: ConfusionStats) -> float:
    return (s.tp + s.tn) / s.total


def argmax_labels(logits: np.ndarray) -> np.ndarray:
    """Class axis 1 argmax; numpy keeps the first index on ties."""
    return np.asarray(logits).argmax(axis=1).astype(np.uint8)


# -- Hausdorff ---------------------------------------------------------------

def boundary(mask) -> np.ndarray:
    """Foreground pixels with a 4-neighbour in the background or on the image border."""
    m = np.asarray(mask, dtype=bool)
    padded = np.pad(m, 1, constant_values=False)
    interior = padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    return m & ~interior


def _nearest_rank(values: np.ndarray, q: float) -> float:
    v = np.sort(values)
    return float(v[max(math.ceil(q / 100.0 * v.size) - 1, 0)])


def hausdorff(pred_bin, target_bin):
    """(HD, HD95) in pixels between boundary sets, or None when either is empty."""
    a, b = boundary(pred_bin), boundary(target_bin)
    if a.shape != b.shape:
        raise DimensionError(f"mask shapes differ: {a.shape} vs {b.shape}")
    if not a.any() or not b.any():
        return None
    # exact Euclidean distance to the nearest pixel of the other boundary set
    dist_to_b = ndimage.distance_transform_edt(~b)
    dist_to_a = ndimage.distance_transform_edt(~a)
    d_ab = dist_to_b[a]
    d_ba = dist_to_a[b]
    hd = float(max(d_ab.max(), d_ba.max()))
    hd95 = max(_nearest_rank(d_ab, 95), _nearest_rank(d_ba, 95))
    return hd, hd95


# -- dataset evaluation ------------------------------------------------------

@dataclass
class ClassMetrics:
    dsc: float
    mcc: float
    acc: float
    hd: float
    hd95: float
    n_images: int
    n_hd_skipped: int


@dataclass
class MetricsReport:
    per_class: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)

    def mean_dsc(self) -> float:
        return float(np.mean([m.dsc for m in self.per_class.values()]))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(METRICS_HEADER)
            for cid, name in CLASS_NAMES.items():
                m = self.per_class[cid]
                w.writerow([name] + [_fmt(v) for v in (m.dsc, m.mcc, m.acc, m.hd, m.hd95)] + [m.n_images, m.n_hd_skipped])

    def write_per_image_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(PER_IMAGE_HEADER)
            for r in self.rows:
                w.writerow([r["image_id"], r["class"]] + [_fmt(r[k], exact=True) for k in ("dsc", "mcc", "acc", "hd", "hd95")])


def _fmt(v: float | None, exact: bool = False) -> str:
    if v is None or math.isnan(v):
        return "nan"
    # per-image rows keep the shortest round-trip repr so they re-aggregate exactly
    return repr(float(v)) if exact else f"{v:.6f}"


def image_metrics(pred: np.ndarray, target: np.ndarray, class_id: int, with_hd: bool = True) -> dict:
    s = confusion(pred, target, class_id)
    row = {"dsc": dsc(s), "mcc": mcc(s), "acc": acc(s), "hd": None, "hd95": None}
    if with_hd:
        h = hausdorff(pred == class_id, target == class_id)
        if h is not None:
            row["hd"], row["hd95"] = h
    return row


def aggregate(rows: list) -> MetricsReport:
    """Macro-average per-image rows; Hausdorff over non-skipped images only."""
    report = MetricsReport(rows=rows)
    for cid, name in CLASS_NAMES.items():
        sel = [r for r in rows if r["class"] == name]
        if not sel:
            raise DataError("no images to aggregate")
        hd = [r["hd"] for r in sel if r["hd"] is not None]
        hd95 = [r["hd95"] for r in sel if r["hd95"] is not None]
        report.per_class[cid] = ClassMetrics(
            dsc=float(np.mean([r["dsc"] for r in sel])),
            mcc=float(np.mean([r["mcc"] for r in sel])),
            acc=float(np.mean([r["acc"] for r in sel])),
            hd=float(np.mean(hd)) if hd else float("nan"),
            hd95=float(np.mean(hd95)) if hd95 else float("nan"),
            n_images=len(sel),
            n_hd_skipped=len(sel) - len(hd),
        )
    return report


def predict(model, images: np.ndarray, batch: int = 16) -> np.ndarray:
    """Label maps for (N,1,H,W) images, inference mode."""
    was_training = model.training
    model.eval()
    out = []
    try:
        with no_grad():
            for i in range(0, len(images), batch):
                logits = model(Tensor(images[i : i + batch]))
                out.append(argmax_labels(logits.data))
    finally:
        model.train(was_training)
    return np.concatenate(out, axis=0)


def evaluate_dataset(model, samples, with_hd: bool = True, batch: int = 16) -> MetricsReport:
    if len(samples) == 0:
        raise DataError("cannot evaluate an empty dataset")
    images = np.stack([s.image for s in samples])
    preds = predict(model, images, batch)
    return evaluate_predictions(preds, samples, with_hd)


def evaluate_predictions(preds, samples, with_hd: bool = True) -> MetricsReport:
    rows = []
    for pred, s in zip(preds, samples):
        for cid, name in CLASS_NAMES.items():
            rows.append({"image_id": s.id, "class": name, **image_metrics(pred, s.mask, cid, with_hd)})
    return aggregate(rows)
