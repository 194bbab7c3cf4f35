"""Epoch loop, checkpoint/resume, and the MDA variant comparison."""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import tensorio
from .autodiff.tensor import Tensor
from .errors import DataError, NumericalError
from .network import PdcNet, PdcNetConfig, model_entries, model_from_entries
from .objectives import LossConfig, ce_dice_loss, evaluate_dataset
from .optim import AdamW, ScheduleConfig, cosine_lr
from .synth import SynthConfig, load_dataset, resolve_split, write_dataset

log = logging.getLogger(__name__)

LOG_HEADER = "epoch,lr,train_loss,val_dsc_neg,val_dsc_pos"
LOG_NAME = "train_log.csv"
CKPT_NAME = "checkpoint.pdcc"
METRICS_NAME = "metrics.csv"
PER_IMAGE_NAME = "metrics_per_image.csv"


@dataclass
class TrainConfig:
    model: PdcNetConfig = field(default_factory=PdcNetConfig)
    schedule: ScheduleConfig = field(default_factory=lambda: ScheduleConfig(epochs=30, batch_size=8, input_size=64))
    loss: LossConfig = field(default_factory=LossConfig)
    weight_decay: float = 5e-4
    seed: int = 7
    ckpt_every: int = 0
    figures: bool = True

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        return cls(
            model=PdcNetConfig.from_dict(d.pop("model")),
            schedule=ScheduleConfig(**d.pop("schedule")),
            loss=LossConfig(**d.pop("loss")),
            **d,
        )


@dataclass
class TrainResult:
    log_rows: list
    checkpoint: str
    report: object = None


def _batches(n: int, batch: int, seed: int, epoch: int):
    order = np.random.default_rng([seed, epoch]).permutation(n)
    for i in range(0, n, batch):
        yield order[i : i + batch]


def _checkpoint(path, model, opt, epoch: int, cfg: TrainConfig) -> None:
    meta = json.dumps(cfg.to_dict(), sort_keys=True).encode("utf-8")
    extra = [("meta/train", np.frombuffer(meta, dtype=np.uint8)), ("train/epoch", np.array([epoch], dtype=np.float64))]
    tensorio.save_checkpoint(path, model_entries(model) + opt.state_entries() + extra)


def train(
    cfg: TrainConfig,
    data_dir,
    out_dir,
    resume: str | None = None,
    stop_after: int | None = None,
) -> TrainResult:
    """Train on ``data_dir/train``, validate on ``data_dir/test``.

    ``stop_after`` ends the loop after that epoch while keeping the schedule
    of the full run, so a later ``resume`` continues the same trajectory.
    """
    cfg.schedule.validate()
    os.makedirs(out_dir, exist_ok=True)
    train_set = load_dataset(resolve_split(data_dir, "train"))
    val_set = load_dataset(resolve_split(data_dir, "test"))
    if not train_set:
        raise DataError(f"no training samples in {data_dir}")
    images = np.stack([s.image for s in train_set])
    masks = np.stack([s.mask for s in train_set])

    if resume:
        entries = tensorio.load_checkpoint(resume)
        cfg = TrainConfig.from_dict(json.loads(bytes(entries["meta/train"]).decode("utf-8")))
        model = model_from_entries(entries)
        opt = AdamW(model.named_parameters(), weight_decay=cfg.weight_decay)
        opt.load_state_entries(entries)
        start = int(entries["train/epoch"][0])
    else:
        model = PdcNet(cfg.model)
        opt = AdamW(model.named_parameters(), weight_decay=cfg.weight_decay)
        start = 0

    sched = cfg.schedule
    last = sched.epochs if stop_after is None else min(stop_after, sched.epochs)
    log_path = os.path.join(out_dir, LOG_NAME)
    ckpt_path = os.path.join(out_dir, CKPT_NAME)
    if start == 0 or not os.path.exists(log_path):
        with open(log_path, "w") as fh:
            fh.write(LOG_HEADER + "\n")

    rows = []
    dtype = np.float32 if cfg.model.dtype == "f32" else np.float64
    for epoch in range(start + 1, last + 1):
        lr = cosine_lr(epoch - 1, sched)
        model.train()
        losses = []
        for b, idx in enumerate(_batches(len(images), sched.batch_size, cfg.seed, epoch)):
            model.zero_grad()
            logits = model(Tensor(images[idx].astype(dtype)))
            loss = ce_dice_loss(logits, masks[idx], cfg.loss)
            value = float(loss.data)
            if not math.isfinite(value):
                raise NumericalError(f"non-finite loss at epoch {epoch}, batch {b}")
            loss.backward()
            opt.step(lr)
            losses.append(value)
        report = evaluate_dataset(model, val_set, with_hd=False)
        row = (epoch, lr, float(np.mean(losses)), report.per_class[1].dsc, report.per_class[2].dsc)
        rows.append(row)
        with open(log_path, "a") as fh:
            fh.write(f"{row[0]},{row[1]:.6e},{row[2]:.6f},{row[3]:.6f},{row[4]:.6f}\n")
        log.info("epoch %d lr %.3e loss %.4f dsc neg %.4f pos %.4f", *row)
        if cfg.ckpt_every and epoch % cfg.ckpt_every == 0 and epoch != last:
            _checkpoint(ckpt_path, model, opt, epoch, cfg)

    _checkpoint(ckpt_path, model, opt, last, cfg)
    result = TrainResult(rows, ckpt_path)
    if last == sched.epochs:
        result.report = evaluate_dataset(model, val_set, with_hd=True)
        result.report.write_csv(os.path.join(out_dir, METRICS_NAME))
        result.report.write_per_image_csv(os.path.join(out_dir, PER_IMAGE_NAME))
        if cfg.figures:
            from . import plots

            plots.plot_training_log(read_log(log_path), os.path.join(out_dir, "train_log.png"))
            plots.plot_metrics(result.report, os.path.join(out_dir, "metrics.png"))
    return result


def read_log(path) -> list:
    with open(path) as fh:
        lines = fh.read().strip().splitlines()
    out = []
    for line in lines[1:]:
        e, lr, loss, neg, pos = line.split(",")
        out.append((int(e), float(lr), float(loss), float(neg), float(pos)))
    return out


# -- MDA variant comparison ---------------------------------------------------

ABLATION_HEADER = "variant,dsc_neg,dsc_pos,dsc_mean"


def ablation_ordering(scores: dict) -> bool:
    """full >= dual - 0.02 and dual >= pconv - 0.02 (so full >= pconv - 0.04)."""
    return scores["full"] >= scores["dual"] - 0.02 and scores["dual"] >= scores["pconv"] - 0.02


def run_ablation(
    out_dir,
    cfg: TrainConfig,
    synth: SynthConfig,
    n_test: int,
    variants=("full", "dual", "pconv"),
) -> dict:
    """Train each MDA variant on the diagonal-only subset; writes ablation.csv."""
    os.makedirs(out_dir, exist_ok=True)
    synth = SynthConfig(**{**asdict(synth), "diagonal_only": True})
    data_dir = os.path.join(out_dir, "data")
    write_dataset(data_dir, synth, n_test)
    scores, rows = {}, []
    for v in variants:
        run_cfg = TrainConfig.from_dict(cfg.to_dict())
        run_cfg.model.mda_variant = v
        run_cfg.figures = False
        res = train(run_cfg, data_dir, os.path.join(out_dir, v))
        neg, pos = res.report.per_class[1].dsc, res.report.per_class[2].dsc
        scores[v] = (neg + pos) / 2
        rows.append((v, neg, pos, scores[v]))
    with open(os.path.join(out_dir, "ablation.csv"), "w") as fh:
        fh.write(ABLATION_HEADER + "\n")
        for r in rows:
            fh.write(f"{r[0]},{r[1]:.6f},{r[2]:.6f},{r[3]:.6f}\n")
    if cfg.figures:
        from . import plots

        plots.plot_ablation(rows, os.path.join(out_dir, "ablation.png"))
    return scores
