"""Adam and the multi-task training loop.

Batch composition and augmentation at step ``t`` are drawn from a generator
seeded with ``(seed, t)``, so a run is a pure function of (config, dataset)
and resuming from a checkpoint at step t replays exactly what a straight run
would have done.
"""
import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .checkpoint import AdamState, Checkpoint, checkpoint_load, checkpoint_save
from .losses import (LossBreakdown, LossWeights, minutia_loss_bce, orientation_encode, orientation_loss_mse,
                     reconstruction_loss_l1, reconstruction_loss_l2, total_loss)
from .metrics import MetricsReport, image_metrics, mean_report
from .model import FingerUNet
from .synth.augment import AugmentParams, augment_pair
from .synth.dataset import load_dataset
from .synth.sample import SamplePair
from .tensor import Tensor, backward, rng

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int, breakdown: LossBreakdown):
        self.step, self.breakdown = step, breakdown
        super().__init__(f"non-finite loss at step {step}: {breakdown.as_dict()}")


# --- Adam -----------------------------------------------------------------------

def adam_init(names: Sequence[str], params: Sequence[Tensor]) -> AdamState:
    return AdamState({n: np.zeros_like(p.data) for n, p in zip(names, params)},
                     {n: np.zeros_like(p.data) for n, p in zip(names, params)})


def adam_step(names: Sequence[str], params: Sequence[Tensor], grads: Sequence[np.ndarray], st: AdamState,
              lr: float) -> None:
    """One bias-corrected Adam update, in place on ``params`` and ``st``."""
    st.t += 1
    b1, b2 = st.beta1, st.beta2
    c1 = 1 - b1 ** st.t
    c2 = 1 - b2 ** st.t
    for name, p, g in zip(names, params, grads):
        if g.shape != p.shape:
            raise ValueError(f"grad shape {g.shape} does not match parameter {name!r} {p.shape}")
        m, v = st.m[name], st.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / c1
        v_hat = v / c2
        p.data = (p.data - lr * m_hat / (np.sqrt(v_hat) + st.eps)).astype(p.data.dtype)


# --- configuration ----------------------------------------------------------------

@dataclass
class AugmentRanges:
    enabled: bool = True
    rotation_deg: float = 15.0
    shift_frac: float = 0.10
    shear: float = 0.10
    flips: bool = True


@dataclass
class TrainConfig:
    data: Optional[str] = None
    steps: int = 2000
    batch_size: int = 4
    lr: float = 0.001
    weights: LossWeights = field(default_factory=LossWeights)
    recon_loss: str = "l1"
    augment: AugmentRanges = field(default_factory=AugmentRanges)
    checkpoint_path: Optional[str] = None
    checkpoint_interval: int = 0
    eval_interval: int = 50
    history_path: Optional[str] = None
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.recon_loss not in ("l1", "l2"):
            raise ValueError(f"recon_loss must be l1 or l2, got {self.recon_loss!r}")


@dataclass
class HistoryRow:
    step: int
    losses: LossBreakdown
    metrics: Optional[MetricsReport] = None


# --- batches ------------------------------------------------------------------------

@dataclass
class Batch:
    x: Tensor
    clean: np.ndarray
    minutia: np.ndarray
    orientation: np.ndarray
    mask: np.ndarray


def assemble_batch(samples: Sequence[SamplePair], dtype=np.float32) -> Batch:
    def stack(arrs):
        return np.stack(arrs)[:, None].astype(dtype)

    orient = np.stack([orientation_encode(s.orientation.theta) for s in samples]).astype(dtype)
    return Batch(
        Tensor(stack([s.degraded for s in samples])),
        stack([s.clean for s in samples]),
        stack([s.minutia_map for s in samples]),
        orient,
        stack([s.orientation.mask for s in samples]),
    )


def step_batch(samples: Sequence[SamplePair], cfg: TrainConfig, step: int) -> Batch:
    gen = rng([cfg.seed, step])
    n = len(samples)
    idx = gen.choice(n, size=cfg.batch_size, replace=n < cfg.batch_size)
    chosen = []
    for i in idx:
        s = samples[int(i)]
        h, w = s.shape
        a = cfg.augment
        p = AugmentParams.random(gen, h, w, a.rotation_deg, a.shift_frac, a.shear, a.flips)
        chosen.append(augment_pair(s, p) if a.enabled else s)
    return assemble_batch(chosen)


def compute_losses(model: FingerUNet, batch: Batch, cfg: TrainConfig, train: bool = True):
    out = model.forward(batch.x, train=train)
    recon = reconstruction_loss_l1 if cfg.recon_loss == "l1" else reconstruction_loss_l2
    l_r = recon(out.enhanced, batch.clean)
    l_m = minutia_loss_bce(out.minutia_map, batch.minutia) if out.minutia_map is not None else None
    l_o = orientation_loss_mse(out.orientation, batch.orientation, batch.mask) if out.orientation is not None else None
    total, bd = total_loss(l_r, l_m, l_o, cfg.weights)
    return out, total, bd


def batch_metrics(enhanced: Tensor, clean: np.ndarray) -> MetricsReport:
    return mean_report(image_metrics(e[0], c[0]) for e, c in zip(enhanced.data, clean))


# --- history ----------------------------------------------------------------------------

def history_columns(heads) -> List[str]:
    cols = ["step", "l_r"]
    if "minutia" in heads:
        cols.append("l_m")
    if "orientation" in heads:
        cols.append("l_o")
    return cols + ["l_total", "ssim", "psnr", "rmse"]


def _row_dict(row: HistoryRow) -> Dict[str, str]:
    d = {"step": str(row.step)}
    for k, v in row.losses.as_dict().items():
        d[k] = repr(float(v))
    if row.metrics is not None:
        d.update(ssim=repr(row.metrics.ssim), psnr=repr(row.metrics.psnr), rmse=repr(row.metrics.rmse))
    return d


def append_history(path, rows: Sequence[HistoryRow], heads) -> None:
    path = Path(path)
    cols = history_columns(heads)
    new = not path.exists() or path.stat().st_size == 0
    with open(path, "a", newline="") as f:
        w = csv.DictWriter(f, fieldnames=cols, restval="")
        if new:
            w.writeheader()
        for r in rows:
            w.writerow(_row_dict(r))


# --- loop ---------------------------------------------------------------------------------

class Trainer:
    def __init__(self, model: FingerUNet, cfg: TrainConfig, samples: Sequence[SamplePair],
                 adam: Optional[AdamState] = None, start_step: int = 0):
        self.model, self.cfg, self.samples = model, cfg, list(samples)
        if not self.samples:
            raise ValueError("training set is empty")
        h, w = self.samples[0].shape
        if (h, w) != (model.cfg.input_h, model.cfg.input_w):
            raise ValueError(f"dataset dims {h}x{w} do not match model input {model.cfg.input_h}x{model.cfg.input_w}")
        named = list(model.named_parameters())
        self.names = [n for n, _ in named]
        self.params = [p for _, p in named]
        self.adam = adam or adam_init(self.names, self.params)
        self.step = start_step
        self.grad_hooks = []  # called with the parameter list right after the grad reset

    def train_step(self) -> HistoryRow:
        step = self.step + 1
        for p in self.params:
            p.zero_grad()
        for hook in self.grad_hooks:
            hook(self.params)
        batch = step_batch(self.samples, self.cfg, step)
        out, total, bd = compute_losses(self.model, batch, self.cfg)
        if not all(math.isfinite(v) for v in bd.as_dict().values()):
            raise TrainingDiverged(step, bd)
        backward(total)
        adam_step(self.names, self.params, [p.grad for p in self.params], self.adam, self.cfg.lr)
        metrics = None
        if self.cfg.eval_interval and step % self.cfg.eval_interval == 0:
            metrics = batch_metrics(out.enhanced, batch.clean)
        self.step = step
        return HistoryRow(step, bd, metrics)

    def checkpoint(self) -> Checkpoint:
        return Checkpoint.from_model(self.model, self.adam, self.step, {"seed": self.cfg.seed, "step": self.step})

    def run(self, steps: Optional[int] = None) -> List[HistoryRow]:
        """Train until ``steps`` total steps (default cfg.steps) have been completed."""
        target = self.cfg.steps if steps is None else steps
        history = []
        pending = []
        cfg = self.cfg
        while self.step < target:
            row = self.train_step()
            history.append(row)
            pending.append(row)
            if row.step % 100 == 0:
                log.info("step %d %s", row.step, row.losses.as_dict())
            if cfg.checkpoint_path and cfg.checkpoint_interval and row.step % cfg.checkpoint_interval == 0:
                self._flush(pending)
                pending = []
                checkpoint_save(cfg.checkpoint_path, self.checkpoint())
        self._flush(pending)
        if cfg.checkpoint_path:
            checkpoint_save(cfg.checkpoint_path, self.checkpoint())
        return history

    def _flush(self, rows):
        if self.cfg.history_path and rows:
            append_history(self.cfg.history_path, rows, self.model.cfg.heads)


def train(cfg: TrainConfig, model: FingerUNet, samples: Optional[Sequence[SamplePair]] = None,
          adam: Optional[AdamState] = None, start_step: int = 0) -> List[HistoryRow]:
    if samples is None:
        if cfg.data is None:
            raise ValueError("no dataset: pass samples or set cfg.data")
        samples = load_dataset(cfg.data)
    return Trainer(model, cfg, samples, adam, start_step).run()


def resume(ckpt_path, cfg: TrainConfig, samples=None):
    """Rebuild model and optimiser from a checkpoint; returns (trainer, checkpoint)."""
    ckpt = checkpoint_load(ckpt_path)
    model = ckpt.build()
    if samples is None:
        samples = load_dataset(cfg.data)
    return Trainer(model, cfg, samples, ckpt.adam, ckpt.step), ckpt


def evaluate(model: FingerUNet, samples: Sequence[SamplePair], recon=None) -> List[MetricsReport]:
    """Eval-mode enhancement of each sample and its metrics against the clean image."""
    reports = []
    for s in samples:
        out = model.forward(Tensor(s.degraded[None, None].astype(np.float32)), train=False, strict=False)
        reports.append(image_metrics(out.enhanced.data[0, 0], s.clean))
    return reports
