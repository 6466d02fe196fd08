"""Task losses, their weighted total, and the doubled-angle orientation encoding."""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .tensor import ShapeError, Tensor, add, make_node, scale

BCE_CLAMP = 1e-7


def _check(pred: Tensor, target, what: str):
    tshape = target.shape
    if pred.shape != tshape:
        raise ShapeError(f"{what}: pred {pred.shape} vs target {tshape}")


def _arr(t, dtype):
    return (t.data if isinstance(t, Tensor) else np.asarray(t)).astype(dtype, copy=False)


def reconstruction_loss_l1(pred: Tensor, target) -> Tensor:
    """Mean absolute error; the subgradient at exact ties is 0."""
    _check(pred, target, "l1")
    diff = pred.data - _arr(target, pred.dtype)
    n = diff.size
    return make_node(np.asarray(np.abs(diff).mean()), (pred,),
                     lambda g: (np.sign(diff) * (g / n),), "l1")


def reconstruction_loss_l2(pred: Tensor, target) -> Tensor:
    _check(pred, target, "l2")
    diff = pred.data - _arr(target, pred.dtype)
    n = diff.size
    return make_node(np.asarray((diff * diff).mean()), (pred,),
                     lambda g: (diff * (2 * g / n),), "l2")


def orientation_loss_mse(pred: Tensor, target, mask) -> Tensor:
    """MSE over both channels at foreground pixels; an empty mask gives 0."""
    _check(pred, target, "orientation loss")
    m = _arr(mask, pred.dtype)
    n, c, h, w = pred.shape
    if m.shape != (n, 1, h, w):
        raise ShapeError(f"orientation mask must be {(n, 1, h, w)}, got {m.shape}")
    diff = (pred.data - _arr(target, pred.dtype)) * m
    count = float(m.sum()) * c
    if count == 0:
        return make_node(np.asarray(0.0, dtype=pred.dtype), (pred,), lambda g: (np.zeros_like(pred.data),), "mse_masked")
    return make_node(np.asarray((diff * diff).sum() / count), (pred,),
                     lambda g: (diff * (2 * g / count),), "mse_masked")


def minutia_loss_bce(pred: Tensor, target) -> Tensor:
    """Binary cross entropy with predictions clamped to [1e-7, 1 - 1e-7]."""
    _check(pred, target, "bce")
    y = _arr(target, np.float64)
    p_raw = pred.data.astype(np.float64)
    p = np.clip(p_raw, BCE_CLAMP, 1 - BCE_CLAMP)
    n = p.size
    loss = -(y * np.log(p) + (1 - y) * np.log1p(-p)).mean()
    inside = (p_raw > BCE_CLAMP) & (p_raw < 1 - BCE_CLAMP)

    def bw(g):
        return ((((p - y) / (p * (1 - p))) * inside * (float(g) / n)).astype(pred.dtype),)

    return make_node(np.asarray(loss, dtype=pred.dtype), (pred,), bw, "bce")


@dataclass
class LossWeights:
    lambda_r: float = 0.8
    lambda_m: float = 0.1
    lambda_o: float = 0.1

    def __post_init__(self):
        for name in ("lambda_r", "lambda_m", "lambda_o"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")

    @classmethod
    def parse(cls, text: str) -> "LossWeights":
        parts = [float(v) for v in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"expected three comma-separated weights r,m,o, got {text!r}")
        return cls(*parts)


@dataclass
class LossBreakdown:
    l_r: float
    l_m: Optional[float]
    l_o: Optional[float]
    l_total: float

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


def total_loss(l_r: Tensor, l_m: Optional[Tensor], l_o: Optional[Tensor], w: LossWeights):
    """Weighted sum of the task losses. Returns (total tensor, float breakdown).

    Absent heads (None) drop out of the sum.
    """
    total = scale(l_r, w.lambda_r)
    if l_m is not None:
        total = add(total, scale(l_m, w.lambda_m))
    if l_o is not None:
        total = add(total, scale(l_o, w.lambda_o))
    bd = LossBreakdown(
        l_r.item(),
        None if l_m is None else l_m.item(),
        None if l_o is None else l_o.item(),
        total.item(),
    )
    return total, bd


def orientation_encode(theta) -> np.ndarray:
    """Angle field (..., ) in [0, pi) -> (2, ...) stack of (sin 2t, cos 2t)."""
    t = np.asarray(theta, dtype=np.float64)
    return np.stack([np.sin(2 * t), np.cos(2 * t)])


def orientation_decode(field) -> np.ndarray:
    """(2, ...) doubled-angle field -> angles in [0, pi); the zero vector decodes to 0."""
    f = np.asarray(field, dtype=np.float64)
    s, c = f[0], f[1]
    norm = np.hypot(s, c)
    safe = np.where(norm > 0, norm, 1.0)
    theta = np.arctan2(s / safe, c / safe) / 2
    theta = np.where(norm > 0, np.mod(theta, np.pi), 0.0)
    # mod can round up to exactly pi for tiny negative inputs
    return np.where(theta >= np.pi, 0.0, theta)
