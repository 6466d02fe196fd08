"""Central-difference gradient checking, independent of the backward rules."""
from typing import Callable, Optional, Sequence

import numpy as np

from .tensor import Tensor, backward


def numerical_grad(f: Callable[..., Tensor], inputs: Sequence[Tensor], index: int, eps: float,
                   dtype=None) -> np.ndarray:
    """Central differences of scalar ``f(*inputs)`` w.r.t. ``inputs[index]``.

    With ``dtype`` set, the perturbed evaluations run on copies of all inputs
    cast to that dtype (the originals are untouched).
    """
    work = [Tensor(t.data.astype(dtype or t.data.dtype)) for t in inputs]
    x = work[index].data
    flat = x.reshape(-1)
    out = np.empty(flat.shape, dtype=np.float64)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = float(f(*work).data.sum())
        flat[i] = orig - eps
        fm = float(f(*work).data.sum())
        flat[i] = orig
        out[i] = (fp - fm) / (2.0 * eps)
    return out.reshape(x.shape)


def analytic_grads(f: Callable[..., Tensor], inputs: Sequence[Tensor]) -> list:
    leaves = [Tensor(t.data.copy(), requires_grad=True) for t in inputs]
    backward(f(*leaves))
    return [np.zeros_like(t.data) if t.grad is None else t.grad for t in leaves]


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def finite_difference_check(f: Callable[..., Tensor], inputs: Sequence[Tensor], eps: float = 1e-6,
                            fd_dtype=None, wrt: Optional[Sequence[int]] = None) -> float:
    """Max over coordinates of |analytic - central| / max(|analytic|, |central|, 1e-8).

    ``f`` maps the input tensors to a scalar tensor. The analytic gradient is
    taken at the inputs' own precision; ``fd_dtype`` optionally evaluates the
    difference quotient at another precision (e.g. float64 reference for a
    float32 gradient). ``wrt`` restricts the check to some input indices.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    grads = analytic_grads(f, inputs)
    worst = 0.0
    for i in (range(len(inputs)) if wrt is None else wrt):
        num = numerical_grad(f, inputs, i, eps, fd_dtype)
        worst = max(worst, relative_error(grads[i], num))
    return worst
