"""Dense tensors with reverse-mode automatic differentiation.

Every differentiable op builds its output with :func:`make_node`, storing the
parent tensors and a closure that maps the output gradient to per-parent
gradients. :class:`Tape` linearises that graph (topological order) and
:func:`backward` walks it in reverse, visiting every node exactly once.

Precision is float32 by default. ``precision("float64")`` switches the dtype
used by the creation functions; ops keep whatever dtype their inputs carry, so
a float64 input flowing through float32 weights is computed in float64.

Seeded fills use numpy's PCG64 bit generator, which is specified and stable
across platforms for a given seed.
"""
from contextlib import contextmanager
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

_PRECISIONS = {"float32": np.float32, "float64": np.float64}
_default_dtype = np.float32


class ShapeError(ValueError):
    pass


def get_dtype():
    return _default_dtype


def set_precision(name: str) -> None:
    global _default_dtype
    if name not in _PRECISIONS:
        raise ValueError(f"precision must be one of {sorted(_PRECISIONS)}, got {name!r}")
    _default_dtype = _PRECISIONS[name]


@contextmanager
def precision(name: str):
    """Temporarily switch the creation dtype, e.g. ``with precision("float64"):``."""
    global _default_dtype
    prev = _default_dtype
    set_precision(name)
    try:
        yield
    finally:
        _default_dtype = prev


def rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "op", "name")

    def __init__(self, data, requires_grad: bool = False, *, name: Optional[str] = None):
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(_default_dtype)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._parents: tuple = ()
        self._backward: Optional[Callable] = None
        self.op = "leaf"
        self.name = name

    # --- introspection -------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self):
        return self._backward is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _raise_item(self)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data) if self.requires_grad else None

    def __repr__(self):
        tag = f", op={self.op}" if self.op != "leaf" else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tag}, requires_grad={self.requires_grad})"

    # --- arithmetic ----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return add(scale(self, -1.0), other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def sum(self, axes=None):
        return reduce_sum(self, axes)

    def mean(self, axes=None):
        return reduce_mean(self, axes)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], tuple) else shape)

    def backward(self):
        backward(self)


def _raise_item(t):
    raise ShapeError(f"item() needs a single-element tensor, got shape {t.shape}")


def make_node(data: np.ndarray, parents: Sequence[Tensor], backward_fn: Callable, op: str) -> Tensor:
    """Wrap an op result; the node is recorded only if some parent needs grad.

    ``backward_fn(g)`` must return one gradient (or None) per parent.
    """
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    out.op = op
    return out


# --- creation ---------------------------------------------------------------

def _check_shape(shape) -> tuple:
    shape = tuple(int(s) for s in shape)
    if not 1 <= len(shape) <= 4:
        raise ShapeError(f"rank must be 1..4, got {len(shape)}")
    if any(s < 1 for s in shape):
        raise ShapeError(f"all extents must be >= 1, got {shape}")
    return shape


def zeros(shape, requires_grad=False) -> Tensor:
    return Tensor(np.zeros(_check_shape(shape), dtype=_default_dtype), requires_grad)


def ones(shape, requires_grad=False) -> Tensor:
    return full(shape, 1.0, requires_grad)


def full(shape, value: float, requires_grad=False) -> Tensor:
    return Tensor(np.full(_check_shape(shape), value, dtype=_default_dtype), requires_grad)


def uniform(shape, seed, lo=0.0, hi=1.0, requires_grad=False) -> Tensor:
    shape = _check_shape(shape)
    return Tensor(rng(seed).uniform(lo, hi, size=shape).astype(_default_dtype), requires_grad)


def normal(shape, seed, mean=0.0, std=1.0, requires_grad=False) -> Tensor:
    shape = _check_shape(shape)
    return Tensor(rng(seed).normal(mean, std, size=shape).astype(_default_dtype), requires_grad)


def from_values(values, shape=None, requires_grad=False) -> Tensor:
    arr = np.asarray(values, dtype=_default_dtype)
    if shape is None:
        shape = arr.shape
    shape = _check_shape(shape)
    if arr.size != int(np.prod(shape)):
        raise ShapeError(f"{arr.size} values cannot fill shape {shape}")
    return Tensor(arr.reshape(shape).copy(), requires_grad)


# --- elementwise ------------------------------------------------------------

def _same_shape(a: Tensor, b: Tensor, op: str):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ (no broadcasting)")


def add(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        c = float(b)
        return make_node(a.data + a.data.dtype.type(c), (a,), lambda g: (g,), "add_scalar")
    _same_shape(a, b, "add")
    return make_node(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        return add(a, -float(b))
    _same_shape(a, b, "sub")
    return make_node(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    if not isinstance(b, Tensor):
        return scale(a, b)
    _same_shape(a, b, "mul")
    ad, bd = a.data, b.data
    return make_node(ad * bd, (a, b), lambda g: (g * bd, g * ad), "mul")


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    return make_node(a.data * a.data.dtype.type(s), (a,), lambda g: (g * g.dtype.type(s),), "scale")


def elementwise(kind: str, a: Tensor, b) -> Tensor:
    ops = {"add": add, "sub": sub, "mul": mul, "scale": scale}
    if kind not in ops:
        raise ValueError(f"unknown elementwise kind {kind!r}")
    return ops[kind](a, b)


# --- reductions and shape -----------------------------------------------------

def _norm_axes(x: Tensor, axes) -> tuple:
    if axes is None:
        return tuple(range(x.ndim))
    if isinstance(axes, int):
        axes = (axes,)
    out = []
    for ax in axes:
        if not -x.ndim <= ax < x.ndim:
            raise ShapeError(f"axis {ax} out of range for rank {x.ndim}")
        out.append(ax % x.ndim)
    if len(set(out)) != len(out):
        raise ShapeError(f"repeated axis in {axes}")
    return tuple(sorted(out))


def reduce_sum(x: Tensor, axes=None) -> Tensor:
    axes = _norm_axes(x, axes)
    if not axes:
        return make_node(x.data.copy(), (x,), lambda g: (g,), "sum")
    shape = x.shape
    kept = tuple(1 if i in axes else s for i, s in enumerate(shape))

    def bw(g):
        return (np.broadcast_to(g.reshape(kept), shape).copy(),)

    return make_node(np.asarray(x.data.sum(axis=axes)), (x,), bw, "sum")


def reduce_mean(x: Tensor, axes=None) -> Tensor:
    axes = _norm_axes(x, axes)
    count = int(np.prod([x.shape[i] for i in axes])) if axes else 1
    return scale(reduce_sum(x, axes), 1.0 / count)


def reduce(kind: str, x: Tensor, axes=None) -> Tensor:
    if kind == "sum":
        return reduce_sum(x, axes)
    if kind == "mean":
        return reduce_mean(x, axes)
    raise ValueError(f"unknown reduction {kind!r}")


def reshape(x: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    old = x.shape
    return make_node(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),), "reshape")


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    """Concatenate along ``axis``; all other extents must agree."""
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != len(ref) or any(a != b for i, (a, b) in enumerate(zip(t.shape, ref)) if i != axis):
            raise ShapeError(f"concat: shape {t.shape} incompatible with {ref} on axis {axis}")
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def bw(g):
        return tuple(np.split(g, sizes, axis=axis))

    return make_node(np.concatenate([t.data for t in tensors], axis=axis), tensors, bw, "concat")


# --- backward ---------------------------------------------------------------

class Tape:
    """Topologically ordered record of the subgraph that produced ``loss``."""

    def __init__(self, nodes: list):
        self.nodes = nodes

    @classmethod
    def record(cls, loss: Tensor) -> "Tape":
        order, seen = [], set()
        stack = [(loss, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        return cls(order)

    def __len__(self):
        return len(self.nodes)

    def __contains__(self, t: Tensor):
        return any(n is t for n in self.nodes)

    def leaves(self) -> list:
        return [n for n in self.nodes if n.is_leaf]


def backward(loss: Tensor, tape: Optional[Tape] = None) -> None:
    """Accumulate d(loss)/d(leaf) into ``leaf.grad`` for every grad-requiring leaf."""
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise RuntimeError("loss is detached: nothing on the tape requires grad")
    if tape is None:
        tape = Tape.record(loss)
    elif tape.nodes and tape.nodes[-1] is not loss:
        raise RuntimeError("tape was not recorded from this loss")
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf:
            if node.grad is None:
                node.grad = np.zeros_like(node.data)
            node.grad += g.astype(node.data.dtype, copy=False).reshape(node.shape)
            continue
        for p, pg in zip(node._parents, node._backward(g)):
            if pg is None or not p.requires_grad:
                continue
            key = id(p)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg


def zero_grads(params: Iterable[Tensor]) -> None:
    for p in params:
        p.zero_grad()
