"""Checkpoint binary format.

    b"FUNT"                      magic
    u32 version                  currently 1
    u32 n, n bytes UTF-8 JSON    model config + training state
    u32 record count
    per record:
        u32 n, n bytes UTF-8     name
        u32 rank, rank * u32     dims
        prod(dims) * f32         values
All integers and floats are little-endian. Record names are prefixed
``param:``, ``buffer:``, ``adam.m:`` or ``adam.v:``.
"""
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from .model import FingerUNet, ModelConfig, build_model

MAGIC = b"FUNT"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class AdamState:
    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class Checkpoint:
    model_config: ModelConfig
    params: Dict[str, np.ndarray]
    buffers: Dict[str, np.ndarray] = field(default_factory=dict)
    adam: Optional[AdamState] = None
    step: int = 0
    rng_state: dict = field(default_factory=dict)
    version: int = VERSION

    @classmethod
    def from_model(cls, model: FingerUNet, adam: Optional[AdamState] = None, step: int = 0,
                   rng_state: Optional[dict] = None) -> "Checkpoint":
        return cls(model.cfg,
                   {n: p.data.astype(np.float32) for n, p in model.named_parameters()},
                   {n: b.astype(np.float32) for n, b in model.named_buffers()},
                   adam, step, dict(rng_state or {}))

    def build(self) -> FingerUNet:
        """Model from the stored config with the stored values copied in."""
        model = build_model(ModelConfig(**json.loads(self.model_config.to_json())))
        _assign(dict(model.named_parameters()), self.params, "parameter", lambda dst, v: setattr(dst, "data", v.copy()))
        _assign(dict(model.named_buffers()), self.buffers, "buffer", lambda dst, v: dst.__setitem__(Ellipsis, v))
        return model


def _assign(targets, values, kind, setter):
    if set(targets) != set(values):
        missing = sorted(set(targets) - set(values))
        extra = sorted(set(values) - set(targets))
        name = (missing or extra)[0]
        raise CheckpointError(f"{kind} {name!r} {'missing from' if missing else 'unexpected in'} checkpoint")
    for name, dst in targets.items():
        v = values[name]
        if v.shape != dst.shape:
            raise CheckpointError(f"{kind} {name!r}: checkpoint shape {v.shape} != model shape {dst.shape}")
    for name, dst in targets.items():
        setter(dst, values[name].astype(dst.dtype))


def _u32(n: int) -> bytes:
    return struct.pack("<I", n)


def _str(s: str) -> bytes:
    b = s.encode("utf-8")
    return _u32(len(b)) + b


def checkpoint_save(path, c: Checkpoint) -> None:
    records = [(f"param:{k}", v) for k, v in c.params.items()]
    records += [(f"buffer:{k}", v) for k, v in c.buffers.items()]
    header = {"model": json.loads(c.model_config.to_json()), "step": c.step, "rng": c.rng_state}
    if c.adam is not None:
        header["adam"] = {"t": c.adam.t, "beta1": c.adam.beta1, "beta2": c.adam.beta2, "eps": c.adam.eps}
        records += [(f"adam.m:{k}", v) for k, v in c.adam.m.items()]
        records += [(f"adam.v:{k}", v) for k, v in c.adam.v.items()]
    parts = [MAGIC, _u32(VERSION), _str(json.dumps(header, sort_keys=True)), _u32(len(records))]
    for name, v in records:
        arr = np.ascontiguousarray(v, dtype="<f4")
        parts.append(_str(name))
        parts.append(_u32(arr.ndim) + b"".join(_u32(d) for d in arr.shape))
        parts.append(arr.tobytes())
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(b"".join(parts))
    tmp.replace(path)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf, self.pos = buf, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointError("checkpoint truncated")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def str(self) -> str:
        return self.take(self.u32()).decode("utf-8")


def checkpoint_load(path) -> Checkpoint:
    buf = Path(path).read_bytes()
    if buf[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint")
    r = _Reader(buf)
    r.take(4)
    version = r.u32()
    if version != VERSION:
        raise CheckpointError(f"{path}: checkpoint version {version} unsupported (expected {VERSION})")
    try:
        header = json.loads(r.str())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: corrupt checkpoint header") from e
    groups: Dict[str, Dict[str, np.ndarray]] = {"param": {}, "buffer": {}, "adam.m": {}, "adam.v": {}}
    for _ in range(r.u32()):
        name = r.str()
        rank = r.u32()
        dims = tuple(r.u32() for _ in range(rank))
        count = int(np.prod(dims)) if dims else 1
        arr = np.frombuffer(r.take(4 * count), dtype="<f4").reshape(dims).astype(np.float32)
        kind, _, key = name.partition(":")
        if kind not in groups:
            raise CheckpointError(f"{path}: unknown record {name!r}")
        groups[kind][key] = arr
    if r.pos != len(buf):
        raise CheckpointError(f"{path}: {len(buf) - r.pos} trailing bytes after last record")
    adam = None
    if "adam" in header:
        a = header["adam"]
        adam = AdamState(groups["adam.m"], groups["adam.v"], a["t"], a["beta1"], a["beta2"], a["eps"])
    cfg = ModelConfig.from_dict(header["model"])
    ckpt = Checkpoint(cfg, groups["param"], groups["buffer"], adam, header["step"], header.get("rng", {}), version)
    ckpt.build()  # validates names and shapes against the config before anything is returned
    return ckpt
