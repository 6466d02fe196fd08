"""Finger-UNet: shared encoder, one decoder per task, U-Net skip connections.

Encoder level i: two conv blocks at ``base_channels * 2**i`` channels, the
output saved as skip i, then a downsampler (wavelet attention or 2x2 max
pool). Bottleneck: two conv blocks at ``base_channels * 2**depth``. Each
decoder level: IDWT upsample, concatenate the matching skip on channels, two
conv blocks. A 1x1 projection and head activation produce the task output.

A conv block is conv (depthwise separable or standard, 3x3 same) then batch
norm (optional) then relu.
"""
import json
from dataclasses import asdict, dataclass
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from . import nn
from .tensor import ShapeError, Tensor, concat, rng
from .wavelet import idwt_upsample, wavelet_attention

HEADS = ("enhancement", "minutia", "orientation")
HEAD_CHANNELS = {"enhancement": 1, "minutia": 1, "orientation": 2}
HEAD_ACTIVATION = {"enhancement": nn.sigmoid, "minutia": nn.sigmoid, "orientation": nn.tanh}


class ConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    depth: int = 4
    base_channels: int = 16
    use_wa: bool = True
    use_ds: bool = True
    use_bn: bool = True
    heads: Tuple[str, ...] = HEADS
    input_h: int = 64
    input_w: int = 64
    kernel_size: int = 3
    seed: int = 0

    def __post_init__(self):
        self.heads = tuple(self.heads)
        self.validate()

    def validate(self):
        if self.depth < 1:
            raise ConfigError(f"depth must be >= 1, got {self.depth}")
        if self.base_channels < 1:
            raise ConfigError(f"base_channels must be >= 1, got {self.base_channels}")
        if self.kernel_size % 2 == 0:
            raise ConfigError(f"kernel_size must be odd, got {self.kernel_size}")
        unknown = set(self.heads) - set(HEADS)
        if unknown:
            raise ConfigError(f"unknown heads {sorted(unknown)}; choose from {HEADS}")
        if "enhancement" not in self.heads:
            raise ConfigError("heads must include enhancement")
        if len(set(self.heads)) != len(self.heads):
            raise ConfigError(f"duplicate heads in {self.heads}")
        # canonical order so configs compare equal regardless of flag order
        self.heads = tuple(h for h in HEADS if h in self.heads)
        check_divisible(self.input_h, self.input_w, self.depth)

    def to_json(self) -> str:
        d = asdict(self)
        d["heads"] = list(self.heads)
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def check_divisible(h: int, w: int, depth: int) -> None:
    m = 2 ** depth
    for name, v in (("input_h", h), ("input_w", w)):
        if v < m or v % m:
            raise ConfigError(f"{name}={v} is not divisible by 2**depth={m}")


class ConvBlock:
    def __init__(self, c_in: int, c_out: int, cfg: ModelConfig, gen: np.random.Generator):
        k = cfg.kernel_size
        self.conv = nn.DSConvParams.init(c_in, c_out, k, gen) if cfg.use_ds else nn.ConvParams.init(c_in, c_out, k, gen)
        self.bn = nn.BatchNormState.init(c_out) if cfg.use_bn else None

    def __call__(self, x: Tensor, train: bool) -> Tensor:
        y = self.conv(x)
        if self.bn is not None:
            y = nn.batch_norm2d(y, self.bn, train)
        return nn.relu(y)

    def named_parameters(self, prefix):
        yield from self.conv.named_parameters(prefix + "conv.")
        if self.bn is not None:
            yield from self.bn.named_parameters(prefix + "bn.")

    def named_buffers(self, prefix):
        if self.bn is not None:
            yield from self.bn.named_buffers(prefix + "bn.")


@dataclass
class TaskOutputs:
    enhanced: Tensor
    minutia_map: Optional[Tensor] = None
    orientation: Optional[Tensor] = None


class FingerUNet:
    def __init__(self, cfg: ModelConfig):
        cfg.validate()
        self.cfg = cfg
        gen = rng(cfg.seed)
        widths = [cfg.base_channels * 2 ** i for i in range(cfg.depth)]
        self.widths = widths
        self.encoder: List[Tuple[ConvBlock, ConvBlock]] = []
        c = 1
        for w in widths:
            self.encoder.append((ConvBlock(c, w, cfg, gen), ConvBlock(w, w, cfg, gen)))
            c = w
        bott = cfg.base_channels * 2 ** cfg.depth
        self.bottleneck = (ConvBlock(c, bott, cfg, gen), ConvBlock(bott, bott, cfg, gen))
        self.decoders: Dict[str, List[Tuple[ConvBlock, ConvBlock]]] = {}
        self.projections: Dict[str, nn.ConvParams] = {}
        for head in cfg.heads:
            levels = []
            c = bott
            for w in reversed(widths):
                levels.append((ConvBlock(c + w, w, cfg, gen), ConvBlock(w, w, cfg, gen)))
                c = w
            self.decoders[head] = levels
            self.projections[head] = nn.ConvParams.init(widths[0], HEAD_CHANNELS[head], 1, gen)

    def downsample(self, x: Tensor) -> Tensor:
        return wavelet_attention(x) if self.cfg.use_wa else nn.max_pool2d(x)

    def named_parameters(self) -> Iterator[Tuple[str, Tensor]]:
        for i, (b1, b2) in enumerate(self.encoder):
            yield from b1.named_parameters(f"enc.{i}.0.")
            yield from b2.named_parameters(f"enc.{i}.1.")
        yield from self.bottleneck[0].named_parameters("bottleneck.0.")
        yield from self.bottleneck[1].named_parameters("bottleneck.1.")
        for head, levels in self.decoders.items():
            for i, (b1, b2) in enumerate(levels):
                yield from b1.named_parameters(f"dec.{head}.{i}.0.")
                yield from b2.named_parameters(f"dec.{head}.{i}.1.")
            yield from self.projections[head].named_parameters(f"head.{head}.")

    def named_buffers(self) -> Iterator[Tuple[str, np.ndarray]]:
        for i, (b1, b2) in enumerate(self.encoder):
            yield from b1.named_buffers(f"enc.{i}.0.")
            yield from b2.named_buffers(f"enc.{i}.1.")
        yield from self.bottleneck[0].named_buffers("bottleneck.0.")
        yield from self.bottleneck[1].named_buffers("bottleneck.1.")
        for head, levels in self.decoders.items():
            for i, (b1, b2) in enumerate(levels):
                yield from b1.named_buffers(f"dec.{head}.{i}.0.")
                yield from b2.named_buffers(f"dec.{head}.{i}.1.")

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def encode(self, x: Tensor, train: bool):
        skips = []
        for b1, b2 in self.encoder:
            x = b2(b1(x, train), train)
            skips.append(x)
            x = self.downsample(x)
        x = self.bottleneck[1](self.bottleneck[0](x, train), train)
        return x, skips

    def decode(self, head: str, x: Tensor, skips: List[Tensor], train: bool) -> Tensor:
        for (b1, b2), skip in zip(self.decoders[head], reversed(skips)):
            x = idwt_upsample(x)
            x = concat([x, skip], axis=1)
            x = b2(b1(x, train), train)
        return HEAD_ACTIVATION[head](self.projections[head](x))

    def forward(self, x: Tensor, train: bool = False, strict: bool = True) -> TaskOutputs:
        """``strict`` requires the configured input dims; otherwise only divisibility is checked."""
        if x.ndim != 4 or x.shape[1] != 1:
            raise ShapeError(f"input must be (n, 1, H, W), got {x.shape}")
        h, w = x.shape[2], x.shape[3]
        if strict and (h, w) != (self.cfg.input_h, self.cfg.input_w):
            raise ShapeError(f"input {h}x{w} does not match configured {self.cfg.input_h}x{self.cfg.input_w}")
        check_divisible(h, w, self.cfg.depth)
        z, skips = self.encode(x, train)
        outs = {head: self.decode(head, z, skips, train) for head in self.cfg.heads}
        return TaskOutputs(outs["enhancement"], outs.get("minutia"), outs.get("orientation"))

    __call__ = forward


def build_model(cfg: ModelConfig) -> FingerUNet:
    return FingerUNet(cfg)


def param_count(m) -> int:
    """Trainable element count; batch-norm running statistics are excluded."""
    return int(sum(p.size for _, p in m.named_parameters()))
