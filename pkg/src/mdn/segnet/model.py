"""UNet-style encoder-decoder with a 1x1 convolutional mask head.

The encoder halves resolution per level with two 3x3 convolutions (optional
residual shortcut) and max pooling; the decoder mirrors it with transposed
convolutions and channel-concatenation skip connections, optionally gated by
an additive attention block. The head emits one logit per pixel. All
initialization is driven by an explicit torch.Generator so two builds with
the same seed are weight-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import InvalidConfigError, ShapeMismatchError


@dataclass(frozen=True)
class SegModelConfig:
    depth: int = 3
    base_channels: int = 8
    input_size: int = 256
    in_channels: int = 3
    use_attention: bool = False
    residual_encoder_blocks: bool = True

    def __post_init__(self):
        if self.depth < 2:
            raise InvalidConfigError(f"depth must be >= 2, got {self.depth}")
        if self.base_channels < 1:
            raise InvalidConfigError("base_channels must be >= 1")
        if self.in_channels != 3:
            raise InvalidConfigError("in_channels is fixed at 3")
        if self.input_size < 1 or self.input_size % (2 ** self.depth) != 0:
            raise InvalidConfigError(
                f"input_size {self.input_size} must be divisible by 2^depth = {2 ** self.depth}"
            )

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "base_channels": self.base_channels,
            "input_size": self.input_size,
            "in_channels": self.in_channels,
            "use_attention": self.use_attention,
            "residual_encoder_blocks": self.residual_encoder_blocks,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SegModelConfig":
        allowed = {"depth", "base_channels", "input_size", "in_channels",
                   "use_attention", "residual_encoder_blocks"}
        unknown = set(d) - allowed
        if unknown:
            raise InvalidConfigError(f"unknown SegModelConfig fields: {sorted(unknown)}")
        return cls(**d)


class ConvBlock(nn.Module):
    """Two 3x3 convolutions; optionally a residual shortcut around them."""

    def __init__(self, in_ch: int, out_ch: int, residual: bool):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.residual = residual
        self.shortcut = None
        if residual and in_ch != out_ch:
            self.shortcut = nn.Conv2d(in_ch, out_ch, 1)

    def forward(self, x):
        h = self.conv2(F.relu(self.conv1(x)))
        if self.residual:
            h = h + (self.shortcut(x) if self.shortcut is not None else x)
        return F.relu(h)


class AttentionGate(nn.Module):
    """Additive attention over a skip connection, gated by the decoder path."""

    def __init__(self, gate_ch: int, skip_ch: int):
        super().__init__()
        inter = max(1, skip_ch // 2)
        self.w_gate = nn.Conv2d(gate_ch, inter, 1)
        self.w_skip = nn.Conv2d(skip_ch, inter, 1)
        self.psi = nn.Conv2d(inter, 1, 1)

    def forward(self, gate, skip):
        a = torch.sigmoid(self.psi(F.relu(self.w_gate(gate) + self.w_skip(skip))))
        return skip * a


class UNet(nn.Module):
    """Encoder-decoder feature extractor plus per-pixel logit head."""

    def __init__(self, config: SegModelConfig):
        super().__init__()
        self.config = config
        res = config.residual_encoder_blocks
        enc_chans = [config.base_channels * (2 ** i) for i in range(config.depth)]
        bottleneck_ch = config.base_channels * (2 ** config.depth)

        self.encoders = nn.ModuleList()
        prev = config.in_channels
        for ch in enc_chans:
            self.encoders.append(ConvBlock(prev, ch, residual=res))
            prev = ch
        self.pool = nn.MaxPool2d(2)
        self.bottleneck = ConvBlock(prev, bottleneck_ch, residual=res)

        self.upsamplers = nn.ModuleList()
        self.decoders = nn.ModuleList()
        self.attention = nn.ModuleList() if config.use_attention else None
        prev = bottleneck_ch
        for ch in reversed(enc_chans):
            self.upsamplers.append(nn.ConvTranspose2d(prev, ch, 2, stride=2))
            if self.attention is not None:
                self.attention.append(AttentionGate(ch, ch))
            self.decoders.append(ConvBlock(2 * ch, ch, residual=False))
            prev = ch
        self.head = nn.Conv2d(enc_chans[0], 1, 1)

    def forward(self, x):
        skips = []
        for encoder in self.encoders:
            x = encoder(x)
            skips.append(x)
            x = self.pool(x)
        x = self.bottleneck(x)
        for i, (up, decoder) in enumerate(zip(self.upsamplers, self.decoders)):
            x = up(x)
            skip = skips[-(i + 1)]
            if self.attention is not None:
                skip = self.attention[i](x, skip)
            x = decoder(torch.cat([x, skip], dim=1))
        return self.head(x)


def _init_parameters(model: nn.Module, seed: int) -> None:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init from a dedicated generator."""
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for module in model.modules():
            weight = getattr(module, "weight", None)
            if not isinstance(weight, nn.Parameter):
                continue
            fan_in = weight.shape[1] * (weight[0][0].numel() if weight.dim() > 2 else 1)
            bound = 1.0 / math.sqrt(fan_in)
            weight.uniform_(-bound, bound, generator=gen)
            bias = getattr(module, "bias", None)
            if isinstance(bias, nn.Parameter):
                bias.uniform_(-bound, bound, generator=gen)


def build_model(config: SegModelConfig, seed: int, dtype: torch.dtype = torch.float32) -> UNet:
    """Construct a UNet with deterministic, seed-driven initialization."""
    model = UNet(config)
    _init_parameters(model, seed)
    model.to(dtype)
    model.eval()
    return model


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def _check_patch_batch(model: UNet, patches: np.ndarray) -> None:
    cfg = model.config
    if patches.ndim != 4 or patches.shape[3] != cfg.in_channels:
        raise ShapeMismatchError(
            f"expected patches of shape (N, H, W, {cfg.in_channels}), got {patches.shape}"
        )
    stride = 2 ** cfg.depth
    if patches.shape[1] % stride or patches.shape[2] % stride:
        raise ShapeMismatchError(
            f"patch spatial dims {patches.shape[1]}x{patches.shape[2]} must be divisible by {stride}"
        )


def forward(model: UNet, patches: np.ndarray) -> np.ndarray:
    """Run a batch of (N, P, P, 3) patches through the model.

    Input values are expected normalized to [0, 1]; returns (N, P, P)
    sigmoid probabilities in (0, 1) with batch order preserved.
    """
    patches = np.asarray(patches)
    _check_patch_batch(model, patches)
    dtype = next(model.parameters()).dtype
    with torch.no_grad():
        x = torch.from_numpy(np.ascontiguousarray(patches)).to(dtype).permute(0, 3, 1, 2)
        probs = torch.sigmoid(model(x))
    return probs[:, 0].numpy()
