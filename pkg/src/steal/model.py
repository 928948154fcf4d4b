"""3-D convolutional autoencoder over T x C x H x W clips.

No memory module between encoder and decoder; a tanh output keeps
reconstructions in [-1, 1].
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn

from .dataset import Clip


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # conv3d | deconv3d
    in_channels: int
    out_channels: int
    kernel: tuple[int, int, int] = (3, 3, 3)
    stride: tuple[int, int, int] = (2, 2, 2)
    normalization: str = "batch"  # batch | none
    activation: str = "leaky_relu"  # leaky_relu | tanh | none

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        return cls(**{**d, "kernel": tuple(d["kernel"]), "stride": tuple(d["stride"])})


@dataclass(frozen=True)
class Preset:
    name: str
    input_shape: tuple[int, int, int, int]  # T, C, H, W
    encoder: tuple[LayerSpec, ...]
    decoder: tuple[LayerSpec, ...]


def _schedule(channels: list[int], strides: list[tuple[int, int, int]]):
    enc = tuple(
        LayerSpec("conv3d", ci, co, stride=st)
        for ci, co, st in zip(channels[:-1], channels[1:], strides)
    )
    rev_ch = channels[::-1]
    rev_st = strides[::-1]
    dec = []
    for i, (ci, co, st) in enumerate(zip(rev_ch[:-1], rev_ch[1:], rev_st)):
        last = i == len(rev_st) - 1
        dec.append(LayerSpec(
            "deconv3d", ci, co, stride=st,
            normalization="none" if last else "batch",
            activation="tanh" if last else "leaky_relu",
        ))
    return enc, tuple(dec)


def _preset(name: str, shape, channels, strides) -> Preset:
    enc, dec = _schedule(channels, strides)
    return Preset(name, shape, enc, dec)


PRESETS = {
    "paper": _preset(
        "paper", (16, 1, 256, 256), [1, 96, 128, 256, 256],
        [(1, 2, 2), (2, 2, 2), (2, 2, 2), (2, 2, 2)],
    ),
    "desk": _preset(
        "desk", (8, 1, 64, 64), [1, 32, 48, 64],
        [(1, 2, 2), (2, 2, 2), (2, 2, 2)],
    ),
}


def _make_layer(spec: LayerSpec) -> nn.Sequential:
    pad = tuple(k // 2 for k in spec.kernel)
    if spec.kind == "conv3d":
        conv = nn.Conv3d(spec.in_channels, spec.out_channels, spec.kernel, spec.stride, pad)
    elif spec.kind == "deconv3d":
        # output_padding = stride - 1 exactly inverts a padded stride-s conv on even sizes
        out_pad = tuple(s - 1 for s in spec.stride)
        conv = nn.ConvTranspose3d(
            spec.in_channels, spec.out_channels, spec.kernel, spec.stride, pad, output_padding=out_pad
        )
    else:
        raise ValueError(f"unknown layer kind {spec.kind!r}")
    mods: list[nn.Module] = [conv]
    if spec.normalization == "batch":
        mods.append(nn.BatchNorm3d(spec.out_channels))
    elif spec.normalization != "none":
        raise ValueError(f"unknown normalization {spec.normalization!r}")
    if spec.activation == "leaky_relu":
        mods.append(nn.LeakyReLU(0.2))
    elif spec.activation == "tanh":
        mods.append(nn.Tanh())
    elif spec.activation != "none":
        raise ValueError(f"unknown activation {spec.activation!r}")
    return nn.Sequential(*mods)


class Autoencoder(nn.Module):
    """Encoder/decoder stack. Accepts (B, T, C, H, W) or a single (T, C, H, W) clip."""

    def __init__(self, preset: Preset):
        super().__init__()
        self.preset = preset
        self.encoder = nn.Sequential(*[_make_layer(s) for s in preset.encoder])
        self.decoder = nn.Sequential(*[_make_layer(s) for s in preset.decoder])

    @property
    def input_shape(self) -> tuple[int, int, int, int]:
        return self.preset.input_shape

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        single = x.dim() == 4
        if single:
            x = x.unsqueeze(0)
        if tuple(x.shape[1:]) != self.input_shape:
            raise ValueError(
                f"input shape {tuple(x.shape[1:])} does not match preset "
                f"{self.preset.name} {self.input_shape}"
            )
        z = self.encoder(x.transpose(1, 2))  # -> B, C, T, H, W
        out = self.decoder(z).transpose(1, 2)
        return out[0] if single else out

    def schedule(self) -> dict:
        return {
            "preset": self.preset.name,
            "input_shape": list(self.preset.input_shape),
            "encoder": [asdict(s) for s in self.preset.encoder],
            "decoder": [asdict(s) for s in self.preset.decoder],
        }

    @classmethod
    def from_schedule(cls, sched: dict) -> "Autoencoder":
        preset = Preset(
            sched["preset"],
            tuple(sched["input_shape"]),
            tuple(LayerSpec.from_dict(d) for d in sched["encoder"]),
            tuple(LayerSpec.from_dict(d) for d in sched["decoder"]),
        )
        return cls(preset)


def get_preset(name: str, clip_length: int | None = None, size: tuple[int, int] | None = None) -> Preset:
    """Named preset, optionally with a different clip length or frame size.

    Overrides must stay divisible by the preset's cumulative strides.
    """
    try:
        p = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    T, C, H, W = p.input_shape
    T = clip_length or T
    H, W = size or (H, W)
    total = np.prod([s.stride for s in p.encoder], axis=0)
    for dim, n, f in (("T", T, total[0]), ("H", H, total[1]), ("W", W, total[2])):
        if n % f:
            raise ValueError(f"{name} preset needs {dim} divisible by {f}, got {n}")
    return Preset(p.name, (T, C, H, W), p.encoder, p.decoder)


def init_params(preset: str | Preset, seed: int, **overrides) -> Autoencoder:
    """Fresh model with He fan-in weights drawn from a generator seeded by ``seed``."""
    if isinstance(preset, str):
        preset = get_preset(preset, **overrides)
    model = Autoencoder(preset)
    g = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for m in model.modules():
            if isinstance(m, (nn.Conv3d, nn.ConvTranspose3d)):
                nn.init.kaiming_normal_(
                    m.weight, a=0.2, mode="fan_in", nonlinearity="leaky_relu", generator=g
                )
                nn.init.zeros_(m.bias)
    return model


def forward(model: Autoencoder, x) -> torch.Tensor:
    """Reconstruct a clip, clip array or batch; returns a tensor of the same shape."""
    if isinstance(x, Clip):
        x = x.data
    if isinstance(x, np.ndarray):
        x = torch.from_numpy(x)
    dtype = next(model.parameters()).dtype
    return model(x.to(dtype))


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def model_info(preset: str) -> dict:
    m = init_params(preset, 0)
    rows = []
    for part, specs in (("encoder", m.preset.encoder), ("decoder", m.preset.decoder)):
        for s in specs:
            rows.append(f"{part:7s} {s.kind:8s} {s.in_channels:4d}->{s.out_channels:<4d} "
                        f"k={s.kernel} s={s.stride} norm={s.normalization} act={s.activation}")
    return {
        "preset": preset,
        "input_shape": m.input_shape,
        "parameters": count_parameters(m),
        "layers": rows,
    }
