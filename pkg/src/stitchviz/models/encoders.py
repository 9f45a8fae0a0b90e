"""Desk-scale residual encoders with a ResNet-like stride schedule.

The strided family mirrors ResNet's shape: stem stride 2, pooling, then four
stages whose outputs sit 2..5 sampling steps from the input. The bilinear
family swaps every strided convolution for bilinear downsampling followed by
a stride-1 convolution, drops the pooling layer in favor of another bilinear
step, and removes the 1x1 downsampling skip convolutions (those blocks lose
their residual connection entirely).
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F


@dataclass(frozen=True)
class ArchitectureSpec:
    family: str
    stage_widths: tuple = (16, 32, 64, 128)
    blocks_per_stage: int = 1
    downsampling: str = "strided"  # per-stage style; "strided" or "bilinear"
    reference_resolution: int = 128
    num_classes: int = 6
    # generator-only fields
    output_resolution: int = 128
    latent_dim: int = 64
    base_resolution: int = 4
    noise_channels: int = 8

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "stage_widths": list(self.stage_widths),
            "blocks_per_stage": self.blocks_per_stage,
            "downsampling": self.downsampling,
            "reference_resolution": self.reference_resolution,
            "num_classes": self.num_classes,
            "output_resolution": self.output_resolution,
            "latent_dim": self.latent_dim,
            "base_resolution": self.base_resolution,
            "noise_channels": self.noise_channels,
        }

    @staticmethod
    def from_dict(d: dict) -> "ArchitectureSpec":
        d = dict(d)
        d["stage_widths"] = tuple(d.get("stage_widths", (16, 32, 64, 128)))
        return ArchitectureSpec(**d)


def bilinear_down(x: torch.Tensor) -> torch.Tensor:
    h, w = x.shape[-2], x.shape[-1]
    return F.interpolate(x, size=((h + 1) // 2, (w + 1) // 2), mode="bilinear", align_corners=False)


class ResidualBlock(nn.Module):
    def __init__(self, cin: int, cout: int, stride: int, bilinear: bool):
        super().__init__()
        self.stride = stride
        self.bilinear = bilinear
        if bilinear and stride > 1:
            self.conv1 = nn.Conv2d(cin, cout, 3, 1, 1)
        else:
            self.conv1 = nn.Conv2d(cin, cout, 3, stride, 1)
        self.bn1 = nn.BatchNorm2d(cout)
        self.conv2 = nn.Conv2d(cout, cout, 3, 1, 1)
        self.bn2 = nn.BatchNorm2d(cout)
        if stride == 1 and cin == cout:
            self.skip = nn.Identity()
        elif bilinear:
            self.skip = None  # downsampling skip convolution removed
        else:
            self.skip = nn.Sequential(nn.Conv2d(cin, cout, 1, stride), nn.BatchNorm2d(cout))

    def forward(self, x):
        inp = x
        if self.bilinear and self.stride > 1:
            inp = bilinear_down(inp)
        h = F.relu(self.bn1(self.conv1(inp)))
        h = self.bn2(self.conv2(h))
        if self.skip is not None:
            h = h + self.skip(x)
        return F.relu(h)


class DeskEncoder(nn.Module):
    """Four-stage residual classifier exposing stage1..stage4 as named layers."""

    STAGE_DISTANCES = {"stage1": 2, "stage2": 3, "stage3": 4, "stage4": 5}

    def __init__(self, spec: ArchitectureSpec):
        super().__init__()
        if spec.family not in ("resnet_small", "resnet_small_bilinear"):
            raise ValueError(f"unsupported encoder family: {spec.family!r}")
        bilinear = spec.family == "resnet_small_bilinear"
        self.spec = spec
        w = spec.stage_widths
        if bilinear:
            self.stem_conv = nn.Conv2d(3, w[0], 3, 1, 1)
        else:
            self.stem_conv = nn.Conv2d(3, w[0], 3, 2, 1)
        self.stem_bn = nn.BatchNorm2d(w[0])
        self.pool = None if bilinear else nn.MaxPool2d(3, 2, 1)
        self.bilinear = bilinear

        def stage(cin, cout, stride):
            blocks = [ResidualBlock(cin, cout, stride, bilinear)]
            for _ in range(spec.blocks_per_stage - 1):
                blocks.append(ResidualBlock(cout, cout, 1, bilinear))
            return nn.Sequential(*blocks)

        self.stage1 = stage(w[0], w[0], 1)
        self.stage2 = stage(w[0], w[1], 2)
        self.stage3 = stage(w[1], w[2], 2)
        self.stage4 = stage(w[2], w[3], 2)
        self.fc = nn.Linear(w[3], spec.num_classes)

    def layer_schedule(self):
        return [(name, dist) for name, dist in self.STAGE_DISTANCES.items()]

    def _stem(self, x):
        if self.bilinear:
            x = bilinear_down(x)
            x = F.relu(self.stem_bn(self.stem_conv(x)))
            return bilinear_down(x)
        x = F.relu(self.stem_bn(self.stem_conv(x)))
        return self.pool(x)

    def forward_to(self, x: torch.Tensor, layer_name: str) -> torch.Tensor:
        x = self._stem(x)
        for name in ("stage1", "stage2", "stage3", "stage4"):
            x = getattr(self, name)(x)
            if name == layer_name:
                return x
        raise KeyError(layer_name)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.forward_to(x, "stage4")
        x = F.adaptive_avg_pool2d(x, 1).flatten(1)
        return self.fc(x)


class IdentityEncoderNet(nn.Module):
    """Zero-stage encoder: the 'activation' is the input image itself."""

    def __init__(self, reference_resolution: int = 128):
        super().__init__()
        self.reference_resolution = reference_resolution
        # keep state_dict non-empty so checkpoint plumbing stays uniform
        self.register_buffer("_marker", torch.zeros(1))

    def layer_schedule(self):
        return [("input", 0)]

    def forward_to(self, x: torch.Tensor, layer_name: str) -> torch.Tensor:
        if layer_name != "input":
            raise KeyError(layer_name)
        return x

    def forward(self, x):
        return x


def _init_weights(net: nn.Module, seed: int) -> None:
    gen = torch.Generator().manual_seed(seed)
    for module in net.modules():
        if isinstance(module, (nn.Conv2d, nn.Linear)):
            fan_in = module.weight.shape[1] * (
                module.weight.shape[2] * module.weight.shape[3] if module.weight.ndim == 4 else 1
            )
            std = (2.0 / fan_in) ** 0.5
            with torch.no_grad():
                module.weight.copy_(torch.randn(module.weight.shape, generator=gen) * std)
                if module.bias is not None:
                    module.bias.zero_()


def build_encoder_net(spec: ArchitectureSpec, seed: int = 0) -> nn.Module:
    if spec.family == "identity":
        return IdentityEncoderNet(spec.reference_resolution)
    net = DeskEncoder(spec)
    _init_weights(net, seed)
    return net


def build_bilinear_variant(spec: ArchitectureSpec, seed: int = 0) -> DeskEncoder:
    """The gradient-friendly twin of a strided encoder: same widths and layer
    names, bilinear downsampling, stride-1 convolutions only, no pooling, no
    downsampling skip convolutions."""
    if spec.family != "resnet_small":
        raise ValueError(f"bilinear variant requires family 'resnet_small', got {spec.family!r}")
    bspec = ArchitectureSpec(**{**spec.to_dict(), "family": "resnet_small_bilinear",
                                "downsampling": "bilinear",
                                "stage_widths": spec.stage_widths})
    net = DeskEncoder(bspec)
    _init_weights(net, seed)
    return net
