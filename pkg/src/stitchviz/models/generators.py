"""Desk-scale generators with named, injectable layers.

Two families:

* ProgressiveUpsampler: style-free progressive upsampler. Blocks named
  b4.conv0 .. b{out}.conv0; each block's convolution input (the feature map
  after the preceding nearest-neighbor upscale) is the injection point, and
  per-block noise keyed by the seed keeps downstream variation alive after
  an injection.
* UNetNoiseGenerator: a UNet whose only input is a full-resolution Gaussian
  noise field derived from the seed. The upsample path concatenates skip
  features channelwise after nearest-neighbor upscaling; each upsample
  layer's incoming feature map (before its upscale) is injectable.

Sampling distances count the factor-2 upscalings between the injected tensor
and the output image.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..core import nearest_resize_tensor
from .adapters import noise_field


def _batch_noise(seeds, tag: str, shape) -> torch.Tensor:
    return torch.stack([noise_field(s, tag, shape) for s in seeds])


class ProgressiveUpsampler(nn.Module):
    DEFAULT_CHANNELS = {4: 64, 8: 64, 16: 48, 32: 32, 64: 16, 128: 8}

    def __init__(self, output_resolution: int = 128, latent_dim: int = 64,
                 base_resolution: int = 4, channels: dict | None = None):
        super().__init__()
        self.output_resolution = output_resolution
        self.latent_dim = latent_dim
        self.base_resolution = base_resolution
        self.resolutions = []
        res = base_resolution
        while res <= output_resolution:
            self.resolutions.append(res)
            res *= 2
        if self.resolutions[-1] != output_resolution:
            raise ValueError("output_resolution must be base_resolution * 2^k")
        if channels is None:
            channels = {r: self.DEFAULT_CHANNELS.get(r, 8) for r in self.resolutions}
        self.channels = channels

        c0 = channels[base_resolution]
        self.fc = nn.Linear(latent_dim, c0 * base_resolution * base_resolution)
        convs = []
        self._in_channels = []
        prev = c0
        for res in self.resolutions:
            cin = c0 if res == base_resolution else prev
            cout = channels[res]
            convs.append(nn.Conv2d(cin, cout, 3, 1, 1))
            self._in_channels.append(cin)
            prev = cout
        self.convs = nn.ModuleList(convs)
        self.noise_scales = nn.Parameter(torch.full((len(self.resolutions),), 0.1))
        self.head = nn.Conv2d(prev, 3, 1)

    def layer_name(self, res: int) -> str:
        return f"b{res}.conv0"

    def injectable_layers(self):
        out = []
        for i, res in enumerate(self.resolutions):
            distance = int(math.log2(self.output_resolution // res))
            out.append((self.layer_name(res), self._in_channels[i], res, distance))
        return out

    def _names(self):
        return [self.layer_name(r) for r in self.resolutions]

    def forward_gen(self, seeds, inject=None, injected=None):
        out, _ = self._run(seeds, inject, injected, capture=None)
        return out

    def capture_input(self, seeds, name: str) -> torch.Tensor:
        _, captured = self._run(seeds, None, None, capture=name)
        return captured

    def _run(self, seeds, inject, injected, capture):
        names = self._names()
        start = names.index(inject) if inject is not None else 0
        captured = None
        x = None
        for i in range(start, len(self.resolutions)):
            res = self.resolutions[i]
            if inject is not None and i == start:
                inp = injected
            elif i == 0:
                z = _batch_noise(seeds, "latent", (self.latent_dim,))
                inp = self.fc(z).view(len(seeds), self.channels[self.base_resolution],
                                      self.base_resolution, self.base_resolution)
            else:
                inp = nearest_resize_tensor(x, res, res)
            if capture == names[i]:
                captured = inp.detach().clone()
            h = self.convs[i](inp)
            h = h + self.noise_scales[i] * _batch_noise(seeds, f"b{res}.noise", (1, res, res))
            x = F.leaky_relu(h, 0.2)
        return torch.tanh(self.head(x)), captured


class UNetNoiseGenerator(nn.Module):
    """UNet over a seed-derived Gaussian noise field; no latent vector."""

    def __init__(self, output_resolution: int = 96, noise_channels: int = 8,
                 widths: tuple = (16, 32, 64)):
        super().__init__()
        if output_resolution % 8 != 0:
            raise ValueError("output_resolution must be divisible by 8 (3 down/up levels)")
        self.output_resolution = output_resolution
        self.noise_channels = noise_channels
        self.latent_dim = 0
        self.widths = widths
        w1, w2, w3 = widths

        self.enc0 = nn.Conv2d(noise_channels, w1, 3, 1, 1)
        self.down1 = nn.Conv2d(w1, w2, 3, 2, 1)
        self.enc1 = nn.Conv2d(w2, w2, 3, 1, 1)
        self.down2 = nn.Conv2d(w2, w3, 3, 2, 1)
        self.enc2 = nn.Conv2d(w3, w3, 3, 1, 1)
        self.down3 = nn.Conv2d(w3, w3, 3, 2, 1)
        self.bottom = nn.Conv2d(w3, w3, 3, 1, 1)
        # up blocks: upscale the below input, concat the skip, then convolve
        self.up2 = nn.Conv2d(w3 + w3, w3, 3, 1, 1)
        self.up1 = nn.Conv2d(w3 + w2, w2, 3, 1, 1)
        self.up0 = nn.Conv2d(w2 + w1, w1, 3, 1, 1)
        self.head = nn.Conv2d(w1, 3, 3, 1, 1)

    def injectable_layers(self):
        res = self.output_resolution
        w1, w2, w3 = self.widths
        # name carries the spatial size of the injected (pre-upscale) tensor
        return [
            (f"up{res // 2}.in", w2, res // 2, 1),
            (f"up{res // 4}.in", w3, res // 4, 2),
            (f"up{res // 8}.in", w3, res // 8, 3),
        ]

    def forward_gen(self, seeds, inject=None, injected=None):
        out, _ = self._run(seeds, inject, injected, capture=None)
        return out

    def capture_input(self, seeds, name: str) -> torch.Tensor:
        _, captured = self._run(seeds, None, None, capture=name)
        return captured

    def _run(self, seeds, inject, injected, capture):
        res = self.output_resolution
        names = [f"up{res // 8}.in", f"up{res // 4}.in", f"up{res // 2}.in"]
        act = lambda t: F.leaky_relu(t, 0.2)

        # the down path always runs: skips carry the seed's variation
        noise = _batch_noise(seeds, "input_noise", (self.noise_channels, res, res))
        s0 = act(self.enc0(noise))
        s1 = act(self.enc1(self.down1(s0)))
        s2 = act(self.enc2(self.down2(s1)))

        captured = None
        start = names.index(inject) if inject is not None else 0
        x = None
        if inject is None:
            x = act(self.bottom(self.down3(s2)))
        up_stages = [(self.up2, s2, res // 4), (self.up1, s1, res // 2), (self.up0, s0, res)]
        for i, (conv, skip, target) in enumerate(up_stages):
            if i < start:
                continue  # below-path work before the injection point is skipped
            if inject == names[i]:
                x = injected
            if capture == names[i]:
                captured = x.detach().clone()
            x = act(conv(torch.cat([nearest_resize_tensor(x, target, target), skip], dim=1)))
        return torch.sigmoid(self.head(x)), captured
