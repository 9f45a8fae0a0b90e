"""Gradient-descent inversion baselines.

Both methods optimize a latent z so that the encoder's activations of
sigmoid(h(z)) match a target feature map, using Adam and an L1 loss:

* PLAIN: z lives directly in pre-sigmoid pixel space, no augmentation.
* FFT_DEC: z is a complex half-spectrum per color-decorrelated channel;
  h applies per-frequency energy scaling, an inverse real FFT, and a fixed
  3x3 color correlation. A one-pixel jitter augments each step to suppress
  high-frequency noise in the result.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .core import (
    ActivationTensor,
    ImageTensor,
    InversionResult,
    from_unit_tensor,
)
from .models.adapters import EncoderAdapter, derived_seed

# Channel correlation factor from ImageNet statistics as used in the
# feature-visualization literature, normalized to unit spectral norm.
_COLOR_CORRELATION_SQRT = (
    (0.26, 0.09, 0.02),
    (0.27, 0.00, -0.05),
    (0.27, -0.09, 0.03),
)


def default_color_matrix() -> torch.Tensor:
    m = torch.tensor(_COLOR_CORRELATION_SQRT, dtype=torch.float64)
    return (m / torch.linalg.matrix_norm(m, ord=2)).float()


def frequency_scale(height: int, width: int) -> torch.Tensor:
    """Per-coefficient energy scaling 1/max(f, 1/max(H, W)) on the rfft2 grid."""
    fy = np.fft.fftfreq(height)[:, None]
    fx = np.fft.rfftfreq(width)[None, :]
    f = np.sqrt(fy**2 + fx**2)
    scale = 1.0 / np.maximum(f, 1.0 / max(height, width))
    return torch.from_numpy(scale).float()


def fft_param_to_image(z: torch.Tensor, height: int, width: int,
                       scale: torch.Tensor | None = None,
                       color_matrix: torch.Tensor | None = None) -> torch.Tensor:
    """The FFT_DEC h: spectrum -> pre-sigmoid image.

    z is (3, H, W//2+1) complex or (3, H, W//2+1, 2) real/imag. Pass
    scale=None for the default energy scaling; an all-ones scale together
    with an identity color matrix makes this the exact inverse of rfft2.
    """
    spectrum = torch.view_as_complex(z) if not torch.is_complex(z) else z
    if scale is None:
        scale = frequency_scale(height, width)
    img = torch.fft.irfft2(spectrum * scale, s=(height, width))
    if color_matrix is None:
        color_matrix = default_color_matrix()
    return torch.einsum("rc,chw->rhw", color_matrix.to(img.dtype), img)


def jitter_tensor(data: torch.Tensor, dx: int, dy: int) -> torch.Tensor:
    """Reflection-pad by 2, shift content by (dx, dy), crop back to size."""
    h, w = data.shape[-2], data.shape[-1]
    batched = data if data.ndim == 4 else data.unsqueeze(0)
    padded = F.pad(batched, (2, 2, 2, 2), mode="reflect")
    top, left = 2 - dy, 2 - dx
    out = padded[..., top : top + h, left : left + w]
    return out if data.ndim == 4 else out.squeeze(0)


def jitter_one_pixel(img: ImageTensor, rng: np.random.Generator) -> ImageTensor:
    dx, dy = int(rng.integers(-1, 2)), int(rng.integers(-1, 2))
    return ImageTensor(jitter_tensor(img.data, dx, dy), img.value_space)


@dataclass(frozen=True)
class GdConfig:
    method: str = "plain"  # "plain" or "fft_dec"
    steps: int = 512
    learning_rate: float = 0.05
    resolution: int = 128
    seed: int = 0
    init_std: float = 0.01
    use_frequency_scale: bool = True
    use_color_matrix: bool = True
    use_jitter: bool = True  # fft_dec only; plain never jitters

    def __post_init__(self):
        if self.method not in ("plain", "fft_dec"):
            raise ValueError(f"unknown gd method: {self.method!r}")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "steps": self.steps,
            "learning_rate": self.learning_rate,
            "resolution": self.resolution,
            "seed": self.seed,
        }


class Parameterization:
    """Bundles the latent shape, h (latent -> pre-sigmoid image), and g (the
    per-step augmentation). Sigma is always the sigmoid."""

    def __init__(self, cfg: GdConfig):
        self.cfg = cfg
        res = cfg.resolution
        gen = torch.Generator().manual_seed(derived_seed(cfg.seed, "gd_init", cfg.method))
        if cfg.method == "plain":
            self.z = torch.randn((3, res, res), generator=gen) * cfg.init_std
            self.scale = None
            self.color = None
        else:
            self.z = torch.randn((3, res, res // 2 + 1, 2), generator=gen) * cfg.init_std
            self.scale = frequency_scale(res, res) if cfg.use_frequency_scale else \
                torch.ones(res, res // 2 + 1)
            self.color = default_color_matrix() if cfg.use_color_matrix else torch.eye(3)
        self.z.requires_grad_(True)
        self._jitter_rng = np.random.default_rng(derived_seed(cfg.seed, "gd_jitter"))

    def h(self, z: torch.Tensor) -> torch.Tensor:
        if self.cfg.method == "plain":
            return z
        return fft_param_to_image(z, self.cfg.resolution, self.cfg.resolution,
                                  self.scale, self.color)

    def g(self, img: torch.Tensor) -> torch.Tensor:
        if self.cfg.method == "plain" or not self.cfg.use_jitter:
            return img
        dx = int(self._jitter_rng.integers(-1, 2))
        dy = int(self._jitter_rng.integers(-1, 2))
        return jitter_tensor(img, dx, dy)

    def image(self) -> torch.Tensor:
        """Current reconstruction sigma(h(z)), without augmentation."""
        with torch.no_grad():
            return torch.sigmoid(self.h(self.z))


def gd_invert(enc: EncoderAdapter, layer_x: str, target: ActivationTensor,
              cfg: GdConfig, on_step=None, should_stop=None) -> InversionResult:
    """Run cfg.steps Adam updates on the latent; returns sigma(h(z)) plus the
    loss trace. A non-finite loss aborts and returns the trace accumulated
    so far with diverged=True."""
    param = Parameterization(cfg)
    opt = torch.optim.Adam([param.z], lr=cfg.learning_rate)
    target_data = target.data.detach().unsqueeze(0)
    trace = []
    diverged = False
    t0 = time.perf_counter()
    steps_done = 0
    for i in range(cfg.steps):
        if should_stop is not None and should_stop():
            break
        img_unit = torch.sigmoid(param.h(param.z))
        aug = param.g(img_unit)
        native = from_unit_tensor(aug, enc.normalization).unsqueeze(0)
        acts = enc.forward_to(native, layer_x)
        loss = (acts - target_data).abs().mean()
        loss_val = float(loss.detach())
        trace.append(loss_val)
        if not np.isfinite(loss_val):
            diverged = True
            break
        opt.zero_grad()
        loss.backward()
        opt.step()
        steps_done = i + 1
        if on_step is not None:
            on_step(i, loss_val, param.image)
    wall = time.perf_counter() - t0
    return InversionResult(
        image=ImageTensor.unit(param.image()),
        method=cfg.method,
        wall_time_s=wall,
        seed=cfg.seed,
        steps=steps_done,
        loss_trace=trace,
        diverged=diverged,
    )
