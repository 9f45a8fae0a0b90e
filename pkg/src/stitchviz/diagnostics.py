"""Grid-artifact gradient analysis.

Strided convolutions read input pixels on a sub-lattice: a 1x1 stride-2
convolution touches one pixel in four, so the other three receive exactly
zero gradient and the input-gradient map shows a checkerboard. Bilinear
downsampling followed by stride-1 convolutions spreads sensitivity over
every pixel. These maps quantify that difference: the zero-gradient
fraction, the lattice period of the zero mask, and a high-frequency
noisiness score of the gradient magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .models.adapters import EncoderAdapter, derived_seed
from .models.encoders import ArchitectureSpec, build_bilinear_variant, build_encoder_net

ZERO_THRESHOLD = 1e-12


@dataclass
class GradientGridMap:
    magnitude: torch.Tensor  # (H, W), |d loss / d input| summed over channels
    zero_fraction: float
    period: int | None

    def to_dict(self) -> dict:
        return {
            "height": int(self.magnitude.shape[0]),
            "width": int(self.magnitude.shape[1]),
            "zero_fraction": self.zero_fraction,
            "period": self.period,
            "noisiness": noisiness_score(self.magnitude),
            "max_magnitude": float(self.magnitude.max()),
        }

    def save_png(self, path) -> None:
        save_heatmap_png(self.magnitude, path)


def detect_grid_period(zero_mask: torch.Tensor) -> int | None:
    """Smallest p >= 1 such that the mask is invariant under shifting by p in
    both axes; None when the mask is constant or aperiodic."""
    mask = zero_mask.bool()
    if bool(mask.all()) or bool((~mask).all()):
        return None
    h, w = mask.shape
    for p in range(1, min(h, w) // 2 + 1):
        if torch.equal(mask[p:, :], mask[:-p, :]) and torch.equal(mask[:, p:], mask[:, :-p]):
            return p
    return None


def gradient_map_of_fn(fn, input_shape, seed: int = 0,
                       zero_threshold: float = ZERO_THRESHOLD) -> GradientGridMap:
    """Gradient magnitude of sum(fn(x)) w.r.t. a random input x of the given
    (C, H, W) shape."""
    gen = torch.Generator().manual_seed(derived_seed(seed, "gradmap"))
    x = torch.randn((1, *input_shape), generator=gen, requires_grad=True)
    out = fn(x)
    out.sum().backward()
    mag = x.grad[0].abs().sum(dim=0)
    zero_mask = mag < zero_threshold
    return GradientGridMap(
        magnitude=mag.detach(),
        zero_fraction=float(zero_mask.float().mean()),
        period=detect_grid_period(zero_mask),
    )


def gradient_grid_map(enc: EncoderAdapter, layer: str, input_size: int | None = None,
                      seed: int = 0) -> GradientGridMap:
    """Adapter entry point: loss is the unweighted sum of the layer's outputs."""
    enc.layer(layer)
    size = input_size or enc.reference_resolution
    return gradient_map_of_fn(lambda x: enc.net.forward_to(x, layer), (3, size, size), seed)


def noisiness_score(magnitude: torch.Tensor) -> float:
    """Fraction of the (mean-removed) gradient map's energy above radial
    frequency 0.25 cycles/pixel; checkerboard patterns live at 0.5."""
    m = (magnitude - magnitude.mean()).double()
    spec = torch.fft.rfft2(m).abs() ** 2
    h, w = m.shape
    fy = torch.from_numpy(np.fft.fftfreq(h))[:, None]
    fx = torch.from_numpy(np.fft.rfftfreq(w))[None, :]
    radial = torch.sqrt(fy**2 + fx**2)
    total = float(spec.sum())
    if total == 0.0:
        return 0.0
    return float(spec[radial >= 0.25].sum() / total)


def compare_variants(spec: ArchitectureSpec, layer: str = "stage2",
                     input_size: int | None = None, seed: int = 0) -> dict:
    """Gradient maps for a randomly initialized, untrained strided encoder and
    its bilinear twin at the same layer, with per-variant noisiness scores."""
    size = input_size or spec.reference_resolution
    strided = build_encoder_net(spec, seed=seed).eval()
    bilinear = build_bilinear_variant(spec, seed=seed).eval()
    maps = {}
    for name, net in (("strided", strided), ("bilinear", bilinear)):
        maps[name] = gradient_map_of_fn(lambda x, n=net: n.forward_to(x, layer),
                                        (3, size, size), seed)
    return {
        "layer": layer,
        "strided": maps["strided"],
        "bilinear": maps["bilinear"],
        "noisiness": {
            "strided": noisiness_score(maps["strided"].magnitude),
            "bilinear": noisiness_score(maps["bilinear"].magnitude),
        },
    }


_HEAT_STOPS = np.array(
    [(0.0, 0.0, 0.05), (0.35, 0.0, 0.55), (0.9, 0.35, 0.1), (1.0, 0.95, 0.75)]
)


def save_heatmap_png(magnitude: torch.Tensor, path) -> None:
    """Write the map as a PNG with a dark-to-warm color scale, normalized per map."""
    from PIL import Image

    arr = magnitude.detach().cpu().numpy().astype(np.float64)
    span = arr.max() - arr.min()
    norm = (arr - arr.min()) / span if span > 0 else np.zeros_like(arr)
    pos = norm * (len(_HEAT_STOPS) - 1)
    lo = np.clip(pos.astype(int), 0, len(_HEAT_STOPS) - 2)
    frac = (pos - lo)[..., None]
    rgb = _HEAT_STOPS[lo] * (1 - frac) + _HEAT_STOPS[lo + 1] * frac
    Image.fromarray((rgb * 255).astype(np.uint8)).save(path)
