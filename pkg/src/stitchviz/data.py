"""Procedural texture images for desk-scale training and evaluation.

Six texture families double as classification labels for encoder fixture
training. Every sample is a pure function of (dataset seed, index), so
datasets never need to touch disk.
"""

from __future__ import annotations

import numpy as np
import torch

FAMILIES = ("grating", "checker", "blobs", "voronoi", "spectral_noise", "stripes")


def _color(rng) -> np.ndarray:
    return rng.uniform(0.05, 0.95, size=(3, 1, 1))


def _grating(rng, res):
    yy, xx = np.mgrid[0:res, 0:res] / res
    theta = rng.uniform(0, np.pi)
    freq = rng.uniform(2.0, 12.0)
    phase = rng.uniform(0, 2 * np.pi)
    wave = 0.5 + 0.5 * np.sin(2 * np.pi * freq * (np.cos(theta) * xx + np.sin(theta) * yy) + phase)
    c0, c1 = _color(rng), _color(rng)
    return c0 * wave + c1 * (1.0 - wave)


def _checker(rng, res):
    cell = int(rng.integers(4, max(5, res // 4)))
    oy, ox = int(rng.integers(0, cell)), int(rng.integers(0, cell))
    yy, xx = np.mgrid[0:res, 0:res]
    mask = (((yy + oy) // cell + (xx + ox) // cell) % 2).astype(np.float64)
    c0, c1 = _color(rng), _color(rng)
    return c0 * mask + c1 * (1.0 - mask)


def _blobs(rng, res):
    yy, xx = np.mgrid[0:res, 0:res] / res
    img = np.tile(_color(rng) * 0.3, (1, res, res))
    for _ in range(int(rng.integers(4, 10))):
        cy, cx = rng.uniform(0, 1, size=2)
        sigma = rng.uniform(0.04, 0.18)
        bump = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma**2))
        img = img + _color(rng) * bump
    return img / max(1.0, img.max())


def _voronoi(rng, res):
    n = int(rng.integers(5, 14))
    pts = rng.uniform(0, res, size=(n, 2))
    colors = rng.uniform(0.05, 0.95, size=(n, 3))
    yy, xx = np.mgrid[0:res, 0:res]
    d2 = (yy[None] - pts[:, 0, None, None]) ** 2 + (xx[None] - pts[:, 1, None, None]) ** 2
    nearest = d2.argmin(axis=0)
    return colors[nearest].transpose(2, 0, 1)


def _spectral_noise(rng, res):
    alpha = rng.uniform(0.8, 2.5)
    fy = np.fft.fftfreq(res)[:, None]
    fx = np.fft.rfftfreq(res)[None, :]
    f = np.sqrt(fy**2 + fx**2)
    scale = 1.0 / np.maximum(f, 1.0 / res) ** alpha
    img = np.empty((3, res, res))
    for c in range(3):
        spec = (rng.standard_normal(scale.shape) + 1j * rng.standard_normal(scale.shape)) * scale
        img[c] = np.fft.irfft2(spec, s=(res, res))
    img -= img.min(axis=(1, 2), keepdims=True)
    img /= np.maximum(img.max(axis=(1, 2), keepdims=True), 1e-9)
    return img


def _stripes(rng, res):
    horizontal = bool(rng.integers(0, 2))
    img = np.zeros((3, res, res))
    pos = 0
    while pos < res:
        width = int(rng.integers(max(2, res // 32), max(3, res // 6)))
        c = _color(rng)
        if horizontal:
            img[:, pos : pos + width, :] = c
        else:
            img[:, :, pos : pos + width] = c
        pos += width
    return img


_GENERATORS = (_grating, _checker, _blobs, _voronoi, _spectral_noise, _stripes)


def texture_image(seed: int, index: int, res: int = 128) -> tuple[torch.Tensor, int]:
    """Deterministic texture sample: ((3, res, res) float32 in [0, 1], family label)."""
    rng = np.random.default_rng((seed, index))
    label = index % len(_GENERATORS)
    img = _GENERATORS[label](rng, res)
    img = np.clip(img, 0.0, 1.0)
    return torch.from_numpy(np.ascontiguousarray(img)).float(), label


class TextureDataset:
    """Indexable synthetic texture dataset; samples are regenerated on access."""

    def __init__(self, size: int, res: int = 128, seed: int = 0):
        if size < 0:
            raise ValueError("size must be >= 0")
        self.size = size
        self.res = res
        self.seed = seed

    def __len__(self) -> int:
        return self.size

    def __getitem__(self, index: int) -> tuple[torch.Tensor, int]:
        if not 0 <= index < self.size:
            raise IndexError(index)
        return texture_image(self.seed, index, self.res)

    def image(self, index: int) -> torch.Tensor:
        return self[index][0]

    def batches(self, batch_size: int, shuffle_seed: int | None = None):
        """Yield (images, labels) batches; order is seeded when shuffle_seed is set."""
        order = np.arange(self.size)
        if shuffle_seed is not None:
            np.random.default_rng(shuffle_seed).shuffle(order)
        for start in range(0, self.size, batch_size):
            idx = order[start : start + batch_size]
            imgs, labels = zip(*(self[int(i)] for i in idx))
            yield torch.stack(imgs), torch.tensor(labels, dtype=torch.long)


def parse_dataset_spec(spec: str, default_res: int = 128) -> TextureDataset:
    """Parse 'textures:size=2000,res=128,seed=0' into a dataset."""
    name, _, rest = spec.partition(":")
    if name != "textures":
        raise ValueError(f"unknown dataset {name!r}; only 'textures' is built in")
    opts = {}
    if rest:
        for part in rest.split(","):
            key, _, val = part.partition("=")
            opts[key.strip()] = int(val)
    return TextureDataset(
        size=opts.get("size", 500),
        res=opts.get("res", default_res),
        seed=opts.get("seed", 0),
    )
