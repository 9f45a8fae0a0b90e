"""Brute-force reference implementations used to check the vectorized metrics.

Everything here is written with explicit Python loops in float64 and stays
independent of the library code paths it validates.
"""

import math

import torch


def cosine_pixelwise_loops(a: torch.Tensor, b: torch.Tensor, eps: float = 1e-8) -> float:
    c, h, w = a.shape
    total = 0.0
    for i in range(h):
        for j in range(w):
            dot, na, nb = 0.0, 0.0, 0.0
            for k in range(c):
                va, vb = float(a[k, i, j]), float(b[k, i, j])
                dot += va * vb
                na += va * va
                nb += vb * vb
            total += dot / max(math.sqrt(na) * math.sqrt(nb), eps)
    return total / (h * w)


def l1_mean_loops(a: torch.Tensor, b: torch.Tensor) -> float:
    c, h, w = a.shape
    total = 0.0
    for k in range(c):
        for i in range(h):
            for j in range(w):
                total += abs(float(a[k, i, j]) - float(b[k, i, j]))
    return total / (c * h * w)


def gram_loops(a: torch.Tensor) -> torch.Tensor:
    c, h, w = a.shape
    g = torch.zeros((c, c), dtype=torch.float64)
    for p in range(c):
        for q in range(c):
            s = 0.0
            for i in range(h):
                for j in range(w):
                    s += float(a[p, i, j]) * float(a[q, i, j])
            g[p, q] = s
    return g


def gram_cosine_flat(a: torch.Tensor, b: torch.Tensor, eps: float = 1e-8) -> float:
    """Flatten both gram matrices and take the plain vector cosine."""
    ga = gram_loops(a).reshape(-1)
    gb = gram_loops(b).reshape(-1)
    dot = float((ga * gb).sum())
    na = math.sqrt(float((ga * ga).sum()))
    nb = math.sqrt(float((gb * gb).sum()))
    return dot / max(na * nb, eps)


def nearest_index_map(dst: int, src: int) -> list:
    return [(i * src) // dst for i in range(dst)]


def nearest_resize_loops(a: torch.Tensor, th: int, tw: int) -> torch.Tensor:
    c, h, w = a.shape
    rows = nearest_index_map(th, h)
    cols = nearest_index_map(tw, w)
    out = torch.empty((c, th, tw), dtype=a.dtype)
    for k in range(c):
        for i in range(th):
            for j in range(tw):
                out[k, i, j] = a[k, rows[i], cols[j]]
    return out


def stitch_loops(weight: torch.Tensor, bias, a: torch.Tensor) -> torch.Tensor:
    ct, cs = weight.shape
    _, h, w = a.shape
    out = torch.zeros((ct, h, w), dtype=torch.float64)
    for o in range(ct):
        for i in range(h):
            for j in range(w):
                s = 0.0
                for k in range(cs):
                    s += float(weight[o, k]) * float(a[k, i, j])
                if bias is not None:
                    s += float(bias[o])
                out[o, i, j] = s
    return out
