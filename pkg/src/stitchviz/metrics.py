"""Activation-comparison metrics: pixelwise cosine, mean L1, gram-matrix cosine.

All three reduce a pair of (C, H, W) feature maps to a scalar. Pixelwise cosine
and L1 are position-sensitive; the gram cosine compares channel co-occurrence
and ignores where features sit spatially.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .core import ActivationTensor, ShapeMismatchError


@dataclass(frozen=True)
class MetricConfig:
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")


DEFAULT_METRIC_CONFIG = MetricConfig()

# value direction per metric name, used when ranking samples
HIGHER_IS_BETTER = {"cosine": True, "gram_cosine": True, "l1": False}


def _as_tensor(a) -> torch.Tensor:
    data = a.data if isinstance(a, ActivationTensor) else a
    return data.detach().to(torch.float64)


def cosine_similarity_pixelwise(a, b, cfg: MetricConfig = DEFAULT_METRIC_CONFIG) -> float:
    """Mean over pixels of the channel-vector cosine between a and b."""
    ta, tb = _as_tensor(a), _as_tensor(b)
    if ta.shape != tb.shape:
        raise ShapeMismatchError(f"shape mismatch: {tuple(ta.shape)} vs {tuple(tb.shape)}")
    eps = torch.tensor(cfg.epsilon, dtype=torch.float64)
    dots = (ta * tb).sum(dim=0)
    norms = ta.norm(dim=0) * tb.norm(dim=0)
    return float((dots / torch.maximum(norms, eps)).mean())


def l1_mean(a, b) -> float:
    ta, tb = _as_tensor(a), _as_tensor(b)
    if ta.shape != tb.shape:
        raise ShapeMismatchError(f"shape mismatch: {tuple(ta.shape)} vs {tuple(tb.shape)}")
    return float((ta - tb).abs().mean())


def gram_matrix(a) -> torch.Tensor:
    """(C, C) matrix of inner products between flattened channels."""
    ta = _as_tensor(a)
    flat = ta.reshape(ta.shape[0], -1)
    return flat @ flat.T


def gram_cosine(a, b, cfg: MetricConfig = DEFAULT_METRIC_CONFIG) -> float:
    """Frobenius cosine between the gram matrices of a and b.

    Spatial sizes may differ; only channel counts must match.
    """
    ta, tb = _as_tensor(a), _as_tensor(b)
    if ta.shape[0] != tb.shape[0]:
        raise ShapeMismatchError(
            f"channel mismatch: {ta.shape[0]} vs {tb.shape[0]}"
        )
    ga, gb = gram_matrix(ta), gram_matrix(tb)
    eps = torch.tensor(cfg.epsilon, dtype=torch.float64)
    num = (ga * gb).sum()
    den = torch.maximum(ga.norm() * gb.norm(), eps)
    return float(num / den)


METRIC_FNS = {
    "cosine": cosine_similarity_pixelwise,
    "gram_cosine": lambda a, b, cfg=DEFAULT_METRIC_CONFIG: gram_cosine(a, b, cfg),
    "l1": lambda a, b, cfg=DEFAULT_METRIC_CONFIG: l1_mean(a, b),
}


def compute_metrics(a, b, names=("cosine", "gram_cosine", "l1"),
                    cfg: MetricConfig = DEFAULT_METRIC_CONFIG) -> dict:
    out = {}
    for name in names:
        if name not in METRIC_FNS:
            raise KeyError(f"unknown metric: {name!r}")
        out[name] = METRIC_FNS[name](a, b, cfg)
    return out
