"""Shared domain types: images, activations, layer addresses, run manifests."""

from __future__ import annotations

import datetime as _dt
import enum
import hashlib
import json
import uuid
from dataclasses import dataclass, field

import torch


class StitchVizError(Exception):
    pass


class UnknownModelError(StitchVizError):
    pass


class UnknownLayerError(StitchVizError):
    pass


class ShapeMismatchError(StitchVizError):
    pass


class CheckpointError(StitchVizError):
    pass


class TrainingDivergedError(StitchVizError):
    pass


class ValueSpace(str, enum.Enum):
    UNIT = "unit"
    MODEL_NATIVE = "model_native"


class LayerRole(str, enum.Enum):
    ENCODER_LAYER = "encoder_layer"
    GENERATOR_LAYER = "generator_layer"


@dataclass(frozen=True)
class LayerAddress:
    """Names a layer in a registered model.

    sampling_distance counts down/upsampling steps from the model's reference
    end: the input for encoder layers, the output for generator layers.
    """

    model_id: str
    layer_name: str
    role: LayerRole
    sampling_distance: int

    def __post_init__(self):
        if self.sampling_distance < 0:
            raise ValueError(f"sampling_distance must be >= 0, got {self.sampling_distance}")

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "layer_name": self.layer_name,
            "role": self.role.value,
            "sampling_distance": self.sampling_distance,
        }

    @staticmethod
    def from_dict(d: dict) -> "LayerAddress":
        return LayerAddress(
            model_id=d["model_id"],
            layer_name=d["layer_name"],
            role=LayerRole(d["role"]),
            sampling_distance=int(d["sampling_distance"]),
        )


@dataclass(frozen=True)
class ImageTensor:
    """A (3, H, W) image. Treat .data as read-only after construction."""

    data: torch.Tensor
    value_space: ValueSpace = ValueSpace.UNIT

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[0] != 3:
            raise ShapeMismatchError(f"image must be (3, H, W), got {tuple(self.data.shape)}")
        if self.data.shape[1] < 1 or self.data.shape[2] < 1:
            raise ShapeMismatchError("image spatial dims must be >= 1")
        if self.value_space is ValueSpace.UNIT:
            lo, hi = float(self.data.min()), float(self.data.max())
            if lo < 0.0 or hi > 1.0:
                raise ValueError(f"unit-space image out of [0, 1]: min={lo}, max={hi}")

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @staticmethod
    def unit(data: torch.Tensor) -> "ImageTensor":
        """Wrap data as a unit-space image, clamping float spill outside [0, 1]."""
        return ImageTensor(data.clamp(0.0, 1.0), ValueSpace.UNIT)


@dataclass(frozen=True)
class ActivationTensor:
    """A (C, H, W) feature map tagged with the layer it came from or targets."""

    data: torch.Tensor
    source: LayerAddress

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ShapeMismatchError(f"activation must be (C, H, W), got {tuple(self.data.shape)}")
        if not torch.isfinite(self.data).all():
            raise ValueError("activation contains non-finite entries")

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def spatial(self) -> tuple[int, int]:
        return (self.data.shape[1], self.data.shape[2])


@dataclass(frozen=True)
class NormalizationSpec:
    """Describes how a model's native input/output space maps to unit [0, 1].

    kinds:
      unit     -- native space is already [0, 1]
      range    -- native values span [lo, hi], affine to [0, 1]
      meanstd  -- native = (unit - mean) / std per channel
    """

    kind: str = "unit"
    lo: float = 0.0
    hi: float = 1.0
    mean: tuple = (0.0, 0.0, 0.0)
    std: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.kind not in ("unit", "range", "meanstd"):
            raise ValueError(f"unknown normalization kind: {self.kind!r}")
        if self.kind == "range" and not self.hi > self.lo:
            raise ValueError("range normalization requires hi > lo")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "lo": self.lo,
            "hi": self.hi,
            "mean": list(self.mean),
            "std": list(self.std),
        }

    @staticmethod
    def from_dict(d: dict) -> "NormalizationSpec":
        return NormalizationSpec(
            kind=d.get("kind", "unit"),
            lo=float(d.get("lo", 0.0)),
            hi=float(d.get("hi", 1.0)),
            mean=tuple(d.get("mean", (0.0, 0.0, 0.0))),
            std=tuple(d.get("std", (1.0, 1.0, 1.0))),
        )


def _chanwise(values, like: torch.Tensor) -> torch.Tensor:
    return torch.as_tensor(values, dtype=like.dtype, device=like.device).view(-1, 1, 1)


def to_unit_tensor(data: torch.Tensor, spec: NormalizationSpec) -> torch.Tensor:
    """Map a native-space (..., 3, H, W) tensor into unit [0, 1]."""
    if spec.kind == "unit":
        out = data
    elif spec.kind == "range":
        out = (data - spec.lo) / (spec.hi - spec.lo)
    elif spec.kind == "meanstd":
        out = data * _chanwise(spec.std, data) + _chanwise(spec.mean, data)
    else:  # pragma: no cover - guarded in __post_init__
        raise ValueError(f"unknown normalization kind: {spec.kind!r}")
    return out.clamp(0.0, 1.0)


def from_unit_tensor(data: torch.Tensor, spec: NormalizationSpec) -> torch.Tensor:
    """Map a unit-space (..., 3, H, W) tensor into the model's native space."""
    if spec.kind == "unit":
        return data
    if spec.kind == "range":
        return data * (spec.hi - spec.lo) + spec.lo
    if spec.kind == "meanstd":
        return (data - _chanwise(spec.mean, data)) / _chanwise(spec.std, data)
    raise ValueError(f"unknown normalization kind: {spec.kind!r}")


def to_unit_space(img: ImageTensor, spec: NormalizationSpec) -> ImageTensor:
    if img.value_space is ValueSpace.UNIT:
        return img
    return ImageTensor(to_unit_tensor(img.data, spec), ValueSpace.UNIT)


def from_unit_space(img: ImageTensor, spec: NormalizationSpec) -> ImageTensor:
    if img.value_space is ValueSpace.MODEL_NATIVE:
        return img
    return ImageTensor(from_unit_tensor(img.data, spec), ValueSpace.MODEL_NATIVE)


def _nearest_index(dst: int, src: int) -> torch.Tensor:
    # floor-based source index: floor(dst_index * src_size / dst_size)
    return torch.div(torch.arange(dst) * src, dst, rounding_mode="floor")


def nearest_resize_tensor(data: torch.Tensor, target_h: int, target_w: int) -> torch.Tensor:
    """Nearest-neighbor resize of a (..., H, W) tensor; every output pixel is a copy."""
    if target_h < 1 or target_w < 1:
        raise ValueError("target size must be >= 1")
    h, w = data.shape[-2], data.shape[-1]
    if (h, w) == (target_h, target_w):
        return data
    rows = _nearest_index(target_h, h).to(data.device)
    cols = _nearest_index(target_w, w).to(data.device)
    return data.index_select(-2, rows).index_select(-1, cols)


def nearest_resize(a: ActivationTensor, target_h: int, target_w: int) -> ActivationTensor:
    return ActivationTensor(nearest_resize_tensor(a.data, target_h, target_w), a.source)


def bilinear_resize_tensor(data: torch.Tensor, target_h: int, target_w: int) -> torch.Tensor:
    """Bilinear resize for image-space tensors (the resolution bridge between models)."""
    if data.shape[-2] == target_h and data.shape[-1] == target_w:
        return data
    batched = data if data.ndim == 4 else data.unsqueeze(0)
    out = torch.nn.functional.interpolate(
        batched, size=(target_h, target_w), mode="bilinear", align_corners=False
    )
    return out if data.ndim == 4 else out.squeeze(0)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)


def config_hash(config: dict) -> str:
    """Deterministic hash of a JSON-serializable config."""
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


VOLATILE_KEYS = frozenset(
    ["run_id", "created_at", "finished_at", "wall_time_s", "wall_time_ms", "eval_time_s", "timestamp"]
)


def strip_volatile(obj):
    """Drop run ids, timestamps, and wall-clock fields; used to compare rerun outputs."""
    if isinstance(obj, dict):
        return {k: strip_volatile(v) for k, v in obj.items() if k not in VOLATILE_KEYS}
    if isinstance(obj, list):
        return [strip_volatile(v) for v in obj]
    return obj


@dataclass
class InversionResult:
    """One reconstruction: the image, how it was produced, and how long it took."""

    image: ImageTensor
    method: str
    wall_time_s: float
    seed: int | None = None
    steps: int | None = None
    loss_trace: list | None = None
    scores: dict | None = None
    diverged: bool = False

    def to_dict(self, include_trace: bool = True) -> dict:
        d = {
            "method": self.method,
            "wall_time_s": self.wall_time_s,
            "seed": self.seed,
            "steps": self.steps,
            "scores": self.scores,
            "diverged": self.diverged,
        }
        if include_trace and self.loss_trace is not None:
            d["loss_trace"] = [float(v) for v in self.loss_trace]
        return d


@dataclass
class RunManifest:
    """Provenance record written by every CLI command and training run."""

    config: dict
    model_ids: list = field(default_factory=list)
    seeds: list = field(default_factory=list)
    run_id: str = field(default_factory=lambda: uuid.uuid4().hex)
    created_at: str = field(
        default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat()
    )

    @property
    def config_hash(self) -> str:
        return config_hash(self.config)

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "created_at": self.created_at,
            "config_hash": self.config_hash,
            "config": self.config,
            "model_ids": list(self.model_ids),
            "seeds": list(self.seeds),
        }

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, default=str)
