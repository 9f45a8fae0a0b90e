"""The 1x1-convolution stitch: per-pixel linear map from an encoder layer's
channel space into a generator layer's channel space, the single-forward-pass
inversion built on it, and its trainer.

Training freezes both networks and optimizes only the stitch weights to
minimize the L1 distance, measured back in the encoder layer, between the
activations of the original image and of its reconstruction.
"""

from __future__ import annotations

import json
import hashlib
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .core import (
    ActivationTensor,
    CheckpointError,
    ImageTensor,
    InversionResult,
    LayerAddress,
    ShapeMismatchError,
    TrainingDivergedError,
    bilinear_resize_tensor,
    config_hash,
    from_unit_tensor,
    nearest_resize_tensor,
)
from .metrics import cosine_similarity_pixelwise
from .models.adapters import EncoderAdapter, GeneratorAdapter, LayerInfo, derived_seed

STITCH_FORMAT_VERSION = 1


@dataclass
class StitchLayer:
    weight: torch.Tensor  # (C_target, C_source)
    bias: torch.Tensor | None
    source: LayerAddress
    target: LayerAddress
    trained_samples: int = 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.weight.ndim != 2:
            raise ShapeMismatchError("stitch weight must be (C_target, C_source)")
        if self.bias is not None and self.bias.shape != (self.weight.shape[0],):
            raise ShapeMismatchError("stitch bias must be (C_target,)")
        if not torch.isfinite(self.weight).all():
            raise ValueError("stitch weight contains non-finite entries")
        if self.bias is not None and not torch.isfinite(self.bias).all():
            raise ValueError("stitch bias contains non-finite entries")

    @property
    def source_channels(self) -> int:
        return self.weight.shape[1]

    @property
    def target_channels(self) -> int:
        return self.weight.shape[0]

    def to_conv(self) -> torch.nn.Conv2d:
        conv = torch.nn.Conv2d(self.source_channels, self.target_channels, 1,
                               bias=self.bias is not None)
        with torch.no_grad():
            conv.weight.copy_(self.weight.view(*self.weight.shape, 1, 1))
            if self.bias is not None:
                conv.bias.copy_(self.bias)
        return conv


def init_stitch(source: LayerInfo, target: LayerInfo, bias: bool = True,
                seed: int = 0) -> StitchLayer:
    """Fresh stitch with N(0, 1/sqrt(C_source)) weights and zero bias."""
    gen = torch.Generator().manual_seed(derived_seed(seed, "stitch_init"))
    std = 1.0 / (source.channels ** 0.5)
    weight = torch.randn((target.channels, source.channels), generator=gen) * std
    b = torch.zeros(target.channels) if bias else None
    return StitchLayer(weight, b, source.address, target.address)


def apply_stitch_tensor(s: StitchLayer, data: torch.Tensor) -> torch.Tensor:
    if data.shape[-3] != s.source_channels:
        raise ShapeMismatchError(
            f"stitch expects {s.source_channels} channels, got {data.shape[-3]}"
        )
    out = torch.einsum("oc,...chw->...ohw", s.weight, data)
    if s.bias is not None:
        out = out + s.bias.view(-1, 1, 1)
    return out


def apply_stitch(s: StitchLayer, a: ActivationTensor) -> ActivationTensor:
    if a.source.layer_name != s.source.layer_name or a.source.model_id != s.source.model_id:
        raise ShapeMismatchError(
            f"activation from {a.source.model_id}/{a.source.layer_name} does not match "
            f"stitch source {s.source.model_id}/{s.source.layer_name}"
        )
    return ActivationTensor(apply_stitch_tensor(s, a.data), s.target)


def invert_via_gan(enc: EncoderAdapter, layer_x, s: StitchLayer,
                   gen: GeneratorAdapter, layer_y, img: ImageTensor,
                   seed: int = 0) -> InversionResult:
    """Single-forward-pass inversion: extract, stitch, rescale, inject, generate."""
    info_y = gen.layer(layer_y)
    if s.target.layer_name != info_y.name:
        raise ShapeMismatchError(
            f"stitch targets {s.target.layer_name!r} but injection layer is {info_y.name!r}"
        )
    t0 = time.perf_counter()
    acts = enc.extract(layer_x, img)
    z = apply_stitch(s, acts)
    z = ActivationTensor(nearest_resize_tensor(z.data, info_y.height, info_y.width), z.source)
    out = gen.generate_with_injection(seed, info_y.name, z)
    wall = time.perf_counter() - t0
    return InversionResult(image=out, method="gan", wall_time_s=wall, seed=seed)


@dataclass(frozen=True)
class StitchTrainingConfig:
    learning_rate: float = 0.01
    batch_size: int = 8
    epochs: int = 10
    bias: bool = True
    seed: int = 0
    val_batch_size: int = 8

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "bias": self.bias,
            "seed": self.seed,
        }


def _reconstruct_batch(enc: EncoderAdapter, layer_x: str, conv: torch.nn.Module,
                       gen: GeneratorAdapter, info_y: LayerInfo,
                       imgs_unit: torch.Tensor, seeds) -> tuple[torch.Tensor, torch.Tensor]:
    """Returns (targets, reconstructed unit images); targets carry no grad."""
    ref = enc.reference_resolution
    native = from_unit_tensor(bilinear_resize_tensor(imgs_unit, ref, ref), enc.normalization)
    with torch.no_grad():
        targets = enc.forward_to(native, layer_x)
    z = conv(targets)
    z = nearest_resize_tensor(z, info_y.height, info_y.width)
    recon_native = gen.forward_native(seeds, inject_name=info_y.name, injected=z)
    recon_unit = gen.to_unit(recon_native)
    return targets, recon_unit


def _encode_unit(enc: EncoderAdapter, layer_x: str, imgs_unit: torch.Tensor) -> torch.Tensor:
    ref = enc.reference_resolution
    resized = bilinear_resize_tensor(imgs_unit, ref, ref).clamp(0.0, 1.0)
    return enc.forward_to(from_unit_tensor(resized, enc.normalization), layer_x)


def validate_stitch(enc: EncoderAdapter, layer_x: str, stitch: StitchLayer,
                    gen: GeneratorAdapter, layer_y, valset,
                    test_enc: EncoderAdapter | None = None,
                    test_layer: str | None = None,
                    batch_size: int = 8, seed: int = 0) -> dict:
    """Validation metrics: L1 in the encoder layer and pixelwise cosine in the
    test network's corresponding layer (falling back to the encoder itself)."""
    conv = stitch.to_conv()
    for p in conv.parameters():
        p.requires_grad_(False)
    info_y = gen.layer(layer_y)
    score_enc = test_enc if test_enc is not None else enc
    score_layer = test_layer if test_layer is not None else layer_x
    l1_sum, cos_sum, count = 0.0, 0.0, 0
    with torch.no_grad():
        for start in range(0, len(valset), batch_size):
            idx = range(start, min(start + batch_size, len(valset)))
            imgs = torch.stack([valset[i][0] for i in idx])
            seeds = [derived_seed(seed, "valseed", i) for i in idx]
            targets, recon_unit = _reconstruct_batch(enc, layer_x, conv, gen, info_y, imgs, seeds)
            recon_acts = _encode_unit(enc, layer_x, recon_unit)
            l1_sum += float((recon_acts - targets).abs().mean()) * len(seeds)
            ref_test = _encode_unit(score_enc, score_layer, imgs)
            rec_test = _encode_unit(score_enc, score_layer, recon_unit)
            for j in range(len(seeds)):
                cos_sum += cosine_similarity_pixelwise(ref_test[j], rec_test[j])
            count += len(seeds)
    return {"val_l1_layerx": l1_sum / count, "val_cosine_test": cos_sum / count}


def select_best_epoch(history) -> int:
    """Index of the entry with the highest validation cosine; earliest wins ties."""
    return max(range(len(history)),
               key=lambda e: (history[e]["val_cosine_test"], -e))


def train_stitch(enc: EncoderAdapter, layer_x: str, gen: GeneratorAdapter, layer_y,
                 dataset, cfg: StitchTrainingConfig, valset,
                 test_enc: EncoderAdapter | None = None,
                 test_layer: str | None = None,
                 log=None) -> tuple[StitchLayer, list[dict]]:
    """Train the stitch; returns the checkpoint with the highest validation
    cosine (epoch 0 = initialization) plus the per-epoch metric history."""
    if len(dataset) == 0:
        raise ValueError("training dataset is empty")
    info_x = enc.layer(layer_x)
    info_y = gen.layer(layer_y)
    stitch = init_stitch(info_x, info_y, bias=cfg.bias, seed=cfg.seed)
    stitch.metadata["config_hash"] = config_hash(cfg.to_dict())

    conv = stitch.to_conv()
    opt = torch.optim.Adam(conv.parameters(), lr=cfg.learning_rate)

    def snapshot(epoch: int, trained: int) -> StitchLayer:
        return StitchLayer(
            weight=conv.weight.detach().clone().view(stitch.target_channels, stitch.source_channels),
            bias=conv.bias.detach().clone() if cfg.bias else None,
            source=stitch.source,
            target=stitch.target,
            trained_samples=trained,
            metadata={**stitch.metadata, "epoch": epoch},
        )

    history = []
    checkpoints = {0: snapshot(0, 0)}
    init_metrics = validate_stitch(enc, layer_x, checkpoints[0], gen, layer_y, valset,
                                   test_enc, test_layer, cfg.val_batch_size, cfg.seed)
    history.append({"epoch": 0, "train_loss": None, **init_metrics})
    if log:
        log(f"epoch 0 (init): {init_metrics}")

    trained = 0
    for epoch in range(1, cfg.epochs + 1):
        order = np.arange(len(dataset))
        np.random.default_rng(derived_seed(cfg.seed, "shuffle", epoch)).shuffle(order)
        epoch_loss, n_batches = 0.0, 0
        for start in range(0, len(dataset), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            imgs = torch.stack([dataset[int(i)][0] for i in idx])
            # fresh noise seed per sample per step: the stitch must not tune
            # itself to one noise realization
            seeds = [derived_seed(cfg.seed, "trainseed", epoch, start, int(i)) for i in idx]
            targets, recon_unit = _reconstruct_batch(enc, layer_x, conv, gen, info_y, imgs, seeds)
            recon_acts = _encode_unit(enc, layer_x, recon_unit)
            loss = (recon_acts - targets).abs().mean()
            loss_val = float(loss.detach())
            if not np.isfinite(loss_val):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {n_batches}: {loss_val}"
                )
            opt.zero_grad()
            loss.backward()
            opt.step()
            epoch_loss += loss_val
            n_batches += 1
            trained += len(idx)
        ckpt = snapshot(epoch, trained)
        checkpoints[epoch] = ckpt
        metrics = validate_stitch(enc, layer_x, ckpt, gen, layer_y, valset,
                                  test_enc, test_layer, cfg.val_batch_size, cfg.seed)
        history.append({"epoch": epoch, "train_loss": epoch_loss / max(n_batches, 1), **metrics})
        if log:
            log(f"epoch {epoch}: train_loss={epoch_loss / max(n_batches, 1):.5f} {metrics}")

    best_epoch = select_best_epoch(history)
    best = checkpoints[best_epoch]
    best.metadata["best_epoch"] = best_epoch
    best.metadata["history"] = history
    return best, history


def save_stitch(stitch: StitchLayer, path) -> None:
    """Write {path}.json manifest plus {path}.bin raw little-endian float32 blob."""
    path = Path(path)
    stem = path.with_suffix("") if path.suffix == ".json" else path
    weight = stitch.weight.detach().cpu().numpy().astype("<f4")
    blob = weight.tobytes()
    if stitch.bias is not None:
        blob += stitch.bias.detach().cpu().numpy().astype("<f4").tobytes()
    manifest = {
        "version": STITCH_FORMAT_VERSION,
        "source": stitch.source.to_dict(),
        "target": stitch.target.to_dict(),
        "source_channels": stitch.source_channels,
        "target_channels": stitch.target_channels,
        "has_bias": stitch.bias is not None,
        "trained_samples": stitch.trained_samples,
        "metadata": stitch.metadata,
        "blob": stem.name + ".bin",
        "blob_sha256": hashlib.sha256(blob).hexdigest(),
    }
    stem.parent.mkdir(parents=True, exist_ok=True)
    with open(stem.with_suffix(".json"), "w") as f:
        json.dump(manifest, f, indent=2, default=str)
    with open(stem.with_suffix(".bin"), "wb") as f:
        f.write(blob)


def load_stitch(path, registry=None) -> StitchLayer:
    """Load a stitch checkpoint; verifies blob integrity and, when a registry
    is supplied, that channel counts still match the registered layers."""
    path = Path(path)
    stem = path.with_suffix("") if path.suffix in (".json", ".bin") else path
    with open(stem.with_suffix(".json")) as f:
        manifest = json.load(f)
    if manifest.get("version") != STITCH_FORMAT_VERSION:
        raise CheckpointError(f"unsupported stitch format version: {manifest.get('version')}")
    blob = (stem.parent / manifest["blob"]).read_bytes()
    if hashlib.sha256(blob).hexdigest() != manifest["blob_sha256"]:
        raise CheckpointError(f"corrupt stitch blob for {stem}")
    c_t, c_s = manifest["target_channels"], manifest["source_channels"]
    expected = c_t * c_s + (c_t if manifest["has_bias"] else 0)
    if len(blob) != expected * 4:
        raise CheckpointError(
            f"stitch blob has {len(blob)} bytes, expected {expected * 4}"
        )
    flat = np.frombuffer(blob, dtype="<f4")
    weight = torch.from_numpy(flat[: c_t * c_s].reshape(c_t, c_s).copy())
    bias = torch.from_numpy(flat[c_t * c_s :].copy()) if manifest["has_bias"] else None
    source = LayerAddress.from_dict(manifest["source"])
    target = LayerAddress.from_dict(manifest["target"])
    stitch = StitchLayer(weight, bias, source, target,
                         trained_samples=manifest.get("trained_samples", 0),
                         metadata=manifest.get("metadata", {}))
    if registry is not None:
        src_info = registry.encoder(source.model_id).layer(source.layer_name)
        tgt_info = registry.generator(target.model_id).layer(target.layer_name)
        if src_info.channels != c_s or tgt_info.channels != c_t:
            raise CheckpointError(
                f"stitch channels ({c_s}->{c_t}) do not match registry layers "
                f"({src_info.channels}->{tgt_info.channels})"
            )
        want = stitch.metadata.get("registry_hash")
        if want and want != registry.registry_hash():
            warnings.warn(
                f"stitch {stem.name} was trained against a different registry state",
                stacklevel=2,
            )
    return stitch
