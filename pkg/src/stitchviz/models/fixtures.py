"""Desk-scale fixture building: train the encoders and generators once, then
register them for every downstream workflow.

The encoders are texture-family classifiers (interpret and test networks are
identically shaped but independently initialized and trained). Generators are
trained as multi-scale decoders: throwaway projector convolutions map a
downscaled image into each injectable layer's channel space, and the
generator learns to reconstruct the image from the injection. The projectors
are discarded; only the generator is registered. This is fixture building,
not GAN training: quality only needs to be good enough for the stitched
pipeline to have real features to work with.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..core import NormalizationSpec, bilinear_resize_tensor, from_unit_tensor
from ..data import TextureDataset
from .adapters import derived_seed
from .encoders import ArchitectureSpec, build_encoder_net, _init_weights
from .registry import ModelRegistry, build_generator_net

ENCODER_NORM = NormalizationSpec("meanstd", mean=(0.5, 0.5, 0.5), std=(0.25, 0.25, 0.25))
UPSAMPLER_NORM = NormalizationSpec("range", lo=-1.0, hi=1.0)
UNET_NORM = NormalizationSpec("unit")


def train_encoder_classifier(net: nn.Module, dataset: TextureDataset, epochs: int,
                             seed: int, lr: float = 1e-3, batch_size: int = 16,
                             log=None) -> float:
    """Train the texture-family classifier; returns final-epoch accuracy."""
    net.train()
    opt = torch.optim.Adam(net.parameters(), lr=lr)
    accuracy = 0.0
    for epoch in range(epochs):
        correct, seen = 0, 0
        for imgs, labels in dataset.batches(batch_size, shuffle_seed=derived_seed(seed, "shuffle", epoch)):
            logits = net(from_unit_tensor(imgs, ENCODER_NORM))
            loss = F.cross_entropy(logits, labels)
            opt.zero_grad()
            loss.backward()
            opt.step()
            correct += int((logits.argmax(dim=1) == labels).sum())
            seen += len(labels)
        accuracy = correct / seen
        if log:
            log(f"encoder epoch {epoch + 1}/{epochs}: accuracy {accuracy:.3f}")
    net.eval()
    return accuracy


def train_generator_decoder(net: nn.Module, dataset: TextureDataset, normalization,
                            passes: int, seed: int, lr: float = 1e-3,
                            batch_size: int = 8, log=None) -> float:
    """Teach every injectable layer to decode projected image features."""
    layers = net.injectable_layers()
    out_res = net.output_resolution
    projectors = nn.ModuleDict()
    for name, channels, size, _ in layers:
        proj = nn.Conv2d(3, channels, 3, 1, 1)
        _init_weights(proj, derived_seed(seed, "proj", name))
        projectors[name.replace(".", "_")] = proj
    net.train()
    opt = torch.optim.Adam(list(net.parameters()) + list(projectors.parameters()), lr=lr)
    last_loss = float("inf")
    step = 0
    for p in range(passes):
        for imgs, _ in dataset.batches(batch_size, shuffle_seed=derived_seed(seed, "gshuffle", p)):
            name, channels, size, _ = layers[step % len(layers)]
            low = bilinear_resize_tensor(imgs, size, size)
            injected = projectors[name.replace(".", "_")](low)
            out_native = net.forward_gen(list(range(step, step + len(imgs))),
                                         inject=name, injected=injected)
            out_unit = (
                out_native if normalization.kind == "unit"
                else (out_native - normalization.lo) / (normalization.hi - normalization.lo)
            )
            want = bilinear_resize_tensor(imgs, out_res, out_res)
            loss = (out_unit - want).abs().mean()
            opt.zero_grad()
            loss.backward()
            opt.step()
            last_loss = float(loss.detach())
            step += 1
        if log:
            log(f"generator pass {p + 1}/{passes}: loss {last_loss:.4f}")
    net.eval()
    return last_loss


def build_fixtures(out_dir, seed: int = 0, train_size: int = 2000, res: int = 128,
                   encoder_epochs: int = 2, decoder_passes: int = 1,
                   log=None) -> ModelRegistry:
    """Train and register the standard fixture set.

    Registers: desk_encoder (interpret), desk_encoder_test (test network),
    desk_upsampler (progressive GAN-style generator at 128), desk_unet
    (UNet-noise generator at 96). Deterministic for a given seed.
    """
    out_dir = str(out_dir)
    dataset = TextureDataset(train_size, res, seed=derived_seed(seed, "fixture_data"))
    registry = ModelRegistry(f"{out_dir}/registry.json")

    enc_spec = ArchitectureSpec("resnet_small", reference_resolution=res)
    for model_id, role, enc_seed in (
        ("desk_encoder", "interpret", derived_seed(seed, "enc_interpret")),
        ("desk_encoder_test", "test", derived_seed(seed, "enc_test")),
    ):
        net = build_encoder_net(enc_spec, seed=enc_seed)
        acc = train_encoder_classifier(net, dataset, encoder_epochs, seed=enc_seed,
                                       log=(lambda m, mid=model_id: log(f"[{mid}] {m}")) if log else None)
        registry.register(model_id, "encoder", enc_spec, net, ENCODER_NORM, role=role)
        if log:
            log(f"registered {model_id} (accuracy {acc:.3f})")

    up_spec = ArchitectureSpec("gan_upsampler", output_resolution=128, latent_dim=64)
    up_net = build_generator_net(up_spec, seed=derived_seed(seed, "gen_up"))
    train_generator_decoder(up_net, dataset, UPSAMPLER_NORM, decoder_passes,
                            seed=derived_seed(seed, "gen_up_train"),
                            log=(lambda m: log(f"[desk_upsampler] {m}")) if log else None)
    registry.register("desk_upsampler", "generator", up_spec, up_net, UPSAMPLER_NORM,
                      role="generator")

    unet_spec = ArchitectureSpec("unet_noise_generator", output_resolution=96,
                                 stage_widths=(16, 32, 64), noise_channels=8)
    unet_net = build_generator_net(unet_spec, seed=derived_seed(seed, "gen_unet"))
    train_generator_decoder(unet_net, dataset, UNET_NORM, decoder_passes,
                            seed=derived_seed(seed, "gen_unet_train"),
                            log=(lambda m: log(f"[desk_unet] {m}")) if log else None)
    registry.register("desk_unet", "generator", unet_spec, unet_net, UNET_NORM,
                      role="unet_generator")

    registry.save()
    if log:
        log(f"registry hash {registry.registry_hash()}")
    return registry
