"""Model adapters: frozen encoders with named extraction layers and seeded
generators with named injection layers.

Adapters own the bridge between unit-space images and each model's native
input space. All randomness inside generators is derived per (seed, tag) with
a counter-style scheme, never from global RNG state, so any forward path that
skips work still sees identical noise.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import torch

from ..core import (
    ActivationTensor,
    ImageTensor,
    LayerAddress,
    LayerRole,
    NormalizationSpec,
    ShapeMismatchError,
    UnknownLayerError,
    ValueSpace,
    bilinear_resize_tensor,
    from_unit_tensor,
    to_unit_tensor,
)


def derived_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary parts (model seeds, layer tags, indices)."""
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & 0x7FFF_FFFF_FFFF_FFFF


def noise_field(seed: int, tag: str, shape) -> torch.Tensor:
    """Deterministic standard-normal field keyed by (seed, tag)."""
    gen = torch.Generator()
    gen.manual_seed(derived_seed(seed, tag))
    return torch.randn(shape, generator=gen)


@dataclass(frozen=True)
class LayerInfo:
    """One layer-table entry: address plus shape at the reference resolution."""

    address: LayerAddress
    channels: int
    height: int
    width: int

    @property
    def name(self) -> str:
        return self.address.layer_name

    @property
    def sampling_distance(self) -> int:
        return self.address.sampling_distance

    def to_dict(self) -> dict:
        return {
            "address": self.address.to_dict(),
            "channels": self.channels,
            "height": self.height,
            "width": self.width,
        }


class EncoderAdapter:
    """A frozen feature extractor with an ordered table of named layers."""

    def __init__(self, model_id: str, net: torch.nn.Module,
                 normalization: NormalizationSpec, reference_resolution: int):
        self.model_id = model_id
        self.net = net.eval()
        for p in self.net.parameters():
            p.requires_grad_(False)
        self.normalization = normalization
        self.reference_resolution = reference_resolution
        self.forward_count = 0
        self._table = self._build_table()

    def _build_table(self) -> list[LayerInfo]:
        res = self.reference_resolution
        probe = torch.zeros(1, 3, res, res)
        table = []
        with torch.no_grad():
            for name, distance in self.net.layer_schedule():
                out = self.net.forward_to(probe, name)
                addr = LayerAddress(self.model_id, name, LayerRole.ENCODER_LAYER, distance)
                table.append(LayerInfo(addr, out.shape[1], out.shape[2], out.shape[3]))
        return table

    def layers(self) -> list[LayerInfo]:
        return list(self._table)

    def layer(self, name_or_addr) -> LayerInfo:
        name = name_or_addr.layer_name if isinstance(name_or_addr, LayerAddress) else name_or_addr
        for info in self._table:
            if info.name == name:
                return info
        raise UnknownLayerError(f"{self.model_id!r} has no layer {name!r}")

    def to_native(self, img: ImageTensor, resize_to_reference: bool = False) -> torch.Tensor:
        data = img.data
        if img.value_space is ValueSpace.MODEL_NATIVE:
            native = data
        else:
            native = from_unit_tensor(data, self.normalization)
        if resize_to_reference:
            native = bilinear_resize_tensor(
                native, self.reference_resolution, self.reference_resolution
            )
        return native

    def forward_to(self, batch: torch.Tensor, layer_name: str) -> torch.Tensor:
        """Run the net on a native-space (B, 3, H, W) batch up to a named layer."""
        self.layer(layer_name)
        self.forward_count += 1
        return self.net.forward_to(batch, layer_name)

    def extract(self, layer, img: ImageTensor) -> ActivationTensor:
        info = self.layer(layer)
        native = self.to_native(img).unsqueeze(0)
        with torch.no_grad():
            out = self.forward_to(native, info.name)
        return ActivationTensor(out.squeeze(0), info.address)


def extract_activations(enc: EncoderAdapter, layer, img: ImageTensor) -> ActivationTensor:
    return enc.extract(layer, img)


class GeneratorAdapter:
    """A seeded generator whose listed layers accept externally injected inputs."""

    def __init__(self, model_id: str, net: torch.nn.Module, normalization: NormalizationSpec):
        self.model_id = model_id
        self.net = net.eval()
        for p in self.net.parameters():
            p.requires_grad_(False)
        self.normalization = normalization
        self.output_resolution = net.output_resolution
        self.seed_dim = getattr(net, "latent_dim", 0)
        self.forward_count = 0
        self._table = [
            LayerInfo(
                LayerAddress(model_id, name, LayerRole.GENERATOR_LAYER, distance),
                channels, size, size,
            )
            for name, channels, size, distance in net.injectable_layers()
        ]
        # generator tables are ordered by distance from the output
        self._table.sort(key=lambda info: info.sampling_distance)

    def layers(self) -> list[LayerInfo]:
        return list(self._table)

    def layer(self, name_or_addr) -> LayerInfo:
        name = name_or_addr.layer_name if isinstance(name_or_addr, LayerAddress) else name_or_addr
        for info in self._table:
            if info.name == name:
                return info
        raise UnknownLayerError(f"{self.model_id!r} has no layer {name!r}")

    def to_unit(self, native: torch.Tensor) -> torch.Tensor:
        return to_unit_tensor(native, self.normalization)

    def forward_native(self, seeds, inject_name=None, injected=None) -> torch.Tensor:
        """Native-space batch output for the given per-sample seeds."""
        self.forward_count += 1
        return self.net.forward_gen(list(seeds), inject=inject_name, injected=injected)

    def generate(self, seed: int) -> ImageTensor:
        with torch.no_grad():
            native = self.forward_native([seed])
        return ImageTensor.unit(self.to_unit(native.squeeze(0)))

    def capture_layer_input(self, seed: int, layer) -> ActivationTensor:
        """The feature map that arrives at the named layer during generate(seed)."""
        info = self.layer(layer)
        with torch.no_grad():
            captured = self.net.capture_input([seed], info.name)
        return ActivationTensor(captured.squeeze(0), info.address)

    def generate_with_injection(self, seed: int, layer, a: ActivationTensor) -> ImageTensor:
        info = self.layer(layer)
        if a.channels != info.channels or a.spatial != (info.height, info.width):
            raise ShapeMismatchError(
                f"layer {info.name!r} expects ({info.channels}, {info.height}, {info.width}), "
                f"got ({a.channels}, {a.spatial[0]}, {a.spatial[1]})"
            )
        with torch.no_grad():
            native = self.forward_native([seed], inject_name=info.name, injected=a.data.unsqueeze(0))
        return ImageTensor.unit(self.to_unit(native.squeeze(0)))


def generate(gen: GeneratorAdapter, seed: int) -> ImageTensor:
    return gen.generate(seed)


def generate_with_injection(gen: GeneratorAdapter, seed: int, layer, a: ActivationTensor) -> ImageTensor:
    return gen.generate_with_injection(seed, layer, a)
