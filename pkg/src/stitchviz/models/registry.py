"""Model registry: a JSON manifest mapping model ids to architectures,
checkpoint files, and normalization descriptors, with adapter caching."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import torch

from ..core import NormalizationSpec, UnknownModelError
from .adapters import EncoderAdapter, GeneratorAdapter
from .encoders import ArchitectureSpec, build_encoder_net, _init_weights
from .generators import ProgressiveUpsampler, UNetNoiseGenerator

MANIFEST_VERSION = 1


def state_dict_hash(state_dict: dict) -> str:
    """Hash of parameter names and values; stable across torch.save details."""
    h = hashlib.sha256()
    for name in sorted(state_dict):
        h.update(name.encode("utf-8"))
        h.update(state_dict[name].detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


def build_generator_net(spec: ArchitectureSpec, seed: int = 0) -> torch.nn.Module:
    if spec.family == "gan_upsampler":
        net = ProgressiveUpsampler(
            output_resolution=spec.output_resolution,
            latent_dim=spec.latent_dim,
            base_resolution=spec.base_resolution,
        )
    elif spec.family == "unet_noise_generator":
        net = UNetNoiseGenerator(
            output_resolution=spec.output_resolution,
            noise_channels=spec.noise_channels,
            widths=spec.stage_widths[:3],
        )
    else:
        raise ValueError(f"unsupported generator family: {spec.family!r}")
    _init_weights(net, seed)
    return net


class ModelRegistry:
    """Loads adapters lazily from a manifest; registration is append + save."""

    def __init__(self, manifest_path: str | Path | None = None):
        self.manifest_path = Path(manifest_path) if manifest_path else None
        self.entries: dict[str, dict] = {}
        self.roles: dict[str, str] = {}
        self._adapters: dict[str, object] = {}
        if self.manifest_path and self.manifest_path.exists():
            self._load()

    @property
    def root(self) -> Path:
        return self.manifest_path.parent if self.manifest_path else Path(".")

    def _load(self) -> None:
        with open(self.manifest_path) as f:
            manifest = json.load(f)
        if manifest.get("version") != MANIFEST_VERSION:
            raise ValueError(f"unsupported registry manifest version: {manifest.get('version')}")
        self.entries = {e["model_id"]: e for e in manifest["models"]}
        self.roles = manifest.get("roles", {})

    def save(self) -> None:
        manifest = {
            "version": MANIFEST_VERSION,
            "models": list(self.entries.values()),
            "roles": self.roles,
        }
        self.manifest_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.manifest_path, "w") as f:
            json.dump(manifest, f, indent=2)

    def registry_hash(self) -> str:
        """Deterministic digest over entries (including weight hashes) and roles."""
        payload = json.dumps(
            {"models": self.entries, "roles": self.roles}, sort_keys=True
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def model_ids(self) -> list[str]:
        return sorted(self.entries)

    def entry(self, model_id: str) -> dict:
        if model_id not in self.entries:
            raise UnknownModelError(f"unknown model: {model_id!r}")
        return self.entries[model_id]

    def register(self, model_id: str, kind: str, spec: ArchitectureSpec,
                 net: torch.nn.Module, normalization: NormalizationSpec,
                 role: str | None = None) -> dict:
        weights_rel = f"weights/{model_id}.pt"
        weights_path = self.root / weights_rel
        weights_path.parent.mkdir(parents=True, exist_ok=True)
        torch.save(net.state_dict(), weights_path)
        entry = {
            "model_id": model_id,
            "kind": kind,
            "arch": spec.to_dict(),
            "weights": weights_rel,
            "weights_hash": state_dict_hash(net.state_dict()),
            "normalization": normalization.to_dict(),
        }
        self.entries[model_id] = entry
        if role:
            self.roles[role] = model_id
        self._adapters.pop(model_id, None)
        return entry

    def _build_net(self, entry: dict) -> torch.nn.Module:
        spec = ArchitectureSpec.from_dict(entry["arch"])
        if entry["kind"] == "encoder":
            net = build_encoder_net(spec)
        elif entry["kind"] == "generator":
            net = build_generator_net(spec)
        else:
            raise ValueError(f"unknown model kind: {entry['kind']!r}")
        if entry.get("weights"):
            state = torch.load(self.root / entry["weights"], map_location="cpu", weights_only=True)
            net.load_state_dict(state)
        return net

    def adapter(self, model_id: str):
        if model_id not in self._adapters:
            entry = self.entry(model_id)
            net = self._build_net(entry)
            norm = NormalizationSpec.from_dict(entry["normalization"])
            if entry["kind"] == "encoder":
                ref = entry["arch"].get("reference_resolution", 128)
                self._adapters[model_id] = EncoderAdapter(model_id, net, norm, ref)
            else:
                self._adapters[model_id] = GeneratorAdapter(model_id, net, norm)
        return self._adapters[model_id]

    def encoder(self, model_id: str) -> EncoderAdapter:
        adapter = self.adapter(model_id)
        if not isinstance(adapter, EncoderAdapter):
            raise UnknownModelError(f"{model_id!r} is not an encoder")
        return adapter

    def generator(self, model_id: str) -> GeneratorAdapter:
        adapter = self.adapter(model_id)
        if not isinstance(adapter, GeneratorAdapter):
            raise UnknownModelError(f"{model_id!r} is not a generator")
        return adapter

    def list_layers(self, model_id: str):
        return self.adapter(model_id).layers()

    def role(self, name: str) -> str | None:
        return self.roles.get(name)
