from .adapters import (
    EncoderAdapter,
    GeneratorAdapter,
    LayerInfo,
    derived_seed,
    noise_field,
)
from .encoders import ArchitectureSpec, DeskEncoder, IdentityEncoderNet, build_bilinear_variant, build_encoder_net
from .generators import ProgressiveUpsampler, UNetNoiseGenerator
from .registry import ModelRegistry, state_dict_hash

__all__ = [
    "ArchitectureSpec",
    "DeskEncoder",
    "EncoderAdapter",
    "GeneratorAdapter",
    "IdentityEncoderNet",
    "LayerInfo",
    "ModelRegistry",
    "ProgressiveUpsampler",
    "UNetNoiseGenerator",
    "build_bilinear_variant",
    "build_encoder_net",
    "derived_seed",
    "noise_field",
    "state_dict_hash",
]
