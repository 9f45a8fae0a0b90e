"""stitchviz: invert network activations in a single forward pass by stitching
an encoder into a GAN-style generator, with gradient-descent baselines, an
evaluation harness, grid-artifact diagnostics, an HTTP service, and a CLI."""

__version__ = "0.1.0"

from .core import (
    ActivationTensor,
    ImageTensor,
    LayerAddress,
    LayerRole,
    NormalizationSpec,
    RunManifest,
    ValueSpace,
    nearest_resize,
    to_unit_space,
    from_unit_space,
)

__all__ = [
    "ActivationTensor",
    "ImageTensor",
    "LayerAddress",
    "LayerRole",
    "NormalizationSpec",
    "RunManifest",
    "ValueSpace",
    "nearest_resize",
    "to_unit_space",
    "from_unit_space",
    "__version__",
]
