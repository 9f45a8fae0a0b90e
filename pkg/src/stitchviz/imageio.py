"""PNG/JPEG encoding and decoding between files, bytes, and unit tensors."""

from __future__ import annotations

import base64
import io

import numpy as np
import torch
from PIL import Image

MAX_IMAGE_SIDE = 4096


def tensor_to_png_bytes(data: torch.Tensor) -> bytes:
    """Encode a (3, H, W) unit-space tensor as PNG bytes."""
    arr = (data.detach().cpu().clamp(0, 1).numpy() * 255.0).round().astype(np.uint8)
    img = Image.fromarray(arr.transpose(1, 2, 0))
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def tensor_to_png_b64(data: torch.Tensor) -> str:
    return base64.b64encode(tensor_to_png_bytes(data)).decode("ascii")


def bytes_to_tensor(raw: bytes) -> torch.Tensor:
    """Decode PNG/JPEG bytes to a (3, H, W) unit-space tensor."""
    img = Image.open(io.BytesIO(raw))
    if img.format not in ("PNG", "JPEG"):
        raise ValueError(f"unsupported image format: {img.format}")
    if img.width > MAX_IMAGE_SIDE or img.height > MAX_IMAGE_SIDE:
        raise ValueError(f"image exceeds {MAX_IMAGE_SIDE}x{MAX_IMAGE_SIDE}")
    arr = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
    return torch.from_numpy(arr.transpose(2, 0, 1).copy())


def b64_to_tensor(b64: str) -> torch.Tensor:
    return bytes_to_tensor(base64.b64decode(b64))


def save_png(data: torch.Tensor, path) -> None:
    with open(path, "wb") as f:
        f.write(tensor_to_png_bytes(data))


def load_image(path) -> torch.Tensor:
    with open(path, "rb") as f:
        return bytes_to_tensor(f.read())
