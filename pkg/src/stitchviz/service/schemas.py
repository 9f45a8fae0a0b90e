"""Pydantic request/response models for the HTTP API."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class SampleRef(BaseModel):
    dataset: str = "textures"
    index: int = 0
    seed: int = 0
    res: int = 128


class ImageRef(BaseModel):
    """Either an uploaded base64 PNG/JPEG or a synthetic dataset sample."""

    image_b64: Optional[str] = None
    sample: Optional[SampleRef] = None


class InvertRequest(BaseModel):
    image: ImageRef
    model_id: Optional[str] = None  # defaults to the registry's interpret role
    layer: str
    method: Literal["gan", "fft_dec", "plain"]
    stitch_id: Optional[str] = None  # required for method == "gan"
    seed: int = 0
    steps: Optional[int] = Field(default=None, ge=0)  # gd override


class InvertResponse(BaseModel):
    image_png_b64: str
    wall_time_ms: float
    metrics: Optional[dict] = None
    request: dict


class JobCreated(BaseModel):
    job_id: str


class JobStatus(BaseModel):
    job_id: str
    state: str
    step: Optional[int] = None
    loss: Optional[float] = None


class VariationsRequest(BaseModel):
    image: ImageRef
    stitch_id: str
    seeds: list[int]
    model_id: Optional[str] = None


class VariationsResponse(BaseModel):
    images: list[str]
    wall_time_ms: float


class LayerEntry(BaseModel):
    layer_name: str
    role: str
    sampling_distance: int
    channels: int
    height: int
    width: int


class ModelInfo(BaseModel):
    model_id: str
    kind: str
    family: str
    roles: list[str] = []


class StitchInfo(BaseModel):
    stitch_id: str
    source: dict
    target: dict
    trained_samples: int
    best_epoch: Optional[int] = None


class ReportSummary(BaseModel):
    run_id: str
    created_at: Optional[str] = None
    methods: list = []
    dataset_size: Optional[int] = None
