"""Service state: registry access, the stitch/report stores, the inference
queue, and background gradient-descent jobs with streamed progress."""

from __future__ import annotations

import json
import threading
import time
import uuid
from pathlib import Path

from ..core import ImageTensor, bilinear_resize_tensor
from ..data import TextureDataset
from ..imageio import b64_to_tensor
from ..models.registry import ModelRegistry
from ..stitch import StitchLayer, load_stitch

JOB_TTL_S = 600.0
QUEUE_DEPTH = 8
PROGRESS_EVERY = 8  # steps between streamed progress events
IMAGE_EVERY = 64  # steps between streamed intermediate images


class Job:
    def __init__(self, job_id: str):
        self.job_id = job_id
        self.state = "running"
        self.events: list[dict] = []
        self.cond = threading.Condition()
        self.cancel_requested = False
        self.created = time.monotonic()
        self.finished: float | None = None

    def push(self, event: dict) -> None:
        with self.cond:
            self.events.append(event)
            self.cond.notify_all()

    def finish(self, state: str, event: dict) -> None:
        with self.cond:
            self.state = state
            self.finished = time.monotonic()
            self.events.append(event)
            self.cond.notify_all()

    def stream(self):
        """Yield events from the start, then live until a terminal event."""
        i = 0
        while True:
            with self.cond:
                while i >= len(self.events) and self.state == "running":
                    self.cond.wait(timeout=1.0)
                if i >= len(self.events) and self.state != "running":
                    return
                event = self.events[i]
            i += 1
            yield event
            if event.get("event") in ("done", "cancelled", "error"):
                return


class JobManager:
    def __init__(self, ttl_s: float = JOB_TTL_S):
        self.ttl_s = ttl_s
        self._jobs: dict[str, Job] = {}
        self._lock = threading.Lock()

    def _sweep(self) -> None:
        now = time.monotonic()
        dead = [
            jid for jid, job in self._jobs.items()
            if job.finished is not None and now - job.finished > self.ttl_s
        ]
        for jid in dead:
            del self._jobs[jid]

    def create(self) -> Job:
        job = Job(uuid.uuid4().hex)
        with self._lock:
            self._sweep()
            self._jobs[job.job_id] = job
        return job

    def get(self, job_id: str) -> Job | None:
        with self._lock:
            self._sweep()
            return self._jobs.get(job_id)


class StitchStore:
    """Stitch checkpoints in a directory; ids are the manifest file stems."""

    def __init__(self, directory, registry: ModelRegistry | None = None):
        self.directory = Path(directory)
        self.registry = registry
        self._cache: dict[str, StitchLayer] = {}

    def ids(self) -> list[str]:
        if not self.directory.exists():
            return []
        return sorted(p.stem for p in self.directory.glob("*.json"))

    def get(self, stitch_id: str) -> StitchLayer | None:
        if stitch_id not in self._cache:
            path = self.directory / f"{stitch_id}.json"
            if not path.exists():
                return None
            self._cache[stitch_id] = load_stitch(path, registry=self.registry)
        return self._cache[stitch_id]


class ReportStore:
    def __init__(self, directory):
        self.directory = Path(directory)

    def ids(self) -> list[str]:
        if not self.directory.exists():
            return []
        return sorted(p.stem for p in self.directory.glob("*.json"))

    def get(self, run_id: str) -> dict | None:
        path = self.directory / f"{run_id}.json"
        if not path.exists():
            return None
        with open(path) as f:
            return json.load(f)


class AppState:
    def __init__(self, registry: ModelRegistry, stitch_dir, reports_dir,
                 queue_depth: int = QUEUE_DEPTH):
        self.registry = registry
        self.stitches = StitchStore(stitch_dir, registry)
        self.reports = ReportStore(reports_dir)
        self.jobs = JobManager()
        # inference is serialized on one device; the semaphore bounds how many
        # requests may hold-or-wait before new ones get 503
        self.inference_lock = threading.Lock()
        self.admission = threading.BoundedSemaphore(queue_depth)

    def resolve_image(self, ref, target_resolution: int | None = None) -> ImageTensor:
        if ref.image_b64:
            data = b64_to_tensor(ref.image_b64)
        elif ref.sample is not None:
            if ref.sample.dataset != "textures":
                raise KeyError(f"unknown dataset: {ref.sample.dataset!r}")
            ds = TextureDataset(ref.sample.index + 1, ref.sample.res, seed=ref.sample.seed)
            data = ds.image(ref.sample.index)
        else:
            raise ValueError("image reference needs image_b64 or sample")
        if target_resolution is not None:
            data = bilinear_resize_tensor(data, target_resolution, target_resolution)
            data = data.clamp(0.0, 1.0)
        return ImageTensor.unit(data)
