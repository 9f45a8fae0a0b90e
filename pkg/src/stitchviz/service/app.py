"""FastAPI service: real-time inversion, model/layer/stitch discovery, seed
variations, report access, and streamed gradient-descent jobs.

The service is read-only with respect to models and stitches: training runs
through the CLI, and endpoints only consume registered artifacts.
"""

from __future__ import annotations

import json
import threading
import time

from fastapi import FastAPI, HTTPException
from fastapi.responses import StreamingResponse

from ..core import ImageTensor, StitchVizError, UnknownLayerError, UnknownModelError
from ..evalharness import evaluate_inversion, seed_variations
from ..gdinv import GdConfig, gd_invert
from ..imageio import tensor_to_png_b64
from ..stitch import invert_via_gan
from .schemas import (
    InvertRequest,
    InvertResponse,
    JobCreated,
    JobStatus,
    LayerEntry,
    ModelInfo,
    ReportSummary,
    StitchInfo,
    VariationsRequest,
    VariationsResponse,
)
from .state import IMAGE_EVERY, PROGRESS_EVERY, AppState


def _layer_entries(adapter) -> list[LayerEntry]:
    return [
        LayerEntry(
            layer_name=info.name,
            role=info.address.role.value,
            sampling_distance=info.sampling_distance,
            channels=info.channels,
            height=info.height,
            width=info.width,
        )
        for info in adapter.layers()
    ]


def create_app(state: AppState, ui_dir=None) -> FastAPI:
    app = FastAPI(title="stitchviz", version="0.1.0")
    app.state.stitchviz = state

    def admission():
        if not state.admission.acquire(blocking=False):
            raise HTTPException(503, "inference queue is full")

    def interpret_encoder(model_id):
        mid = model_id or state.registry.role("interpret")
        if mid is None:
            raise HTTPException(404, "no interpret model configured")
        try:
            return state.registry.encoder(mid)
        except UnknownModelError:
            raise HTTPException(404, f"unknown model: {mid}")

    def scoring_context(interpret_id: str, layer: str):
        """Test-network adapter and layer when one is configured, else None."""
        test_id = state.registry.role("test")
        if not test_id or test_id == interpret_id:
            return None
        try:
            test_enc = state.registry.encoder(test_id)
            test_enc.layer(layer)  # stage-k corresponds to the same stage name
        except (UnknownModelError, UnknownLayerError):
            return None
        return test_enc, layer

    def run_gan(req: InvertRequest, enc, img: ImageTensor) -> InvertResponse:
        stitch = state.stitches.get(req.stitch_id) if req.stitch_id else None
        if req.stitch_id and stitch is None:
            raise HTTPException(404, f"unknown stitch: {req.stitch_id}")
        if stitch is None:
            raise HTTPException(422, "method 'gan' requires a stitch_id")
        if (stitch.source.layer_name != req.layer
                or stitch.source.model_id != enc.model_id):
            raise HTTPException(
                422,
                f"stitch {req.stitch_id} maps {stitch.source.model_id}/"
                f"{stitch.source.layer_name}, not {enc.model_id}/{req.layer}",
            )
        try:
            gen = state.registry.generator(stitch.target.model_id)
        except UnknownModelError:
            raise HTTPException(404, f"unknown generator: {stitch.target.model_id}")
        t0 = time.perf_counter()
        with state.inference_lock:
            result = invert_via_gan(enc, req.layer, stitch, gen,
                                    stitch.target.layer_name, img, req.seed)
            metrics = None
            scoring = scoring_context(enc.model_id, req.layer)
            if scoring is not None:
                metrics = evaluate_inversion(scoring[0], scoring[1], img, result.image)
        wall_ms = (time.perf_counter() - t0) * 1000.0
        return InvertResponse(
            image_png_b64=tensor_to_png_b64(result.image.data),
            wall_time_ms=wall_ms,
            metrics=metrics,
            request=req.model_dump(),
        )

    def start_gd_job(req: InvertRequest, enc, img: ImageTensor) -> JobCreated:
        job = state.jobs.create()
        cfg = GdConfig(
            method=req.method,
            steps=req.steps if req.steps is not None else 512,
            resolution=enc.reference_resolution,
            seed=req.seed,
        )

        def on_step(i, loss, image_fn):
            last = i == cfg.steps - 1
            if (i + 1) % PROGRESS_EVERY == 0 or last:
                data = {"step": i, "loss": loss}
                if (i + 1) % IMAGE_EVERY == 0 or last:
                    data["image_png_b64"] = tensor_to_png_b64(image_fn())
                job.push({"event": "progress", "data": data})

        def work():
            try:
                with state.inference_lock:
                    target = enc.extract(req.layer, img)
                    result = gd_invert(enc, req.layer, target, cfg,
                                       on_step=on_step,
                                       should_stop=lambda: job.cancel_requested)
                    metrics = None
                    scoring = scoring_context(enc.model_id, req.layer)
                    if scoring is not None and not job.cancel_requested:
                        metrics = evaluate_inversion(scoring[0], scoring[1], img, result.image)
                if job.cancel_requested:
                    job.finish("cancelled", {"event": "cancelled",
                                             "data": {"steps": result.steps}})
                    return
                payload = InvertResponse(
                    image_png_b64=tensor_to_png_b64(result.image.data),
                    wall_time_ms=result.wall_time_s * 1000.0,
                    metrics=metrics,
                    request=req.model_dump(),
                ).model_dump()
                payload["loss_trace"] = result.loss_trace
                payload["diverged"] = result.diverged
                job.finish("done", {"event": "done", "data": payload})
            except Exception as exc:  # surfaced to the client as a terminal event
                job.finish("error", {"event": "error", "data": {"message": str(exc)}})
            finally:
                state.admission.release()

        threading.Thread(target=work, daemon=True).start()
        return JobCreated(job_id=job.job_id)

    @app.get("/api/models", response_model=list[ModelInfo])
    def list_models():
        roles_by_model: dict = {}
        for role, mid in state.registry.roles.items():
            roles_by_model.setdefault(mid, []).append(role)
        return [
            ModelInfo(
                model_id=mid,
                kind=state.registry.entry(mid)["kind"],
                family=state.registry.entry(mid)["arch"]["family"],
                roles=sorted(roles_by_model.get(mid, [])),
            )
            for mid in state.registry.model_ids()
        ]

    @app.get("/api/models/{model_id}/layers", response_model=list[LayerEntry])
    def list_layers(model_id: str):
        try:
            return _layer_entries(state.registry.adapter(model_id))
        except UnknownModelError:
            raise HTTPException(404, f"unknown model: {model_id}")

    @app.get("/api/stitches", response_model=list[StitchInfo])
    def list_stitches():
        out = []
        for sid in state.stitches.ids():
            s = state.stitches.get(sid)
            out.append(StitchInfo(
                stitch_id=sid,
                source=s.source.to_dict(),
                target=s.target.to_dict(),
                trained_samples=s.trained_samples,
                best_epoch=s.metadata.get("best_epoch"),
            ))
        return out

    @app.get("/api/reports", response_model=list[ReportSummary])
    def list_reports():
        out = []
        for rid in state.reports.ids():
            data = state.reports.get(rid) or {}
            out.append(ReportSummary(
                run_id=rid,
                created_at=data.get("created_at"),
                methods=data.get("methods", []),
                dataset_size=data.get("dataset_size"),
            ))
        return out

    @app.get("/api/reports/{run_id}")
    def get_report(run_id: str):
        data = state.reports.get(run_id)
        if data is None:
            raise HTTPException(404, f"unknown report: {run_id}")
        return data

    @app.get("/api/samples/{index}")
    def sample_png(index: int, res: int = 128, seed: int = 0):
        """Synthetic dataset sample as PNG, so clients can show originals."""
        if index < 0 or res < 1 or res > 1024:
            raise HTTPException(422, "index must be >= 0 and 1 <= res <= 1024")
        from ..data import texture_image

        img, _ = texture_image(seed, index, res)
        from ..imageio import tensor_to_png_bytes
        from fastapi.responses import Response

        return Response(tensor_to_png_bytes(img), media_type="image/png")

    @app.post("/api/invert")
    def invert(req: InvertRequest):
        enc = interpret_encoder(req.model_id)
        try:
            enc.layer(req.layer)
            img = state.resolve_image(req.image, enc.reference_resolution)
        except UnknownLayerError as exc:
            raise HTTPException(422, str(exc))
        except (ValueError, KeyError) as exc:
            raise HTTPException(422, str(exc))
        admission()
        if req.method == "gan":
            try:
                return run_gan(req, enc, img)
            finally:
                state.admission.release()
        try:
            return start_gd_job(req, enc, img)
        except Exception:
            state.admission.release()
            raise

    @app.get("/api/jobs/{job_id}", response_model=JobStatus)
    def job_status(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            raise HTTPException(404, "unknown or expired job")
        last = next((e["data"] for e in reversed(job.events)
                     if e.get("event") == "progress"), {})
        return JobStatus(job_id=job_id, state=job.state,
                         step=last.get("step"), loss=last.get("loss"))

    @app.get("/api/jobs/{job_id}/events")
    def job_events(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            raise HTTPException(404, "unknown or expired job")

        def sse():
            for event in job.stream():
                yield f"event: {event['event']}\ndata: {json.dumps(event['data'])}\n\n"

        return StreamingResponse(sse(), media_type="text/event-stream")

    @app.post("/api/jobs/{job_id}/cancel")
    def cancel_job(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            raise HTTPException(404, "unknown or expired job")
        job.cancel_requested = True
        return {"job_id": job_id, "state": job.state}

    @app.post("/api/variations", response_model=VariationsResponse)
    def variations(req: VariationsRequest):
        if not req.seeds:
            raise HTTPException(422, "seeds must be non-empty")
        enc = interpret_encoder(req.model_id)
        stitch = state.stitches.get(req.stitch_id)
        if stitch is None:
            raise HTTPException(404, f"unknown stitch: {req.stitch_id}")
        try:
            gen = state.registry.generator(stitch.target.model_id)
            img = state.resolve_image(req.image, enc.reference_resolution)
        except UnknownModelError as exc:
            raise HTTPException(404, str(exc))
        except (ValueError, KeyError) as exc:
            raise HTTPException(422, str(exc))
        admission()
        try:
            t0 = time.perf_counter()
            with state.inference_lock:
                images = seed_variations(enc, stitch.source.layer_name, stitch, gen,
                                         stitch.target.layer_name, img, req.seeds)
            wall_ms = (time.perf_counter() - t0) * 1000.0
        except StitchVizError as exc:
            raise HTTPException(422, str(exc))
        finally:
            state.admission.release()
        return VariationsResponse(
            images=[tensor_to_png_b64(im.data) for im in images],
            wall_time_ms=wall_ms,
        )

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
