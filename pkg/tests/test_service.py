import base64
import json
import shutil

import pytest
from fastapi.testclient import TestClient

from stitchviz.core import ImageTensor
from stitchviz.data import texture_image
from stitchviz.gdinv import GdConfig, gd_invert
from stitchviz.imageio import b64_to_tensor, tensor_to_png_b64
from stitchviz.service.app import create_app
from stitchviz.service.state import AppState


@pytest.fixture(scope="module")
def service(registry, mini_stitch_path, tmp_path_factory):
    root = tmp_path_factory.mktemp("service")
    stitch_dir = root / "stitches"
    stitch_dir.mkdir()
    shutil.copy(mini_stitch_path, stitch_dir / "mini_stage2.json")
    shutil.copy(mini_stitch_path.with_suffix(".bin"), stitch_dir / "mini_stage2.bin")
    reports_dir = root / "reports"
    reports_dir.mkdir()
    (reports_dir / "r1.json").write_text(json.dumps(
        {"run_id": "r1", "created_at": "t", "methods": [{"name": "gan"}],
         "dataset_size": 3, "records": []}))
    state = AppState(registry, stitch_dir, reports_dir)
    client = TestClient(create_app(state))
    return client, state


def sample_ref(index=0):
    return {"sample": {"dataset": "textures", "index": index, "seed": 0, "res": 128}}


def gan_payload(index=0, seed=0):
    return {"image": sample_ref(index), "layer": "stage2", "method": "gan",
            "stitch_id": "mini_stage2", "seed": seed}


def collect_events(client, job_id):
    events = []
    with client.stream("GET", f"/api/jobs/{job_id}/events") as response:
        assert response.status_code == 200
        current = None
        for line in response.iter_lines():
            if line.startswith("event: "):
                current = line[len("event: "):]
            elif line.startswith("data: "):
                events.append({"event": current, "data": json.loads(line[len("data: "):])})
    return events


class TestDiscovery:
    def test_list_models(self, service):
        client, _ = service
        resp = client.get("/api/models")
        assert resp.status_code == 200
        body = {m["model_id"]: m for m in resp.json()}
        assert set(body) == {"desk_encoder", "desk_encoder_test", "desk_upsampler", "desk_unet"}
        assert body["desk_encoder"]["roles"] == ["interpret"]

    def test_layers_listing(self, service):
        client, _ = service
        resp = client.get("/api/models/desk_encoder/layers")
        assert resp.status_code == 200
        layers = resp.json()
        assert [l["layer_name"] for l in layers] == ["stage1", "stage2", "stage3", "stage4"]
        assert all({"channels", "sampling_distance", "height"} <= set(l) for l in layers)

    def test_unknown_model_404(self, service):
        client, _ = service
        assert client.get("/api/models/nope/layers").status_code == 404

    def test_stitches_listing(self, service):
        client, _ = service
        resp = client.get("/api/stitches")
        assert resp.status_code == 200
        entries = resp.json()
        assert entries[0]["stitch_id"] == "mini_stage2"
        assert entries[0]["source"]["layer_name"] == "stage2"

    def test_empty_stitch_store(self, registry, tmp_path):
        state = AppState(registry, tmp_path / "none", tmp_path / "none2")
        client = TestClient(create_app(state))
        resp = client.get("/api/stitches")
        assert resp.status_code == 200 and resp.json() == []

    def test_reports(self, service):
        client, _ = service
        listing = client.get("/api/reports").json()
        assert listing[0]["run_id"] == "r1"
        body = client.get("/api/reports/r1").json()
        assert body["dataset_size"] == 3
        assert client.get("/api/reports/zzz").status_code == 404

    def test_sample_png(self, service):
        client, _ = service
        resp = client.get("/api/samples/0?res=64")
        assert resp.status_code == 200
        assert resp.headers["content-type"] == "image/png"
        img = b64_to_tensor(base64.b64encode(resp.content).decode())
        assert img.shape == (3, 64, 64)
        assert resp.content == client.get("/api/samples/0?res=64").content
        assert client.get("/api/samples/-1").status_code == 422


class TestInvertGan:
    def test_returns_generator_sized_image(self, service):
        client, _ = service
        resp = client.post("/api/invert", json=gan_payload())
        assert resp.status_code == 200
        body = resp.json()
        img = b64_to_tensor(body["image_png_b64"])
        assert img.shape == (3, 128, 128)
        assert body["wall_time_ms"] > 0
        assert body["metrics"] is not None and "cosine" in body["metrics"]
        assert body["request"]["seed"] == 0

    def test_same_seed_byte_identical(self, service):
        client, _ = service
        a = client.post("/api/invert", json=gan_payload(seed=5)).json()
        b = client.post("/api/invert", json=gan_payload(seed=5)).json()
        assert a["image_png_b64"] == b["image_png_b64"]

    def test_uploaded_image_accepted(self, service):
        client, _ = service
        img, _ = texture_image(2, 5, 96)
        payload = {"image": {"image_b64": tensor_to_png_b64(img)},
                   "layer": "stage2", "method": "gan", "stitch_id": "mini_stage2"}
        resp = client.post("/api/invert", json=payload)
        assert resp.status_code == 200

    def test_unknown_stitch_404(self, service):
        client, _ = service
        payload = {**gan_payload(), "stitch_id": "missing"}
        assert client.post("/api/invert", json=payload).status_code == 404

    def test_unknown_model_404(self, service):
        client, _ = service
        payload = {**gan_payload(), "model_id": "nope"}
        assert client.post("/api/invert", json=payload).status_code == 404

    def test_gan_without_stitch_422(self, service):
        client, _ = service
        payload = {**gan_payload(), "stitch_id": None}
        assert client.post("/api/invert", json=payload).status_code == 422

    def test_layer_stitch_mismatch_422(self, service):
        client, _ = service
        payload = {**gan_payload(), "layer": "stage3"}
        assert client.post("/api/invert", json=payload).status_code == 422

    def test_unknown_layer_422(self, service):
        client, _ = service
        payload = {**gan_payload(), "layer": "stage9"}
        assert client.post("/api/invert", json=payload).status_code == 422

    def test_queue_overflow_503(self, registry, mini_stitch_path, tmp_path):
        state = AppState(registry, mini_stitch_path.parent, tmp_path, queue_depth=1)
        client = TestClient(create_app(state))
        assert state.admission.acquire(blocking=False)
        try:
            resp = client.post("/api/invert", json=gan_payload())
            assert resp.status_code == 503
        finally:
            state.admission.release()
        assert client.post("/api/invert", json=gan_payload()).status_code == 200


class TestGdJobs:
    def test_job_streams_progress_and_done(self, service):
        client, _ = service
        payload = {"image": sample_ref(1), "layer": "stage2", "method": "plain",
                   "seed": 3, "steps": 20}
        resp = client.post("/api/invert", json=payload)
        assert resp.status_code == 200
        job_id = resp.json()["job_id"]
        events = collect_events(client, job_id)
        progress = [e for e in events if e["event"] == "progress"]
        assert 1 <= len(progress) <= 20
        assert events[-1]["event"] == "done"
        final = events[-1]["data"]
        assert len(final["loss_trace"]) == 20
        img = b64_to_tensor(final["image_png_b64"])
        assert img.shape == (3, 128, 128)

    def test_event_losses_match_library_trace(self, service, interpret_enc):
        client, _ = service
        steps, seed = 16, 11
        payload = {"image": sample_ref(2), "layer": "stage2", "method": "fft_dec",
                   "seed": seed, "steps": steps}
        job_id = client.post("/api/invert", json=payload).json()["job_id"]
        events = collect_events(client, job_id)
        final = events[-1]["data"]

        img = ImageTensor.unit(texture_image(0, 2, 128)[0])
        target = interpret_enc.extract("stage2", img)
        cfg = GdConfig(method="fft_dec", steps=steps, seed=seed,
                       resolution=interpret_enc.reference_resolution)
        reference = gd_invert(interpret_enc, "stage2", target, cfg)
        assert final["loss_trace"] == pytest.approx(reference.loss_trace, abs=0.0)
        for e in events:
            if e["event"] == "progress":
                assert e["data"]["loss"] == reference.loss_trace[e["data"]["step"]]

    def test_cancel_emits_terminal_cancelled(self, service):
        client, _ = service
        payload = {"image": sample_ref(0), "layer": "stage2", "method": "plain",
                   "seed": 0, "steps": 5000}
        job_id = client.post("/api/invert", json=payload).json()["job_id"]
        assert client.post(f"/api/jobs/{job_id}/cancel").status_code == 200
        events = collect_events(client, job_id)
        assert events[-1]["event"] == "cancelled"

    def test_unknown_job_404(self, service):
        client, _ = service
        assert client.get("/api/jobs/doesnotexist/events").status_code == 404
        assert client.post("/api/jobs/doesnotexist/cancel").status_code == 404

    def test_job_status_endpoint(self, service):
        client, _ = service
        payload = {"image": sample_ref(0), "layer": "stage2", "method": "plain",
                   "seed": 1, "steps": 10}
        job_id = client.post("/api/invert", json=payload).json()["job_id"]
        collect_events(client, job_id)
        status = client.get(f"/api/jobs/{job_id}").json()
        assert status["state"] == "done"

    def test_gan_latency_beats_plain_512(self, service):
        """The reason the service exists: stitched inversion responds in a
        small fraction of a full gd run on the same sample."""
        import time

        client, _ = service
        client.post("/api/invert", json=gan_payload(index=3))  # warmup
        t0 = time.perf_counter()
        resp = client.post("/api/invert", json=gan_payload(index=3))
        gan_wall = time.perf_counter() - t0
        assert resp.status_code == 200
        payload = {"image": sample_ref(3), "layer": "stage2", "method": "plain",
                   "seed": 0, "steps": 512}
        job_id = client.post("/api/invert", json=payload).json()["job_id"]
        events = collect_events(client, job_id)
        plain_wall = events[-1]["data"]["wall_time_ms"] / 1000.0
        assert events[-1]["event"] == "done"
        assert gan_wall < plain_wall / 20.0


class TestVariations:
    def test_one_image_per_seed(self, service):
        client, _ = service
        payload = {"image": sample_ref(0), "stitch_id": "mini_stage2",
                   "seeds": list(range(31))}
        resp = client.post("/api/variations", json=payload)
        assert resp.status_code == 200
        assert len(resp.json()["images"]) == 31

    def test_duplicate_seeds_identical(self, service):
        client, _ = service
        payload = {"image": sample_ref(0), "stitch_id": "mini_stage2", "seeds": [7, 7]}
        images = client.post("/api/variations", json=payload).json()["images"]
        assert images[0] == images[1]

    def test_empty_seed_list_422(self, service):
        client, _ = service
        payload = {"image": sample_ref(0), "stitch_id": "mini_stage2", "seeds": []}
        assert client.post("/api/variations", json=payload).status_code == 422

    def test_unknown_stitch_404(self, service):
        client, _ = service
        payload = {"image": sample_ref(0), "stitch_id": "zzz", "seeds": [1]}
        assert client.post("/api/variations", json=payload).status_code == 404


class TestRequestIsolation:
    def test_concurrent_gan_requests_match_serial_results(self, service):
        import concurrent.futures

        client, _ = service
        serial = {seed: client.post("/api/invert", json=gan_payload(index=5, seed=seed)).json()
                  for seed in (10, 11, 12, 13)}
        with concurrent.futures.ThreadPoolExecutor(max_workers=4) as pool:
            futures = {seed: pool.submit(client.post, "/api/invert",
                                         json=gan_payload(index=5, seed=seed))
                       for seed in (10, 11, 12, 13)}
            for seed, fut in futures.items():
                body = fut.result().json()
                assert body["image_png_b64"] == serial[seed]["image_png_b64"], seed


class TestModelImmutability:
    def test_requests_do_not_mutate_models(self, service, registry):
        from stitchviz.models.registry import state_dict_hash

        client, _ = service
        before = {mid: state_dict_hash(registry.adapter(mid).net.state_dict())
                  for mid in registry.model_ids()}
        client.post("/api/invert", json=gan_payload(index=4))
        payload = {"image": sample_ref(4), "layer": "stage2", "method": "plain",
                   "seed": 0, "steps": 8}
        job_id = client.post("/api/invert", json=payload).json()["job_id"]
        collect_events(client, job_id)
        after = {mid: state_dict_hash(registry.adapter(mid).net.state_dict())
                 for mid in registry.model_ids()}
        assert before == after
