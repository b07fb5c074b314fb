import io
import json
import threading
import time
import zipfile
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from mer.service import ServiceConfig, create_app, load_service_config

DATA = Path(__file__).parent / "data"


def zip_bundle(name: str) -> bytes:
    src = DATA / "fixtures" / name
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        for path in sorted(src.rglob("*")):
            if path.is_file():
                zf.write(path, path.relative_to(src))
    return buf.getvalue()


def service_config(tmp_path, **kwargs) -> ServiceConfig:
    assets = DATA / "assets"
    return ServiceConfig(
        model_path=str(assets / "model"),
        vocab_path=str(assets / "vocab.json"),
        thresholds_path=str(assets / "thresholds.json"),
        jobs_dir=str(tmp_path / "jobs"),
        **kwargs,
    )


@pytest.fixture
def client(tmp_path):
    app = create_app(service_config(tmp_path))
    with TestClient(app) as c:
        yield c
    app.state.store.shutdown()


def upload(client, name="two_utt") -> str:
    resp = client.post("/api/jobs", files={"file": (f"{name}.zip", zip_bundle(name))})
    assert resp.status_code == 202, resp.text
    return resp.json()["job_id"]


def wait_done(client, job_id, timeout=30.0) -> dict:
    deadline = time.time() + timeout
    while time.time() < deadline:
        body = client.get(f"/api/jobs/{job_id}").json()
        if body["state"] in ("done", "failed"):
            return body
        time.sleep(0.05)
    raise TimeoutError(f"job {job_id} did not finish")


def read_events(client, job_id) -> bytes:
    with client.stream("GET", f"/api/jobs/{job_id}/events") as resp:
        assert resp.status_code == 200
        return b"".join(resp.iter_bytes())


def test_health(client):
    assert client.get("/api/health").json() == {"status": "ok"}


def test_job_lifecycle(client, tmp_path):
    job_id = upload(client)
    assert len(job_id) >= 16
    body = wait_done(client, job_id)
    assert body["state"] == "done"

    events = [json.loads(l) for l in read_events(client, job_id).decode().splitlines()]
    assert [e["type"] for e in events] == ["utterance", "utterance", "final"]
    final = events[-1]
    assert body["result"]["avg_probs"] == final["avg_probs"]
    assert body["result"]["n_utterances"] == 2

    # per-utterance artifacts are served
    face = client.get(f"/api/jobs/{job_id}/utterances/0/faces/0.png")
    assert face.status_code == 200 and face.headers["content-type"] == "image/png"
    audio = client.get(f"/api/jobs/{job_id}/utterances/1/audio.wav")
    assert audio.status_code == 200

    job_dir = tmp_path / "jobs" / job_id
    assert job_dir.is_dir()
    assert client.delete(f"/api/jobs/{job_id}").status_code == 204
    assert not job_dir.exists()
    assert client.get(f"/api/jobs/{job_id}").status_code == 410
    assert client.delete(f"/api/jobs/{job_id}").status_code == 410


def test_events_match_cli_inference(client, tmp_path):
    """Service event stream equals `mer infer` output for the same input."""
    from click.testing import CliRunner

    from mer.cli import main

    job_id = upload(client)
    wait_done(client, job_id)
    streamed = read_events(client, job_id)

    out = tmp_path / "events.ndjson"
    assets = DATA / "assets"
    result = CliRunner().invoke(main, [
        "infer", "--input", str(DATA / "fixtures" / "two_utt"),
        "--model", str(assets / "model"), "--thresholds", str(assets / "thresholds.json"),
        "--vocab", str(assets / "vocab.json"), "--out", str(out)])
    assert result.exit_code == 0
    assert streamed == out.read_bytes()


def test_upload_errors(client):
    assert client.post("/api/jobs", files={"file": ("e.zip", b"")}).status_code == 400
    assert client.post("/api/jobs", files={"file": ("x.bin", b"not a zip")}).status_code == 422
    assert client.post("/api/jobs").status_code == 400


def test_upload_too_large(tmp_path):
    app = create_app(service_config(tmp_path, max_upload_bytes=1000))
    with TestClient(app) as client:
        resp = client.post("/api/jobs", files={"file": ("b.zip", zip_bundle("silence"))})
        assert resp.status_code == 413
    app.state.store.shutdown()


def test_unknown_job_is_404(client):
    assert client.get("/api/jobs/doesnotexist00000").status_code == 404
    assert client.get("/api/jobs/doesnotexist00000/events").status_code == 404
    assert client.delete("/api/jobs/doesnotexist00000").status_code == 404


def test_late_subscriber_replay_byte_equality(tmp_path):
    app = create_app(service_config(tmp_path, utterance_delay_s=0.3))
    with TestClient(app) as client:
        job_id = upload(client)
        live: dict = {}

        def from_start():
            live["bytes"] = read_events(client, job_id)

        t = threading.Thread(target=from_start)
        t.start()  # subscribes while the job is still processing
        wait_done(client, job_id)
        t.join(timeout=10)
        assert "bytes" in live
        replayed = read_events(client, job_id)
        assert live["bytes"] == replayed
        indices = [json.loads(l)["index"] for l in replayed.decode().splitlines()
                   if json.loads(l)["type"] == "utterance"]
        assert indices == sorted(set(indices)) == [0, 1]
    app.state.store.shutdown()


def test_concurrent_jobs_are_isolated(tmp_path):
    app = create_app(service_config(tmp_path, max_parallel_jobs=4))
    kinds = ["one_utt", "two_utt"] * 4
    with TestClient(app) as client:
        ids = [upload(client, kind) for kind in kinds]
        assert len(set(ids)) == 8
        for job_id, kind in zip(ids, kinds):
            body = wait_done(client, job_id)
            assert body["state"] == "done"
            golden = (DATA / f"golden_{kind}.ndjson").read_bytes()
            assert read_events(client, job_id) == golden
    app.state.store.shutdown()


def test_restart_marks_inflight_jobs_failed(tmp_path):
    cfg = service_config(tmp_path)
    jobs_dir = tmp_path / "jobs" / "aaaaaaaaaaaaaaaa"
    (jobs_dir / "input").mkdir(parents=True)
    (jobs_dir / "status.json").write_text(json.dumps({"state": "processing"}))
    (jobs_dir / "events.ndjson").write_text('{"type":"utterance","index":0}\n')

    app = create_app(cfg)
    with TestClient(app) as client:
        body = client.get("/api/jobs/aaaaaaaaaaaaaaaa").json()
        assert body["state"] == "failed"
        lines = read_events(client, "aaaaaaaaaaaaaaaa").decode().splitlines()
        assert json.loads(lines[0])["index"] == 0
        assert json.loads(lines[-1])["type"] == "error"
    app.state.store.shutdown()


def test_restart_preserves_done_jobs(tmp_path):
    cfg = service_config(tmp_path)
    app = create_app(cfg)
    with TestClient(app) as client:
        job_id = upload(client, "one_utt")
        wait_done(client, job_id)
        events = read_events(client, job_id)
    app.state.store.shutdown()

    app2 = create_app(cfg)
    with TestClient(app2) as client:
        body = client.get(f"/api/jobs/{job_id}").json()
        assert body["state"] == "done"
        assert body["result"]["n_utterances"] == 1
        assert read_events(client, job_id) == events
    app2.state.store.shutdown()


def test_delete_while_processing_cancels(tmp_path):
    app = create_app(service_config(tmp_path, utterance_delay_s=0.5))
    with TestClient(app) as client:
        job_id = upload(client)
        time.sleep(0.2)  # job is mid-flight
        assert client.delete(f"/api/jobs/{job_id}").status_code == 204
        assert client.get(f"/api/jobs/{job_id}").status_code == 410
        time.sleep(1.5)  # worker hits the boundary and stops
        assert not (tmp_path / "jobs" / job_id).exists()
    app.state.store.shutdown()


def test_config_precedence(tmp_path):
    cfg_file = tmp_path / "svc.json"
    cfg_file.write_text(json.dumps({"jobs_dir": "from_file", "max_parallel_jobs": 7}))
    cfg = load_service_config(
        cfg_file,
        env={"MER_JOBS_DIR": "from_env", "MER_MAX_UPLOAD_BYTES": "123"},
        overrides={"jobs_dir": "from_flag"},
    )
    assert cfg.jobs_dir == "from_flag"  # flag > env > file
    assert cfg.max_upload_bytes == 123
    assert cfg.max_parallel_jobs == 7
