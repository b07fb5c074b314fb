"""HTTP job service around the pipeline orchestrator.

Endpoints:
    POST   /api/jobs                 upload media (bundle zip or video), 202 + job id
    GET    /api/jobs/{id}            job state (+ result when done)
    GET    /api/jobs/{id}/events     NDJSON stream: full replay then live tail
    DELETE /api/jobs/{id}            remove media/results, cancel if running
    GET    /api/health
    GET    /api/jobs/{id}/utterances/{k}/faces/{j}.png, .../audio.wav

Jobs live under jobs/{id}/ (input/, artifacts/, events.ndjson,
result.json, status.json) so the service is restartable: jobs found in
`processing` state at boot are marked failed.
"""

from __future__ import annotations

import io
import json
import os
import secrets
import shutil
import threading
import time
import zipfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import FileResponse, JSONResponse, StreamingResponse

from . import orchestrator
from .errors import JobCancelled, MerError
from .media import decode_video, load_bundle
from .orchestrator import PipelineConfig, format_event
from .vad import VadConfig

DEFAULT_MAX_UPLOAD = 512 * 1024 * 1024
ENV_PREFIX = "MER_"


@dataclass
class ServiceConfig:
    model_path: str = "model"
    vocab_path: str = "vocab.json"
    thresholds_path: str = "thresholds.json"
    jobs_dir: str = "jobs"
    max_upload_bytes: int = DEFAULT_MAX_UPLOAD
    max_parallel_jobs: int = 2
    decoder_command: str | None = None
    utterance_delay_s: float = 0.0  # test hook: pace event emission
    frontend_dir: str | None = None
    vad: VadConfig = field(default_factory=VadConfig)


_ENV_FIELDS = {
    "MODEL": ("model_path", str),
    "VOCAB": ("vocab_path", str),
    "THRESHOLDS": ("thresholds_path", str),
    "JOBS_DIR": ("jobs_dir", str),
    "MAX_UPLOAD_BYTES": ("max_upload_bytes", int),
    "MAX_PARALLEL_JOBS": ("max_parallel_jobs", int),
    "DECODER_COMMAND": ("decoder_command", str),
    "UTTERANCE_DELAY_S": ("utterance_delay_s", float),
    "FRONTEND_DIR": ("frontend_dir", str),
}


def load_service_config(path: str | Path | None = None,
                        env: dict | None = None,
                        overrides: dict | None = None) -> ServiceConfig:
    """Build config with precedence: overrides (flags) > env > file > defaults."""
    values: dict = {}
    if path is not None:
        raw = json.loads(Path(path).read_text())
        vad = raw.pop("vad", None)
        values.update(raw)
        if vad:
            values["vad"] = VadConfig(**vad)
    env = dict(os.environ if env is None else env)
    for key, (name, cast) in _ENV_FIELDS.items():
        if ENV_PREFIX + key in env:
            values[name] = cast(env[ENV_PREFIX + key])
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = v
    return ServiceConfig(**values)


class Job:
    def __init__(self, job_id: str, root: Path):
        self.id = job_id
        self.root = root
        self.state = "queued"
        self.created_at = time.time()
        self.events: list[str] = []
        self.result: dict | None = None
        self.cond = threading.Condition()
        self.cancel = threading.Event()

    @property
    def terminal(self) -> bool:
        return self.state in ("done", "failed", "cleared")

    def append_event(self, line: str) -> None:
        with self.cond:
            self.events.append(line)
            if self.state != "cleared":
                try:
                    with open(self.root / "events.ndjson", "a") as fh:
                        fh.write(line + "\n")
                except OSError:
                    pass
            self.cond.notify_all()

    def set_state(self, state: str, extra: dict | None = None) -> None:
        with self.cond:
            self.state = state
            if state != "cleared":
                try:
                    status = {"state": state, "created_at": self.created_at, **(extra or {})}
                    (self.root / "status.json").write_text(json.dumps(status))
                except OSError:
                    pass
            self.cond.notify_all()


def _video_result_obj(video, emotions) -> dict:
    return {
        "status": video.status,
        # rounded like the event stream so result and final event agree
        "avg_probs": {e: round(float(p), 6) for e, p in zip(emotions, video.avg_probs)},
        "active": [emotions[i] for i in video.avg_active],
        "n_utterances": len(video.utterances),
    }


class JobStore:
    def __init__(self, cfg: ServiceConfig):
        self.cfg = cfg
        self.root = Path(cfg.jobs_dir)
        self.root.mkdir(parents=True, exist_ok=True)
        self.jobs: dict[str, Job] = {}
        self.lock = threading.Lock()
        self.pipeline = PipelineConfig.from_paths(
            cfg.model_path, cfg.vocab_path, cfg.thresholds_path, vad_config=cfg.vad)
        self.pool = ThreadPoolExecutor(max_workers=cfg.max_parallel_jobs)
        self._recover()

    def _recover(self) -> None:
        """Reload jobs from disk; anything still in flight becomes failed."""
        for job_dir in sorted(p for p in self.root.iterdir() if p.is_dir()):
            status_path = job_dir / "status.json"
            if not status_path.is_file():
                continue
            try:
                status = json.loads(status_path.read_text())
            except (OSError, json.JSONDecodeError):
                continue
            job = Job(job_dir.name, job_dir)
            job.created_at = status.get("created_at", job.created_at)
            events_path = job_dir / "events.ndjson"
            if events_path.is_file():
                job.events = events_path.read_text().splitlines()
            result_path = job_dir / "result.json"
            if result_path.is_file():
                try:
                    job.result = json.loads(result_path.read_text())
                except (OSError, json.JSONDecodeError):
                    pass
            state = status.get("state", "failed")
            if state in ("queued", "processing"):
                job.state = "failed"
                job.append_event(format_event({
                    "type": "error",
                    "error": "service restarted while job was in flight",
                }))
                job.set_state("failed", {"error": "restart during processing"})
            else:
                job.state = state
            self.jobs[job.id] = job

    def create(self, payload: bytes, filename: str) -> Job:
        job_id = secrets.token_urlsafe(12)
        job_dir = self.root / job_id
        (job_dir / "input").mkdir(parents=True)
        upload_path = job_dir / "input" / (Path(filename).name or "upload.bin")
        upload_path.write_bytes(payload)
        job = Job(job_id, job_dir)
        with self.lock:
            self.jobs[job_id] = job
        job.set_state("queued")
        self.pool.submit(self._process, job, upload_path)
        return job

    def _load_media(self, job: Job, upload_path: Path):
        if zipfile.is_zipfile(upload_path):
            bundle_dir = job.root / "input" / "bundle"
            with zipfile.ZipFile(upload_path) as zf:
                zf.extractall(bundle_dir)
            if not (bundle_dir / "audio.wav").is_file():
                inner = [p for p in bundle_dir.iterdir() if p.is_dir()]
                if len(inner) == 1:
                    bundle_dir = inner[0]
            return load_bundle(bundle_dir)
        if self.cfg.decoder_command:
            return decode_video(upload_path, self.cfg.decoder_command,
                                job.root / "input" / "decoded")
        raise MerError("payload is not a bundle archive and no decoder is configured")

    def _process(self, job: Job, upload_path: Path) -> None:
        if job.cancel.is_set():
            return
        job.set_state("processing")
        delay = self.cfg.utterance_delay_s

        def sink(event: dict) -> None:
            if job.cancel.is_set():
                raise JobCancelled(job.id)
            if delay:
                time.sleep(delay)
            job.append_event(format_event(event))

        try:
            bundle = self._load_media(job, upload_path)
            video = orchestrator.run(bundle, self.pipeline, sink,
                                     artifact_dir=job.root / "artifacts")
        except JobCancelled:
            # DELETE set the state; remove anything written since the rmtree
            shutil.rmtree(job.root, ignore_errors=True)
            return
        except Exception as exc:
            job.append_event(format_event({
                "type": "error", "error": f"{type(exc).__name__}: {exc}"}))
            job.set_state("failed", {"error": str(exc)})
            return
        result = _video_result_obj(video, self.pipeline.model.emotions)
        with job.cond:
            if job.state == "cleared":
                shutil.rmtree(job.root, ignore_errors=True)
                return
        try:
            (job.root / "result.json").write_text(json.dumps(result))
        except OSError:
            pass
        job.result = result
        job.set_state("done")

    def get(self, job_id: str) -> Job | None:
        with self.lock:
            return self.jobs.get(job_id)

    def delete(self, job: Job) -> None:
        job.cancel.set()
        job.set_state("cleared")
        shutil.rmtree(job.root, ignore_errors=True)

    def shutdown(self) -> None:
        for job in list(self.jobs.values()):
            job.cancel.set()
        self.pool.shutdown(wait=True, cancel_futures=True)


def create_app(cfg: ServiceConfig | None = None) -> FastAPI:
    cfg = cfg or ServiceConfig()
    app = FastAPI(title="mer-service")
    store = JobStore(cfg)
    app.state.store = store

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.post("/api/jobs", status_code=202)
    async def create_job(request: Request):
        form = await request.form()
        upload = form.get("file")
        if upload is None or isinstance(upload, str):
            return JSONResponse({"error": "multipart field 'file' is required"}, status_code=400)
        payload = await upload.read()
        if not payload:
            return JSONResponse({"error": "empty payload"}, status_code=400)
        if len(payload) > store.cfg.max_upload_bytes:
            return JSONResponse({"error": "payload too large"}, status_code=413)
        if not zipfile.is_zipfile(io.BytesIO(payload)) and not store.cfg.decoder_command:
            return JSONResponse(
                {"error": "payload is not a bundle archive and no decoder is configured"},
                status_code=422,
            )
        job = store.create(payload, upload.filename or "upload.bin")
        return {"job_id": job.id}

    def _lookup(job_id: str) -> tuple[Job | None, Response | None]:
        job = store.get(job_id)
        if job is None:
            return None, JSONResponse({"error": "unknown job"}, status_code=404)
        if job.state == "cleared":
            return None, JSONResponse({"error": "job cleared"}, status_code=410)
        return job, None

    @app.get("/api/jobs/{job_id}")
    def job_status(job_id: str):
        job, err = _lookup(job_id)
        if err:
            return err
        body = {"job_id": job.id, "state": job.state}
        if job.state == "done" and job.result is not None:
            body["result"] = job.result
        return body

    @app.get("/api/jobs/{job_id}/events")
    def job_events(job_id: str):
        job, err = _lookup(job_id)
        if err:
            return err

        def stream():
            i = 0
            while True:
                with job.cond:
                    while i >= len(job.events) and not job.terminal:
                        job.cond.wait(timeout=0.5)
                    chunk = job.events[i:]
                    done = job.terminal and i + len(chunk) >= len(job.events)
                for line in chunk:
                    yield line + "\n"
                i += len(chunk)
                if done and i >= len(job.events):
                    return

        return StreamingResponse(stream(), media_type="application/x-ndjson")

    @app.delete("/api/jobs/{job_id}", status_code=204)
    def delete_job(job_id: str):
        job, err = _lookup(job_id)
        if err:
            return err
        store.delete(job)
        return Response(status_code=204)

    @app.get("/api/jobs/{job_id}/utterances/{k}/faces/{j}.png")
    def face_image(job_id: str, k: int, j: int):
        job, err = _lookup(job_id)
        if err:
            return err
        path = job.root / "artifacts" / str(k) / "faces" / f"{j}.png"
        if not path.is_file():
            return JSONResponse({"error": "artifact not found"}, status_code=404)
        return FileResponse(path, media_type="image/png")

    @app.get("/api/jobs/{job_id}/utterances/{k}/audio.wav")
    def utterance_audio(job_id: str, k: int):
        job, err = _lookup(job_id)
        if err:
            return err
        path = job.root / "artifacts" / str(k) / "audio.wav"
        if not path.is_file():
            return JSONResponse({"error": "artifact not found"}, status_code=404)
        return FileResponse(path, media_type="audio/wav")

    frontend = cfg.frontend_dir
    if frontend and Path(frontend).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=frontend, html=True), name="frontend")

    return app
