"""End-to-end pipeline for one media input.

segment -> per-utterance extraction -> encode -> fusion head ->
thresholds, emitting one ordered NDJSON event per utterance and a final
video-level event carrying the average of the utterance probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from PIL import Image
from scipy.io import wavfile

from .archive import ModelArchive, load_model
from .calibration import apply_thresholds, load_thresholds
from .encoders import encode_clip
from .errors import JobCancelled
from .extraction import UtteranceClip, Vocab, extract_clip
from .fusion import forward
from .media import MediaBundle
from .vad import UtteranceSpan, VadConfig, energy_vad_backend, segment


@dataclass
class PipelineConfig:
    model: ModelArchive
    vocab: Vocab
    thresholds: np.ndarray
    vad_config: VadConfig = field(default_factory=VadConfig)
    face_backend: Callable | None = None
    stt_backend: Callable | None = None
    vad_backend: Callable | None = None

    @classmethod
    def from_paths(cls, model_path, vocab_path, thresholds_path,
                   vad_config: VadConfig | None = None) -> "PipelineConfig":
        import json

        vocab = Vocab.from_json_obj(json.loads(Path(vocab_path).read_text()))
        return cls(
            model=load_model(model_path),
            vocab=vocab,
            thresholds=load_thresholds(thresholds_path),
            vad_config=vad_config or VadConfig(),
        )


@dataclass
class UtteranceResult:
    index: int
    span: UtteranceSpan
    transcript: str
    probs: np.ndarray  # (6,)
    active: list[int]
    input_summary: dict
    diagnostics: list[str] = field(default_factory=list)


@dataclass
class VideoResult:
    utterances: list[UtteranceResult]
    avg_probs: np.ndarray
    avg_active: list[int]
    status: str  # "ok" | "no_speech"


def average_probs(results: list[UtteranceResult]) -> np.ndarray:
    if not results:
        return np.zeros(6, dtype=np.float64)
    return np.mean([r.probs for r in results], axis=0)


def _probs_obj(probs: np.ndarray, emotions: list[str]) -> dict:
    return {name: float(p) for name, p in zip(emotions, probs)}


def utterance_event(r: UtteranceResult, thresholds: np.ndarray, emotions: list[str]) -> dict:
    event = {
        "type": "utterance",
        "index": r.index,
        "start_s": float(r.span.start_s),
        "end_s": float(r.span.end_s),
        "transcript": r.transcript,
        "probs": _probs_obj(r.probs, emotions),
        "active": [emotions[i] for i in r.active],
        "thresholds": _probs_obj(thresholds, emotions),
        "input_summary": r.input_summary,
    }
    if r.diagnostics:
        event["diagnostics"] = list(r.diagnostics)
    return event


def final_event(result: VideoResult, emotions: list[str]) -> dict:
    return {
        "type": "final",
        "status": result.status,
        "avg_probs": _probs_obj(result.avg_probs, emotions),
        "active": [emotions[i] for i in result.avg_active],
    }


def run(bundle: MediaBundle, cfg: PipelineConfig,
        sink: Callable[[dict], None],
        artifact_dir: str | Path | None = None) -> VideoResult:
    """Process one bundle, emitting ordered events into sink.

    A failing utterance emits an utterance_error event and is excluded
    from the video-level average. A sink raising JobCancelled stops the
    run at the next utterance boundary.
    """
    emotions = cfg.model.emotions
    spans = segment(bundle.audio, cfg.vad_backend or energy_vad_backend(cfg.vad_config))

    results: list[UtteranceResult] = []
    for index, span in enumerate(spans):
        try:
            clip = extract_clip(
                bundle.audio, bundle.frames, span, cfg.vocab,
                face_backend=cfg.face_backend,
                stt_backend=cfg.stt_backend,
                transcript=bundle.transcript,
            )
            ev, ea, et = encode_clip(clip, cfg.model.tensors, cfg.model.encoder_config)
            pred = forward(ev, ea, et, cfg.model.fusion_weights)
            result = UtteranceResult(
                index=index,
                span=span,
                transcript=clip.text,
                probs=pred.probs,
                active=apply_thresholds(pred.probs, cfg.thresholds),
                input_summary={
                    "n_real_frames": clip.visual.n_real,
                    "audio_real_s": clip.audio.n_real / bundle.audio.sample_rate_hz,
                    "n_real_tokens": clip.tokens.n_real,
                },
                diagnostics=clip.diagnostics,
            )
        except JobCancelled:
            raise
        except Exception as exc:
            sink({"type": "utterance_error", "index": index,
                  "error": f"{type(exc).__name__}: {exc}"})
            continue
        if artifact_dir is not None:
            write_utterance_artifacts(clip, Path(artifact_dir), index,
                                      bundle.audio.sample_rate_hz)
        results.append(result)
        sink(utterance_event(result, cfg.thresholds, emotions))

    if results:
        avg = average_probs(results)
        video = VideoResult(results, avg, apply_thresholds(avg, cfg.thresholds), "ok")
    else:
        video = VideoResult([], np.zeros(len(emotions)), [], "no_speech")
    sink(final_event(video, emotions))
    return video


def write_utterance_artifacts(clip: UtteranceClip, root: Path, index: int,
                              sample_rate_hz: int) -> None:
    """Persist per-utterance face crops and audio slice for UI consumption."""
    out = root / f"{index}"
    (out / "faces").mkdir(parents=True, exist_ok=True)
    for j in range(clip.visual.images.shape[0]):
        pixels = np.clip(clip.visual.images[j] * 128.0 + 127.5, 0, 255).astype(np.uint8)
        Image.fromarray(pixels, mode="RGB").save(out / "faces" / f"{j}.png")
    n = max(clip.audio.n_real, 1)
    pcm = np.clip(np.round(clip.audio.samples[:n].astype(np.float64) * 32767.0),
                  -32768, 32767).astype(np.int16)
    wavfile.write(str(out / "audio.wav"), sample_rate_hz, pcm)


# --- NDJSON serialization (6-decimal floats for golden-file stability) ---

def _render(value) -> str:
    import json

    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.6f}"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, dict):
        return "{" + ",".join(f"{_render(str(k))}:{_render(v)}" for k, v in value.items()) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_render(v) for v in value) + "]"
    if value is None:
        return "null"
    if isinstance(value, np.floating):
        return f"{float(value):.6f}"
    raise TypeError(f"cannot serialize {type(value)}")


def format_event(event: dict) -> str:
    """One NDJSON line (without trailing newline)."""
    return _render(event)
