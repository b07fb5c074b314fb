"""Energy-based voice activity detection with hangover smoothing.

The reference VAD thresholds frame RMS energy (dB) relative to a
percentile noise floor, which makes the detector invariant to overall
signal scale. External VAD backends can be plugged in through the
VadBackend protocol; their output is normalized to sorted,
non-overlapping spans.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from .errors import BackendFailure, EmptyAudio
from .media import AudioTrack

ENERGY_EPS = 1e-10


@dataclass
class VadConfig:
    frame_ms: int = 30
    hop_ms: int = 10
    floor_percentile: float = 10
    onset_db_above_floor: float = 10.0
    min_speech_ms: int = 250
    min_silence_ms: int = 300
    pad_ms: int = 100

    def __post_init__(self):
        if not (self.frame_ms >= self.hop_ms > 0):
            raise ValueError("need frame_ms >= hop_ms > 0")
        if not (0 <= self.floor_percentile <= 100):
            raise ValueError("floor_percentile must be in [0, 100]")
        if min(self.min_speech_ms, self.min_silence_ms, self.pad_ms) < 0:
            raise ValueError("durations must be non-negative")


@dataclass(frozen=True)
class UtteranceSpan:
    start_s: float
    end_s: float

    def __post_init__(self):
        if not (0 <= self.start_s < self.end_s):
            raise ValueError(f"invalid span [{self.start_s}, {self.end_s}]")

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


def frame_energies(track: AudioTrack, cfg: VadConfig) -> np.ndarray:
    """Per-frame RMS energy in dB; the trailing partial frame is dropped."""
    if len(track.samples) == 0:
        raise EmptyAudio("cannot compute frame energies of empty audio")
    frame_len = int(track.sample_rate_hz * cfg.frame_ms / 1000)
    hop_len = int(track.sample_rate_hz * cfg.hop_ms / 1000)
    x = track.samples.astype(np.float64)
    n_frames = (len(x) - frame_len) // hop_len + 1
    if n_frames <= 0:
        return np.empty(0, dtype=np.float64)
    idx = np.arange(frame_len)[None, :] + hop_len * np.arange(n_frames)[:, None]
    rms = np.sqrt(np.mean(x[idx] ** 2, axis=1))
    return 20.0 * np.log10(rms + ENERGY_EPS)


def _merge_spans(spans: list[UtteranceSpan]) -> list[UtteranceSpan]:
    merged: list[UtteranceSpan] = []
    for span in sorted(spans, key=lambda s: s.start_s):
        if merged and span.start_s <= merged[-1].end_s:
            if span.end_s > merged[-1].end_s:
                merged[-1] = UtteranceSpan(merged[-1].start_s, span.end_s)
        else:
            merged.append(span)
    return merged


def detect_spans(energies: np.ndarray, cfg: VadConfig, duration_s: float) -> list[UtteranceSpan]:
    energies = np.asarray(energies, dtype=np.float64)
    if energies.size == 0:
        return []
    threshold = np.percentile(energies, cfg.floor_percentile) + cfg.onset_db_above_floor
    speech = energies > threshold

    hop_s = cfg.hop_ms / 1000.0
    frame_s = cfg.frame_ms / 1000.0

    # contiguous speech runs as (start_s, end_s)
    runs: list[tuple[float, float]] = []
    start = None
    for i, flag in enumerate(speech):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start * hop_s, (i - 1) * hop_s + frame_s))
            start = None
    if start is not None:
        runs.append((start * hop_s, (len(speech) - 1) * hop_s + frame_s))

    runs = [r for r in runs if (r[1] - r[0]) * 1000 >= cfg.min_speech_ms]

    # hangover: bridge short silences
    merged: list[tuple[float, float]] = []
    for r in runs:
        if merged and (r[0] - merged[-1][1]) * 1000 < cfg.min_silence_ms:
            merged[-1] = (merged[-1][0], r[1])
        else:
            merged.append(r)

    pad_s = cfg.pad_ms / 1000.0
    padded = []
    for a, b in merged:
        a = max(0.0, a - pad_s)
        b = min(duration_s, b + pad_s)
        if b > a:
            padded.append(UtteranceSpan(a, b))
    return _merge_spans(padded)


class VadBackend(Protocol):
    def __call__(self, track: AudioTrack) -> list[UtteranceSpan]: ...


def energy_vad_backend(cfg: VadConfig | None = None) -> Callable[[AudioTrack], list[UtteranceSpan]]:
    cfg = cfg or VadConfig()

    def backend(track: AudioTrack) -> list[UtteranceSpan]:
        return detect_spans(frame_energies(track, cfg), cfg, track.duration_s)

    return backend


def segment(track: AudioTrack, backend: VadBackend | None = None) -> list[UtteranceSpan]:
    """Run a VAD backend and normalize its output to sorted non-overlapping spans."""
    if backend is None:
        backend = energy_vad_backend()
    try:
        raw = backend(track)
    except EmptyAudio:
        raise
    except Exception as exc:
        raise BackendFailure(f"VAD backend failed: {exc}")
    clipped = [
        UtteranceSpan(max(0.0, s.start_s), min(track.duration_s, s.end_s))
        for s in raw
        if min(track.duration_s, s.end_s) > max(0.0, s.start_s)
    ]
    return _merge_spans(clipped)


def spans_to_json(spans: list[UtteranceSpan]) -> list[dict]:
    return [{"start_s": s.start_s, "end_s": s.end_s} for s in spans]


def spans_from_json(items: list[dict]) -> list[UtteranceSpan]:
    return [UtteranceSpan(float(d["start_s"]), float(d["end_s"])) for d in items]
