"""Media ingestion: bundle directories, WAV audio, frame sequences.

A "bundle" is a self-describing directory holding everything the pipeline
needs from one video:

    audio.wav         PCM 16-bit or 32-bit float, first channel used
    frames/%06d.png   frames in index order
    frames.json       {"timestamps_s": [...]}
    transcript.json   optional, {"words": [{"w","start_s","end_s"}, ...]}

Video files are only supported through an external decoder command that
materializes such a directory (see decode_video).
"""

from __future__ import annotations

import json
import shutil
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.io import wavfile

from .errors import (
    DecoderFailed,
    DecoderNotFound,
    MalformedHeader,
    MissingFile,
    NonMonotonicTimestamps,
)

DEFAULT_SAMPLE_RATE = 16000


@dataclass
class AudioTrack:
    samples: np.ndarray  # float32, values in [-1, 1]
    sample_rate_hz: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float32)
        if self.sample_rate_hz <= 0:
            raise MalformedHeader(f"sample rate must be positive, got {self.sample_rate_hz}")
        if not np.all(np.isfinite(self.samples)):
            raise MalformedHeader("audio contains non-finite samples")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclass
class FrameSequence:
    frames: list[np.ndarray]  # each uint8 HxWx3
    timestamps_s: list[float]

    def __post_init__(self):
        if len(self.frames) != len(self.timestamps_s):
            raise NonMonotonicTimestamps(
                f"{len(self.frames)} frames but {len(self.timestamps_s)} timestamps"
            )
        ts = self.timestamps_s
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise NonMonotonicTimestamps("frame timestamps must be strictly increasing")


@dataclass
class Word:
    w: str
    start_s: float
    end_s: float

    @property
    def midpoint_s(self) -> float:
        return (self.start_s + self.end_s) / 2.0


@dataclass
class MediaBundle:
    source_id: str
    audio: AudioTrack
    frames: FrameSequence
    transcript: list[Word] | None = field(default=None)


def _read_wav(path: Path) -> AudioTrack:
    try:
        rate, data = wavfile.read(str(path))
    except FileNotFoundError:
        raise MissingFile(f"missing audio file: {path}")
    except Exception as exc:
        raise MalformedHeader(f"cannot parse WAV header of {path}: {exc}")
    if data.ndim > 1:
        data = data[:, 0]  # take channel 0
    if data.dtype == np.int16:
        samples = data.astype(np.float32) / 32767.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float32) / 2147483647.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float32)
    else:
        raise MalformedHeader(f"unsupported WAV sample format {data.dtype} in {path}")
    return AudioTrack(samples=np.clip(samples, -1.0, 1.0), sample_rate_hz=int(rate))


def resample(track: AudioTrack, target_hz: int) -> AudioTrack:
    """Linear-interpolation resampling; identity when rates already match."""
    if target_hz <= 0:
        raise MalformedHeader(f"target rate must be positive, got {target_hz}")
    if target_hz == track.sample_rate_hz:
        return track
    n_in = len(track.samples)
    n_out = int(round(n_in * target_hz / track.sample_rate_hz))
    if n_in == 0 or n_out == 0:
        return AudioTrack(np.zeros(n_out, dtype=np.float32), target_hz)
    src_pos = np.arange(n_out, dtype=np.float64) * (track.sample_rate_hz / target_hz)
    out = np.interp(src_pos, np.arange(n_in, dtype=np.float64), track.samples.astype(np.float64))
    return AudioTrack(out.astype(np.float32), target_hz)


def load_bundle(path: str | Path, target_rate_hz: int = DEFAULT_SAMPLE_RATE) -> MediaBundle:
    """Load a bundle directory into a MediaBundle, resampling the audio."""
    root = Path(path)
    if not root.is_dir():
        raise MissingFile(f"bundle directory not found: {root}")

    audio = resample(_read_wav(root / "audio.wav"), target_rate_hz)

    frames_meta = root / "frames.json"
    if not frames_meta.is_file():
        raise MissingFile(f"missing frame index: {frames_meta}")
    try:
        meta = json.loads(frames_meta.read_text())
        timestamps = [float(t) for t in meta["timestamps_s"]]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise MalformedHeader(f"cannot parse {frames_meta}: {exc}")
    ts_pairs = list(zip(timestamps, timestamps[1:]))
    if any(b <= a for a, b in ts_pairs):
        raise NonMonotonicTimestamps(f"{frames_meta}: timestamps must be strictly increasing")

    frames_dir = root / "frames"
    frames = []
    for i in range(len(timestamps)):
        frame_path = frames_dir / f"{i:06d}.png"
        if not frame_path.is_file():
            raise MissingFile(f"missing frame file: {frame_path}")
        with Image.open(frame_path) as img:
            frames.append(np.asarray(img.convert("RGB"), dtype=np.uint8))
    if frames:
        shape0 = frames[0].shape
        if any(f.shape != shape0 for f in frames):
            raise MalformedHeader(f"{frames_dir}: frames have inconsistent dimensions")

    transcript = None
    transcript_path = root / "transcript.json"
    if transcript_path.is_file():
        try:
            words = json.loads(transcript_path.read_text())["words"]
            transcript = [Word(str(w["w"]), float(w["start_s"]), float(w["end_s"])) for w in words]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise MalformedHeader(f"cannot parse {transcript_path}: {exc}")
        if any(w.end_s < w.start_s or w.start_s < 0 for w in transcript):
            raise MalformedHeader(f"{transcript_path}: word spans must be non-negative")
        if any(b.start_s < a.start_s for a, b in zip(transcript, transcript[1:])):
            raise MalformedHeader(f"{transcript_path}: words must be non-decreasing by start_s")

    return MediaBundle(
        source_id=root.name,
        audio=audio,
        frames=FrameSequence(frames=frames, timestamps_s=timestamps),
        transcript=transcript,
    )


def write_bundle(bundle: MediaBundle, path: str | Path) -> Path:
    """Materialize a MediaBundle as a bundle directory (inverse of load_bundle)."""
    root = Path(path)
    (root / "frames").mkdir(parents=True, exist_ok=True)
    pcm = np.clip(np.round(bundle.audio.samples.astype(np.float64) * 32767.0), -32768, 32767)
    wavfile.write(str(root / "audio.wav"), bundle.audio.sample_rate_hz, pcm.astype(np.int16))
    for i, frame in enumerate(bundle.frames.frames):
        Image.fromarray(frame, mode="RGB").save(root / "frames" / f"{i:06d}.png")
    (root / "frames.json").write_text(
        json.dumps({"timestamps_s": bundle.frames.timestamps_s}) + "\n"
    )
    if bundle.transcript is not None:
        words = [{"w": w.w, "start_s": w.start_s, "end_s": w.end_s} for w in bundle.transcript]
        (root / "transcript.json").write_text(json.dumps({"words": words}) + "\n")
    return root


def decode_video(
    path: str | Path,
    decoder_command: str,
    workdir: str | Path,
    target_rate_hz: int = DEFAULT_SAMPLE_RATE,
) -> MediaBundle:
    """Run an external decoder to produce a bundle directory, then load it.

    decoder_command is a template with {input} and {outdir} placeholders,
    split on whitespace and run as a subprocess.
    """
    outdir = Path(workdir)
    outdir.mkdir(parents=True, exist_ok=True)
    argv = [part.format(input=str(path), outdir=str(outdir)) for part in decoder_command.split()]
    if not argv:
        raise DecoderNotFound("empty decoder command")
    if shutil.which(argv[0]) is None and not Path(argv[0]).exists():
        raise DecoderNotFound(f"decoder executable not found: {argv[0]}")
    proc = subprocess.run(argv, capture_output=True, text=True)
    if proc.returncode != 0:
        raise DecoderFailed(proc.returncode, proc.stderr.strip()[-2000:])
    return load_bundle(outdir, target_rate_hz=target_rate_hz)
