"""Per-utterance modality extraction.

Every utterance is converted into three fixed-shape model inputs:
5 face crops (160x160x3, normalized), 10 s of 16 kHz audio (160000
samples) and 100 token ids. Shorter content is zero-padded at the tail,
longer content is truncated to the head.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .errors import BackendFailure, IdOutOfRange, SpanOutOfRange
from .media import AudioTrack, FrameSequence, Word
from .vad import UtteranceSpan

N_FACES = 5
FACE_SIZE = 160
AUDIO_SAMPLES = 160000  # 10 s @ 16 kHz
N_TOKENS = 100
PAD_ID = 0
UNK_ID = 1

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


@dataclass
class VisualInput:
    images: np.ndarray  # (5, 160, 160, 3) float32, normalized
    n_real: int = N_FACES

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float32)
        assert self.images.shape == (N_FACES, FACE_SIZE, FACE_SIZE, 3)


@dataclass
class AcousticInput:
    samples: np.ndarray  # (160000,) float32
    n_real: int = AUDIO_SAMPLES

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float32)
        assert self.samples.shape == (AUDIO_SAMPLES,)


@dataclass
class TextInput:
    token_ids: np.ndarray  # (100,) int64, pad ids only as a suffix
    n_real: int = N_TOKENS

    def __post_init__(self):
        self.token_ids = np.asarray(self.token_ids, dtype=np.int64)
        assert self.token_ids.shape == (N_TOKENS,)


class Vocab:
    """Word-level vocabulary with reserved ids 0 (pad) and 1 (unk)."""

    def __init__(self, tokens: list[str]):
        if len(tokens) < 2:
            raise ValueError("vocab needs at least the two reserved slots")
        self.tokens = list(tokens)
        self.token_to_id = {tok: i for i, tok in enumerate(tokens) if i >= 2}
        if len(self.token_to_id) != len(tokens) - 2:
            raise ValueError("duplicate tokens in vocab")

    def __len__(self) -> int:
        return len(self.tokens)

    def lookup(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Vocab":
        return cls([str(t) for t in obj["tokens"]])

    def to_json_obj(self) -> dict:
        return {"tokens": self.tokens}


@dataclass
class UtteranceClip:
    span: UtteranceSpan
    audio: AcousticInput
    visual: VisualInput
    text: str
    tokens: TextInput
    diagnostics: list[str] = field(default_factory=list)


def slice_audio(track: AudioTrack, span: UtteranceSpan) -> AcousticInput:
    """Extract the span's samples; truncate to 10 s or zero-pad the tail."""
    rate = track.sample_rate_hz
    lo = int(np.floor(span.start_s * rate))
    hi = int(np.floor(span.end_s * rate))
    if lo < 0 or hi > len(track.samples) or lo >= hi:
        raise SpanOutOfRange(
            f"span [{span.start_s}, {span.end_s}] outside track of {track.duration_s:.3f} s"
        )
    chunk = track.samples[lo:hi]
    n_real = min(len(chunk), AUDIO_SAMPLES)
    out = np.zeros(AUDIO_SAMPLES, dtype=np.float32)
    out[:n_real] = chunk[:n_real]
    return AcousticInput(out, n_real=n_real)


def sample_frames(
    frames: FrameSequence, span: UtteranceSpan, n: int = N_FACES
) -> tuple[list[np.ndarray], int]:
    """Pick n frames uniformly across the span.

    Returns (images, n_real): the first n_real entries are real frames,
    the rest are zero images of the same shape.
    """
    in_span = [
        f for f, t in zip(frames.frames, frames.timestamps_s) if span.start_s <= t <= span.end_s
    ]
    t_count = len(in_span)
    if t_count >= n:
        idx = [int(np.floor(i * (t_count - 1) / (n - 1) + 0.5)) for i in range(n)]
        return [in_span[i] for i in idx], n
    pad_shape = in_span[0].shape if in_span else (FACE_SIZE, FACE_SIZE, 3)
    padded = list(in_span) + [np.zeros(pad_shape, dtype=np.uint8)] * (n - t_count)
    return padded, t_count


def bilinear_resize(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with half-pixel centers, channels preserved."""
    img = image.astype(np.float64)
    in_h, in_w = img.shape[:2]
    ys = np.clip((np.arange(out_h) + 0.5) * in_h / out_h - 0.5, 0, in_h - 1)
    xs = np.clip((np.arange(out_w) + 0.5) * in_w / out_w - 0.5, 0, in_w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None, None]
    wx = (xs - x0)[None, :, None]
    top = img[y0][:, x0] * (1 - wx) + img[y0][:, x1] * wx
    bot = img[y1][:, x0] * (1 - wx) + img[y1][:, x1] * wx
    return top * (1 - wy) + bot * wy


class FaceCropBackend(Protocol):
    def __call__(self, image: np.ndarray) -> tuple[int, int, int, int]:
        """Return a face bounding box (x, y, w, h) in pixel coordinates."""
        ...


def center_square_box(image: np.ndarray) -> tuple[int, int, int, int]:
    """Reference face box: the centered maximal square."""
    h, w = image.shape[:2]
    side = min(h, w)
    return ((w - side) // 2, (h - side) // 2, side, side)


def crop_face(
    image: np.ndarray,
    backend: FaceCropBackend | None = None,
    diagnostics: list[str] | None = None,
) -> np.ndarray:
    """Crop the backend's face box, resize to 160x160, normalize to ~[-1, 1].

    Backend failure falls back to the reference center crop and records a
    diagnostic instead of raising.
    """
    h, w = image.shape[:2]
    if h == 0 or w == 0:
        raise SpanOutOfRange("cannot crop a zero-sized image")
    box = None
    if backend is not None:
        try:
            box = backend(image)
        except Exception as exc:
            if diagnostics is not None:
                diagnostics.append(f"face backend failed, using center crop: {exc}")
    if box is None:
        box = center_square_box(image)
    x, y, bw, bh = box
    x, y = max(0, x), max(0, y)
    sub = image[y : min(h, y + bh), x : min(w, x + bw)]
    if sub.size == 0:
        raise BackendFailure(f"face box {box} selects no pixels in a {h}x{w} image")
    resized = bilinear_resize(sub, FACE_SIZE, FACE_SIZE)
    return ((resized - 127.5) / 128.0).astype(np.float32)


def extract_visual(
    frames: FrameSequence,
    span: UtteranceSpan,
    backend: FaceCropBackend | None = None,
    diagnostics: list[str] | None = None,
) -> VisualInput:
    """5 face crops for the span; missing frames become zero images."""
    sampled, n_real = sample_frames(frames, span)
    out = np.zeros((N_FACES, FACE_SIZE, FACE_SIZE, 3), dtype=np.float32)
    for i in range(n_real):
        out[i] = crop_face(sampled[i], backend=backend, diagnostics=diagnostics)
    return VisualInput(out, n_real=n_real)


class SttBackend(Protocol):
    def __call__(self, track: AudioTrack, span: UtteranceSpan) -> str: ...


def transcribe(
    track: AudioTrack,
    span: UtteranceSpan,
    backend: SttBackend | None = None,
    transcript: list[Word] | None = None,
    diagnostics: list[str] | None = None,
) -> str:
    """Utterance text: sidecar words whose midpoints fall in the span,
    or an external STT backend's output; empty when neither exists."""
    if backend is not None:
        try:
            return backend(track, span)
        except Exception as exc:
            if diagnostics is not None:
                diagnostics.append(f"stt backend failed: {exc}")
            return ""
    if transcript is None:
        return ""
    return " ".join(w.w for w in transcript if span.start_s <= w.midpoint_s <= span.end_s)


def tokenize(text: str, vocab: Vocab) -> TextInput:
    """Lowercase, strip ASCII punctuation, split on whitespace, map to ids."""
    words = [w.translate(_PUNCT_TABLE) for w in text.lower().split()]
    words = [w for w in words if w]
    ids = [vocab.lookup(w) for w in words[:N_TOKENS]]
    n_real = len(ids)
    out = np.zeros(N_TOKENS, dtype=np.int64)
    out[:n_real] = ids
    return TextInput(out, n_real=n_real)


def extract_clip(
    track: AudioTrack,
    frames: FrameSequence,
    span: UtteranceSpan,
    vocab: Vocab,
    face_backend: FaceCropBackend | None = None,
    stt_backend: SttBackend | None = None,
    transcript: list[Word] | None = None,
) -> UtteranceClip:
    diagnostics: list[str] = []
    audio = slice_audio(track, span)
    visual = extract_visual(frames, span, backend=face_backend, diagnostics=diagnostics)
    text = transcribe(track, span, backend=stt_backend, transcript=transcript,
                      diagnostics=diagnostics)
    tokens = tokenize(text, vocab)
    return UtteranceClip(span=span, audio=audio, visual=visual, text=text, tokens=tokens,
                         diagnostics=diagnostics)


def id_out_of_range_check(ids: np.ndarray, vocab_size: int) -> None:
    bad = ids[(ids < 0) | (ids >= vocab_size)]
    if bad.size:
        raise IdOutOfRange(f"token id {int(bad[0])} outside vocab of size {vocab_size}")
