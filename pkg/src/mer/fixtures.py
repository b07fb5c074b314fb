"""Deterministic synthetic fixtures: media bundles, vocab and a small
reference model archive. Everything is seeded so repeated generation is
byte-identical."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .archive import save_model
from .encoders import POOL_GRID, EncoderConfig
from .extraction import Vocab
from .fusion import EMOTIONS, FusionConfig, init_weights
from .media import AudioTrack, FrameSequence, MediaBundle, Word, write_bundle

FIXTURE_KINDS = ("silence", "one-utt", "two-utt")

FIXTURE_VOCAB_TOKENS = [
    "<pad>", "<unk>",
    "i", "am", "happy", "this", "is", "sad", "and", "now", "very",
]


def fixture_vocab() -> Vocab:
    return Vocab(list(FIXTURE_VOCAB_TOKENS))


def _tone(rate: int, duration_s: float, freq_hz: float, amp: float) -> np.ndarray:
    t = np.arange(int(rate * duration_s)) / rate
    return (amp * np.sin(2 * np.pi * freq_hz * t)).astype(np.float64)


def _frames(n: int, fps: float, seed: int, height: int = 72, width: int = 96):
    rng = np.random.default_rng(seed)
    frames = []
    yy, xx = np.mgrid[0:height, 0:width]
    for i in range(n):
        # a drifting bright blob on a noisy background, face-ish enough to crop
        cx = width / 2 + 10 * np.sin(i / 5)
        cy = height / 2 + 5 * np.cos(i / 7)
        blob = 180 * np.exp(-(((xx - cx) / 18) ** 2 + ((yy - cy) / 14) ** 2))
        base = rng.integers(0, 40, size=(height, width, 3)).astype(np.float64)
        img = base + blob[:, :, None] * np.array([1.0, 0.8, 0.7])
        frames.append(np.clip(img, 0, 255).astype(np.uint8))
    timestamps = [i / fps for i in range(n)]
    return frames, timestamps


def make_fixture_bundle(kind: str, seed: int = 0, rate: int = 16000) -> MediaBundle:
    if kind not in FIXTURE_KINDS:
        raise ValueError(f"unknown fixture kind {kind!r}, want one of {FIXTURE_KINDS}")
    rng = np.random.default_rng(seed)
    fps = 10.0

    if kind == "silence":
        duration, bursts, words = 4.0, [], []
    elif kind == "one-utt":
        duration = 4.0
        bursts = [(1.0, 2.5, 440.0)]
        words = [Word("i", 1.1, 1.3), Word("am", 1.4, 1.6), Word("happy", 1.7, 2.0)]
    else:  # two-utt
        duration = 8.0
        bursts = [(1.0, 2.5, 440.0), (5.0, 6.5, 660.0)]
        words = [
            Word("i", 1.1, 1.3), Word("am", 1.4, 1.6), Word("happy", 1.7, 2.0),
            Word("this", 5.1, 5.3), Word("is", 5.4, 5.6), Word("sad", 5.7, 6.0),
        ]

    samples = rng.normal(0.0, 1e-4, size=int(rate * duration))
    for start, end, freq in bursts:
        lo, hi = int(start * rate), int(end * rate)
        samples[lo:hi] += _tone(rate, end - start, freq, 0.3)[: hi - lo]
    audio = AudioTrack(np.clip(samples, -1, 1).astype(np.float32), rate)

    frames, timestamps = _frames(int(duration * fps), fps, seed=seed + 1)
    return MediaBundle(
        source_id=f"fixture-{kind}-seed{seed}",
        audio=audio,
        frames=FrameSequence(frames, timestamps),
        transcript=words or None,
    )


def write_fixture_bundle(kind: str, path: str | Path, seed: int = 0) -> Path:
    return write_bundle(make_fixture_bundle(kind, seed=seed), path)


SMALL_FUSION = FusionConfig(d_visual=64, d_acoustic=64, d_textual=64,
                            conv_channels=16, kernel=3, hidden=32)
SMALL_ENCODER = EncoderConfig(d_visual=64, d_acoustic=64, d_textual=64)


def make_reference_tensors(fusion_cfg: FusionConfig = SMALL_FUSION,
                           encoder_cfg: EncoderConfig = SMALL_ENCODER,
                           vocab_size: int | None = None,
                           seed: int = 0) -> dict[str, np.ndarray]:
    """Encoder + fusion tensors with seeded small random values; the
    embedding-table pad row (id 0) is zero."""
    rng = np.random.default_rng(seed)
    v = vocab_size or len(FIXTURE_VOCAB_TOKENS)
    tensors = {
        "vis.proj": rng.standard_normal((encoder_cfg.d_visual, POOL_GRID * POOL_GRID * 3)) * 0.05,
        "aco.proj": rng.standard_normal((encoder_cfg.d_acoustic, encoder_cfg.acoustic_window)) * 0.05,
        "txt.emb": rng.standard_normal((v, encoder_cfg.d_textual)) * 0.05,
    }
    tensors["txt.emb"][0] = 0.0
    tensors.update(init_weights(fusion_cfg, seed=seed + 1).tensors())
    return {k: t.astype(np.float32) for k, t in tensors.items()}


TINY_FUSION = FusionConfig(d_visual=8, d_acoustic=8, d_textual=8,
                           conv_channels=8, kernel=3, hidden=16)


def make_separable_dataset(n: int = 64, seed: int = 0,
                           cfg: FusionConfig = TINY_FUSION, t_len: int = 4,
                           margin: float = 0.8, amplitude: float = 3.0):
    """Linearly separable multi-label training set.

    Each sample is a random vector tiled over time in all three
    modalities; emotion e is positive iff the sample projects positively
    onto a fixed random unit direction. Samples closer than `margin` to
    any decision plane are rejected so 200 epochs of full-batch descent
    separate the set cleanly. Returns (dataset, cfg) in the train_head
    batch format.
    """
    rng = np.random.default_rng(seed)
    dims = [cfg.d_visual, cfg.d_acoustic, cfg.d_textual]
    total = sum(dims)
    directions = rng.standard_normal((len(EMOTIONS), total))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    dataset = []
    while len(dataset) < n:
        v = rng.standard_normal(total)
        proj = directions @ v
        if np.min(np.abs(proj)) < margin:
            continue
        labels = (proj > 0).astype(np.float64)
        parts = np.split(v * amplitude, np.cumsum(dims)[:-1])
        triple = tuple(np.tile(p, (t_len, 1)) for p in parts)
        dataset.append((triple, labels))
    return dataset, cfg


def write_reference_model(path: str | Path, seed: int = 0,
                          fusion_cfg: FusionConfig = SMALL_FUSION,
                          encoder_cfg: EncoderConfig = SMALL_ENCODER,
                          vocab_size: int | None = None) -> Path:
    tensors = make_reference_tensors(fusion_cfg, encoder_cfg, vocab_size, seed)
    return save_model(path, tensors, fusion_cfg, encoder_cfg, EMOTIONS)
