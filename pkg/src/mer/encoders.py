"""Modality encoders: fixed-shape inputs -> embedding sequences.

The reference encoders are single linear maps, cheap deterministic
stand-ins for the large pretrained backbones. They keep the pipeline's
shape contract (5xDv visual, 499xDa acoustic, 100xDt textual) so an
external runtime exposing the same three calls can replace them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IdOutOfRange, ShapeMismatch
from .extraction import AcousticInput, TextInput, VisualInput

POOL_GRID = 8  # visual average-pool output is 8x8x3 -> 192 features


@dataclass
class EncoderConfig:
    d_visual: int = 512
    d_acoustic: int = 768
    d_textual: int = 768
    acoustic_window: int = 400
    acoustic_hop: int = 320

    def __post_init__(self):
        if min(self.d_visual, self.d_acoustic, self.d_textual) <= 0:
            raise ValueError("embedding dims must be positive")
        if not (self.acoustic_window >= self.acoustic_hop > 0):
            raise ValueError("need window >= hop > 0")

    @property
    def n_acoustic_frames(self) -> int:
        from .extraction import AUDIO_SAMPLES

        return (AUDIO_SAMPLES - self.acoustic_window) // self.acoustic_hop + 1


def _require_shape(name: str, tensor: np.ndarray, shape: tuple[int, ...]) -> None:
    if tensor.shape != shape:
        raise ShapeMismatch(f"{name}: expected shape {shape}, got {tensor.shape}")


def pool_image(image: np.ndarray, grid: int = POOL_GRID) -> np.ndarray:
    """Average-pool an HxWx3 image to grid x grid x 3 and flatten row-major."""
    h, w, c = image.shape
    if h % grid or w % grid:
        raise ShapeMismatch(f"image {h}x{w} not divisible into a {grid}x{grid} pool grid")
    pooled = image.reshape(grid, h // grid, grid, w // grid, c).mean(axis=(1, 3))
    return pooled.reshape(-1)


def encode_visual(v: VisualInput, weights: dict[str, np.ndarray],
                  cfg: EncoderConfig | None = None) -> np.ndarray:
    cfg = cfg or EncoderConfig()
    proj = np.asarray(weights["vis.proj"])
    _require_shape("vis.proj", proj, (cfg.d_visual, POOL_GRID * POOL_GRID * 3))
    feats = np.stack([pool_image(img.astype(np.float64)) for img in v.images])
    return feats @ proj.astype(np.float64).T  # (5, d_visual)


def encode_acoustic(a: AcousticInput, weights: dict[str, np.ndarray],
                    cfg: EncoderConfig | None = None) -> np.ndarray:
    cfg = cfg or EncoderConfig()
    proj = np.asarray(weights["aco.proj"])
    _require_shape("aco.proj", proj, (cfg.d_acoustic, cfg.acoustic_window))
    x = a.samples.astype(np.float64)
    n = cfg.n_acoustic_frames
    idx = np.arange(cfg.acoustic_window)[None, :] + cfg.acoustic_hop * np.arange(n)[:, None]
    return x[idx] @ proj.astype(np.float64).T  # (499, d_acoustic)


def encode_textual(t: TextInput, weights: dict[str, np.ndarray],
                   cfg: EncoderConfig | None = None) -> np.ndarray:
    cfg = cfg or EncoderConfig()
    table = np.asarray(weights["txt.emb"])
    if table.ndim != 2 or table.shape[1] != cfg.d_textual:
        raise ShapeMismatch(f"txt.emb: expected (V, {cfg.d_textual}), got {table.shape}")
    ids = t.token_ids
    if ids.min() < 0 or ids.max() >= table.shape[0]:
        raise IdOutOfRange(
            f"token id {int(ids[(ids < 0) | (ids >= table.shape[0])][0])} "
            f"outside embedding table of size {table.shape[0]}"
        )
    return table.astype(np.float64)[ids]  # (100, d_textual)


def encode_clip(clip, weights: dict[str, np.ndarray],
                cfg: EncoderConfig | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Encode all three modalities of an UtteranceClip."""
    return (
        encode_visual(clip.visual, weights, cfg),
        encode_acoustic(clip.audio, weights, cfg),
        encode_textual(clip.tokens, weights, cfg),
    )
