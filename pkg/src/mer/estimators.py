"""sklearn-style wrappers around the functional core, so the fusion head
and the calibration step compose with pipelines and grid search."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .calibration import calibrate, evaluate
from .errors import LengthMismatch, ShapeMismatch
from .fusion import FusionConfig, train_head
from .media import AudioTrack
from .vad import VadConfig, energy_vad_backend, segment


def check_embedding_triples(X) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Validate a list of (visual, acoustic, textual) embedding sequences."""
    out = []
    for i, triple in enumerate(X):
        if len(triple) != 3:
            raise ShapeMismatch(f"sample {i}: expected 3 embedding sequences, got {len(triple)}")
        arrays = tuple(np.asarray(a, dtype=np.float64) for a in triple)
        for a in arrays:
            if a.ndim != 2 or a.shape[0] < 1:
                raise ShapeMismatch(f"sample {i}: embedding sequences must be TxD, got {a.shape}")
            if not np.all(np.isfinite(a)):
                raise ShapeMismatch(f"sample {i}: non-finite embedding values")
        out.append(arrays)
    return out


def check_multilabel(y, n_labels: int = 6) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 2 or y.shape[1] != n_labels:
        raise LengthMismatch(f"labels must be Nx{n_labels}, got {y.shape}")
    return y.astype(np.float64)


class FusionHeadClassifier(BaseEstimator):
    """Multi-label emotion classifier over per-modality embedding sequences.

    fit() trains the fusion head with full-batch gradient descent and then
    calibrates per-emotion thresholds on the training set; predict_proba()
    returns per-emotion sigmoid probabilities, predict() applies the
    strictly-above threshold rule.
    """

    def __init__(self, conv_channels=16, kernel=3, hidden=32, lr=0.5, epochs=200,
                 conv_lr_scale=1.0, linear_lr_scale=1.0, seed=0, calibrate_thresholds=True):
        self.conv_channels = conv_channels
        self.kernel = kernel
        self.hidden = hidden
        self.lr = lr
        self.epochs = epochs
        self.conv_lr_scale = conv_lr_scale
        self.linear_lr_scale = linear_lr_scale
        self.seed = seed
        self.calibrate_thresholds = calibrate_thresholds

    def _config(self, triples) -> FusionConfig:
        ev, ea, et = triples[0]
        return FusionConfig(
            d_visual=ev.shape[1], d_acoustic=ea.shape[1], d_textual=et.shape[1],
            conv_channels=self.conv_channels, kernel=self.kernel, hidden=self.hidden,
        )

    def fit(self, X, y):
        triples = check_embedding_triples(X)
        y = check_multilabel(y)
        if len(triples) != len(y):
            raise LengthMismatch(f"{len(triples)} samples vs {len(y)} label rows")
        self.config_ = self._config(triples)
        result = train_head(
            list(zip(triples, y)),
            lr=self.lr,
            epochs=self.epochs,
            group_lr_scale={"conv": self.conv_lr_scale, "linear": self.linear_lr_scale},
            cfg=self.config_,
            seed=self.seed,
        )
        self.weights_ = result.weights
        self.loss_trace_ = result.loss_trace
        if self.calibrate_thresholds:
            self.thresholds_ = calibrate(self.predict_proba(X), y > 0.5).thresholds
        else:
            self.thresholds_ = np.full(self.config_.n_emotions, 0.5)
        return self

    def predict_proba(self, X) -> np.ndarray:
        from .fusion import forward

        triples = check_embedding_triples(X)
        return np.stack([forward(ev, ea, et, self.weights_).probs for ev, ea, et in triples])

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X) > self.thresholds_

    def score(self, X, y) -> float:
        """Aggregate weighted F1 under the calibrated thresholds."""
        return evaluate(self.predict_proba(X), check_multilabel(y) > 0.5, self.thresholds_).f1_weighted


class ThresholdCalibrator(BaseEstimator, TransformerMixin):
    """Per-emotion F1-maximizing threshold search over a fixed grid."""

    def __init__(self, n_labels=6):
        self.n_labels = n_labels

    def fit(self, X, y):
        probs = check_multilabel(X, self.n_labels)
        labels = check_multilabel(y, self.n_labels) > 0.5
        result = calibrate(probs, labels)
        self.thresholds_ = result.thresholds
        self.best_f1_ = result.best_f1
        return self

    def transform(self, X) -> np.ndarray:
        return check_multilabel(X, self.n_labels) > self.thresholds_


class EnergyVadSegmenter(BaseEstimator):
    """Utterance segmentation with the reference energy VAD."""

    def __init__(self, frame_ms=30, hop_ms=10, floor_percentile=10,
                 onset_db_above_floor=10.0, min_speech_ms=250, min_silence_ms=300,
                 pad_ms=100):
        self.frame_ms = frame_ms
        self.hop_ms = hop_ms
        self.floor_percentile = floor_percentile
        self.onset_db_above_floor = onset_db_above_floor
        self.min_speech_ms = min_speech_ms
        self.min_silence_ms = min_silence_ms
        self.pad_ms = pad_ms

    def _config(self) -> VadConfig:
        return VadConfig(
            frame_ms=self.frame_ms, hop_ms=self.hop_ms,
            floor_percentile=self.floor_percentile,
            onset_db_above_floor=self.onset_db_above_floor,
            min_speech_ms=self.min_speech_ms, min_silence_ms=self.min_silence_ms,
            pad_ms=self.pad_ms,
        )

    def fit(self, X=None, y=None):
        return self

    def transform(self, track: AudioTrack):
        return segment(track, energy_vad_backend(self._config()))
