"""Per-emotion threshold calibration and evaluation metrics.

An emotion is active when its probability is strictly above its
threshold; the same rule is used during calibration and at inference.
Thresholds are picked per emotion by exhaustive search over the fixed
0.01..0.99 grid, maximizing F1 with ties broken toward the smallest
threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import LengthMismatch
from .fusion import EMOTIONS

THRESHOLD_GRID = np.round(np.arange(1, 100) * 0.01, 2)  # 0.01 .. 0.99


@dataclass
class CalibrationResult:
    thresholds: np.ndarray  # (6,)
    best_f1: np.ndarray  # (6,)


@dataclass
class EvalReport:
    per_emotion: list[dict]  # {"emotion", "accuracy", "f1_positive", "f1_weighted"}
    accuracy: float
    f1_positive: float
    f1_weighted: float

    def to_json_obj(self) -> dict:
        return {
            "per_emotion": self.per_emotion,
            "aggregate": {
                "accuracy": self.accuracy,
                "f1_positive": self.f1_positive,
                "f1_weighted": self.f1_weighted,
            },
        }


def apply_thresholds(probs: np.ndarray, thresholds: np.ndarray) -> list[int]:
    """Active emotion indices: strictly above threshold."""
    probs = np.asarray(probs, dtype=np.float64)
    thresholds = np.asarray(thresholds, dtype=np.float64)
    return [int(i) for i in np.nonzero(probs > thresholds)[0]]


def f1_binary(pred, label) -> float:
    """F1 = 2TP / (2TP + FP + FN); 0.0 when the denominator is 0."""
    pred = np.asarray(pred, dtype=bool)
    label = np.asarray(label, dtype=bool)
    if pred.shape != label.shape:
        raise LengthMismatch(f"pred {pred.shape} vs label {label.shape}")
    tp = int(np.sum(pred & label))
    fp = int(np.sum(pred & ~label))
    fn = int(np.sum(~pred & label))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def calibrate(probs: np.ndarray, labels: np.ndarray,
              grid: np.ndarray = THRESHOLD_GRID) -> CalibrationResult:
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if probs.shape != labels.shape:
        raise LengthMismatch(f"probs {probs.shape} vs labels {labels.shape}")
    n_emotions = probs.shape[1]
    thresholds = np.empty(n_emotions)
    best_f1 = np.empty(n_emotions)
    for e in range(n_emotions):
        best_t, best = grid[0], -1.0
        for t in grid:
            f1 = f1_binary(probs[:, e] > t, labels[:, e])
            if f1 > best:  # strict: keeps the smallest threshold on ties
                best, best_t = f1, t
        thresholds[e] = best_t
        best_f1[e] = best
    return CalibrationResult(thresholds=thresholds, best_f1=best_f1)


def evaluate(probs: np.ndarray, labels: np.ndarray, thresholds: np.ndarray) -> EvalReport:
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    if probs.shape != labels.shape:
        raise LengthMismatch(f"probs {probs.shape} vs labels {labels.shape}")
    thresholds = np.asarray(thresholds, dtype=np.float64)
    if thresholds.shape[0] != probs.shape[1]:
        raise LengthMismatch(f"{thresholds.shape[0]} thresholds for {probs.shape[1]} emotions")
    n = probs.shape[0]
    per_emotion = []
    for e in range(probs.shape[1]):
        pred = probs[:, e] > thresholds[e]
        label = labels[:, e]
        accuracy = float(np.mean(pred == label))
        f1_pos = f1_binary(pred, label)
        f1_neg = f1_binary(~pred, ~label)
        n_pos = int(label.sum())
        f1_w = (n_pos * f1_pos + (n - n_pos) * f1_neg) / n
        name = EMOTIONS[e] if e < len(EMOTIONS) else str(e)
        per_emotion.append({
            "emotion": name,
            "accuracy": accuracy,
            "f1_positive": f1_pos,
            "f1_weighted": f1_w,
        })
    return EvalReport(
        per_emotion=per_emotion,
        accuracy=float(np.mean([p["accuracy"] for p in per_emotion])),
        f1_positive=float(np.mean([p["f1_positive"] for p in per_emotion])),
        f1_weighted=float(np.mean([p["f1_weighted"] for p in per_emotion])),
    )


def save_thresholds(thresholds: np.ndarray, path: str | Path,
                    emotions: list[str] | None = None) -> None:
    obj = {"emotions": list(emotions or EMOTIONS),
           "thresholds": [float(t) for t in thresholds]}
    Path(path).write_text(json.dumps(obj, indent=1) + "\n")


def load_thresholds(path: str | Path) -> np.ndarray:
    obj = json.loads(Path(path).read_text())
    thresholds = np.asarray([float(t) for t in obj["thresholds"]], dtype=np.float64)
    if len(thresholds) != len(obj["emotions"]):
        raise LengthMismatch(f"{path}: emotion/threshold count mismatch")
    return thresholds
