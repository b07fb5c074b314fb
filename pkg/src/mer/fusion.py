"""Late-fusion prediction head.

Per modality: 1D convolution over time (same padding) then temporal
averaging; the three averaged features are concatenated and passed
through two linear layers (ReLU between) with per-emotion sigmoid
outputs. Trained with mean binary cross-entropy and full-batch gradient
descent supporting per-parameter-group learning-rate scaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import EmptySequence, NonFiniteLoss, ShapeMismatch

EMOTIONS = ["anger", "disgust", "fear", "happiness", "sadness", "surprise"]
MODALITIES = ["vis", "aco", "txt"]
BCE_CLAMP = 1e-7


@dataclass
class FusionConfig:
    d_visual: int = 512
    d_acoustic: int = 768
    d_textual: int = 768
    conv_channels: int = 128
    kernel: int = 3
    hidden: int = 256
    n_emotions: int = 6

    def __post_init__(self):
        if self.kernel % 2 == 0:
            raise ValueError("kernel size must be odd")
        if min(self.conv_channels, self.hidden) <= 0:
            raise ValueError("conv_channels and hidden must be positive")
        if self.n_emotions != len(EMOTIONS):
            raise ValueError(f"n_emotions must be {len(EMOTIONS)}")

    @property
    def modal_dims(self) -> dict[str, int]:
        return {"vis": self.d_visual, "aco": self.d_acoustic, "txt": self.d_textual}

    def to_json_obj(self) -> dict:
        return {
            "d_visual": self.d_visual,
            "d_acoustic": self.d_acoustic,
            "d_textual": self.d_textual,
            "conv_channels": self.conv_channels,
            "kernel": self.kernel,
            "hidden": self.hidden,
            "n_emotions": self.n_emotions,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "FusionConfig":
        return cls(**{k: int(v) for k, v in obj.items()})


@dataclass
class FusionWeights:
    conv_w: dict[str, np.ndarray]  # per modality: (C, D_m, k)
    conv_b: dict[str, np.ndarray]  # per modality: (C,)
    w1: np.ndarray  # (H, 3C)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (6, H)
    b2: np.ndarray  # (6,)

    def tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for m in MODALITIES:
            out[f"fus.conv.{m}.w"] = self.conv_w[m]
            out[f"fus.conv.{m}.b"] = self.conv_b[m]
        out["fus.lin1.w"] = self.w1
        out["fus.lin1.b"] = self.b1
        out["fus.lin2.w"] = self.w2
        out["fus.lin2.b"] = self.b2
        return out

    @classmethod
    def from_tensors(cls, tensors: dict[str, np.ndarray]) -> "FusionWeights":
        return cls(
            conv_w={m: tensors[f"fus.conv.{m}.w"] for m in MODALITIES},
            conv_b={m: tensors[f"fus.conv.{m}.b"] for m in MODALITIES},
            w1=tensors["fus.lin1.w"],
            b1=tensors["fus.lin1.b"],
            w2=tensors["fus.lin2.w"],
            b2=tensors["fus.lin2.b"],
        )

    def astype(self, dtype) -> "FusionWeights":
        return FusionWeights(
            conv_w={m: w.astype(dtype) for m, w in self.conv_w.items()},
            conv_b={m: b.astype(dtype) for m, b in self.conv_b.items()},
            w1=self.w1.astype(dtype),
            b1=self.b1.astype(dtype),
            w2=self.w2.astype(dtype),
            b2=self.b2.astype(dtype),
        )

    def copy(self) -> "FusionWeights":
        return self.astype(self.w1.dtype)

    def validate(self, cfg: FusionConfig) -> None:
        c, k, h = cfg.conv_channels, cfg.kernel, cfg.hidden
        for m, d in cfg.modal_dims.items():
            _check(f"fus.conv.{m}.w", self.conv_w[m], (c, d, k))
            _check(f"fus.conv.{m}.b", self.conv_b[m], (c,))
        _check("fus.lin1.w", self.w1, (h, 3 * c))
        _check("fus.lin1.b", self.b1, (h,))
        _check("fus.lin2.w", self.w2, (cfg.n_emotions, h))
        _check("fus.lin2.b", self.b2, (cfg.n_emotions,))
        for name, t in self.tensors().items():
            if not np.all(np.isfinite(t)):
                raise ShapeMismatch(f"{name} contains non-finite values")


def _check(name: str, tensor: np.ndarray, shape: tuple[int, ...]) -> None:
    if tensor.shape != shape:
        raise ShapeMismatch(f"{name}: expected shape {shape}, got {tensor.shape}")


def init_weights(cfg: FusionConfig, seed: int = 0, scale: float = 0.05) -> FusionWeights:
    rng = np.random.default_rng(seed)

    def t(*shape):
        return (rng.standard_normal(shape) * scale).astype(np.float64)

    c, k, h = cfg.conv_channels, cfg.kernel, cfg.hidden
    return FusionWeights(
        conv_w={m: t(c, d, k) for m, d in cfg.modal_dims.items()},
        conv_b={m: np.zeros(c) for m in MODALITIES},
        w1=t(h, 3 * c),
        b1=np.zeros(h),
        w2=t(cfg.n_emotions, h),
        b2=np.zeros(cfg.n_emotions),
    )


@dataclass
class Prediction:
    logits: np.ndarray  # (6,)
    probs: np.ndarray  # (6,)


def conv1d_same(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """1D conv over time, zero 'same' padding, stride 1: (T,D) -> (T,C)."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if x.ndim != 2 or w.ndim != 3 or x.shape[1] != w.shape[1] or b.shape != (w.shape[0],):
        raise ShapeMismatch(f"conv1d_same: x{x.shape} w{w.shape} b{b.shape}")
    t_len, _ = x.shape
    c, _, k = w.shape
    if k % 2 == 0:
        raise ShapeMismatch(f"kernel size must be odd, got {k}")
    half = (k - 1) // 2
    xp = np.pad(x, ((half, half), (0, 0)))
    out = np.broadcast_to(b, (t_len, c)).copy()
    for j in range(k):
        out += xp[j : j + t_len] @ w[:, :, j].T
    return out


def temporal_mean(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise EmptySequence(f"temporal_mean needs a non-empty TxC matrix, got {x.shape}")
    return x.mean(axis=0)


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward_cached(ev, ea, et, w: FusionWeights):
    seqs = {"vis": np.asarray(ev, float), "aco": np.asarray(ea, float), "txt": np.asarray(et, float)}
    conv_out = {m: conv1d_same(seqs[m], w.conv_w[m], w.conv_b[m]) for m in MODALITIES}
    feats = {m: temporal_mean(conv_out[m]) for m in MODALITIES}
    z = np.concatenate([feats[m] for m in MODALITIES])
    a1 = w.w1 @ z + w.b1
    h = np.maximum(a1, 0.0)
    logits = w.w2 @ h + w.b2
    return Prediction(logits=logits, probs=sigmoid(logits)), {
        "seqs": seqs, "z": z, "a1": a1, "h": h,
    }


def forward(ev: np.ndarray, ea: np.ndarray, et: np.ndarray, w: FusionWeights) -> Prediction:
    """Predict 6 emotion probabilities from the three embedding sequences."""
    pred, _ = _forward_cached(ev, ea, et, w)
    return pred


def bce_loss(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean binary cross-entropy over the 6 emotions, probs clamped for stability."""
    p = np.clip(np.asarray(probs, dtype=np.float64), BCE_CLAMP, 1.0 - BCE_CLAMP)
    y = np.asarray(labels, dtype=np.float64)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def _zero_grads(w: FusionWeights) -> FusionWeights:
    return FusionWeights(
        conv_w={m: np.zeros_like(t, dtype=np.float64) for m, t in w.conv_w.items()},
        conv_b={m: np.zeros_like(t, dtype=np.float64) for m, t in w.conv_b.items()},
        w1=np.zeros_like(w.w1, dtype=np.float64),
        b1=np.zeros_like(w.b1, dtype=np.float64),
        w2=np.zeros_like(w.w2, dtype=np.float64),
        b2=np.zeros_like(w.b2, dtype=np.float64),
    )


def backward(batch: list[tuple[tuple[np.ndarray, np.ndarray, np.ndarray], np.ndarray]],
             w: FusionWeights) -> tuple[FusionWeights, float]:
    """Analytic gradients of the mean batch BCE w.r.t. every weight tensor.

    batch items are ((ev, ea, et), labels). Returns (gradients, loss).
    """
    if not batch:
        raise EmptySequence("backward needs a non-empty batch")
    grads = _zero_grads(w)
    total_loss = 0.0
    n = len(batch)
    n_emo = w.b2.shape[0]
    half = (w.conv_w["vis"].shape[2] - 1) // 2
    for (ev, ea, et), labels in batch:
        pred, cache = _forward_cached(ev, ea, et, w)
        y = np.asarray(labels, dtype=np.float64)
        total_loss += bce_loss(pred.probs, y)

        g_logits = (pred.probs - y) / n_emo  # d(mean BCE)/d(logits)
        grads.w2 += np.outer(g_logits, cache["h"])
        grads.b2 += g_logits
        g_h = w.w2.T @ g_logits
        g_a1 = g_h * (cache["a1"] > 0)
        grads.w1 += np.outer(g_a1, cache["z"])
        grads.b1 += g_a1
        g_z = w.w1.T @ g_a1

        offset = 0
        for m in MODALITIES:
            n_ch = w.conv_b[m].shape[0]
            g_f = g_z[offset : offset + n_ch]
            offset += n_ch
            x = cache["seqs"][m]
            t_len = x.shape[0]
            # d(temporal_mean)/d(conv out): g_f / T at every t
            grads.conv_b[m] += g_f
            xp = np.pad(x, ((half, half), (0, 0)))
            k = w.conv_w[m].shape[2]
            # sum over t of the shifted inputs, one slice per kernel tap
            for j in range(k):
                col_sum = xp[j : j + t_len].sum(axis=0)  # (D_m,)
                grads.conv_w[m][:, :, j] += np.outer(g_f / t_len, col_sum)

    inv = 1.0 / n
    for m in MODALITIES:
        grads.conv_w[m] *= inv
        grads.conv_b[m] *= inv
    grads.w1 *= inv
    grads.b1 *= inv
    grads.w2 *= inv
    grads.b2 *= inv
    return grads, total_loss / n


GROUP_OF_TENSOR = {
    **{f"fus.conv.{m}.{p}": "conv" for m in MODALITIES for p in ("w", "b")},
    "fus.lin1.w": "linear",
    "fus.lin1.b": "linear",
    "fus.lin2.w": "linear",
    "fus.lin2.b": "linear",
}


@dataclass
class TrainResult:
    weights: FusionWeights
    loss_trace: list[float] = field(default_factory=list)


def train_head(dataset, lr: float, epochs: int,
               group_lr_scale: dict[str, float] | None = None,
               init: FusionWeights | None = None,
               cfg: FusionConfig | None = None,
               seed: int = 0) -> TrainResult:
    """Full-batch gradient descent on mean BCE.

    Per-group learning rate = lr * group_lr_scale[group]; groups are
    "conv" and "linear". A zero scale leaves that group's tensors
    bit-unchanged.
    """
    cfg = cfg or FusionConfig()
    w = (init.copy() if init is not None else init_weights(cfg, seed=seed)).astype(np.float64)
    scales = {"conv": 1.0, "linear": 1.0, **(group_lr_scale or {})}
    trace: list[float] = []
    for epoch in range(epochs):
        grads, loss = backward(dataset, w)
        trace.append(loss)
        if not math.isfinite(loss):
            raise NonFiniteLoss(f"loss became non-finite at epoch {epoch}", loss_trace=trace)
        if lr == 0.0:
            continue
        for m in MODALITIES:
            step = lr * scales["conv"]
            if step != 0.0:
                w.conv_w[m] = w.conv_w[m] - step * grads.conv_w[m]
                w.conv_b[m] = w.conv_b[m] - step * grads.conv_b[m]
        step = lr * scales["linear"]
        if step != 0.0:
            w.w1 = w.w1 - step * grads.w1
            w.b1 = w.b1 - step * grads.b1
            w.w2 = w.w2 - step * grads.w2
            w.b2 = w.b2 - step * grads.b2
    return TrainResult(weights=w, loss_trace=trace)
