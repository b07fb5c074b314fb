"""Portable model archive.

An archive is a directory (or a zip of one) holding:

    manifest.json  [{"name", "dtype": "f32", "shape", "offset", "byte_len"}, ...]
    weights.bin    8-byte magic, then little-endian f32 blobs, row-major,
                   concatenated at the manifest offsets
    config.json    fusion config, encoder config and the emotion order

It carries both the encoder reference tensors (vis.proj, aco.proj,
txt.emb) and all fusion-head tensors.
"""

from __future__ import annotations

import json
import tempfile
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoders import EncoderConfig
from .errors import BadMagic, ManifestMismatch, MissingFile, TruncatedBlob
from .fusion import EMOTIONS, FusionConfig, FusionWeights

MAGIC = b"MERWTS01"

FUSION_TENSOR_NAMES = {
    "fus.conv.vis.w", "fus.conv.vis.b",
    "fus.conv.aco.w", "fus.conv.aco.b",
    "fus.conv.txt.w", "fus.conv.txt.b",
    "fus.lin1.w", "fus.lin1.b", "fus.lin2.w", "fus.lin2.b",
}
ENCODER_TENSOR_NAMES = {"vis.proj", "aco.proj", "txt.emb"}


@dataclass
class ModelArchive:
    tensors: dict[str, np.ndarray]
    fusion_config: FusionConfig
    encoder_config: EncoderConfig
    emotions: list[str]

    @property
    def fusion_weights(self) -> FusionWeights:
        return FusionWeights.from_tensors(self.tensors)

    @property
    def encoder_weights(self) -> dict[str, np.ndarray]:
        return {k: v for k, v in self.tensors.items() if k in ENCODER_TENSOR_NAMES}


def save_tensors(path: str | Path, tensors: dict[str, np.ndarray], config: dict) -> Path:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    manifest = []
    blob = bytearray(MAGIC)
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        raw = arr.tobytes()
        manifest.append({
            "name": name,
            "dtype": "f32",
            "shape": list(arr.shape),
            "offset": len(blob),
            "byte_len": len(raw),
        })
        blob += raw
    (root / "weights.bin").write_bytes(bytes(blob))
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    (root / "config.json").write_text(json.dumps(config, indent=1) + "\n")
    return root


def _load_dir(root: Path) -> tuple[dict[str, np.ndarray], dict]:
    for fname in ("manifest.json", "weights.bin", "config.json"):
        if not (root / fname).is_file():
            raise MissingFile(f"archive is missing {root / fname}")
    blob = (root / "weights.bin").read_bytes()
    if blob[: len(MAGIC)] != MAGIC:
        raise BadMagic(f"{root / 'weights.bin'}: bad magic bytes")
    manifest = json.loads((root / "manifest.json").read_text())
    tensors: dict[str, np.ndarray] = {}
    for entry in manifest:
        name = entry["name"]
        if entry.get("dtype") != "f32":
            raise ManifestMismatch(f"tensor {name}: unsupported dtype {entry.get('dtype')}")
        shape = tuple(int(s) for s in entry["shape"])
        expected = int(np.prod(shape)) * 4
        if entry["byte_len"] != expected:
            raise TruncatedBlob(
                f"tensor {name}: shape {shape} needs {expected} bytes, manifest says "
                f"{entry['byte_len']}"
            )
        lo, hi = entry["offset"], entry["offset"] + entry["byte_len"]
        if hi > len(blob):
            raise TruncatedBlob(f"tensor {name}: blob ends at {len(blob)}, need {hi}")
        tensors[name] = np.frombuffer(blob[lo:hi], dtype="<f4").reshape(shape)
    config = json.loads((root / "config.json").read_text())
    return tensors, config


def load_tensors(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    if path.is_file() and path.suffix == ".zip":
        with tempfile.TemporaryDirectory() as tmp:
            with zipfile.ZipFile(path) as zf:
                zf.extractall(tmp)
            inner = Path(tmp)
            if not (inner / "manifest.json").is_file():
                subdirs = [p for p in inner.iterdir() if p.is_dir()]
                if len(subdirs) == 1:
                    inner = subdirs[0]
            return _load_dir(inner)
    if not path.is_dir():
        raise MissingFile(f"model archive not found: {path}")
    return _load_dir(path)


def save_model(path: str | Path, tensors: dict[str, np.ndarray],
               fusion_config: FusionConfig,
               encoder_config: EncoderConfig | None = None,
               emotions: list[str] | None = None) -> Path:
    encoder_config = encoder_config or EncoderConfig()
    config = {
        "fusion": fusion_config.to_json_obj(),
        "encoder": {
            "d_visual": encoder_config.d_visual,
            "d_acoustic": encoder_config.d_acoustic,
            "d_textual": encoder_config.d_textual,
            "acoustic_window": encoder_config.acoustic_window,
            "acoustic_hop": encoder_config.acoustic_hop,
        },
        "emotions": list(emotions or EMOTIONS),
    }
    return save_tensors(path, tensors, config)


def load_model(path: str | Path) -> ModelArchive:
    tensors, config = load_tensors(path)
    fusion_config = FusionConfig.from_json_obj(config["fusion"])
    encoder_config = EncoderConfig(**{k: int(v) for k, v in config["encoder"].items()})
    missing = (FUSION_TENSOR_NAMES | ENCODER_TENSOR_NAMES) - set(tensors)
    if missing:
        raise ManifestMismatch(f"archive is missing tensors: {sorted(missing)}")
    unknown = set(tensors) - (FUSION_TENSOR_NAMES | ENCODER_TENSOR_NAMES)
    if unknown:
        raise ManifestMismatch(f"unknown tensor names in manifest: {sorted(unknown)}")
    archive = ModelArchive(
        tensors=tensors,
        fusion_config=fusion_config,
        encoder_config=encoder_config,
        emotions=[str(e) for e in config["emotions"]],
    )
    archive.fusion_weights.validate(fusion_config)
    return archive


def save_weights(w: FusionWeights, path: str | Path,
                 cfg: FusionConfig | None = None) -> Path:
    """Write only the fusion-head tensors (manifest + blob + config)."""
    cfg = cfg or FusionConfig()
    return save_tensors(path, w.tensors(), {"fusion": cfg.to_json_obj(),
                                            "emotions": EMOTIONS})


def load_weights(path: str | Path) -> FusionWeights:
    tensors, _config = load_tensors(path)
    unknown = set(tensors) - FUSION_TENSOR_NAMES - ENCODER_TENSOR_NAMES
    if unknown:
        raise ManifestMismatch(f"unknown tensor names in manifest: {sorted(unknown)}")
    missing = FUSION_TENSOR_NAMES - set(tensors)
    if missing:
        raise ManifestMismatch(f"archive is missing fusion tensors: {sorted(missing)}")
    return FusionWeights.from_tensors(tensors)
