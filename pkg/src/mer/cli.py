"""Command-line entry points for every pipeline stage."""

from __future__ import annotations

import csv
import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .archive import load_model, save_model
from .calibration import calibrate, evaluate, load_thresholds, save_thresholds
from .errors import InputError, MerError
from .fixtures import (
    FIXTURE_KINDS,
    SMALL_ENCODER,
    SMALL_FUSION,
    fixture_vocab,
    make_reference_tensors,
    write_fixture_bundle,
    write_reference_model,
)
from .fusion import EMOTIONS, train_head
from .media import load_bundle, _read_wav
from .orchestrator import PipelineConfig, format_event, run
from .vad import VadConfig, energy_vad_backend, segment, spans_to_json


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        as_json = kwargs.pop("json_errors", False)
        try:
            return fn(*args, **kwargs)
        except MerError as exc:
            if as_json:
                click.echo(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
            else:
                click.echo(f"error: {exc}", err=True)
            sys.exit(exc.exit_code)

    return wrapper


json_errors_option = click.option("--json", "json_errors", is_flag=True,
                                  help="machine-readable error output")


@click.group()
@click.version_option(__version__, prog_name="mer")
def main():
    """Utterance-level multimodal emotion recognition pipeline."""


def _load_audio(path: Path):
    if path.is_dir():
        return load_bundle(path).audio
    return _read_wav(path)


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(path_type=Path))
@click.option("--config", "config_path", type=click.Path(path_type=Path),
              help="JSON file of VAD parameters")
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@json_errors_option
@handle_errors
def segment_cmd(input_path: Path, config_path: Path | None, out_path: Path):
    """Detect utterance spans in a bundle or WAV file."""
    cfg = VadConfig()
    if config_path is not None:
        try:
            cfg = VadConfig(**json.loads(config_path.read_text()))
        except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
            click.echo(f"error: bad VAD config {config_path}: {exc}", err=True)
            sys.exit(2)
    track = _load_audio(input_path)
    spans = segment(track, energy_vad_backend(cfg))
    out_path.write_text(json.dumps(spans_to_json(spans), indent=1) + "\n")
    click.echo(f"{len(spans)} span(s) written to {out_path}")


main.add_command(segment_cmd, name="segment")


@main.command("infer")
@click.option("--input", "input_path", required=True, type=click.Path(path_type=Path))
@click.option("--model", "model_path", required=True, type=click.Path(path_type=Path))
@click.option("--thresholds", "thresholds_path", required=True, type=click.Path(path_type=Path))
@click.option("--vocab", "vocab_path", type=click.Path(path_type=Path),
              help="vocab JSON; the built-in fixture vocab when omitted")
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.option("--stdout", "mirror", is_flag=True, help="mirror the event stream to stdout")
@json_errors_option
@handle_errors
def infer_cmd(input_path, model_path, thresholds_path, vocab_path, out_path, mirror):
    """Run the full pipeline on a bundle, writing the NDJSON event stream."""
    from .extraction import Vocab

    bundle = load_bundle(input_path)
    if vocab_path is not None:
        vocab = Vocab.from_json_obj(json.loads(Path(vocab_path).read_text()))
    else:
        vocab = fixture_vocab()
    cfg = PipelineConfig(model=load_model(model_path), vocab=vocab,
                         thresholds=load_thresholds(thresholds_path))
    with open(out_path, "w") as fh:
        def sink(event):
            line = format_event(event)
            fh.write(line + "\n")
            if mirror:
                click.echo(line)

        run(bundle, cfg, sink)


def _read_csv(path: Path, n_cols: int = 6) -> np.ndarray:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}")
    if rows and not all(_is_number(c) for c in rows[0]):
        rows = rows[1:]  # header row
    data = []
    for i, row in enumerate(rows):
        if len(row) != n_cols:
            raise InputError(f"{path}: row {i} has {len(row)} columns, expected {n_cols}")
        data.append([float(c) for c in row])
    if not data:
        raise InputError(f"{path}: no data rows")
    return np.asarray(data, dtype=np.float64)


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


@main.command("calibrate")
@click.option("--probs", "probs_path", required=True, type=click.Path(path_type=Path))
@click.option("--labels", "labels_path", required=True, type=click.Path(path_type=Path))
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@json_errors_option
@handle_errors
def calibrate_cmd(probs_path, labels_path, out_path):
    """Pick per-emotion thresholds maximizing F1 on a validation set."""
    probs = _read_csv(probs_path)
    labels = _read_csv(labels_path)
    result = calibrate(probs, labels > 0.5)
    save_thresholds(result.thresholds, out_path)
    click.echo(f"thresholds written to {out_path}")


@main.command("eval")
@click.option("--probs", "probs_path", required=True, type=click.Path(path_type=Path))
@click.option("--labels", "labels_path", required=True, type=click.Path(path_type=Path))
@click.option("--thresholds", "thresholds_path", required=True, type=click.Path(path_type=Path))
@json_errors_option
@handle_errors
def eval_cmd(probs_path, labels_path, thresholds_path):
    """Report accuracy and F1 metrics under given thresholds."""
    probs = _read_csv(probs_path)
    labels = _read_csv(labels_path)
    report = evaluate(probs, labels > 0.5, load_thresholds(thresholds_path))
    click.echo(json.dumps(report.to_json_obj(), indent=1))


@main.command("train-head")
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path),
              help="output model archive directory")
@click.option("--samples", default=64, show_default=True)
@click.option("--epochs", default=200, show_default=True)
@click.option("--lr", default=0.5, show_default=True)
@click.option("--conv-lr-scale", default=1.0, show_default=True,
              help="learning-rate scale for the conv parameter group")
@click.option("--linear-lr-scale", default=1.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--trace", "trace_path", type=click.Path(path_type=Path),
              help="also write the per-epoch loss trace as JSON")
@json_errors_option
@handle_errors
def train_head_cmd(out_path, samples, epochs, lr, conv_lr_scale, linear_lr_scale,
                   seed, trace_path):
    """Train the fusion head on a seeded separable synthetic dataset."""
    from .fixtures import make_separable_dataset

    dataset, cfg = make_separable_dataset(n=samples, seed=seed)
    result = train_head(dataset, lr=lr, epochs=epochs,
                        group_lr_scale={"conv": conv_lr_scale, "linear": linear_lr_scale},
                        cfg=cfg, seed=seed)
    tensors = make_reference_tensors(cfg, _encoder_for(cfg), seed=seed)
    tensors.update({k: v.astype(np.float32) for k, v in result.weights.tensors().items()})
    save_model(out_path, tensors, cfg, _encoder_for(cfg), EMOTIONS)
    if trace_path is not None:
        trace_path.write_text(json.dumps({"loss": result.loss_trace}) + "\n")
    click.echo(f"epoch 0 loss {result.loss_trace[0]:.6f} -> "
               f"epoch {epochs} loss {result.loss_trace[-1]:.6f}; archive at {out_path}")


def _encoder_for(cfg):
    from .encoders import EncoderConfig

    return EncoderConfig(d_visual=cfg.d_visual, d_acoustic=cfg.d_acoustic,
                         d_textual=cfg.d_textual)


@main.command("serve")
@click.option("--config", "config_path", type=click.Path(path_type=Path))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--model", "model_path", type=click.Path(path_type=Path))
@click.option("--vocab", "vocab_path", type=click.Path(path_type=Path))
@click.option("--thresholds", "thresholds_path", type=click.Path(path_type=Path))
@click.option("--jobs-dir", type=click.Path(path_type=Path))
@click.option("--frontend-dir", type=click.Path(path_type=Path))
@json_errors_option
@handle_errors
def serve_cmd(config_path, host, port, model_path, vocab_path, thresholds_path,
              jobs_dir, frontend_dir):
    """Run the HTTP job service."""
    import uvicorn

    from .service import create_app, load_service_config

    overrides = {
        "model_path": str(model_path) if model_path else None,
        "vocab_path": str(vocab_path) if vocab_path else None,
        "thresholds_path": str(thresholds_path) if thresholds_path else None,
        "jobs_dir": str(jobs_dir) if jobs_dir else None,
        "frontend_dir": str(frontend_dir) if frontend_dir else None,
    }
    cfg = load_service_config(config_path, overrides=overrides)
    uvicorn.run(create_app(cfg), host=host, port=port)


@main.command("gen-fixture")
@click.option("--kind", required=True, type=click.Choice(FIXTURE_KINDS))
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.option("--seed", default=0, show_default=True)
@json_errors_option
@handle_errors
def gen_fixture_cmd(kind, out_path, seed):
    """Write a deterministic synthetic media bundle."""
    write_fixture_bundle(kind, out_path, seed=seed)
    click.echo(f"{kind} bundle written to {out_path}")


@main.command("gen-assets")
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.option("--seed", default=0, show_default=True)
@json_errors_option
@handle_errors
def gen_assets_cmd(out_path, seed):
    """Write reference model archive, vocab and default thresholds."""
    out = Path(out_path)
    out.mkdir(parents=True, exist_ok=True)
    write_reference_model(out / "model", seed=seed)
    (out / "vocab.json").write_text(json.dumps(fixture_vocab().to_json_obj(), indent=1) + "\n")
    save_thresholds(np.full(len(EMOTIONS), 0.5), out / "thresholds.json")
    click.echo(f"model, vocab and thresholds written under {out}")


if __name__ == "__main__":
    main()
