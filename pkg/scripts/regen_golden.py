#!/usr/bin/env python3
"""Regenerate the committed test data: fixture bundles, reference model
assets and golden NDJSON event streams. Outputs are fully seeded; rerunning
must be byte-identical."""

import json
import shutil
import sys
from pathlib import Path

import numpy as np

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"


def main():
    from mer.calibration import save_thresholds
    from mer.fixtures import fixture_vocab, write_fixture_bundle, write_reference_model
    from mer.media import load_bundle
    from mer.orchestrator import PipelineConfig, format_event, run

    if DATA.exists():
        shutil.rmtree(DATA)
    for kind, name in (("silence", "silence"), ("one-utt", "one_utt"), ("two-utt", "two_utt")):
        write_fixture_bundle(kind, DATA / "fixtures" / name, seed=0)

    assets = DATA / "assets"
    write_reference_model(assets / "model", seed=0)
    (assets / "vocab.json").write_text(
        json.dumps(fixture_vocab().to_json_obj(), indent=1) + "\n")
    save_thresholds(np.full(6, 0.5), assets / "thresholds.json")

    cfg = PipelineConfig.from_paths(assets / "model", assets / "vocab.json",
                                    assets / "thresholds.json")
    for name in ("one_utt", "two_utt"):
        bundle = load_bundle(DATA / "fixtures" / name)
        lines = []
        run(bundle, cfg, lambda e: lines.append(format_event(e)))
        (DATA / f"golden_{name}.ndjson").write_text("".join(l + "\n" for l in lines))
        print(f"golden_{name}.ndjson: {len(lines)} events")


if __name__ == "__main__":
    sys.exit(main())
