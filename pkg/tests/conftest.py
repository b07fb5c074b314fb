import json
from pathlib import Path

import numpy as np
import pytest

from mer.archive import load_model
from mer.calibration import save_thresholds
from mer.fixtures import fixture_vocab, make_fixture_bundle, write_reference_model
from mer.orchestrator import PipelineConfig

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def assets_dir(tmp_path_factory) -> Path:
    """Freshly generated reference model, vocab and thresholds."""
    out = tmp_path_factory.mktemp("assets")
    write_reference_model(out / "model", seed=0)
    (out / "vocab.json").write_text(json.dumps(fixture_vocab().to_json_obj()))
    save_thresholds(np.full(6, 0.5), out / "thresholds.json")
    return out


@pytest.fixture(scope="session")
def pipeline_config(assets_dir) -> PipelineConfig:
    return PipelineConfig.from_paths(
        assets_dir / "model", assets_dir / "vocab.json", assets_dir / "thresholds.json")


@pytest.fixture(scope="session")
def one_utt_bundle():
    return make_fixture_bundle("one-utt", seed=0)


@pytest.fixture(scope="session")
def two_utt_bundle():
    return make_fixture_bundle("two-utt", seed=0)


@pytest.fixture(scope="session")
def silence_bundle():
    return make_fixture_bundle("silence", seed=0)


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR
