import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from insectsound.manifest import load_manifest
from insectsound.store import build_store
from insectsound.synth import generate_fixture


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    """Synthetic 4-class x 5-clip dataset, generated once per session."""
    out = tmp_path_factory.mktemp("fixture")
    generate_fixture(out, seed=0)
    return out


@pytest.fixture(scope="session")
def fixture_store(fixture_dir):
    manifest = load_manifest(fixture_dir / "manifest.json")
    return build_store(manifest, w_seconds=0.1, sample_rate=22050)
