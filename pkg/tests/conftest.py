import json
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def sample_score_bytes() -> bytes:
    return (FIXTURES / "joongmori_sample.musicxml").read_bytes()


@pytest.fixture(scope="session")
def sample_score(sample_score_bytes):
    from sorimir.score import parse_musicxml

    return parse_musicxml(sample_score_bytes)


@pytest.fixture(scope="session")
def expected_fixture() -> dict:
    return json.loads((FIXTURES / "joongmori_sample.expected.json").read_text())


@pytest.fixture(scope="session")
def sample_grid():
    from sorimir.beat_grid import load_beats

    return load_beats((FIXTURES / "sample.beats.csv").read_text())


@pytest.fixture(scope="session")
def sample_track():
    from sorimir.pitch_track import import_f0_csv

    return import_f0_csv((FIXTURES / "sample.f0.csv").read_text())


@pytest.fixture(scope="session")
def manifest_path() -> Path:
    return FIXTURES / "manifest.json"
