import numpy as np
import pytest

from emoshift.corpus import load_manifest
from emoshift.synth import SynthSpec, generate_corpus


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """2 male + 2 female synthetic speakers, 3 classes, 4 clips each."""
    root = tmp_path_factory.mktemp("tiny")
    listing = generate_corpus(SynthSpec(clips_per_cell=4, duration=0.5), root, seed=7)
    return load_manifest(listing)


@pytest.fixture(scope="session")
def ten_speaker_corpus(tmp_path_factory):
    """5 male + 5 female synthetic speakers, 3 classes, 3 short clips each."""
    root = tmp_path_factory.mktemp("ten")
    listing = generate_corpus(SynthSpec(males=5, females=5, clips_per_cell=3, duration=0.25), root, seed=3)
    return load_manifest(listing)


_acceptance: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py::" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        outcome = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        _acceptance.append((report.nodeid.split("::")[-1], outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        terminalreporter.write_line(f"{outcome}  {name}")
