import shutil
import sys
from pathlib import Path

import pytest

from vidskit.model import Profile
from vidskit.scaffold import FixtureConfig, generate_fixture

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def full_fixture(tmp_path_factory):
    """10 subjects, 4 readers, Full profile; treat as read-only."""
    root = tmp_path_factory.mktemp("full") / "ds"
    stats = generate_fixture(root, FixtureConfig(n_subjects=10, readers_per_subject=4, seed=7, profile=Profile.FULL))
    return root, stats


@pytest.fixture(scope="session")
def poc_fixture(tmp_path_factory):
    root = tmp_path_factory.mktemp("poc") / "ds"
    stats = generate_fixture(root, FixtureConfig(n_subjects=3, readers_per_subject=3, seed=11, profile=Profile.POC))
    return root, stats


@pytest.fixture
def full_copy(full_fixture, tmp_path):
    """A writable copy of the Full fixture."""
    dst = tmp_path / "copy"
    shutil.copytree(full_fixture[0], dst)
    return dst


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
