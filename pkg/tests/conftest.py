import pytest

from propdetect.embeddings import HashEmbeddingProvider, load_word_vectors
from propdetect.fixtures import generate_fixture
from propdetect.harness import load_split


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("fixture")
    generate_fixture(out)
    return out


@pytest.fixture(scope="session")
def train_split(fixture_dir):
    return load_split(fixture_dir / "train")


@pytest.fixture(scope="session")
def dev_split(fixture_dir):
    return load_split(fixture_dir / "dev")


@pytest.fixture(scope="session")
def vectors(fixture_dir):
    return load_word_vectors(fixture_dir / "vectors.txt")


@pytest.fixture(scope="session")
def provider():
    return HashEmbeddingProvider(768)


# One pass/fail line per acceptance criterion in the terminal summary.
_acceptance: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and (report.when == "call" or report.failed):
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome.upper()))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        terminalreporter.write_line(f"{outcome:<7} {name}")
