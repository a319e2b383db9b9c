import pytest

from mlmeval.fixtures import fixture_conllu, fixture_treebank

# per-criterion verdict lines collected by test_acceptance and printed after
# the run, where pytest's output capture cannot hide them
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def treebank():
    return fixture_treebank()


@pytest.fixture(scope="session")
def corpus(treebank):
    return list(treebank.sentences())


@pytest.fixture(scope="session")
def fixture_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "fixture.conllu"
    path.write_text(fixture_conllu(), encoding="utf-8")
    return path
