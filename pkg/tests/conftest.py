import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=50,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def boundary_config(tmp_path_factory):
    from acspeech.synthetic import write_boundary_corpus
    return write_boundary_corpus(tmp_path_factory.mktemp("boundary"), n_utterances=2, n_words=6)


@pytest.fixture(scope="session")
def class_config(tmp_path_factory):
    from acspeech.synthetic import write_class_corpus
    return write_class_corpus(tmp_path_factory.mktemp("classes"), n_classes=3, n_train=8, n_test=4)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report_criterion():
    """Record a one-line verdict for an acceptance criterion and print it."""
    def record(number: int, passed: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
