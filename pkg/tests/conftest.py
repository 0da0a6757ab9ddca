import numpy as np
import pytest

from rainstack.synth import default_suite, generate_reference_library, write_dataset

# Lines appended by test_acceptance.py, echoed at the end of the run.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def synthetic_dataset(tmp_path_factory):
    """Five default-suite scenes with simulated restored frames plus their reference library."""
    root = tmp_path_factory.mktemp("synthetic")
    specs = default_suite(5, seed=0)
    write_dataset(specs, root / "data")
    generate_reference_library(specs, root / "lib")
    return specs, root / "data", root / "lib"
