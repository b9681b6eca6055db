import numpy as np
import pytest
from hypothesis import settings

from useanet import kernels as K
from useanet.model import ModelConfig, USEANet

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

GOLDEN = __import__("pathlib").Path(__file__).parent / "golden"


@pytest.fixture(autouse=True)
def reference_mode():
    """Every test runs single-threaded in float32 unless it says otherwise."""
    with K.threads(0), K.precision(np.float32):
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def micro_model():
    return USEANet(ModelConfig.micro(), seed=0).eval()


@pytest.fixture
def golden_dir():
    return GOLDEN


_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(n, title, passed, detail)``."""
    def record(n, title, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'}  criterion {n}: {title}: {detail}"
        _CRITERIA.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
