import numpy as np
import pytest
from hypothesis import settings

from minmaxnet import _backend

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

# acceptance lines collected by test_acceptance.py, printed at the end of the run
ACCEPTANCE_LINES = {}


@pytest.fixture(params=sorted(_backend.BACKENDS))
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
