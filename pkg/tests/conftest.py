import sys

import numpy as np
import pytest

from mfccshield import kernels
from mfccshield.synth import speech_clips, speech_like


@pytest.fixture(params=sorted(kernels.BACKENDS))
def each_backend(request):
    with kernels.backend(request.param):
        yield request.param


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def speech():
    return speech_like(1.0, seed=7)


@pytest.fixture(scope="session")
def clips():
    return speech_clips(8, seed=3)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
