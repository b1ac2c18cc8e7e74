import numpy as np
import pytest

from nnball import IsotropicGaussian, MirrorPowerCdf1D, PowerCdf1D, Uniform1D, UniformSquare2D

ALL_MODELS = [
    Uniform1D(),
    Uniform1D(-1.0, 3.0),
    PowerCdf1D(2.0),
    PowerCdf1D(0.5),
    MirrorPowerCdf1D(2.0),
    UniformSquare2D(),
    IsotropicGaussian(1, 1.0),
    IsotropicGaussian(2, 1.0),
    IsotropicGaussian(3, 0.5),
]

# filled by test_acceptance, printed once at the end of the session
ACCEPTANCE_LINES = []


@pytest.fixture(params=ALL_MODELS, ids=lambda m: m.label)
def model(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
