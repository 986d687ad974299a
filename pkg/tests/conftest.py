import pytest

from crossqed.core import PulseShape, SystemParams, TimeGrid, settle_time


@pytest.fixture(scope="session")
def long_pulse():
    return PulseShape.from_duration(40.0)


@pytest.fixture(scope="session")
def short_pulse():
    # cheap pulse for structural checks where bandwidth effects do not matter
    return PulseShape.from_duration(10.0)


def params_for(C, gamma=0.2):
    return SystemParams.from_cooperativity(C, gamma)


def grid_for(params, pulse, n_steps=2000):
    return TimeGrid.default(pulse, n_steps=n_steps, settle=settle_time(params))
