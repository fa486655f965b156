from __future__ import annotations

import pytest

from onplus.coupled_backend import CoupledBackend
from onplus.qcore import make_params
from onplus.tensor_backend import TensorBackend


@pytest.fixture(scope="session")
def params3():
    return make_params(3)


@pytest.fixture(scope="session")
def tensor3(params3):
    return TensorBackend(params3)


@pytest.fixture(scope="session")
def coupled3(params3):
    return CoupledBackend(params3)


@pytest.fixture(scope="session")
def params4():
    return make_params(4)


@pytest.fixture(scope="session")
def params5():
    return make_params(5)
