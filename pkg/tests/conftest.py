import pytest

from hexplore import ring
from hexplore import rlwe


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run full protocol tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: end-to-end protocol runs, only with --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope='session')
def small_params():
    r"""Degree-64 ring with three ciphertext primes and one special prime."""
    return ring.RingParams.from_bit_sizes(64, [50, 40, 40], [50])


@pytest.fixture(scope='session')
def noise():
    return ring.NoiseParams(secret_hamming_weight=16)


@pytest.fixture(scope='session')
def secret(small_params, noise):
    sk, pk = rlwe.keygen(small_params, noise, seed=1)
    return sk, pk
