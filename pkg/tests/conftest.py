import pytest

from driftlearn import kernels


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # JIT compilation happens once here so individual tests time only themselves.
    kernels.warmup()
