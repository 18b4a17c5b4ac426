from __future__ import annotations

import pytest
from hypothesis import settings

from ckptsim.runner import execute_preset

# The engine tests run whole simulations inside property bodies; wall-clock
# deadlines just make those flaky on slow CI boxes.
settings.register_profile("suite", deadline=None)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def five_proc_run():
    return execute_preset("paper-5proc")


@pytest.fixture(scope="session")
def fig4_run():
    return execute_preset("paper-fig4")


@pytest.fixture(scope="session")
def chaos_run():
    return execute_preset("demo-chaos")
