import pytest

from bkshoot.integrator import DEFAULT_CONFIG
from bkshoot.shooting import find_lambda_bar


@pytest.fixture(scope="session")
def shot():
    """Connecting-parameter result on the default bracket (primary scheme)."""
    return find_lambda_bar(0.1, 2.0, 1e-6, DEFAULT_CONFIG)


@pytest.fixture(scope="session")
def shot_dop853():
    return find_lambda_bar(0.1, 2.0, 1e-6, DEFAULT_CONFIG.with_(scheme="dop853"))
