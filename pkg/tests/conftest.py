import pytest

from mlsysmap.simulator import churn_map


@pytest.fixture(scope="session")
def churn():
    return churn_map()
