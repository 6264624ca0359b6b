import pytest

from dfst.imaging import default_cn_table


@pytest.fixture(scope="session")
def cn_table():
    return default_cn_table()
