import os

import pytest
from hypothesis import settings

from urllc_codesign.config import default_scenario

settings.register_profile("default", deadline=None, max_examples=60)
settings.register_profile("ci", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def scenario():
    """Default single-device scenario: 32 antennas, 200 m, worst-case shadowing."""
    return default_scenario()


@pytest.fixture(scope="session")
def link(scenario):
    return scenario.link
