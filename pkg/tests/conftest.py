import os
from pathlib import Path

import hypothesis
import numpy as np
import pytest

from netpoly.compiler import ve_compile
from netpoly.model import load_network

hypothesis.settings.register_profile("default", max_examples=50, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DATA = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def two_node():
    return load_network(DATA / "two_node.json")


@pytest.fixture(scope="session")
def two_node_circuit(two_node):
    return ve_compile(two_node, ["B", "A"])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
