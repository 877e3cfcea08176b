import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import path_graph, cycle_graph, complete_graph, star_graph


@pytest.fixture
def p3():
    return path_graph(3)


@pytest.fixture
def p4():
    return path_graph(4)


@pytest.fixture
def c4():
    return cycle_graph(4)


@pytest.fixture
def c5():
    return cycle_graph(5)


@pytest.fixture
def k3():
    return complete_graph(3)


@pytest.fixture
def s4():
    return star_graph(4)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
