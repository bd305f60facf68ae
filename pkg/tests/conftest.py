import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hioasec.attack_graph import Edge, build_graph  # noqa: E402
from hioasec.game import Defender, GameSpec  # noqa: E402
from hioasec.scenario import build_der1  # noqa: E402


@pytest.fixture
def der1():
    return build_der1()


@pytest.fixture
def single_edge_game():
    g = build_graph({"s", "t"}, [Edge("s", "t", 0.8)], "s")
    return GameSpec(g, (Defender("1", (("t", 100.0),), (("s", "t"),), 1.0),))


@pytest.fixture
def two_path_game():
    """Two assets, each behind its own single edge; one defender guards both."""
    g = build_graph({"s", "t1", "t2"}, [Edge("s", "t1", 0.8), Edge("s", "t2", 0.8)], "s")
    d = Defender("1", (("t1", 100.0), ("t2", 100.0)), (("s", "t1"), ("s", "t2")), 2.0)
    return GameSpec(g, (d,))


@pytest.fixture
def chain_game():
    g = build_graph({"s", "a", "t"}, [Edge("s", "a", 0.9), Edge("a", "t", 0.8)], "s")
    d = Defender("1", (("t", 100.0),), (("s", "a"), ("a", "t")), 1.0)
    return GameSpec(g, (d,))
