import pytest

from modules.topology import OverlayGraph, ReplicaPlacement


def _placement(graph, holders_per_object):
    replication = len(holders_per_object[0])
    return ReplicaPlacement.from_holders(graph.node_count, replication, holders_per_object)


@pytest.fixture
def make_placement():
    """Placement with explicit holder lists; replication is taken from the first object"""
    return _placement


@pytest.fixture
def path5():
    # 0 - 1 - 2 - 3 - 4
    return OverlayGraph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)])


@pytest.fixture
def path4():
    return OverlayGraph.from_edges(4, [(0, 1), (1, 2), (2, 3)])


@pytest.fixture
def cycle4():
    # 0 - 1 - 2 - 3 - 0
    return OverlayGraph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])


@pytest.fixture
def star6():
    # K1,5 with centre 0
    return OverlayGraph.from_edges(6, [(0, leaf) for leaf in range(1, 6)])
