import pytest

from modules.protocol import (
    Disposition, NodeState, QueryPacket, hop_count, is_local_hit, originate, receive,
)


def _node(node_id=0, store=(), neighbors=(1, 2, 3), origin_local_hit=False):
    return NodeState(node_id, frozenset(store), tuple(neighbors), origin_local_hit=origin_local_hit)


def test_originate_sends_one_copy_per_neighbor():
    node = _node()
    packet, outgoing = originate(node, object_id=5, initial_ttl=4, query_id=1)
    assert packet == QueryPacket(1, 0, 5, 4)
    assert len(outgoing) == 3
    assert all(copy.ttl == 3 for _, copy in outgoing)
    assert 1 in node.seen


def test_originate_at_ttl_zero_sends_nothing():
    packet, outgoing = originate(_node(), object_id=5, initial_ttl=0, query_id=1)
    assert packet.ttl == 0
    assert outgoing == []


def test_outgoing_order_is_ascending_neighbor_id():
    node = _node(neighbors=(7, 2, 9))
    _, outgoing = originate(node, object_id=0, initial_ttl=1, query_id=1)
    assert [neighbor for neighbor, _ in outgoing] == [2, 7, 9]
    assert all(copy.ttl == 0 for _, copy in outgoing)


def test_originate_rejects_negative_ttl():
    with pytest.raises(ValueError):
        originate(_node(), 0, -1, 1)


def test_originator_ignores_own_store_by_default():
    node = _node(store={5})
    _, outgoing = originate(node, object_id=5, initial_ttl=2, query_id=1)
    assert len(outgoing) == 3
    assert not is_local_hit(node, 5)


def test_origin_local_hit_stops_query():
    node = _node(store={5}, origin_local_hit=True)
    _, outgoing = originate(node, object_id=5, initial_ttl=2, query_id=1)
    assert outgoing == []
    assert is_local_hit(node, 5)


def test_hit_at_ttl_zero():
    node = _node(node_id=4, store={5})
    action = receive(node, QueryPacket(1, 0, 5, 0), sender=1)
    assert action.disposition is Disposition.HIT
    assert action.forward_to == ()


def test_duplicate_is_not_a_second_hit():
    node = _node(node_id=4, store={5})
    assert receive(node, QueryPacket(1, 0, 5, 2), sender=1).disposition is Disposition.HIT
    action = receive(node, QueryPacket(1, 0, 5, 2), sender=2)
    assert action.disposition is Disposition.DUPLICATE
    assert action.forward_to == ()


def test_forward_excludes_sender():
    node = _node(node_id=10, neighbors=(1, 2, 3, 4, 5))
    action = receive(node, QueryPacket(1, 0, 5, 3), sender=3)
    assert action.disposition is Disposition.FORWARD
    assert [neighbor for neighbor, _ in action.forward_to] == [1, 2, 4, 5]
    assert all(copy.ttl == 2 for _, copy in action.forward_to)


def test_expired_at_ttl_zero_without_replica():
    node = _node(node_id=10)
    action = receive(node, QueryPacket(1, 0, 5, 0), sender=1)
    assert action.disposition is Disposition.EXPIRED
    assert 1 in node.seen


def test_seen_is_per_query():
    node = _node(node_id=10)
    receive(node, QueryPacket(1, 0, 5, 0), sender=1)
    action = receive(node, QueryPacket(2, 0, 5, 0), sender=1)
    assert action.disposition is Disposition.EXPIRED


def test_hop_on_exhausted_packet_raises():
    with pytest.raises(ValueError):
        QueryPacket(1, 0, 0, 0).hop()


def test_hop_count():
    assert hop_count(8, 8) == 0
    assert hop_count(8, 5) == 3
    assert hop_count(6, 0) == 6
    with pytest.raises(ValueError):
        hop_count(3, 4)


def test_node_state_from_overlay(star6, make_placement):
    placement = make_placement(star6, [[1, 2]])
    leaf = NodeState.from_overlay(star6, placement, 2)
    assert leaf.neighbors == (0,)
    assert leaf.store == frozenset({0})
    centre = NodeState.from_overlay(star6, placement, 0)
    assert centre.neighbors == (1, 2, 3, 4, 5)
    assert centre.store == frozenset()
