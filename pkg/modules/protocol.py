"""
Per-node flooding automaton.

A node services two kinds of packets: queries it generates itself (originate) and
queries arriving from a neighbour (receive). Arrivals are evaluated in a fixed order:
duplicate check, local store check, TTL expiry, then forwarding to every neighbour
except the one the copy came from.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple


class Disposition(Enum):
    DUPLICATE = 'duplicate'
    HIT = 'hit'
    FORWARD = 'forward'
    EXPIRED = 'expired'


class QueryPacket(NamedTuple):
    query_id: int
    source: int
    object_id: int
    ttl: int

    def hop(self):
        """Copy of this packet after travelling one link"""
        if self.ttl <= 0:
            raise ValueError(f"Packet {self.query_id} has no hops left")
        return QueryPacket(self.query_id, self.source, self.object_id, self.ttl - 1)


class ReceiveAction(NamedTuple):
    disposition: Disposition
    forward_to: tuple = ()


_DUPLICATE = ReceiveAction(Disposition.DUPLICATE)
_HIT = ReceiveAction(Disposition.HIT)
_EXPIRED = ReceiveAction(Disposition.EXPIRED)


@dataclass(slots=True)
class NodeState:
    node_id: int
    store: frozenset
    neighbors: tuple
    seen: set = field(default_factory=set)
    origin_local_hit: bool = False

    def __post_init__(self):
        self.neighbors = tuple(sorted(self.neighbors))

    @classmethod
    def from_overlay(cls, graph, placement, node_id, origin_local_hit=False):
        return cls(node_id, placement.store[node_id], graph.adjacency[node_id],
                   set(), origin_local_hit)


def is_local_hit(node, object_id):
    """Whether an originator satisfies its own query (only when enabled)"""
    return node.origin_local_hit and object_id in node.store


def originate(node, object_id, initial_ttl, query_id):
    """
    Generate a new query at `node`.

    Returns the query packet and the (neighbor, packet) copies to transmit.
    Nothing is transmitted at TTL 0 or when the query is satisfied locally.
    """
    if initial_ttl < 0:
        raise ValueError(f"initial_ttl must be non-negative, got {initial_ttl}")
    packet = QueryPacket(query_id, node.node_id, object_id, initial_ttl)
    node.seen.add(query_id)
    if initial_ttl == 0 or is_local_hit(node, object_id):
        return packet, []
    outgoing = packet.hop()
    return packet, [(neighbor, outgoing) for neighbor in node.neighbors]


def receive(node, packet, sender):
    """Process a copy of `packet` that arrived at `node` from neighbour `sender`"""
    if packet.query_id in node.seen:
        return _DUPLICATE
    node.seen.add(packet.query_id)
    if packet.object_id in node.store:
        return _HIT
    if packet.ttl == 0:
        # sink
        return _EXPIRED
    outgoing = packet.hop()
    return ReceiveAction(
        Disposition.FORWARD,
        tuple((neighbor, outgoing) for neighbor in node.neighbors if neighbor != sender),
    )


def hop_count(initial_ttl, remaining_ttl):
    if remaining_ttl > initial_ttl:
        raise ValueError(f"remaining TTL {remaining_ttl} exceeds initial TTL {initial_ttl}")
    return initial_ttl - remaining_ttl
