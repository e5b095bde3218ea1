"""
Synchronous hop-round execution of flooding queries.

Every link traversal takes exactly one round. Round 0 is the origination; round k
delivers everything transmitted in round k-1, receivers in ascending order and each
receiver's arrivals in ascending sender order, so the first copy a node processes is
the one from its lowest-ID sender. Queries never interact, so a workload is a sequence
of independent run_query calls.
"""
import heapq
import logging
from dataclasses import dataclass
from operator import itemgetter
from typing import NamedTuple, Optional

import numpy as np

from modules.config import ConfigurationError
from modules.protocol import Disposition, NodeState, hop_count, is_local_hit, originate, receive

logger = logging.getLogger('engine')

_DELIVERY_ORDER = itemgetter(0, 1)


@dataclass(frozen=True)
class WorkloadSpec:
    generator_nodes: tuple
    poisson_rate: float
    total_queries: int
    initial_ttl: int
    origin_local_hit: bool = False

    def check(self, graph, placement):
        if self.total_queries < 1:
            raise ConfigurationError(f"total_queries must be at least 1, got {self.total_queries}")
        if not self.generator_nodes:
            raise ConfigurationError("Workload has no generator nodes")
        if len(set(self.generator_nodes)) != len(self.generator_nodes):
            raise ConfigurationError(f"Generator nodes are not distinct: {self.generator_nodes}")
        for node in self.generator_nodes:
            if not 0 <= node < graph.node_count:
                raise ConfigurationError(f"Generator node {node} is not in the overlay")
        if self.poisson_rate <= 0:
            raise ConfigurationError(f"poisson_rate must be positive, got {self.poisson_rate}")
        if self.initial_ttl < 0:
            raise ConfigurationError(f"initial_ttl must be non-negative, got {self.initial_ttl}")
        if placement.object_count < 1:
            raise ConfigurationError("Placement holds no objects to search for")


class Arrival(NamedTuple):
    query_id: int
    timestamp: float
    origin: int
    object_id: int


@dataclass(frozen=True)
class ArrivalTrace:
    arrivals: tuple

    def __len__(self):
        return len(self.arrivals)

    def mean_interarrival(self):
        if len(self.arrivals) < 2:
            return None
        first, last = self.arrivals[0].timestamp, self.arrivals[-1].timestamp
        return (last - first) / (len(self.arrivals) - 1)


@dataclass(frozen=True)
class QueryOutcome:
    query_id: int
    origin: int
    object_id: int
    initial_ttl: int
    hit_nodes: frozenset
    first_hit_hops: Optional[int]
    forwarded_packets: int
    rounds_elapsed: int
    hit_hops: tuple = ()
    duplicates: int = 0
    expired: int = 0
    processed_count: int = 1

    @property
    def success(self):
        return bool(self.hit_nodes)

    @property
    def hits(self):
        return len(self.hit_nodes)


class DeliveryEvent(NamedTuple):
    round: int
    sender: int
    receiver: int
    ttl: int
    disposition: str


def _check_query(graph, placement, origin, object_id, initial_ttl):
    if not 0 <= origin < graph.node_count:
        raise ConfigurationError(f"Origin {origin} is not a node of the overlay")
    if not 0 <= object_id < placement.object_count:
        raise ConfigurationError(
            f"Object {object_id} outside [0, {placement.object_count})")
    if initial_ttl < 0:
        raise ConfigurationError(f"initial_ttl must be non-negative, got {initial_ttl}")


def _local_hit_outcome(query_id, origin, object_id, initial_ttl):
    return QueryOutcome(query_id, origin, object_id, initial_ttl,
                        frozenset((origin,)), 0, 0, 0, ((origin, 0),))


def _outcome(query_id, origin, object_id, initial_ttl, hit_hops, forwarded, rounds,
             duplicates, expired, processed):
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug(f"Query {query_id} from {origin} for object {object_id}: "
                     f"{len(hit_hops)} hits, {forwarded} packets, {rounds} rounds")
    return QueryOutcome(
        query_id=query_id,
        origin=origin,
        object_id=object_id,
        initial_ttl=initial_ttl,
        hit_nodes=frozenset(hit_hops),
        first_hit_hops=min(hit_hops.values()) if hit_hops else None,
        forwarded_packets=forwarded,
        rounds_elapsed=rounds,
        hit_hops=tuple(sorted(hit_hops.items())),
        duplicates=duplicates,
        expired=expired,
        processed_count=processed + 1,
    )


def run_query(graph, placement, origin, object_id, initial_ttl, query_id,
              origin_local_hit=False, event_log=None):
    """
    Flood one query through the overlay and record its outcome.

    Pass a list as `event_log` to collect one DeliveryEvent per delivered copy; that run
    steps every node through the protocol automaton. Without a log the flood is counted
    level by level, which gives the same outcome.
    """
    _check_query(graph, placement, origin, object_id, initial_ttl)
    if event_log is not None:
        return _run_query_traced(graph, placement, origin, object_id, initial_ttl, query_id,
                                 origin_local_hit, event_log)
    if origin_local_hit and object_id in placement.store[origin]:
        return _local_hit_outcome(query_id, origin, object_id, initial_ttl)

    adjacency = graph.adjacency
    holders = placement.holders[object_id]
    seen = {origin}
    hit_hops = {}
    duplicates = expired = processed = forwarded = 0
    rounds = 0

    # receiver -> [lowest sender, copies] for the copies delivered next round
    frontier = {}
    if initial_ttl > 0:
        forwarded = len(adjacency[origin])
        frontier = {neighbor: [origin, 1] for neighbor in adjacency[origin]}

    while frontier:
        rounds += 1
        remaining = initial_ttl - rounds
        next_frontier = {}
        # copies addressed to nodes that already hold the query ID
        late_copies = 0
        for receiver, (sender, copies) in frontier.items():
            if receiver in seen:
                duplicates += copies
                continue
            seen.add(receiver)
            duplicates += copies - 1
            processed += 1
            if receiver in holders:
                hit_hops[receiver] = rounds
            elif remaining == 0:
                expired += 1
            else:
                neighbors = adjacency[receiver]
                forwarded += len(neighbors) - 1
                for neighbor in neighbors:
                    if neighbor == sender:
                        continue
                    if neighbor in seen:
                        late_copies += 1
                        continue
                    entry = next_frontier.get(neighbor)
                    if entry is None:
                        next_frontier[neighbor] = [receiver, 1]
                    else:
                        entry[1] += 1
                        if receiver < entry[0]:
                            entry[0] = receiver
        duplicates += late_copies
        frontier = next_frontier
        if late_copies and not frontier:
            # a round that delivers only duplicates still elapses
            rounds += 1

    return _outcome(query_id, origin, object_id, initial_ttl, hit_hops, forwarded, rounds,
                    duplicates, expired, processed)


def _run_query_traced(graph, placement, origin, object_id, initial_ttl, query_id,
                      origin_local_hit, event_log):
    states = {origin: NodeState.from_overlay(graph, placement, origin, origin_local_hit)}
    origin_state = states[origin]
    if is_local_hit(origin_state, object_id):
        originate(origin_state, object_id, initial_ttl, query_id)
        return _local_hit_outcome(query_id, origin, object_id, initial_ttl)

    _, emissions = originate(origin_state, object_id, initial_ttl, query_id)
    forwarded = len(emissions)
    in_flight = [(neighbor, origin, packet) for neighbor, packet in emissions]

    hit_hops = {}
    duplicates = expired = processed = 0
    rounds = 0
    while in_flight:
        rounds += 1
        in_flight.sort(key=_DELIVERY_ORDER)
        next_round = []
        for receiver, sender, packet in in_flight:
            node = states.get(receiver)
            if node is None:
                node = states[receiver] = NodeState(
                    receiver, placement.store[receiver], graph.adjacency[receiver])
            action = receive(node, packet, sender)
            disposition = action.disposition
            if disposition is Disposition.DUPLICATE:
                duplicates += 1
            elif disposition is Disposition.FORWARD:
                processed += 1
                forwarded += len(action.forward_to)
                next_round.extend((neighbor, receiver, out) for neighbor, out in action.forward_to)
            elif disposition is Disposition.HIT:
                processed += 1
                hit_hops[receiver] = hop_count(initial_ttl, packet.ttl)
            else:
                processed += 1
                expired += 1
            event_log.append(DeliveryEvent(rounds, sender, receiver, packet.ttl,
                                           disposition.value))
        in_flight = next_round

    return _outcome(query_id, origin, object_id, initial_ttl, hit_hops, forwarded, rounds,
                    duplicates, expired, processed)


def sample_arrivals(generator_nodes, poisson_rate, total_queries, object_count, rng,
                    first_query_id=1):
    """
    Merge one Poisson process per generator and keep the first `total_queries` arrivals.

    Target objects are drawn uniformly after the arrival times.
    """
    scale = 1.0 / poisson_rate
    heap = [(float(rng.exponential(scale)), node) for node in sorted(generator_nodes)]
    heapq.heapify(heap)
    times = []
    for _ in range(total_queries):
        timestamp, node = heapq.heappop(heap)
        times.append((timestamp, node))
        heapq.heappush(heap, (timestamp + float(rng.exponential(scale)), node))
    objects = rng.integers(0, object_count, size=total_queries).tolist()
    return ArrivalTrace(tuple(
        Arrival(first_query_id + i, timestamp, node, object_id)
        for i, ((timestamp, node), object_id) in enumerate(zip(times, objects))
    ))


def run_workload(graph, placement, workload, rng_seed):
    """Generate the arrival trace for `workload` and run every query in query_id order"""
    workload.check(graph, placement)
    rng = np.random.default_rng(rng_seed)
    trace = sample_arrivals(workload.generator_nodes, workload.poisson_rate,
                            workload.total_queries, placement.object_count, rng)
    outcomes = [
        run_query(graph, placement, arrival.origin, arrival.object_id, workload.initial_ttl,
                  arrival.query_id, origin_local_hit=workload.origin_local_hit)
        for arrival in trace.arrivals
    ]
    return outcomes, trace
