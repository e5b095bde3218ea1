"""
Brute-force reference for single-query flooding outcomes.

The reach set of a flood is a depth-limited breadth-first search in which holder
nodes are absorbing: they are visited and counted as hits but never expanded.
Nothing here is shared with the engine or protocol modules.
"""
from collections import deque
from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class OracleResult:
    success: bool
    hit_nodes: frozenset
    min_hit_distance: Optional[int]
    processed_nodes: frozenset


def _pruned_bfs(graph, holders, origin, initial_ttl, origin_absorbs):
    depth = {origin: 0}
    if origin_absorbs:
        return depth
    frontier = deque([origin])
    while frontier:
        node = frontier.popleft()
        if node != origin and node in holders:
            continue
        if depth[node] >= initial_ttl:
            continue
        for neighbor in graph.adjacency[node]:
            if neighbor not in depth:
                depth[neighbor] = depth[node] + 1
                frontier.append(neighbor)
    return depth


def oracle_query(graph, placement, origin, object_id, initial_ttl, origin_local_hit=False):
    holders = placement.holders[object_id]
    origin_absorbs = origin_local_hit and origin in holders
    depth = _pruned_bfs(graph, holders, origin, initial_ttl, origin_absorbs)

    hits = {node: d for node, d in depth.items() if node in holders and node != origin}
    if origin_absorbs:
        hits = {origin: 0}
    return OracleResult(
        success=bool(hits),
        hit_nodes=frozenset(hits),
        min_hit_distance=min(hits.values()) if hits else None,
        processed_nodes=frozenset(depth),
    )


def oracle_forwarded_count(graph, placement, origin, object_id, initial_ttl,
                           origin_local_hit=False):
    """
    Exact number of link transmissions of one flood.

    The origin sends to all its neighbours; every other node that processes the query
    first-hand, holds no replica and has budget left sends to all neighbours but one.
    """
    holders = placement.holders[object_id]
    if initial_ttl == 0 or (origin_local_hit and origin in holders):
        return 0

    total = len(graph.adjacency[origin])
    level = {origin}
    visited = {origin}
    for remaining in range(initial_ttl - 1, -1, -1):
        reached = set()
        for node in level:
            for neighbor in graph.adjacency[node]:
                if neighbor not in visited:
                    reached.add(neighbor)
        visited |= reached
        level = {node for node in reached if node not in holders}
        if remaining == 0:
            break
        total += sum(len(graph.adjacency[node]) - 1 for node in level)
    return total
