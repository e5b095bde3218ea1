"""
Overlay topology and replica placement.

The overlay is a random graph whose per-node degrees are drawn uniformly from a
DegreeSpec range and realized with a configuration model. Self-loops and parallel
edges are re-paired, and a disconnected result is joined into a single component.
Replicas are placed per object on distinct, uniformly chosen nodes.
"""
import logging
from dataclasses import dataclass
from fractions import Fraction

import networkx as nx
import numpy as np

from modules.config import ConfigurationError

logger = logging.getLogger('topology')

# Re-pairing rounds before the remaining stubs are dropped
MAX_REPAIR_ROUNDS = 100


@dataclass(frozen=True)
class DegreeSpec:
    min_degree: int
    max_degree: int

    def check(self, node_count):
        if self.min_degree < 1:
            raise ConfigurationError(f"min_degree must be at least 1, got {self.min_degree}")
        if self.max_degree < self.min_degree:
            raise ConfigurationError(
                f"max_degree ({self.max_degree}) is below min_degree ({self.min_degree})")
        if self.max_degree >= node_count:
            raise ConfigurationError(
                f"Degree spec infeasible: max_degree {self.max_degree} >= node_count {node_count}")


@dataclass(frozen=True)
class OverlayGraph:
    node_count: int
    adjacency: tuple
    repair_edges: tuple = ()
    dropped_stub_pairs: int = 0

    @classmethod
    def from_edges(cls, node_count, edges, repair_edges=(), dropped_stub_pairs=0):
        """Build the canonical form: symmetric, sorted neighbor tuples"""
        neighbors = [set() for _ in range(node_count)]
        for u, v in edges:
            if u == v:
                raise ConfigurationError(f"Self-loop on node {u}")
            if not (0 <= u < node_count and 0 <= v < node_count):
                raise ConfigurationError(f"Edge ({u}, {v}) outside node range {node_count}")
            neighbors[u].add(v)
            neighbors[v].add(u)
        adjacency = tuple(tuple(sorted(n)) for n in neighbors)
        return cls(node_count, adjacency, tuple(repair_edges), dropped_stub_pairs)

    def neighbors(self, node):
        return self.adjacency[node]

    def degree(self, node):
        return len(self.adjacency[node])

    def degrees(self):
        return [len(n) for n in self.adjacency]

    def edges(self):
        """Yield each undirected edge once as (u, v) with u < v"""
        for u, nbrs in enumerate(self.adjacency):
            for v in nbrs:
                if u < v:
                    yield u, v

    @property
    def edge_count(self):
        return sum(len(n) for n in self.adjacency) // 2

    def to_networkx(self):
        g = nx.Graph()
        g.add_nodes_from(range(self.node_count))
        g.add_edges_from(self.edges())
        return g

    def is_connected(self):
        return nx.is_connected(self.to_networkx())

    def is_symmetric(self):
        return all(u in self.adjacency[v] for u, nbrs in enumerate(self.adjacency) for v in nbrs)


@dataclass(frozen=True)
class ReplicaPlacement:
    node_count: int
    object_count: int
    replication: int
    holders: tuple
    store: tuple

    @classmethod
    def from_holders(cls, node_count, replication, holders):
        """Derive the per-node store as the exact inverse of per-object holders"""
        stores = [set() for _ in range(node_count)]
        for object_id, nodes in enumerate(holders):
            for node in nodes:
                stores[node].add(object_id)
        return cls(
            node_count=node_count,
            object_count=len(holders),
            replication=replication,
            holders=tuple(frozenset(h) for h in holders),
            store=tuple(frozenset(s) for s in stores),
        )

    def holds(self, node, object_id):
        return object_id in self.store[node]

    def store_sizes(self):
        return [len(s) for s in self.store]

    def total_replicas(self):
        return sum(len(s) for s in self.store)

    def mean_store_size(self):
        return Fraction(self.total_replicas(), self.node_count)

    def check_exactness(self):
        """True when every object has exactly RP holders and store inverts holders"""
        for object_id, nodes in enumerate(self.holders):
            if len(nodes) != self.replication:
                return False
            if any(object_id not in self.store[node] for node in nodes):
                return False
        return self.total_replicas() == self.object_count * self.replication


def expected_store_size(object_count, replication, node_count):
    """Mean number of objects per node: objects * RP / nodes, kept exact"""
    if node_count <= 0:
        raise ConfigurationError(f"node_count must be positive, got {node_count}")
    return Fraction(object_count * replication, node_count)


def _draw_target_degrees(rng, node_count, degrees):
    targets = rng.integers(degrees.min_degree, degrees.max_degree, size=node_count, endpoint=True)
    if int(targets.sum()) % 2:
        node = int(rng.integers(node_count))
        if targets[node] < degrees.max_degree:
            targets[node] += 1
        else:
            targets[node] -= 1
    return targets


def _pair_stubs(rng, targets):
    """Configuration model pairing; bad pairs go back to the pool and are re-shuffled"""
    stubs = np.repeat(np.arange(len(targets)), targets)
    edges = set()
    for _ in range(MAX_REPAIR_ROUNDS):
        if len(stubs) < 2:
            break
        rng.shuffle(stubs)
        pool = stubs.tolist()
        leftover = []
        for s1, s2 in zip(pool[0::2], pool[1::2]):
            if s1 > s2:
                s1, s2 = s2, s1
            if s1 != s2 and (s1, s2) not in edges:
                edges.add((s1, s2))
            else:
                leftover.extend((s1, s2))
        stubs = np.array(leftover, dtype=np.int64)
    return edges, len(stubs) // 2


def _join_components(rng, node_count, edges):
    g = nx.Graph()
    g.add_nodes_from(range(node_count))
    g.add_edges_from(edges)
    components = sorted((sorted(c) for c in nx.connected_components(g)), key=lambda c: c[0])
    repairs = []
    while len(components) > 1:
        i, j = sorted(int(x) for x in rng.choice(len(components), size=2, replace=False))
        u = components[i][int(rng.integers(len(components[i])))]
        v = components[j][int(rng.integers(len(components[j])))]
        repairs.append((min(u, v), max(u, v)))
        merged = sorted(components[i] + components[j])
        components = [c for k, c in enumerate(components) if k not in (i, j)]
        components.append(merged)
        components.sort(key=lambda c: c[0])
    return repairs


def generate_graph(node_count, degrees, rng_seed):
    """
    Generate a connected overlay with degrees drawn uniformly from `degrees`.

    Deterministic in (node_count, degrees, rng_seed).
    """
    if node_count < 2:
        raise ConfigurationError(f"node_count must be at least 2, got {node_count}")
    degrees.check(node_count)

    rng = np.random.default_rng(rng_seed)
    targets = _draw_target_degrees(rng, node_count, degrees)
    edges, dropped = _pair_stubs(rng, targets)
    if dropped:
        logger.warning(f"Dropped {dropped} stub pairs that could not be re-paired")

    repairs = _join_components(rng, node_count, edges)
    if repairs:
        logger.info(f"Added {len(repairs)} repair edges to connect the overlay: {repairs[:10]}")
    edges.update(repairs)

    graph = OverlayGraph.from_edges(node_count, edges, repairs, dropped)
    logger.info(f"Generated overlay: {node_count} nodes, {graph.edge_count} edges, "
                f"degrees in [{degrees.min_degree}, {degrees.max_degree}]")
    return graph


def place_replicas(graph, object_count, replication, rng_seed):
    """Choose `replication` distinct holders per object, uniformly without replacement"""
    node_count = graph.node_count
    if replication < 1 or replication > node_count:
        raise ConfigurationError(
            f"replication {replication} must be in [1, node_count={node_count}]")
    if object_count < 0:
        raise ConfigurationError(f"object_count must be non-negative, got {object_count}")

    rng = np.random.default_rng(rng_seed)
    holders = [rng.choice(node_count, size=replication, replace=False).tolist()
               for _ in range(object_count)]
    placement = ReplicaPlacement.from_holders(node_count, replication, holders)
    logger.info(f"Placed {object_count} objects x {replication} replicas, "
                f"mean store size {float(placement.mean_store_size()):.2f}")
    return placement


# Edge-list and placement text formats

def format_edge_list(graph):
    lines = [f"nodes={graph.node_count}"]
    lines.extend(f"{u} {v}" for u, v in graph.edges())
    return "\n".join(lines) + "\n"


def format_placement(placement):
    return "".join(f"{object_id}: {','.join(str(n) for n in sorted(nodes))}\n"
                   for object_id, nodes in enumerate(placement.holders))
