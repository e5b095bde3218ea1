"""
Engine-versus-oracle equivalence suite.

Random small overlays, placements, origins, objects and TTLs are flooded by the engine
and recomputed by the oracle. Any difference in success, hit set, first-hit distance,
processed-node count or forwarded packets is a mismatch; the first one is re-run with an
event log so its full delivery trace can be printed.
"""
import time
import logging
from dataclasses import dataclass, field
from typing import Optional

import networkx as nx
import numpy as np

from modules.config import VERIFY_STREAM, ConfigurationError, InvariantViolation, mix_seed
from modules.engine import run_query
from modules.oracle import oracle_forwarded_count, oracle_query
from modules.topology import DegreeSpec, expected_store_size, generate_graph, place_replicas

logger = logging.getLogger('verification')

MAX_VERIFY_NODES = 200


@dataclass(frozen=True)
class VerifyConfig:
    cases: int = 1000
    min_nodes: int = 20
    max_nodes: int = 100
    deg_min: int = 2
    deg_max: int = 8
    objects: int = 20
    max_ttl: int = 8
    ttl_set: Optional[tuple] = None
    queries_per_graph: int = 10
    origin_local_hit: bool = False
    seed: int = 1

    def validate(self):
        if self.cases < 1:
            raise ConfigurationError(f"cases must be at least 1, got {self.cases}")
        if not 2 <= self.min_nodes <= self.max_nodes <= MAX_VERIFY_NODES:
            raise ConfigurationError(
                f"verification graphs need 2 <= min_nodes <= max_nodes <= {MAX_VERIFY_NODES}")
        if self.deg_max >= self.min_nodes:
            raise ConfigurationError(
                f"deg_max ({self.deg_max}) must be below min_nodes ({self.min_nodes})")
        if self.objects < 1 or self.queries_per_graph < 1 or self.max_ttl < 0:
            raise ConfigurationError("objects and queries_per_graph must be positive, max_ttl >= 0")
        if self.ttl_set is not None and (not self.ttl_set or min(self.ttl_set) < 0):
            raise ConfigurationError(f"Invalid ttl_set {self.ttl_set}")
        return self


@dataclass(frozen=True)
class VerifyCase:
    index: int
    graph: object
    placement: object
    origin: int
    object_id: int
    ttl: int


@dataclass
class VerificationReport:
    cases: int = 0
    mismatches: int = 0
    failures: list = field(default_factory=list)
    first_trace: Optional[str] = None
    elapsed: float = 0.0

    @property
    def passed(self):
        return self.mismatches == 0

    def format(self):
        lines = [f"verified {self.cases} cases in {self.elapsed:.2f}s: "
                 f"{'PASS' if self.passed else 'FAIL'} ({self.mismatches} mismatches)"]
        for failure in self.failures[:10]:
            lines.append(f"  {failure}")
        if self.first_trace:
            lines.append(self.first_trace)
        return "\n".join(lines)


def compare_case(case, runner=run_query, origin_local_hit=False):
    """Return the list of differences between engine and oracle for one case"""
    graph, placement = case.graph, case.placement
    outcome = runner(graph, placement, case.origin, case.object_id, case.ttl, case.index + 1,
                     origin_local_hit=origin_local_hit)
    expected = oracle_query(graph, placement, case.origin, case.object_id, case.ttl,
                            origin_local_hit=origin_local_hit)
    expected_forwarded = oracle_forwarded_count(graph, placement, case.origin, case.object_id,
                                                case.ttl, origin_local_hit=origin_local_hit)

    problems = []
    if outcome.success != expected.success:
        problems.append(f"success {outcome.success} != {expected.success}")
    if outcome.hit_nodes != expected.hit_nodes:
        problems.append(f"hit_nodes {sorted(outcome.hit_nodes)} != {sorted(expected.hit_nodes)}")
    if outcome.first_hit_hops != expected.min_hit_distance:
        problems.append(f"first_hit_hops {outcome.first_hit_hops} != {expected.min_hit_distance}")
    if outcome.forwarded_packets != expected_forwarded:
        problems.append(f"forwarded {outcome.forwarded_packets} != {expected_forwarded}")
    if outcome.processed_count != len(expected.processed_nodes):
        problems.append(f"processed {outcome.processed_count} != {len(expected.processed_nodes)}")

    # structural invariants
    if outcome.rounds_elapsed > case.ttl:
        problems.append(f"rounds_elapsed {outcome.rounds_elapsed} exceeds TTL {case.ttl}")
    if outcome.first_hit_hops is not None and outcome.first_hit_hops > case.ttl:
        problems.append(f"first_hit_hops {outcome.first_hit_hops} exceeds TTL {case.ttl}")
    bound = graph.degree(case.origin) + sum(
        graph.degree(n) - 1 for n in expected.processed_nodes if n != case.origin)
    if outcome.forwarded_packets > bound:
        problems.append(f"forwarded {outcome.forwarded_packets} exceeds flood bound {bound}")
    ball = nx.single_source_shortest_path_length(graph.to_networkx(), case.origin, cutoff=case.ttl)
    if not expected.processed_nodes <= set(ball):
        problems.append("pruned reach set escapes the plain BFS ball")

    traced = runner(graph, placement, case.origin, case.object_id, case.ttl, case.index + 1,
                    origin_local_hit=origin_local_hit, event_log=[])
    if traced != outcome:
        problems.append("traced run differs from the level-by-level run")

    # a larger budget never loses a success and keeps the first-hit distance
    longer = runner(graph, placement, case.origin, case.object_id, case.ttl + 1, case.index + 1,
                    origin_local_hit=origin_local_hit)
    if outcome.success and longer.first_hit_hops != outcome.first_hit_hops:
        problems.append(f"TTL+1 changed first_hit_hops {outcome.first_hit_hops} -> "
                        f"{longer.first_hit_hops}")
    return problems


def format_trace(case, runner=run_query, origin_local_hit=False):
    """Full delivery trace of one case, round by round"""
    events = []
    outcome = runner(case.graph, case.placement, case.origin, case.object_id, case.ttl,
                     case.index + 1, origin_local_hit=origin_local_hit, event_log=events)
    holders = sorted(case.placement.holders[case.object_id])
    lines = [
        f"case {case.index}: origin={case.origin} object={case.object_id} ttl={case.ttl} "
        f"nodes={case.graph.node_count} holders={holders}",
        f"  origin neighbors: {list(case.graph.neighbors(case.origin))}",
    ]
    for event in events:
        lines.append(f"  round {event.round}: {event.sender} -> {event.receiver} "
                     f"ttl={event.ttl} {event.disposition}")
    lines.append(f"  outcome: hits={sorted(outcome.hit_nodes)} first_hit_hops={outcome.first_hit_hops} "
                 f"forwarded={outcome.forwarded_packets} rounds={outcome.rounds_elapsed}")
    return "\n".join(lines)


def generate_cases(config):
    """Deterministic stream of randomized cases; one overlay per queries_per_graph cases"""
    rng = np.random.default_rng(mix_seed(config.seed, VERIFY_STREAM))
    index = 0
    while index < config.cases:
        node_count = int(rng.integers(config.min_nodes, config.max_nodes, endpoint=True))
        graph = generate_graph(node_count, DegreeSpec(config.deg_min, config.deg_max),
                               int(rng.integers(2**62)))
        replication = int(rng.integers(1, max(2, node_count // 4), endpoint=True))
        placement = place_replicas(graph, config.objects, replication, int(rng.integers(2**62)))
        check_overlay(graph, placement, config.objects)
        for _ in range(min(config.queries_per_graph, config.cases - index)):
            if config.ttl_set is not None:
                ttl = int(config.ttl_set[int(rng.integers(len(config.ttl_set)))])
            else:
                ttl = int(rng.integers(0, config.max_ttl, endpoint=True))
            yield VerifyCase(index, graph, placement, int(rng.integers(node_count)),
                             int(rng.integers(config.objects)), ttl)
            index += 1


def check_overlay(graph, placement, objects):
    if not graph.is_connected() or not graph.is_symmetric():
        raise InvariantViolation(f"Generated overlay of {graph.node_count} nodes is not a connected "
                             f"symmetric graph")
    if not placement.check_exactness():
        raise InvariantViolation(f"Placement with RP={placement.replication} is not exact")
    if placement.mean_store_size() != expected_store_size(objects, placement.replication,
                                                          graph.node_count):
        raise InvariantViolation("Mean store size differs from the expected store size")


def verify(config, runner=run_query):
    """Run the equivalence suite; `runner` replaces the engine's run_query when given"""
    config.validate()
    start_time = time.time()
    report = VerificationReport()
    for case in generate_cases(config):
        report.cases += 1
        problems = compare_case(case, runner, config.origin_local_hit)
        if not problems:
            continue
        report.mismatches += 1
        report.failures.append(f"case {case.index}: " + "; ".join(problems))
        if report.first_trace is None:
            report.first_trace = format_trace(case, runner, config.origin_local_hit)
            logger.error(f"Mismatch in case {case.index}: {'; '.join(problems)}")
    report.elapsed = time.time() - start_time
    if report.passed:
        logger.info(f"✅ {report.cases} cases match the oracle ({report.elapsed:.2f}s)")
    else:
        logger.error(f"❌ {report.mismatches} of {report.cases} cases differ from the oracle")
    return report
