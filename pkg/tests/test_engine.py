import numpy as np
import pytest

from modules.config import ConfigurationError
from modules.engine import WorkloadSpec, run_query, run_workload, sample_arrivals
from modules.topology import DegreeSpec, generate_graph, place_replicas


def test_path_flood_hits_at_distance_three(path5, make_placement):
    placement = make_placement(path5, [[3]])
    outcome = run_query(path5, placement, origin=0, object_id=0, initial_ttl=3, query_id=1)
    assert outcome.success
    assert outcome.hit_nodes == frozenset({3})
    assert outcome.first_hit_hops == 3
    assert outcome.forwarded_packets == 3
    assert outcome.rounds_elapsed == 3


def test_cycle_flood_counts_one_hit_and_one_duplicate(cycle4, make_placement):
    placement = make_placement(cycle4, [[2]])
    outcome = run_query(cycle4, placement, origin=0, object_id=0, initial_ttl=2, query_id=1)
    assert outcome.success
    assert outcome.hit_nodes == frozenset({2})
    assert outcome.first_hit_hops == 2
    assert outcome.forwarded_packets == 4
    assert outcome.duplicates == 1


def test_ttl_zero_fails_without_traffic(cycle4, make_placement):
    placement = make_placement(cycle4, [[1]])
    outcome = run_query(cycle4, placement, 0, 0, 0, 1)
    assert not outcome.success
    assert outcome.forwarded_packets == 0
    assert outcome.rounds_elapsed == 0


def test_short_ttl_expires_before_holder(path5, make_placement):
    placement = make_placement(path5, [[4]])
    outcome = run_query(path5, placement, 0, 0, 2, 1)
    assert not outcome.success
    assert outcome.first_hit_hops is None
    assert outcome.expired == 1
    assert outcome.forwarded_packets == 2


def test_origin_local_hit_switch(path5, make_placement):
    placement = make_placement(path5, [[0]])
    default = run_query(path5, placement, 0, 0, 3, 1)
    assert not default.success
    assert default.forwarded_packets == 3
    local = run_query(path5, placement, 0, 0, 3, 1, origin_local_hit=True)
    assert local.hit_nodes == frozenset({0})
    assert local.first_hit_hops == 0
    assert local.forwarded_packets == 0


def test_invalid_origin_or_object_raises(path5, make_placement):
    placement = make_placement(path5, [[3]])
    with pytest.raises(ConfigurationError):
        run_query(path5, placement, 5, 0, 2, 1)
    with pytest.raises(ConfigurationError):
        run_query(path5, placement, 0, 1, 2, 1)


def test_event_log_records_every_delivery(cycle4, make_placement):
    placement = make_placement(cycle4, [[2]])
    events = []
    run_query(cycle4, placement, 0, 0, 2, 1, event_log=events)
    assert [(e.round, e.sender, e.receiver, e.disposition) for e in events] == [
        (1, 0, 1, 'forward'),
        (1, 0, 3, 'forward'),
        (2, 1, 2, 'hit'),
        (2, 3, 2, 'duplicate'),
    ]


@pytest.fixture(scope='module')
def medium_overlay():
    graph = generate_graph(300, DegreeSpec(2, 8), 77)
    return graph, place_replicas(graph, 60, 4, 78)


def test_larger_ttl_never_loses_success(medium_overlay):
    graph, placement = medium_overlay
    rng = np.random.default_rng(5)
    for query_id in range(1, 201):
        origin = int(rng.integers(graph.node_count))
        object_id = int(rng.integers(placement.object_count))
        ttl = int(rng.integers(0, 6))
        short = run_query(graph, placement, origin, object_id, ttl, query_id)
        longer = run_query(graph, placement, origin, object_id, ttl + 1, query_id)
        assert short.hit_nodes <= longer.hit_nodes
        if short.success:
            assert longer.first_hit_hops == short.first_hit_hops
        assert short.forwarded_packets <= longer.forwarded_packets


def test_workload_count_contract(medium_overlay):
    graph, placement = medium_overlay
    with pytest.raises(ConfigurationError):
        run_workload(graph, placement, WorkloadSpec((0, 1), 1.0, 0, 3), 1)
    outcomes, trace = run_workload(graph, placement, WorkloadSpec((0, 1), 1.0, 1, 3), 1)
    assert len(outcomes) == 1
    assert len(trace) == 1


def test_merged_poisson_interarrival():
    rng = np.random.default_rng(2)
    trace = sample_arrivals(tuple(range(10)), 1.0, 10000, 500, rng)
    assert trace.mean_interarrival() == pytest.approx(0.1, rel=0.05)
    timestamps = [a.timestamp for a in trace.arrivals]
    assert timestamps == sorted(timestamps)
    assert [a.query_id for a in trace.arrivals] == list(range(1, 10001))
    assert {a.origin for a in trace.arrivals} == set(range(10))
    assert all(0 <= a.object_id < 500 for a in trace.arrivals)


def test_workload_is_deterministic(medium_overlay):
    graph, placement = medium_overlay
    workload = WorkloadSpec((3, 10, 40), 1.0, 300, 4)
    first = run_workload(graph, placement, workload, 42)
    second = run_workload(graph, placement, workload, 42)
    assert first == second


def test_outcomes_do_not_depend_on_execution_order(medium_overlay):
    graph, placement = medium_overlay
    outcomes, trace = run_workload(graph, placement, WorkloadSpec((3, 10, 40), 1.0, 100, 4), 9)
    reordered = {
        arrival.query_id: run_query(graph, placement, arrival.origin, arrival.object_id, 4,
                                    arrival.query_id)
        for arrival in reversed(trace.arrivals)
    }
    for outcome in outcomes:
        assert reordered[outcome.query_id] == outcome


def test_workload_rejects_duplicate_generators(medium_overlay):
    graph, placement = medium_overlay
    with pytest.raises(ConfigurationError):
        run_workload(graph, placement, WorkloadSpec((1, 1), 1.0, 10, 3), 1)
    with pytest.raises(ConfigurationError):
        run_workload(graph, placement, WorkloadSpec((1, 999), 1.0, 10, 3), 1)


def test_traced_and_counted_floods_agree(medium_overlay):
    graph, placement = medium_overlay
    rng = np.random.default_rng(13)
    for query_id in range(1, 301):
        origin = int(rng.integers(graph.node_count))
        object_id = int(rng.integers(placement.object_count))
        ttl = int(rng.integers(0, 9))
        counted = run_query(graph, placement, origin, object_id, ttl, query_id)
        traced = run_query(graph, placement, origin, object_id, ttl, query_id, event_log=[])
        assert counted == traced


def test_duplicate_only_round_is_counted(cycle4, make_placement):
    # the last round only carries node 3's copy back into node 0, which already hit
    placement = make_placement(cycle4, [[0]])
    counted = run_query(cycle4, placement, 1, 0, 3, 1)
    traced = run_query(cycle4, placement, 1, 0, 3, 1, event_log=[])
    assert counted == traced
    assert counted.hit_nodes == frozenset({0})
    assert counted.rounds_elapsed == 3
    assert counted.duplicates == 1
