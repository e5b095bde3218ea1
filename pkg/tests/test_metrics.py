import numpy as np
import pytest

from modules.engine import QueryOutcome
from modules.metrics import (
    MetricSet, aggregate, aggregate_local, attenuation_report, summarize_sweep,
)


def _outcome(query_id, origin=0, hits=(), forwarded=0, ttl=4):
    """`hits` is a sequence of (node, hops) pairs"""
    hit_hops = tuple(sorted(hits))
    return QueryOutcome(
        query_id=query_id,
        origin=origin,
        object_id=0,
        initial_ttl=ttl,
        hit_nodes=frozenset(node for node, _ in hit_hops),
        first_hit_hops=min(h for _, h in hit_hops) if hit_hops else None,
        forwarded_packets=forwarded,
        rounds_elapsed=ttl,
        hit_hops=hit_hops,
    )


def test_two_outcome_example():
    metrics = aggregate([
        _outcome(1, hits=[(5, 3), (9, 3)], forwarded=10),
        _outcome(2, forwarded=6),
    ])
    assert metrics.total_queries == 2
    assert metrics.success_rate == 0.5
    assert metrics.hits_per_query == 1.0
    assert metrics.hits_per_success == 2.0
    assert metrics.avg_hops == 3.0
    assert metrics.avg_hops_all_hits == 3.0
    assert metrics.forwarded_per_query == 8.0


def test_all_failures():
    metrics = aggregate([_outcome(i, forwarded=4) for i in range(1, 6)])
    assert metrics.success_rate == 0
    assert metrics.hits_per_query == 0
    assert metrics.avg_hops is None
    assert metrics.hits_per_success is None
    assert metrics.avg_hops_sem is None


def test_empty_outcomes_raise():
    with pytest.raises(ValueError):
        aggregate([])


def test_first_hit_and_all_hit_averages_differ():
    metrics = aggregate([_outcome(1, hits=[(1, 1), (2, 3)], forwarded=3)])
    assert metrics.avg_hops == 1.0
    assert metrics.avg_hops_all_hits == 2.0


def test_aggregate_is_order_independent():
    rng = np.random.default_rng(1)
    outcomes = [
        _outcome(i, hits=[(n, int(rng.integers(1, 5))) for n in range(int(rng.integers(0, 4)))],
                 forwarded=int(rng.integers(0, 100)))
        for i in range(1, 200)
    ]
    shuffled = list(outcomes)
    rng.shuffle(shuffled)
    assert aggregate(outcomes) == aggregate(shuffled)


def test_matches_independent_recomputation():
    rng = np.random.default_rng(7)
    outcomes = []
    for query_id in range(1, 10001):
        hit_count = int(rng.integers(0, 4))
        hops = rng.integers(1, 9, size=hit_count).tolist()
        outcomes.append(_outcome(query_id, hits=list(enumerate(hops)),
                                 forwarded=int(rng.integers(0, 2000)), ttl=8))

    successes = hits = forwarded = hop_sum = 0
    for outcome in outcomes:
        forwarded += outcome.forwarded_packets
        hits += len(outcome.hit_nodes)
        if outcome.hit_nodes:
            successes += 1
            hop_sum += min(h for _, h in outcome.hit_hops)

    metrics = aggregate(outcomes)
    assert metrics.success_rate == pytest.approx(successes / 10000, rel=1e-12)
    assert metrics.hits_per_query == pytest.approx(hits / 10000, rel=1e-12)
    assert metrics.avg_hops == pytest.approx(hop_sum / successes, rel=1e-12)
    assert metrics.forwarded_per_query == pytest.approx(forwarded / 10000, rel=1e-12)
    assert metrics.hits_per_query >= metrics.success_rate


def test_sem_columns():
    metrics = aggregate([_outcome(1, forwarded=2), _outcome(2, forwarded=4)])
    assert metrics.forwarded_per_query_sem == pytest.approx(1.0)
    assert metrics.success_rate_sem == 0.0
    assert aggregate([_outcome(1, forwarded=2)]).forwarded_per_query_sem is None


def test_local_statistics_partition_global_totals():
    outcomes = [_outcome(i, origin=i % 3, hits=[(7, 2)] if i % 2 else (), forwarded=i)
                for i in range(1, 31)]
    local = aggregate_local(outcomes, [0, 1, 2])
    assert [entry.node_id for entry in local] == [0, 1, 2]
    assert sum(entry.metrics.total_queries for entry in local) == 30
    assert sum(entry.metrics.successes for entry in local) == aggregate(outcomes).successes


def test_local_statistics_cover_only_own_queries():
    outcomes = [_outcome(i, origin=4 if i in (2, 5, 9) else 1, forwarded=i) for i in range(1, 11)]
    (entry,) = aggregate_local(outcomes, [4])
    assert entry.metrics.total_queries == 3
    assert entry.metrics.forwarded_per_query == pytest.approx((2 + 5 + 9) / 3)


def test_node_without_queries_is_flagged_empty():
    outcomes = [_outcome(1, origin=1)]
    empty, full = aggregate_local(outcomes, [8, 1])
    assert empty.empty
    assert empty.metrics is None
    assert not full.empty


def _metric_set(success_rate, hits_per_query):
    return MetricSet(total_queries=100, successes=round(success_rate * 100),
                     success_rate=success_rate, hits_per_query=hits_per_query,
                     hits_per_success=None, avg_hops=None, avg_hops_all_hits=None,
                     forwarded_per_query=1.0)


def test_sweep_rows_are_lexicographic():
    grid = {(rp, ttl): _metric_set(0.5, 1.0)
            for rp in (512, 2, 32, 8, 128) for ttl in range(8, 0, -1)}
    table = summarize_sweep(grid)
    assert len(table.rows) == 40
    assert [(r.replication, r.ttl) for r in table.rows] == sorted(grid)
    assert table.is_rectangular()
    assert table.replications() == [2, 8, 32, 128, 512]
    assert table.ttls() == list(range(1, 9))


def test_metric_grid_marks_absent_cells():
    table = summarize_sweep({(2, 1): _metric_set(0.1, 0.1), (8, 2): _metric_set(0.4, 0.5)})
    assert not table.is_rectangular()
    assert table.metric_grid('success_rate') == [[0.1, None], [None, 0.4]]


def test_attenuation_report_flags_drop_in_hits():
    table = summarize_sweep({
        (128, 4): _metric_set(0.99, 20.0),
        (512, 4): _metric_set(1.0, 12.0),
        (128, 5): _metric_set(1.0, 30.0),
        (512, 5): _metric_set(1.0, 35.0),
    })
    findings = attenuation_report(table)
    assert len(findings) == 1
    assert findings[0].startswith('ttl=4: hits_per_query at RP=512')
