"""
Global and per-origin search statistics.

Sums run over outcomes in query_id order so floating-point results are reproducible.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

logger = logging.getLogger('metrics')

# The four plotted metrics, in figure order
PLOTTED_METRICS = ('success_rate', 'hits_per_query', 'avg_hops', 'forwarded_per_query')


@dataclass(frozen=True)
class MetricSet:
    total_queries: int
    successes: int
    success_rate: float
    hits_per_query: float
    hits_per_success: Optional[float]
    avg_hops: Optional[float]
    avg_hops_all_hits: Optional[float]
    forwarded_per_query: float
    duplicates_per_query: float = 0.0
    expired_per_query: float = 0.0
    success_rate_sem: Optional[float] = None
    hits_per_query_sem: Optional[float] = None
    avg_hops_sem: Optional[float] = None
    forwarded_per_query_sem: Optional[float] = None


@dataclass(frozen=True)
class LocalMetricSet:
    node_id: int
    metrics: Optional[MetricSet]

    @property
    def empty(self):
        return self.metrics is None


@dataclass(frozen=True)
class SweepRow:
    replication: int
    ttl: int
    metrics: MetricSet


@dataclass(frozen=True)
class SweepTable:
    rows: tuple

    def replications(self):
        return sorted({row.replication for row in self.rows})

    def ttls(self):
        return sorted({row.ttl for row in self.rows})

    def cell(self, replication, ttl):
        for row in self.rows:
            if row.replication == replication and row.ttl == ttl:
                return row.metrics
        return None

    def is_rectangular(self):
        return len(self.rows) == len(self.replications()) * len(self.ttls())

    def metric_grid(self, metric):
        """Rows by ascending TTL, columns by ascending RP; None for absent values"""
        grid = []
        for ttl in self.ttls():
            row = []
            for rp in self.replications():
                cell = self.cell(rp, ttl)
                row.append(getattr(cell, metric) if cell is not None else None)
            grid.append(row)
        return grid


def _sem(values):
    if len(values) < 2:
        return None
    return float(np.std(np.asarray(values, dtype=float), ddof=1) / np.sqrt(len(values)))


def aggregate(outcomes):
    """Reduce query outcomes to success rate, hits, hops and forwarded packets"""
    if not outcomes:
        raise ValueError("Cannot aggregate an empty outcome list: rates are undefined")
    ordered = sorted(outcomes, key=lambda o: o.query_id)
    total = len(ordered)

    successes = [o for o in ordered if o.hit_nodes]
    hits = [len(o.hit_nodes) for o in ordered]
    forwarded = [o.forwarded_packets for o in ordered]
    first_hops = [o.first_hit_hops for o in successes]
    all_hit_hops = [h for o in ordered for _, h in o.hit_hops]
    total_hits = sum(hits)

    return MetricSet(
        total_queries=total,
        successes=len(successes),
        success_rate=len(successes) / total,
        hits_per_query=total_hits / total,
        hits_per_success=total_hits / len(successes) if successes else None,
        avg_hops=sum(first_hops) / len(first_hops) if first_hops else None,
        avg_hops_all_hits=sum(all_hit_hops) / len(all_hit_hops) if all_hit_hops else None,
        forwarded_per_query=sum(forwarded) / total,
        duplicates_per_query=sum(o.duplicates for o in ordered) / total,
        expired_per_query=sum(o.expired for o in ordered) / total,
        success_rate_sem=_sem([1 if o.hit_nodes else 0 for o in ordered]),
        hits_per_query_sem=_sem(hits),
        avg_hops_sem=_sem(first_hops),
        forwarded_per_query_sem=_sem(forwarded),
    )


def aggregate_local(outcomes, selected_nodes):
    """One LocalMetricSet per selected node, over the queries that node originated"""
    by_origin = {node: [] for node in selected_nodes}
    for outcome in outcomes:
        if outcome.origin in by_origin:
            by_origin[outcome.origin].append(outcome)

    local = []
    for node in selected_nodes:
        if by_origin[node]:
            local.append(LocalMetricSet(node, aggregate(by_origin[node])))
        else:
            logger.warning(f"Node {node} originated no queries; local statistics are empty")
            local.append(LocalMetricSet(node, None))
    return local


def summarize_sweep(grid):
    """Arrange (replication, ttl) -> MetricSet cells as rows in lexicographic order"""
    if not grid:
        raise ValueError("A sweep needs at least one cell")
    return SweepTable(tuple(SweepRow(rp, ttl, grid[(rp, ttl)]) for rp, ttl in sorted(grid)))


def attenuation_report(table):
    """
    List cells whose hits per query fall below the next lower replication at the same TTL.

    Strong replication ends floods early, so the highest replication values can show
    fewer hits than lower ones; this is reported, never enforced.
    """
    findings = []
    replications = table.replications()
    for ttl in table.ttls():
        for lower, higher in zip(replications, replications[1:]):
            low, high = table.cell(lower, ttl), table.cell(higher, ttl)
            if low is None or high is None:
                continue
            if high.hits_per_query < low.hits_per_query:
                findings.append(
                    f"ttl={ttl}: hits_per_query at RP={higher} ({high.hits_per_query:.4f}) "
                    f"is below RP={lower} ({low.hits_per_query:.4f}); "
                    f"success_rate at RP={higher} is {high.success_rate:.4f}")
    return findings
