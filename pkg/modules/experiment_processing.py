import time
import logging
import concurrent.futures
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from modules import __version__
from modules.config import (
    ConfigurationError, InvariantViolation, GENERATOR_STREAM, PAIRED_TTL_SLOT,
    PLACEMENT_STREAM, TOPOLOGY_STREAM, cell_seed, mix_seed,
)
from modules.engine import WorkloadSpec, run_workload
from modules.metrics import aggregate, aggregate_local, attenuation_report, summarize_sweep
from modules.output_utils import (
    OutputBundle, emit_plot_data, format_anomalies, format_local_csv, format_manifest,
    format_sweep_csv, format_trace_csv, render_figures,
)
from modules.topology import DegreeSpec, expected_store_size, generate_graph, place_replicas

logger = logging.getLogger('experiment_processing')


@dataclass(frozen=True)
class CellJob:
    replication: int
    ttl: int
    graph: object
    objects: int
    placement_seed: int
    workload_seed: int
    generator_nodes: tuple
    selected_nodes: tuple
    queries: int
    poisson_rate: float
    origin_local_hit: bool
    keep_trace: bool


@dataclass(frozen=True)
class CellResult:
    replication: int
    ttl: int
    metrics: object
    local: list
    trace: Optional[tuple]
    mean_store_size: object
    elapsed: float


@dataclass
class ExperimentResult:
    config: object
    graph: object
    generator_nodes: tuple
    selected_nodes: tuple
    table: object
    local_by_cell: dict
    traces: dict
    anomalies: list
    cell_status: dict = field(default_factory=dict)
    written: list = field(default_factory=list)


def topology_seed(config):
    return mix_seed(config.seed, TOPOLOGY_STREAM)


def placement_seed(config, replication):
    return mix_seed(config.seed, PLACEMENT_STREAM, replication)


def workload_seed(config, replication, ttl):
    """Paired runs replay one query stream across the TTL values of a replication row"""
    return cell_seed(config.seed, replication, PAIRED_TTL_SLOT if config.paired_ttl else ttl)


def choose_generators(config):
    rng = np.random.default_rng(mix_seed(config.seed, GENERATOR_STREAM))
    chosen = rng.choice(config.nodes, size=config.generators, replace=False)
    return tuple(sorted(int(n) for n in chosen))


def choose_local_nodes(config, generator_nodes):
    if config.selected_local_nodes is None:
        return tuple(generator_nodes[:config.local_node_count])
    outside = [n for n in config.selected_local_nodes if n not in generator_nodes]
    if outside:
        raise ConfigurationError(
            f"Selected local nodes {outside} are not generator nodes {list(generator_nodes)}")
    return tuple(config.selected_local_nodes)


def check_cell_identities(metrics, ttl, replication):
    if metrics.hits_per_query < metrics.success_rate:
        raise InvariantViolation(
            f"RP={replication} TTL={ttl}: hits_per_query {metrics.hits_per_query} "
            f"below success_rate {metrics.success_rate}")
    if metrics.avg_hops is not None and metrics.avg_hops > ttl:
        raise InvariantViolation(
            f"RP={replication} TTL={ttl}: avg_hops {metrics.avg_hops} exceeds TTL")


def process_cell(job):
    """Run the workload of one (RP, TTL) cell and aggregate it"""
    start_time = time.time()
    graph = job.graph
    placement = place_replicas(graph, job.objects, job.replication, job.placement_seed)
    expected = expected_store_size(job.objects, job.replication, graph.node_count)
    if not placement.check_exactness() or placement.mean_store_size() != expected:
        raise InvariantViolation(
            f"Placement for RP={job.replication} is not exact: "
            f"mean store size {placement.mean_store_size()} vs expected {expected}")

    workload = WorkloadSpec(job.generator_nodes, job.poisson_rate, job.queries, job.ttl,
                            job.origin_local_hit)
    outcomes, trace = run_workload(graph, placement, workload, job.workload_seed)
    metrics = aggregate(outcomes)
    check_cell_identities(metrics, job.ttl, job.replication)
    local = aggregate_local(outcomes, job.selected_nodes)

    return CellResult(
        replication=job.replication,
        ttl=job.ttl,
        metrics=metrics,
        local=local,
        trace=(tuple(outcomes), trace) if job.keep_trace else None,
        mean_store_size=placement.mean_store_size(),
        elapsed=time.time() - start_time,
    )


def _build_jobs(config, graph, generator_nodes, selected_nodes):
    return [
        CellJob(
            replication=rp,
            ttl=ttl,
            graph=graph,
            objects=config.objects,
            placement_seed=placement_seed(config, rp),
            workload_seed=workload_seed(config, rp, ttl),
            generator_nodes=generator_nodes,
            selected_nodes=selected_nodes,
            queries=config.queries,
            poisson_rate=config.poisson_rate,
            origin_local_hit=config.origin_local_hit,
            keep_trace=config.trace,
        )
        for rp in config.replication_set
        for ttl in config.ttl_set
    ]


def _run_jobs(jobs, workers, cell_status):
    """Execute cells inline or on a process pool; results come back keyed by (RP, TTL)"""
    results = {}
    total = len(jobs)
    workers = min(workers, total)

    def record(result):
        key = (result.replication, result.ttl)
        results[key] = result
        cell_status[key].update(status='completed', progress=100,
                                message=f"{result.metrics.total_queries} queries in {result.elapsed:.2f}s")
        logger.info(f"✅ Cell RP={result.replication} TTL={result.ttl}: "
                    f"success_rate={result.metrics.success_rate:.4f} "
                    f"forwarded_per_query={result.metrics.forwarded_per_query:.1f} "
                    f"duplicates_per_query={result.metrics.duplicates_per_query:.1f} "
                    f"expired_per_query={result.metrics.expired_per_query:.1f} "
                    f"({result.elapsed:.2f}s)")
        logger.info(f"Progress: {len(results)}/{total} cells processed")

    if workers == 1:
        for job in jobs:
            cell_status[(job.replication, job.ttl)]['status'] = 'processing'
            record(process_cell(job))
        return results

    logger.info(f"Processing {total} cells with {workers} worker processes")
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(process_cell, job): job for job in jobs}
        for future in concurrent.futures.as_completed(futures):
            job = futures[future]
            try:
                record(future.result())
            except Exception as e:
                key = (job.replication, job.ttl)
                cell_status[key].update(status='error', progress=100, message=str(e))
                logger.error(f"Cell RP={job.replication} TTL={job.ttl} failed: {str(e)}")
                for other in futures:
                    other.cancel()
                raise
    return results


def manifest_entries(config, graph, generator_nodes, selected_nodes, results):
    entries = [('version', __version__)]
    for name, value in config.as_dict().items():
        if name in ('output_dir', 'workers'):
            continue
        if isinstance(value, tuple):
            value = ','.join(str(v) for v in value)
        entries.append((name, '' if value is None else value))
    entries.extend([
        ('effective_run_id', config.effective_run_id),
        ('topology_seed', topology_seed(config)),
        ('graph_edges', graph.edge_count),
        ('graph_repair_edges', len(graph.repair_edges)),
        ('graph_dropped_stub_pairs', graph.dropped_stub_pairs),
        ('generator_nodes', ','.join(str(n) for n in generator_nodes)),
        ('local_nodes', ','.join(str(n) for n in selected_nodes)),
    ])
    for rp in config.replication_set:
        mean = results[(rp, config.ttl_set[0])].mean_store_size
        entries.append((f"placement_rp{rp}",
                        f"seed={placement_seed(config, rp)} mean_store_size={mean}"))
    for rp in config.replication_set:
        for ttl in config.ttl_set:
            entries.append((f"workload_rp{rp}_ttl{ttl}", workload_seed(config, rp, ttl)))
    return entries


def run_experiment(config, write=True):
    """
    Run the full replication x TTL sweep.

    One topology is generated from the master seed and shared by all cells; the
    placement is re-drawn per replication value. Outputs are only written once
    every cell has completed.
    """
    start_time = time.time()
    config.validate()
    logger.info(f"Starting sweep: {config.nodes} nodes, {config.objects} objects, "
                f"RP={list(config.replication_set)}, TTL={list(config.ttl_set)}, "
                f"{config.queries} queries per cell")

    graph = generate_graph(config.nodes, DegreeSpec(config.deg_min, config.deg_max),
                           topology_seed(config))
    generator_nodes = choose_generators(config)
    selected_nodes = choose_local_nodes(config, generator_nodes)
    logger.info(f"Generator nodes: {list(generator_nodes)}; local statistics for {list(selected_nodes)}")

    jobs = _build_jobs(config, graph, generator_nodes, selected_nodes)
    cell_status = {(job.replication, job.ttl): {'status': 'queued', 'progress': 0,
                                                'message': 'Cell queued'} for job in jobs}
    results = _run_jobs(jobs, config.workers, cell_status)

    table = summarize_sweep({key: result.metrics for key, result in results.items()})
    local_by_cell = {key: result.local for key, result in results.items()}
    traces = {key: result.trace for key, result in results.items() if result.trace is not None}
    anomalies = attenuation_report(table)
    for finding in anomalies:
        logger.warning(f"Attenuation: {finding}")

    experiment = ExperimentResult(config, graph, generator_nodes, selected_nodes, table,
                                  local_by_cell, traces, anomalies, cell_status)
    if write:
        experiment.written = write_outputs(experiment, results)
    logger.info(f"Sweep of {len(results)} cells completed in {time.time() - start_time:.2f} seconds")
    return experiment


def write_outputs(experiment, results):
    config = experiment.config
    run_id = config.effective_run_id
    bundle = OutputBundle()
    bundle.add('sweep.csv', format_sweep_csv(experiment.table, run_id, config.include_sem))
    bundle.add('local.csv', format_local_csv(experiment.local_by_cell, run_id, config.include_sem))
    if config.trace:
        bundle.add('trace.csv', format_trace_csv(experiment.traces))
    bundle.update(emit_plot_data(experiment.table))
    bundle.add('anomalies.txt', format_anomalies(experiment.anomalies))
    bundle.add('manifest.txt', format_manifest(manifest_entries(
        config, experiment.graph, experiment.generator_nodes, experiment.selected_nodes, results)))
    if config.figures:
        bundle.update(render_figures(experiment.table, experiment.local_by_cell))
    return bundle.commit(config.output_dir)
