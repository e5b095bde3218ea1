import os
import sys
import logging
import argparse

from dotenv import load_dotenv

# Load environment variables from .env file (FLOODSIM_* settings)
load_dotenv()

from modules import __version__
from modules.config import ConfigurationError, InvariantViolation, load_config, parse_int_set
from modules.experiment_processing import placement_seed, run_experiment, topology_seed
from modules.output_utils import OutputBundle, emit_plot_data, read_sweep_csv, render_figures
from modules.topology import (
    DegreeSpec, format_edge_list, format_placement, generate_graph, place_replicas,
)
from modules.verification import VerifyConfig, verify

logger = logging.getLogger('flood_simulator')

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG_ERROR = 2


def _add_experiment_flags(parser):
    sim_group = parser.add_argument_group('Simulation parameters')
    sim_group.add_argument('--nodes', type=int, help='Overlay size (default 1000)')
    sim_group.add_argument('--objects', type=int, help='Distinct objects (default 500)')
    sim_group.add_argument('--deg-min', type=int, help='Minimum node degree (default 2)')
    sim_group.add_argument('--deg-max', type=int, help='Maximum node degree (default 8)')
    sim_group.add_argument('--replication-set', help="Replication values, e.g. '2,8,32,128,512'")
    sim_group.add_argument('--ttl-set', help="TTL values, e.g. '1-8' or '2,4,6'")
    sim_group.add_argument('--generators', type=int, help='Query generating nodes (default 10)')
    sim_group.add_argument('--queries', type=int, help='Queries per sweep cell (default 10000)')
    sim_group.add_argument('--poisson-rate', type=float, help='Queries per time unit per generator')
    sim_group.add_argument('--seed', type=int, help='Master seed')
    sim_group.add_argument('--selected-local-nodes', help='Generator nodes with local statistics')
    sim_group.add_argument('--local-node-count', type=int,
                           help='Lowest-ID generators with local statistics (default 3)')
    sim_group.add_argument('--origin-local-hit', action=argparse.BooleanOptionalAction, default=None,
                           help='Let the originator satisfy its own query')
    sim_group.add_argument('--paired-ttl', action=argparse.BooleanOptionalAction, default=None,
                           help='Replay one query stream across all TTL values of a replication')

    run_group = parser.add_argument_group('Execution and output')
    run_group.add_argument('--workers', type=int,
                           help='Parallel cell processes (default: CPU count)')
    run_group.add_argument('--output-dir', help='Output directory (default results)')
    run_group.add_argument('--run-id', help='run_id column value (default seed<seed>)')
    run_group.add_argument('--trace', action=argparse.BooleanOptionalAction, default=None,
                           help='Write the per-query trace CSV')
    run_group.add_argument('--include-sem', action=argparse.BooleanOptionalAction, default=None,
                           help='Append standard error columns')
    run_group.add_argument('--figures', action=argparse.BooleanOptionalAction, default=None,
                           help='Render PNG figures')


def build_parser():
    parser = argparse.ArgumentParser(
        prog='flood_simulator',
        description='Flooding search simulator for unstructured P2P overlays',
    )
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    parser.add_argument('--log-level', default=os.environ.get('FLOODSIM_LOG_LEVEL', 'INFO'),
                        help='Logging level (default INFO)')
    subparsers = parser.add_subparsers(dest='command', required=True)

    run_parser = subparsers.add_parser('run', help='Run the replication x TTL sweep')
    run_parser.add_argument('--config', help='key=value configuration file')
    _add_experiment_flags(run_parser)

    topology_parser = subparsers.add_parser('topology', help='Export the overlay and placements')
    topology_parser.add_argument('--config', help='key=value configuration file')
    _add_experiment_flags(topology_parser)

    verify_parser = subparsers.add_parser('verify', help='Check the engine against the oracle')
    verify_parser.add_argument('--cases', type=int, default=1000, help='Randomized cases')
    verify_parser.add_argument('--min-nodes', type=int, default=20)
    verify_parser.add_argument('--max-nodes', type=int, default=100)
    verify_parser.add_argument('--deg-min', type=int, default=2)
    verify_parser.add_argument('--deg-max', type=int, default=8)
    verify_parser.add_argument('--objects', type=int, default=20)
    verify_parser.add_argument('--max-ttl', type=int, default=8)
    verify_parser.add_argument('--ttl-set', help='Draw TTLs from this set instead of [0, max-ttl]')
    verify_parser.add_argument('--queries-per-graph', type=int, default=10)
    verify_parser.add_argument('--origin-local-hit', action=argparse.BooleanOptionalAction,
                               default=False)
    verify_parser.add_argument('--seed', type=int, default=1)

    plot_parser = subparsers.add_parser('plot-data', help='Write per-figure data files from a sweep CSV')
    plot_parser.add_argument('--sweep', required=True, help='sweep.csv written by run')
    plot_parser.add_argument('--output-dir', help='Destination (default: next to the sweep CSV)')
    plot_parser.add_argument('--figures', action='store_true', help='Also render PNG figures')
    return parser


def _overrides(args):
    names = ('nodes', 'objects', 'deg_min', 'deg_max', 'replication_set', 'ttl_set', 'generators',
             'queries', 'poisson_rate', 'seed', 'selected_local_nodes', 'local_node_count',
             'origin_local_hit', 'paired_ttl', 'workers', 'output_dir', 'run_id', 'trace',
             'include_sem', 'figures')
    return {name: getattr(args, name) for name in names}


def handle_run(args):
    """Run the sweep and write every output file"""
    config = load_config(args.config, _overrides(args))
    experiment = run_experiment(config)
    print(f"Sweep finished: {len(experiment.table.rows)} cells, "
          f"{len(experiment.written)} files in {config.output_dir}")
    for finding in experiment.anomalies:
        print(f"attenuation: {finding}")
    return EXIT_OK


def handle_topology(args):
    """Export the overlay and one placement per replication value"""
    config = load_config(args.config, _overrides(args))
    graph = generate_graph(config.nodes, DegreeSpec(config.deg_min, config.deg_max),
                           topology_seed(config))
    bundle = OutputBundle()
    bundle.add('graph.txt', format_edge_list(graph))
    for rp in config.replication_set:
        placement = place_replicas(graph, config.objects, rp, placement_seed(config, rp))
        bundle.add(f"placement_rp{rp}.txt", format_placement(placement))
    written = bundle.commit(config.output_dir)
    print(f"Exported overlay ({graph.edge_count} edges) and {len(written) - 1} placements "
          f"to {config.output_dir}")
    return EXIT_OK


def handle_verify(args):
    """Run the engine/oracle equivalence suite"""
    config = VerifyConfig(
        cases=args.cases,
        min_nodes=args.min_nodes,
        max_nodes=args.max_nodes,
        deg_min=args.deg_min,
        deg_max=args.deg_max,
        objects=args.objects,
        max_ttl=args.max_ttl,
        ttl_set=parse_int_set(args.ttl_set) if args.ttl_set else None,
        queries_per_graph=args.queries_per_graph,
        origin_local_hit=args.origin_local_hit,
        seed=args.seed,
    )
    report = verify(config)
    print(report.format())
    return EXIT_OK if report.passed else EXIT_FAILURE


def handle_plot_data(args):
    """Rebuild the per-figure data files from a sweep CSV"""
    if not os.path.exists(args.sweep):
        raise ConfigurationError(f"Sweep CSV not found: {args.sweep}")
    _, table = read_sweep_csv(args.sweep)
    output_dir = args.output_dir or os.path.dirname(os.path.abspath(args.sweep))
    bundle = OutputBundle()
    bundle.update(emit_plot_data(table))
    if args.figures:
        bundle.update(render_figures(table))
    written = bundle.commit(output_dir)
    print(f"Wrote {len(written)} plot files to {output_dir}")
    return EXIT_OK


HANDLERS = {
    'run': handle_run,
    'topology': handle_topology,
    'verify': handle_verify,
    'plot-data': handle_plot_data,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO),
                        format=LOG_FORMAT)
    try:
        return HANDLERS[args.command](args)
    except ConfigurationError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except InvariantViolation as e:
        logger.error(f"Invariant violated: {str(e)}")
        print(f"invariant violated: {e}", file=sys.stderr)
        return EXIT_FAILURE
    except Exception as e:
        logger.error(f"{args.command} failed: {str(e)}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())
