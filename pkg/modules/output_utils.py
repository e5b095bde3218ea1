import csv
import io
import logging
import os
import tempfile
from io import BytesIO

from modules.metrics import MetricSet, PLOTTED_METRICS, SweepRow, SweepTable

logger = logging.getLogger('output_utils')

SWEEP_CSV_HEADER = ('run_id', 'replication', 'ttl', 'queries', 'success_rate', 'hits_per_query',
                    'hits_per_success', 'avg_hops', 'avg_hops_all_hits', 'forwarded_per_query')
SEM_COLUMNS = ('success_rate_sem', 'hits_per_query_sem', 'avg_hops_sem', 'forwarded_per_query_sem')
TRACE_CSV_HEADER = ('replication', 'query_id', 'timestamp', 'origin', 'object', 'ttl', 'success',
                    'hits', 'first_hit_hops', 'forwarded_packets')

PLOT_DATA_FILES = {metric: f"{metric}.dat" for metric in PLOTTED_METRICS}
FIGURE_TITLES = {
    'success_rate': 'Success rate per query',
    'hits_per_query': 'Hits per query',
    'avg_hops': 'Average hops per successful query',
    'forwarded_per_query': 'Forwarded packets per query',
}


def _fmt(value):
    if value is None:
        return ''
    if isinstance(value, bool):
        return '1' if value else '0'
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def _metric_values(metrics, include_sem):
    values = [metrics.total_queries, metrics.success_rate, metrics.hits_per_query,
              metrics.hits_per_success, metrics.avg_hops, metrics.avg_hops_all_hits,
              metrics.forwarded_per_query]
    if include_sem:
        values.extend(getattr(metrics, column) for column in SEM_COLUMNS)
    return values


def _csv_text(header, rows):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buffer.getvalue()


def format_sweep_csv(table, run_id, include_sem=False):
    header = SWEEP_CSV_HEADER + (SEM_COLUMNS if include_sem else ())
    rows = [[run_id, row.replication, row.ttl] + _metric_values(row.metrics, include_sem)
            for row in table.rows]
    return _csv_text(header, rows)


def format_local_csv(local_by_cell, run_id, include_sem=False):
    """Local statistics: the sweep schema with a node_id column after run_id"""
    header = SWEEP_CSV_HEADER[:1] + ('node_id',) + SWEEP_CSV_HEADER[1:]
    if include_sem:
        header += SEM_COLUMNS
    rows = []
    for (replication, ttl) in sorted(local_by_cell):
        for entry in local_by_cell[(replication, ttl)]:
            prefix = [run_id, entry.node_id, replication, ttl]
            if entry.empty:
                width = len(header) - len(prefix) - 1
                rows.append(prefix + [0] + [None] * width)
            else:
                rows.append(prefix + _metric_values(entry.metrics, include_sem))
    return _csv_text(header, rows)


def format_trace_csv(traces):
    """One line per query of every cell; `traces` maps (rp, ttl) to (outcomes, arrival trace)"""
    rows = []
    for (replication, _ttl) in sorted(traces):
        outcomes, trace = traces[(replication, _ttl)]
        timestamps = {arrival.query_id: arrival.timestamp for arrival in trace.arrivals}
        for outcome in outcomes:
            rows.append([replication, outcome.query_id, f"{timestamps[outcome.query_id]:.6f}",
                         outcome.origin, outcome.object_id, outcome.initial_ttl,
                         outcome.success, outcome.hits, outcome.first_hit_hops,
                         outcome.forwarded_packets])
    return _csv_text(TRACE_CSV_HEADER, rows)


def emit_plot_data(table):
    """
    One whitespace-separated file per plotted metric.

    Rows are TTL values in ascending order; the first column is the TTL, followed by
    one column per replication value in ascending order. Absent values are 'nan'.
    """
    replications = table.replications()
    files = {}
    for metric in PLOTTED_METRICS:
        lines = [f"# {metric} ttl " + " ".join(f"rp={rp}" for rp in replications)]
        for ttl, values in zip(table.ttls(), table.metric_grid(metric)):
            cells = ['nan' if v is None else repr(float(v)) for v in values]
            lines.append(" ".join([str(ttl)] + cells))
        files[PLOT_DATA_FILES[metric]] = "\n".join(lines) + "\n"
    return files


def format_anomalies(findings):
    if not findings:
        return "no attenuation anomalies\n"
    return "".join(f"{line}\n" for line in findings)


def format_manifest(entries):
    """key=value lines in insertion order"""
    return "".join(f"{key}={value}\n" for key, value in entries)


def _optional(cls, text):
    return cls(text) if text not in ('', None) else None


def read_sweep_csv(path):
    """Load a sweep CSV back into (run_id, SweepTable)"""
    with open(path, 'r', newline='') as f:
        records = list(csv.DictReader(f))
    if not records:
        raise ValueError(f"Sweep CSV {path} has no rows")
    missing = [c for c in SWEEP_CSV_HEADER if c not in records[0]]
    if missing:
        raise ValueError(f"Sweep CSV {path} lacks columns {missing}")

    rows = []
    for record in records:
        queries = int(record['queries'])
        success_rate = float(record['success_rate'])
        metrics = MetricSet(
            total_queries=queries,
            successes=round(success_rate * queries),
            success_rate=success_rate,
            hits_per_query=float(record['hits_per_query']),
            hits_per_success=_optional(float, record['hits_per_success']),
            avg_hops=_optional(float, record['avg_hops']),
            avg_hops_all_hits=_optional(float, record['avg_hops_all_hits']),
            forwarded_per_query=float(record['forwarded_per_query']),
            **{c: _optional(float, record.get(c)) for c in SEM_COLUMNS},
        )
        rows.append(SweepRow(int(record['replication']), int(record['ttl']), metrics))
    rows.sort(key=lambda r: (r.replication, r.ttl))
    return records[0]['run_id'], SweepTable(tuple(rows))


def render_figures(table, local_by_cell=None):
    """Render one PNG per plotted metric, plus local statistics when given"""
    import matplotlib as mpl
    mpl.use('Agg')
    import matplotlib.pyplot as plt

    figures = {}
    ttls = table.ttls()
    for metric in PLOTTED_METRICS:
        fig, ax = plt.subplots(figsize=(6, 4))
        for rp, column in zip(table.replications(), zip(*table.metric_grid(metric))):
            ax.plot(ttls, [float('nan') if v is None else v for v in column],
                    marker='o', label=f"RP={rp}")
        ax.set_xlabel('TTL')
        ax.set_ylabel(metric.replace('_', ' '))
        ax.set_title(FIGURE_TITLES[metric])
        ax.legend(fontsize=8)
        ax.grid(True, alpha=0.3)
        figures[f"{metric}.png"] = _figure_bytes(fig, plt)

    if local_by_cell:
        figures['local_statistics.png'] = _render_local(table, local_by_cell, plt)
    return figures


def _render_local(table, local_by_cell, plt):
    replications = table.replications()
    fig, axes = plt.subplots(2, 2, figsize=(10, 7))
    for ax, metric in zip(axes.flat, PLOTTED_METRICS):
        series = {}
        for (rp, ttl), entries in sorted(local_by_cell.items()):
            if rp != replications[0]:
                continue
            for entry in entries:
                value = None if entry.empty else getattr(entry.metrics, metric)
                series.setdefault(entry.node_id, []).append(
                    (ttl, float('nan') if value is None else value))
        for node_id, points in series.items():
            ax.plot([p[0] for p in points], [p[1] for p in points], marker='.',
                    label=f"node {node_id}")
        ax.set_title(f"{FIGURE_TITLES[metric]} (RP={replications[0]})", fontsize=9)
        ax.set_xlabel('TTL')
        ax.legend(fontsize=7)
    fig.tight_layout()
    return _figure_bytes(fig, plt)


def _figure_bytes(fig, plt):
    buffer = BytesIO()
    fig.savefig(buffer, format='png', dpi=120, metadata={'Software': None})
    plt.close(fig)
    return buffer.getvalue()


class OutputBundle:
    """
    Files staged in memory and committed together.

    Nothing touches the output directory until commit(); commit writes every file to
    a temporary name first and renames only once all writes succeeded.
    """

    def __init__(self):
        self.files = {}

    def add(self, name, data):
        self.files[name] = data

    def update(self, files):
        self.files.update(files)

    def commit(self, directory):
        os.makedirs(directory, exist_ok=True)
        staged = []
        try:
            for name, data in self.files.items():
                mode = 'wb' if isinstance(data, bytes) else 'w'
                fd, temp_path = tempfile.mkstemp(prefix='.tmp_', dir=directory)
                staged.append((temp_path, os.path.join(directory, name)))
                kwargs = {} if mode == 'wb' else {'newline': '', 'encoding': 'utf-8'}
                with os.fdopen(fd, mode, **kwargs) as f:
                    f.write(data)
        except Exception as e:
            logger.error(f"Failed to stage outputs in {directory}: {str(e)}")
            for temp_path, _ in staged:
                if os.path.exists(temp_path):
                    os.remove(temp_path)
            raise

        written = []
        for temp_path, final_path in staged:
            os.replace(temp_path, final_path)
            written.append(final_path)
        logger.info(f"Wrote {len(written)} files to {directory}")
        return written
