import logging

import numpy as np

from config import load_config

log = logging.getLogger("csv_exporter")

TRACE_HEADER = ("k", "fixed_point_gap", "stationarity", "primal_infeas", "complementarity", "dist_to_ref", "lyapunov")
RUN_HEADER = ("k", "norm_dist")
SUMMARY_HEADER = ("d0_multiplier", "seed", "iters", "final_kkt", "early_rate", "late_rate", "status")
PLOT_HEADER = ("d0_multiplier", "seed", "k", "norm_dist")


def load_csv_config():
    """Load CSV configuration settings."""
    return load_config("csv_config", {"include_headers": True, "encoding": "utf-8"})


def format_csv_value(value):
    """Format a value for CSV output: floats in round-trip precision, None as empty."""
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    str_value = str(value)
    if '"' in str_value:
        str_value = str_value.replace('"', '""')
    if ',' in str_value or '"' in str_value or '\n' in str_value:
        return f'"{str_value}"'
    return str_value


def _write_rows(path, header, rows):
    cfg = load_csv_config()
    count = 0
    with open(path, "w", encoding=cfg.get("encoding", "utf-8"), newline="\n") as f:
        if cfg.get("include_headers", True):
            f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(format_csv_value(v) for v in row) + "\n")
            count += 1
    log.debug(f"wrote {count} rows to {path}")
    return count


def export_trace(trace, path):
    rows = (
        (e.k, e.kkt.fixed_point_gap, e.kkt.stationarity, e.kkt.primal_infeas,
         e.kkt.complementarity, e.dist_to_ref, e.lyapunov)
        for e in trace.entries
    )
    return _write_rows(path, TRACE_HEADER, rows)


def export_run_distances(record, path):
    return _write_rows(path, RUN_HEADER, enumerate(record.norm_dist.tolist()))


def export_summary(records, path):
    rows = (
        (r.d0_multiplier, r.seed, r.iters, r.final_kkt, r.early_rate, r.late_rate, r.status)
        for r in records
    )
    return _write_rows(path, SUMMARY_HEADER, rows)


def export_plot_data(records, path):
    """Long-format table, one row per (run, iteration)."""
    rows = (
        (r.d0_multiplier, r.seed, k, d)
        for r in records
        for k, d in enumerate(r.norm_dist.tolist())
    )
    return _write_rows(path, PLOT_HEADER, rows)


def _format_report_value(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.ndarray):
        return " ".join(repr(float(v)) for v in value.ravel())
    if isinstance(value, (list, tuple)):
        return " ".join(_format_report_value(v) for v in value)
    return str(value)


def write_report(items, path):
    """Flat `name = value` report, one item per line, in the given order."""
    cfg = load_csv_config()
    with open(path, "w", encoding=cfg.get("encoding", "utf-8"), newline="\n") as f:
        for name, value in items:
            f.write(f"{name} = {_format_report_value(value)}\n")
    log.debug(f"wrote report {path}")
