"""
Learning curves from metrics.csv: one smoothed series per (env, agent,
lambda), averaged over seeds, written as CSV plus one SVG chart per env.
"""

import csv
import logging
import os

import numpy as np
import pygal

from iota_rl import IotaError, atomic_write
from iota_rl.harness import COLUMNS, rows_to_csv

log = logging.getLogger(__name__)

CURVE_COLUMNS = ('unit_index', 'avg_reward', 'smoothed')
NUMERIC = ('lambda', 'seed', 'unit_index', 'avg_reward', 'epsilon',
           'steps_total', 'wall_ms')


class SchemaError(IotaError):
    def __init__(self, column, message):
        super().__init__('column %s: %s' % (column, message))
        self.column = column


def moving_average(values, window):
    """ Trailing mean over `window` points; the first points use what exists """
    if window < 1:
        raise ValueError('window must be at least 1')
    values = np.asarray(values, dtype=np.float64)
    if window == 1:
        return values.copy()
    c = np.concatenate(([0.0], np.cumsum(values)))
    idx = np.arange(1, len(values) + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def read_metrics(path):
    """ Rows of a metrics CSV, checked against the expected columns """
    with open(path, 'r', encoding='utf-8', newline='') as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        for column in COLUMNS:
            if column not in header:
                raise SchemaError(column, 'missing from %s' % path)
        for column in header:
            if column not in COLUMNS:
                raise SchemaError(column, 'unexpected in %s' % path)
        rows = list(reader)
    for lineno, row in enumerate(rows, start=2):
        for column in NUMERIC:
            try:
                float(row[column])
            except (TypeError, ValueError):
                raise SchemaError(column, 'line %d: not a number: %r'
                                  % (lineno, row[column]))
    return rows


def curve_series(rows):
    """ {(env, agent, lambda): (unit indices, seed-mean rewards)} """
    buckets = {}
    for row in rows:
        key = (row['env'], row['agent'], float(row['lambda']))
        per_unit = buckets.setdefault(key, {})
        per_unit.setdefault(int(row['unit_index']), []).append(
            float(row['avg_reward']))
    out = {}
    for key, per_unit in buckets.items():
        units = sorted(per_unit)
        out[key] = (units, [float(np.mean(per_unit[u])) for u in units])
    return out


def series_name(env, agent, lam, with_lambda):
    if with_lambda:
        return '%s-%s-lam%g' % (env, agent, lam)
    return '%s-%s' % (env, agent)


def export_curves(path, window, out_dir):
    """ Write smoothed curves; returns the list of files written """
    rows = read_metrics(path)
    series = curve_series(rows)
    written = []
    lambdas = {}
    for env, agent, lam in series:
        lambdas.setdefault((env, agent), set()).add(lam)

    charts = {}
    for (env, agent, lam), (units, values) in sorted(series.items()):
        smoothed = moving_average(values, window)
        name = series_name(env, agent, lam, len(lambdas[(env, agent)]) > 1)
        target = os.path.join(out_dir, name + '.csv')
        atomic_write(target, rows_to_csv(
            ({'unit_index': str(u), 'avg_reward': '%.6f' % v,
              'smoothed': '%.6f' % s}
             for u, v, s in zip(units, values, smoothed)), CURVE_COLUMNS))
        written.append(target)

        chart = charts.get(env)
        if chart is None:
            chart = pygal.Line(show_dots=False, x_label_rotation=75,
                               show_minor_x_labels=False)
            chart.title = '%s (moving average, window %d)' % (env, window)
            chart.x_labels = [str(u) for u in units]
            chart.x_labels_major_count = 10
            charts[env] = chart
        chart.add(name[len(env) + 1:], [round(float(s), 4) for s in smoothed])

    for env, chart in sorted(charts.items()):
        target = os.path.join(out_dir, env + '.svg')
        atomic_write(target, chart.render())
        written.append(target)
    log.info('exported %d files to %s', len(written), out_dir)
    return written
