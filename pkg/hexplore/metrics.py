from collections.abc import Iterable
import contextlib
import math
import time

import numpy as np

from hexplore import utils


# Stages of the exploration protocol, in execution order. Only the last three of the first five scale with the number
# of rows; the second threshold runs once on the count.
STAGES = ('Scientist Generation', 'Database Owner Generation', 'Private Function & Packing', 'Half-BTS',
          'Private Threshold 1', 'Private Threshold 2')
ROW_STAGES = ('Private Function & Packing', 'Half-BTS', 'Private Threshold 1')


class StatefulMetric(object):
    r"""Abstract class for accumulating information and calculating a result using current stored data.

    Three abstract methods must be implemented so that a metric can be calculated in an online fashion.
        * :func:`reset_state`
        * :func:`accumulate`
        * :func:`result`

    Parameters
    ----------
    hidden : bool
        Whether to hide the metric when being summarised by :class:`Handler`.
    """
    def __init__(self, hidden=False):
        super(StatefulMetric, self).__init__()

        self._hidden = hidden
        self.hidden = True

    def reset_state(self, *args):
        r"""Creates any stateful variables and sets their initial values."""
        self.hidden = True

    def accumulate(self, *args, **kwargs):
        r"""Accumulates values into the stateful variables."""
        self.hidden = self._hidden

    def result(self, *args):
        r"""Calculates the current result using the stateful variables."""
        raise NotImplementedError

    def result_as_json(self, *args):
        r"""Arrays are converted to lists so they can be saved as JSON."""
        value = self.result(*args)
        if isinstance(value, np.ndarray):
            value = value.tolist()

        return value

    def __str__(self):
        return utils.format_float_array(self.result())


class Handler(StatefulMetric):
    r"""Container for running a set of metrics.

    Parameters
    ----------
    metrics : dict[str, StatefulMetric]
        Name of metrics and StatefulMetric instances that will be assigned to all metric collections.

    Attributes
    ----------
    collections : dict[str, dict[str, StatefulMetric]]
        Multiple collections, each containing a map of metrics. Metrics can be overlapping between collections, e.g.
        one collection per party of the protocol.
    """
    def __init__(self, **metrics):
        super(Handler, self).__init__(hidden=False)

        self.collections = {'all': metrics}

        # This is an alias for all metrics, i.e. self.collections['all']
        self.metrics = self.collections['all']

    def __getitem__(self, name):
        r"""Gets a collection of metrics (a dictionary) by name."""
        if name in self.collections:
            return self.collections[name]
        else:
            raise ValueError("No collection found by the name {}".format(name))

    def add_metrics(self, collections=('all',), **kwargs):
        r"""Updates the given collections with all names and metrics in `kwargs`.

        The new metrics will also be added to `self.metrics`, even if no collections are specified.

        Parameters
        ----------
        collections : str or list[str]
            Name(s) of collections to update with the given metrics.
        kwargs : dict[str, StatefulMetric]
            Name of metrics and :class:`~StatefulMetric` instances to be added.
        """
        if not isinstance(collections, Iterable) or isinstance(collections, str):
            collections = [collections]

        if 'all' in collections:
            collections = self.collections.keys()

        for collection_name in collections:
            self.collections.setdefault(collection_name, {}).update(kwargs)

        self.metrics.update(kwargs)

    def reset_state(self, collection='all', *args):
        for metric_name, metric in self[collection].items():
            metric.reset_state()

    def accumulate(self, collection='all', **kwargs):
        r"""Accumulates to all metrics in kwargs.

        Parameters
        ----------
        collection : str
            Metrics in this collection will be updated.
        kwargs : dict[str, tuple]
            Names of metrics, and inputs to each metric's accumulate function.
        """
        for metric_name, inputs in kwargs.items():
            # Allow multiple inputs to be specified (or one).
            inputs = utils.listify(inputs)

            # If a kwargs dict is specified for this metric.
            if isinstance(inputs[-1], dict):
                inputs, kwinputs = inputs[:-1], inputs[-1]
            else:
                kwinputs = dict()

            self[collection][metric_name].accumulate(*inputs, **kwinputs)

    def result(self, collection='all', *args):
        r"""Gets the result for all metrics in the given collection."""
        results = {}
        for metric_name, metric in self[collection].items():
            results[metric_name] = metric.result(*args)

        return results

    def results_as_json_dict(self, collection='all', prefix=''):
        r"""Gets the result (in a JSON friendly format) for all metrics in the given collection."""
        d = {}
        for name, metric in self[collection].items():
            if not metric.hidden:
                d[prefix + name] = metric.result_as_json()

        return d

    def results_as_str_dict(self, collection='all', prefix=''):
        r"""Gets the result (as a dictionary of strings) for all metrics in the given collection."""
        d = {}
        for name, metric in self[collection].items():
            if not metric.hidden:
                d[prefix + name] = str(metric)

        return d

    def __str__(self):
        r"""Gets the result for all metrics in the given collection, formats this as a single string."""
        d = self.results_as_str_dict('all')
        s = ['{} = {}'.format(name, value) for name, value in d.items()]
        return ' | '.join(s)


class StageTimer(StatefulMetric):
    r"""Accumulates wall-clock time per protocol stage.

    Attributes
    ----------
    totals : dict[str, float]
        Seconds spent in each stage, in the order stages were first entered.
    calls : dict[str, int]
    """
    def __init__(self, hidden=False):
        super(StageTimer, self).__init__(hidden=hidden)
        self.reset_state()

    def reset_state(self, *args):
        StatefulMetric.reset_state(self)
        self.totals = {}
        self.calls = {}

    def accumulate(self, stage, seconds):
        StatefulMetric.accumulate(self)
        self.totals[stage] = self.totals.get(stage, 0.) + seconds
        self.calls[stage] = self.calls.get(stage, 0) + 1

    @contextlib.contextmanager
    def time(self, stage):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.accumulate(stage, time.perf_counter() - start)

    def result(self, *args):
        return dict(self.totals)

    def __str__(self):
        return ', '.join('{} {:.2f}s'.format(stage, seconds) for stage, seconds in self.totals.items())


class Precision(StatefulMetric):
    r"""Bits of precision :math:`-\log_2 \max |x - \hat{x}|` over all accumulated pairs.

    Attributes
    ----------
    max_error : float
    """
    def __init__(self, hidden=False):
        super(Precision, self).__init__(hidden=hidden)
        self.reset_state()

    def reset_state(self, *args):
        StatefulMetric.reset_state(self)
        self.max_error = 0.
        self.count = 0

    def accumulate(self, values, expected):
        StatefulMetric.accumulate(self)
        errors = np.abs(np.asarray(values) - np.asarray(expected))
        self.max_error = max(self.max_error, float(np.max(errors)))
        self.count += errors.size

    def result(self, *args):
        return math.inf if self.max_error == 0 else -math.log2(self.max_error)

    def __str__(self):
        return '{:.2f} bits'.format(self.result())


class BenchReport(object):
    r"""Per-stage timings of one exploration, amortized over the rows.

    Parameters
    ----------
    timings : dict[str, float]
        Seconds per stage.
    rows : int
        Number of database rows p.
    key_sizes : dict[str, int], optional
        Bytes per key component.
    counts : dict[str, int], optional
        Ciphertext counts, e.g. repacked ciphertexts and Half-BTS calls.

    Attributes
    ----------
    amortized : float
        Seconds per row over :data:`ROW_STAGES`; generation stages and the final threshold are excluded.
    """
    def __init__(self, timings, rows, key_sizes=None, counts=None):
        self.timings = dict(timings)
        self.rows = rows
        self.key_sizes = dict(key_sizes or {})
        self.counts = dict(counts or {})

    @property
    def total(self):
        return sum(self.timings.values())

    @property
    def amortized(self):
        return sum(self.timings.get(stage, 0.) for stage in ROW_STAGES) / self.rows

    def stage_rows(self):
        r"""(stage, seconds, seconds per row) for every timed stage, in protocol order."""
        order = [s for s in STAGES if s in self.timings] + [s for s in self.timings if s not in STAGES]
        return [(stage, self.timings[stage], self.timings[stage] / self.rows) for stage in order]

    def as_table(self):
        r"""Aligned text table: stage, total seconds, amortized time per row."""
        width = max([len(s) for s in self.timings] + [len('Operation')])
        lines = ['{:<{w}}  {:>12}  {:>14}'.format('Operation', 'Total [s]', 'Amortized', w=width)]
        for stage, seconds, per_row in self.stage_rows():
            lines.append('{:<{w}}  {:>12.3f}  {:>11.3f} ms'.format(stage, seconds, 1e3 * per_row, w=width))
        lines.append('{:<{w}}  {:>12.3f}  {:>11.3f} ms'.format('Total', self.total, 1e3 * self.amortized, w=width))
        return '\n'.join(lines)

    def as_key_values(self):
        r"""Machine-readable `key=value` lines."""
        lines = ['rows={}'.format(self.rows)]
        for stage, seconds, _ in self.stage_rows():
            lines.append('time.{}={:.6f}'.format(_slug(stage), seconds))
        lines.append('time.total={:.6f}'.format(self.total))
        lines.append('amortized_ms_per_row={:.6f}'.format(1e3 * self.amortized))
        lines.extend('size.{}={}'.format(_slug(name), size) for name, size in self.key_sizes.items())
        lines.extend('count.{}={}'.format(_slug(name), count) for name, count in self.counts.items())
        return '\n'.join(lines)

    @classmethod
    def parse_key_values(cls, text):
        r"""Reads back the timings (by slug), rows and amortized figure of :meth:`as_key_values`."""
        values = dict(line.split('=', 1) for line in text.strip().splitlines())
        timings = {k[len('time.'):]: float(v) for k, v in values.items() if k.startswith('time.') and k != 'time.total'}
        return int(values['rows']), timings, float(values['amortized_ms_per_row'])

    def write_tensorboard(self, writer, step=0):
        r"""Logs stage timings and the amortized figure as scalars to a `tensorboardX.SummaryWriter`."""
        for stage, seconds, _ in self.stage_rows():
            writer.add_scalar('time/{}'.format(_slug(stage)), seconds, global_step=step)
        writer.add_scalar('time/amortized_ms_per_row', 1e3 * self.amortized, global_step=step)


def _slug(name):
    return ''.join(c if c.isalnum() else '_' for c in name.lower()).strip('_').replace('__', '_').replace('__', '_')
